#![no_main]

use clpm::io::{model_from_json, model_to_json, write_embeddings_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(fm) = model_from_json(text) {
        // Anything accepted must survive a write and re-read unchanged.
        let json = model_to_json(&fm).expect("serialise accepted model");
        let again = model_from_json(&json).expect("re-read own output");
        assert_eq!(model_to_json(&again).unwrap(), json);
        write_embeddings_csv(&fm, std::io::sink()).unwrap();
    }
});
