#![no_main]

use clpm::events::{read_nodes_csv, write_nodes_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = read_nodes_csv(data) {
        let mut buf = Vec::new();
        write_nodes_csv(&labels, &mut buf).unwrap();
        assert_eq!(read_nodes_csv(buf.as_slice()).unwrap(), labels);
    }
});
