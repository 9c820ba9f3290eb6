#![no_main]

use clpm::io::read_embeddings_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_embeddings_csv(data) {
        if let Some(first) = rows.first() {
            assert!(rows.iter().all(|r| r.mu.len() == first.mu.len()));
        }
    }
});
