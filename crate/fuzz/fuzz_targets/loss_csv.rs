#![no_main]

use clpm::io::{read_loss_csv, write_loss_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = read_loss_csv(data) {
        let mut buf = Vec::new();
        write_loss_csv(&trace, &mut buf).unwrap();
        let again = read_loss_csv(buf.as_slice()).unwrap();
        assert_eq!(again.len(), trace.len());
        for (a, b) in again.iter().zip(&trace) {
            assert!(a == b || (a.is_nan() && b.is_nan()));
        }
    }
});
