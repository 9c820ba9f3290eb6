#![no_main]

use clpm::events::{parse_events, ParseOptions, TimeRange};
use libfuzzer_sys::fuzz_target;

// The first byte picks the options; the rest is the file.
fuzz_target!(|data: &[u8]| {
    let Some((&flags, body)) = data.split_first() else {
        return;
    };
    let opts = ParseOptions {
        directed: flags & 1 != 0,
        time_range: (flags & 2 != 0).then_some(TimeRange { t_min: 0.0, t_max: 100.0 }),
        labels: None,
    };
    if let Ok(parsed) = parse_events(body, &opts) {
        let ev = parsed.events;
        assert!(!ev.is_empty());
        let n = ev.num_nodes();
        for e in ev.events() {
            assert!((0.0..=1.0).contains(&e.time));
            assert!(e.source < n && e.dest < n && e.source != e.dest);
            assert!(opts.directed || e.source < e.dest);
        }
        assert!(ev.events().windows(2).all(|w| w[0].time <= w[1].time));
    }
});
