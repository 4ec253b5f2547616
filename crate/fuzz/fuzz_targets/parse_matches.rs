#![no_main]

use libfuzzer_sys::fuzz_target;
use planar_handeye::io::{parse_matches, write_matches};

fuzz_target!(|data: &str| {
    if let Ok(matches) = parse_matches(data) {
        assert_eq!(parse_matches(&write_matches(&matches)).unwrap(), matches);
    }
});
