#![no_main]

use libfuzzer_sys::fuzz_target;
use planar_handeye::io::{report_from_json, report_to_json};

fuzz_target!(|data: &str| {
    if let Ok(report) = report_from_json(data) {
        let _ = report_from_json(&report_to_json(&report));
    }
});
