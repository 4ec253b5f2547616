#![no_main]

use libfuzzer_sys::fuzz_target;
use planar_handeye::io::{sweep_from_csv, sweep_to_csv};
use planar_handeye::sim::SweepAxis;

fuzz_target!(|data: &str| {
    if let Ok(table) = sweep_from_csv(data, SweepAxis::Lambda) {
        let again = sweep_from_csv(&sweep_to_csv(&table), SweepAxis::Lambda).expect("written table parses");
        assert_eq!(again.rows.len(), table.rows.len());
    }
});
