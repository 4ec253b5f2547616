#![no_main]

use libfuzzer_sys::fuzz_target;
use planar_handeye::io::{parse_odometry, write_odometry};

fuzz_target!(|data: &str| {
    if let Ok(poses) = parse_odometry(data) {
        assert_eq!(parse_odometry(&write_odometry(&poses)).unwrap(), poses);
    }
});
