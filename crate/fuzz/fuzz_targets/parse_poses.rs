#![no_main]

use libfuzzer_sys::fuzz_target;
use planar_handeye::io::{parse_poses, write_poses};

fuzz_target!(|data: &str| {
    if let Ok(poses) = parse_poses(data) {
        let again = parse_poses(&write_poses(&poses)).expect("written poses parse");
        assert_eq!(again.len(), poses.len());
    }
});
