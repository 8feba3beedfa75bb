#![no_main]

use libfuzzer_sys::fuzz_target;
use ut_core::docs::{parse_controller, write_controller};

fuzz_target!(|s: &str| {
    if let Ok(tf) = parse_controller(s) {
        let back = parse_controller(&write_controller(&tf)).expect("written controller reads back");
        assert_eq!(back, tf);
    }
});
