#![no_main]

use libfuzzer_sys::fuzz_target;
use ut_core::sim::Trace;

fuzz_target!(|s: &str| {
    if let Ok(t) = Trace::from_csv(s) {
        let once = t.to_csv();
        let again = Trace::from_csv(&once).expect("written trace reads back");
        assert_eq!(once, again.to_csv());
    }
});
