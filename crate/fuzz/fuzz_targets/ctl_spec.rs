#![no_main]

use libfuzzer_sys::fuzz_target;
use ut_core::docs::{parse_ctl_spec, DocError};

fuzz_target!(|s: &str| {
    if let Ok(l) = parse_ctl_spec(s) {
        let _ = l.spec.build(|_| Err(DocError::Invalid("no files".into())));
    }
});
