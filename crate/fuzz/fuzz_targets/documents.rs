#![no_main]

use libfuzzer_sys::fuzz_target;
use ut_core::docs::{from_document, parse_plant, to_document};
use ut_core::sim::ScenarioSpec;
use ut_core::tuner::TuneConfig;

fuzz_target!(|s: &str| {
    if let Ok(p) = parse_plant(s) {
        assert_eq!(parse_plant(&to_document(&p)).ok(), Some(p));
    }
    if let Ok(c) = from_document::<TuneConfig>(s) {
        assert_eq!(from_document::<TuneConfig>(&to_document(&c)).ok(), Some(c));
    }
    let _ = from_document::<ScenarioSpec>(s);
});
