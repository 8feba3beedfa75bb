#![no_main]

use std::io::BufReader;

use libfuzzer_sys::fuzz_target;
use ut_core::wire::{decode, encode, read_frame};

fuzz_target!(|data: &[u8]| {
    let mut r = BufReader::new(data);
    while let Ok(Some(frame)) = read_frame(&mut r) {
        let line = encode(&frame);
        assert_eq!(decode(&line).expect("encoded frame decodes"), frame);
    }
});
