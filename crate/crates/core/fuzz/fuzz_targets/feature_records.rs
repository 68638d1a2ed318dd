#![no_main]

use fstg_core::features::{format_feature_records, parse_feature_records};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(stacks) = parse_feature_records(text) {
            let again = parse_feature_records(&format_feature_records(&stacks).expect("parsed records format"))
                .expect("formatted records parse");
            assert_eq!(again.len(), stacks.len());
        }
    }
});
