#![no_main]

use fstg_core::volume::raw;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = raw::decode(data) {
        assert_eq!(raw::decode(&raw::encode(&v)).expect("roundtrip"), v);
    }
});
