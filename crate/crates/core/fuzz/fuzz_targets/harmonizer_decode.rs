#![no_main]

use fstg_core::freq::HarmonizerModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = HarmonizerModel::decode(data) {
        let _ = HarmonizerModel::decode(&m.encode()).expect("roundtrip");
    }
});
