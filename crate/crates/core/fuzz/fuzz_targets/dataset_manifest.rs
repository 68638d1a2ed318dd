#![no_main]

use fstg_cli::dataset::DatasetManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = DatasetManifest::parse(data);
});
