#![no_main]

use fstg_core::volume::nifti;
use fstg_core::Plane;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(h) = nifti::parse_header(data) {
        let _ = nifti::decode_payload(&h, data.get(352..).unwrap_or_default(), Plane::Axial);
    }
    if let Ok(v) = nifti::decode(data, Plane::Sagittal) {
        // float64 payloads may hold values beyond the float32 range
        if let Ok(bytes) = nifti::encode(&v) {
            let again = nifti::decode(&bytes, Plane::Sagittal).expect("encoded volumes decode");
            assert_eq!(again.dims(), v.dims());
        }
    }
});
