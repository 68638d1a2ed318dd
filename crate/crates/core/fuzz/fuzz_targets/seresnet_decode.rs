#![no_main]

use fstg_core::nn::persist::{decode_conv_stack, decode_seresnet, encode_seresnet};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_conv_stack(data);
    if let Ok(net) = decode_seresnet(data) {
        let _ = decode_seresnet(&encode_seresnet(&net)).expect("roundtrip");
    }
});
