#![no_main]

use fstg_cli::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::parse(text) {
            assert_eq!(
                ExperimentConfig::parse(&cfg.canonical_json()).expect("canonical form parses"),
                cfg
            );
        }
    }
});
