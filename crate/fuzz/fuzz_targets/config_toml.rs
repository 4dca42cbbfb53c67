#![no_main]

use libfuzzer_sys::fuzz_target;
use salcnn::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml_str(text, "fuzz") {
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml(), "fuzz").expect("written config parses"), cfg);
    }
});
