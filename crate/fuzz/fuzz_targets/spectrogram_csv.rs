#![no_main]

use libfuzzer_sys::fuzz_target;
use salcnn::io::{parse_spectrogram_csv, spectrogram_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = parse_spectrogram_csv(text) {
        assert_eq!(parse_spectrogram_csv(&spectrogram_csv(&s)).expect("written csv parses"), s);
    }
});
