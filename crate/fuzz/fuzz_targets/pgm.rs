#![no_main]

use libfuzzer_sys::fuzz_target;
use salcnn::io::{decode_pgm, encode_pgm};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_pgm(data) {
        assert_eq!(img.pixels.len(), img.width * img.height);
        assert_eq!(decode_pgm(&encode_pgm(&img)).expect("encoded image decodes"), img);
    }
});
