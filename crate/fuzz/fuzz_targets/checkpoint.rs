#![no_main]

use libfuzzer_sys::fuzz_target;
use salcnn::model::{from_bytes, to_bytes};

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = from_bytes(data) {
        // unused norm-stat bytes are not canonical, so compare decoded values
        let bytes = to_bytes(&params).expect("decoded model encodes");
        assert_eq!(from_bytes(&bytes).expect("encoded model decodes"), params);
    }
});
