#![no_main]

use libfuzzer_sys::fuzz_target;
use salcnn::data::{acc_csv_string, parse_acc_csv_str};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rec) = parse_acc_csv_str(text, "fuzz") {
        let again = parse_acc_csv_str(&acc_csv_string(&rec), "fuzz").expect("written csv parses");
        assert_eq!(again, rec);
    }
});
