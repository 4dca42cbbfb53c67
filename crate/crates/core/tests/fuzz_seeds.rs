//! Replays the checked-in fuzz corpus through the same checks the fuzz
//! targets make, so a stable toolchain exercises every seed.

use std::path::PathBuf;

use salcnn::config::RunConfig;
use salcnn::data::{acc_csv_string, parse_acc_csv_str};
use salcnn::io::{decode_pgm, encode_pgm, parse_spectrogram_csv, spectrogram_csv};
use salcnn::model::{from_bytes, to_bytes};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

/// Runs `check` on every seed and returns the names that parsed.
fn replay(target: &str, mut check: impl FnMut(&[u8]) -> bool) -> Vec<String> {
    seeds(target).into_iter().filter(|(_, data)| check(data)).map(|(name, _)| name).collect()
}

#[test]
fn acc_csv_seeds() {
    let ok = replay("acc_csv", |data| {
        let Ok(text) = std::str::from_utf8(data) else { return false };
        match parse_acc_csv_str(text, "seed") {
            Ok(rec) => {
                assert_eq!(parse_acc_csv_str(&acc_csv_string(&rec), "seed").unwrap(), rec);
                true
            }
            Err(_) => false,
        }
    });
    assert_eq!(ok, ["capture", "semicolons"]);
}

#[test]
fn checkpoint_seeds() {
    let ok = replay("checkpoint", |data| match from_bytes(data) {
        Ok(params) => {
            assert_eq!(from_bytes(&to_bytes(&params).unwrap()).unwrap(), params);
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["minimal", "minimal_no_stats"]);
}

#[test]
fn pgm_seeds() {
    let ok = replay("pgm", |data| match decode_pgm(data) {
        Ok(img) => {
            assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["comment", "small"]);
}

#[test]
fn spectrogram_csv_seeds() {
    let ok = replay("spectrogram_csv", |data| {
        let Ok(text) = std::str::from_utf8(data) else { return false };
        match parse_spectrogram_csv(text) {
            Ok(s) => {
                assert_eq!(parse_spectrogram_csv(&spectrogram_csv(&s)).unwrap(), s);
                true
            }
            Err(_) => false,
        }
    });
    assert_eq!(ok, ["small"]);
}

#[test]
fn config_toml_seeds() {
    let ok = replay("config_toml", |data| {
        let Ok(text) = std::str::from_utf8(data) else { return false };
        match RunConfig::from_toml_str(text, "seed") {
            Ok(cfg) => {
                assert_eq!(RunConfig::from_toml_str(&cfg.to_toml(), "seed").unwrap(), cfg);
                true
            }
            Err(_) => false,
        }
    });
    assert_eq!(ok, ["empty", "stft", "tiny"]);
}
