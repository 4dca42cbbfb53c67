use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{read_text, write_file};
use crate::numerics::Tensor;

/// Samples per capture: 0.1 s at 25.6 kHz.
pub const RECORDING_LEN: usize = 2560;
pub const SAMPLE_RATE_HZ: f64 = 25_600.0;

/// Time of day at which a capture starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Timestamp {
    pub hour: u32,
    pub minute: u32,
    pub second: u32,
    pub microsecond: u32,
}

const DAY_US: u64 = 86_400_000_000;

impl Timestamp {
    pub fn from_micros(total: u64) -> Self {
        let total = total % DAY_US;
        let secs = total / 1_000_000;
        Self {
            hour: (secs / 3600) as u32,
            minute: (secs / 60 % 60) as u32,
            second: (secs % 60) as u32,
            microsecond: (total % 1_000_000) as u32,
        }
    }

    pub fn as_micros(&self) -> u64 {
        ((self.hour as u64 * 60 + self.minute as u64) * 60 + self.second as u64) * 1_000_000
            + self.microsecond as u64
    }

    /// Seconds from `origin` to `self`, wrapping once past midnight.
    pub fn seconds_since(&self, origin: &Timestamp) -> f64 {
        let (a, b) = (self.as_micros(), origin.as_micros());
        let d = if a >= b { a - b } else { a + DAY_US - b };
        d as f64 / 1e6
    }
}

/// One vibration capture, horizontal channel only.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub samples: Tensor,
    pub timestamp: Timestamp,
}

impl Recording {
    pub fn new(samples: Tensor, timestamp: Timestamp) -> Result<Self> {
        if samples.shape() != [RECORDING_LEN] {
            return Err(Error::dim(
                "recording",
                format!("expected {RECORDING_LEN} samples, got {:?}", samples.shape()),
            ));
        }
        Ok(Self { samples, timestamp })
    }
}

fn parse_time_field(cell: &str, row: usize, col: usize, name: &str, limit: u32) -> Result<u32> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| Error::format(name, format!("row {row}, column {col}: cannot parse {cell:?}")))?;
    if v.fract() != 0.0 || v < 0.0 || v >= limit as f64 {
        return Err(Error::format(
            name,
            format!("row {row}, column {col}: time field {cell:?} out of range"),
        ));
    }
    Ok(v as u32)
}

/// Parses one capture from text. Columns are hour, minute, second,
/// microsecond, horizontal and (optionally) vertical acceleration; extra
/// columns are ignored. `;` is accepted as separator on lines without a
/// comma. `name` is used in error messages.
pub fn parse_acc_csv_str(text: &str, name: &str) -> Result<Recording> {
    let mut samples = Vec::with_capacity(RECORDING_LEN);
    let mut timestamp = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        rows += 1;
        let row = i + 1;
        let sep = if line.contains(',') { ',' } else { ';' };
        let cells: Vec<&str> = line.split(sep).collect();
        if cells.len() < 5 {
            return Err(Error::format(
                name,
                format!("row {row}: expected at least 5 columns, found {}", cells.len()),
            ));
        }
        if rows > RECORDING_LEN {
            // keep counting so the error reports the real size
            continue;
        }
        if timestamp.is_none() {
            timestamp = Some(Timestamp {
                hour: parse_time_field(cells[0], row, 1, name, 24)?,
                minute: parse_time_field(cells[1], row, 2, name, 60)?,
                second: parse_time_field(cells[2], row, 3, name, 60)?,
                microsecond: parse_time_field(cells[3], row, 4, name, 1_000_000)?,
            });
        }
        let v: f64 = cells[4]
            .trim()
            .parse()
            .map_err(|_| Error::format(name, format!("row {row}, column 5: cannot parse {:?}", cells[4])))?;
        if !v.is_finite() {
            return Err(Error::format(name, format!("row {row}, column 5: non-finite value {v}")));
        }
        samples.push(v);
    }
    if rows != RECORDING_LEN {
        return Err(Error::format(
            name,
            format!("expected {RECORDING_LEN} rows, found {rows}"),
        ));
    }
    Recording::new(
        Tensor::from_vec(&[RECORDING_LEN], samples)?,
        timestamp.unwrap_or_default(),
    )
}

pub fn parse_acc_csv(path: &Path) -> Result<Recording> {
    parse_acc_csv_str(&read_text(path)?, &path.display().to_string())
}

/// Text in the same layout the parser reads. Row timestamps advance by the
/// sample period; the vertical column is written as 0.
pub fn acc_csv_string(rec: &Recording) -> String {
    let mut out = String::with_capacity(RECORDING_LEN * 32);
    let start = rec.timestamp.as_micros();
    for (i, v) in rec.samples.data().iter().enumerate() {
        let t = Timestamp::from_micros(start + (i as f64 * 1e6 / SAMPLE_RATE_HZ) as u64);
        // `{}` on f64 prints the shortest string that parses back exactly
        let _ = writeln!(
            out,
            "{},{},{},{},{},0",
            t.hour, t.minute, t.second, t.microsecond, v
        );
    }
    out
}

pub fn write_acc_csv(rec: &Recording, path: &Path) -> Result<()> {
    write_file(path, acc_csv_string(rec))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Recording {
        let samples = (0..RECORDING_LEN).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        Recording::new(
            Tensor::new(&[RECORDING_LEN], samples).unwrap(),
            Timestamp { hour: 9, minute: 39, second: 39, microsecond: 65_664 },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let r = ramp();
        let back = parse_acc_csv_str(&acc_csv_string(&r), "mem").unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn short_file_names_source_and_count() {
        let text = acc_csv_string(&ramp());
        let short: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        let err = parse_acc_csv_str(&short, "acc_00007.csv").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("acc_00007.csv") && msg.contains("2559"), "{msg}");
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let mut text = acc_csv_string(&ramp());
        text = text.replacen("9,39,39,65664,", "9,39,39,65664,x", 1);
        let msg = parse_acc_csv_str(&text, "f").unwrap_err().to_string();
        assert!(msg.contains("row 1, column 5"), "{msg}");
    }

    #[test]
    fn semicolons_and_five_columns() {
        let text: String = (0..RECORDING_LEN).map(|i| format!("1;2;3;{i};0.5\n")).collect();
        let r = parse_acc_csv_str(&text, "semi").unwrap();
        assert!(r.samples.data().iter().all(|&v| v == 0.5));
        assert_eq!(r.timestamp, Timestamp { hour: 1, minute: 2, second: 3, microsecond: 0 });
        let four: String = (0..RECORDING_LEN).map(|_| "1,2,3,4\n").collect();
        assert!(parse_acc_csv_str(&four, "four").is_err());
    }

    #[test]
    fn timestamps_wrap_at_midnight() {
        let late = Timestamp { hour: 23, minute: 59, second: 59, microsecond: 0 };
        let early = Timestamp { hour: 0, minute: 0, second: 9, microsecond: 0 };
        assert_eq!(early.seconds_since(&late), 10.0);
        assert_eq!(Timestamp::from_micros(late.as_micros()), late);
    }
}
