use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

use super::{parse_acc_csv, write_acc_csv, Recording};

/// Shaft speed and radial load of a test rig setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub speed_rpm: f64,
    pub radial_force_n: f64,
}

impl Condition {
    /// The three settings of the run-to-failure rig, indexed from 1.
    pub fn standard(index: u32) -> Option<Self> {
        let (speed_rpm, radial_force_n) = match index {
            1 => (1800.0, 4000.0),
            2 => (1650.0, 4200.0),
            3 => (1500.0, 5000.0),
            _ => return None,
        };
        Some(Self { speed_rpm, radial_force_n })
    }
}

/// Condition-index pair such as `1-3`; arbitrary text when a directory
/// name does not follow the `BearingX_Y` convention.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BearingId(String);

impl BearingId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Accepts `Bearing1_1`, `Bearing1-1` or `1-1`.
    pub fn from_dir_name(name: &str) -> Self {
        let core = name.strip_prefix("Bearing").unwrap_or(name);
        let norm = core.replace('_', "-");
        match norm.split_once('-') {
            Some((a, b)) if a.parse::<u32>().is_ok() && b.parse::<u32>().is_ok() => Self(norm),
            _ => Self(name.to_string()),
        }
    }

    /// Operating condition implied by the leading index, if any.
    pub fn condition(&self) -> Option<Condition> {
        let (a, _) = self.0.split_once('-')?;
        Condition::standard(a.parse().ok()?)
    }
}

impl fmt::Display for BearingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A bearing's full life, one recording per capture in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct BearingRun {
    pub id: BearingId,
    pub condition: Option<Condition>,
    pub recordings: Vec<Recording>,
}

impl BearingRun {
    pub fn total_life_index(&self) -> usize {
        self.recordings.len()
    }

    /// Seconds since the first capture for each recording.
    pub fn elapsed_s(&self) -> Vec<f64> {
        let Some(first) = self.recordings.first() else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(self.recordings.len());
        let mut offset = 0.0;
        let mut prev = first.timestamp;
        for r in &self.recordings {
            offset += r.timestamp.seconds_since(&prev);
            prev = r.timestamp;
            out.push(offset);
        }
        out
    }
}

pub fn acc_file_name(index: usize) -> String {
    format!("acc_{index:05}.csv")
}

fn acc_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("acc_")?.strip_suffix(".csv")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Indices of the `acc_XXXXX.csv` files in `dir`, sorted, checked to run
/// 1, 2, … without gaps. Other files are ignored.
pub fn acc_indices(dir: &Path) -> Result<Vec<usize>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indices = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(i) = entry.file_name().to_str().and_then(acc_index) {
            indices.push(i);
        }
    }
    indices.sort_unstable();
    check_sequence(&indices, &dir.display().to_string())?;
    Ok(indices)
}

fn check_sequence(indices: &[usize], name: &str) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::format(name, "no acc_XXXXX.csv files"));
    }
    let mut missing = Vec::new();
    let mut expect = 1;
    for &i in indices {
        if i < expect {
            return Err(Error::format(name, format!("duplicate index {i}")));
        }
        missing.extend(expect..i);
        expect = i + 1;
    }
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().take(10).map(|&i| acc_file_name(i)).collect();
        let more = if missing.len() > 10 { format!(" and {} more", missing.len() - 10) } else { String::new() };
        return Err(Error::format(
            name,
            format!("gap in recording sequence: missing {}{more}", list.join(", ")),
        ));
    }
    Ok(())
}

/// Reads every recording of one bearing directory. Order comes from the
/// file indices, never from the directory listing.
pub fn load_bearing(dir: &Path) -> Result<BearingRun> {
    let indices = acc_indices(dir)?;
    let recordings = indices
        .iter()
        .map(|&i| parse_acc_csv(&dir.join(acc_file_name(i))))
        .collect::<Result<Vec<_>>>()?;
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let id = BearingId::from_dir_name(name);
    Ok(BearingRun {
        condition: id.condition(),
        id,
        recordings,
    })
}

/// Writes `acc_00001.csv`, … into `dir`, creating it if needed.
pub fn write_bearing(run: &BearingRun, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, r) in run.recordings.iter().enumerate() {
        write_acc_csv(r, &dir.join(acc_file_name(i + 1)))?;
    }
    Ok(())
}

/// Subdirectories of `root` holding at least one acc file, sorted by name.
pub fn bearing_dirs(root: &Path) -> Result<Vec<std::path::PathBuf>> {
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if !path.is_dir() {
            continue;
        }
        let has_acc = std::fs::read_dir(&path)
            .map_err(|e| Error::io(&path, e))?
            .filter_map(|e| e.ok())
            .any(|e| e.file_name().to_str().and_then(acc_index).is_some());
        if has_acc {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::format(
            root.display().to_string(),
            "no bearing directories with acc_XXXXX.csv files",
        ));
    }
    Ok(dirs)
}
