//! Export formats: binary PGM (P5) images and CSV maps, plus their parsers.
//!
//! Every writer here has a matching parser so that emitted artefacts can be
//! read back and checked.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dsp::Spectrogram;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// 8-bit greyscale raster, row-major from the top row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Maps a value in [0, 1] to 0..=255, rounding halves up. Values outside
/// the unit interval are clamped.
pub fn intensity(v: f64) -> u8 {
    let scaled = (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor();
    scaled as u8
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Parses a binary P5 PGM with maxval ≤ 255. Header comments (`#`) are
/// accepted; trailing bytes after the raster are not.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let bad = |detail: &str| Error::format("pgm", detail);
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(bad("header ends early")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            pos += 1;
        }
        tokens.push(&bytes[start..pos]);
    }
    // exactly one whitespace byte separates maxval from the raster
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(bad("missing whitespace after maxval"));
    }
    pos += 1;
    if tokens[0] != b"P5" {
        return Err(bad("magic is not P5"));
    }
    let num = |t: &[u8], what: &str| -> Result<usize> {
        std::str::from_utf8(t)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(&format!("invalid {what}")))
    };
    let width = num(tokens[1], "width")?;
    let height = num(tokens[2], "height")?;
    let maxval = num(tokens[3], "maxval")?;
    if width == 0 || height == 0 {
        return Err(bad("zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval must lie in 1..=255"));
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| bad("image dimensions overflow"))?;
    let raster = &bytes[pos..];
    if raster.len() != expected {
        return Err(bad(&format!(
            "raster has {} bytes, header promises {expected}",
            raster.len()
        )));
    }
    if let Some(&p) = raster.iter().find(|&&p| p as usize > maxval) {
        return Err(bad(&format!("pixel {p} exceeds maxval {maxval}")));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: raster.to_vec(),
    })
}

/// Lays a `[frames, bins]` map out as an image with time running left to
/// right and frequency bottom to top, so the top row is the highest bin.
fn time_freq_image(frames: usize, bins: usize, values: &[f64], px: impl Fn(f64) -> u8) -> GrayImage {
    let mut pixels = Vec::with_capacity(frames * bins);
    for bin in (0..bins).rev() {
        pixels.extend((0..frames).map(|f| px(values[f * bins + bin])));
    }
    GrayImage {
        width: frames,
        height: bins,
        pixels,
    }
}

/// Values are scaled linearly from the map's own min..max onto 0..255. A
/// constant map renders black.
pub fn spectrogram_image(s: &Spectrogram) -> GrayImage {
    let data = s.magnitudes().data();
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    time_freq_image(s.frames(), s.bins(), data, |v| {
        if span > 0.0 {
            intensity((v - lo) / span)
        } else {
            0
        }
    })
}

/// Renders a `[frames, bins]` (or `[1, frames, bins]`) map of values in
/// [0, 1] with `intensity = value·255`, oriented like
/// [`spectrogram_image`].
pub fn unit_map_image(map: &Tensor) -> Result<GrayImage> {
    let (frames, bins) = match map.shape() {
        [r, c] | [1, r, c] => (*r, *c),
        other => {
            return Err(Error::dim(
                "unit_map_image",
                format!("expected a 2-D map, got {other:?}"),
            ))
        }
    };
    Ok(time_freq_image(frames, bins, map.data(), intensity))
}

/// CSV with a header row `time_s,<bin frequencies…>` and one row per frame.
pub fn spectrogram_csv(s: &Spectrogram) -> String {
    let mut out = String::from("time_s");
    for f in s.bin_freqs_hz() {
        let _ = write!(out, ",{f}");
    }
    out.push('\n');
    for (row, t) in s
        .magnitudes()
        .data()
        .chunks_exact(s.bins())
        .zip(s.frame_times_s())
    {
        let _ = write!(out, "{t}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn parse_f64(cell: &str, source: &str, row: usize, col: usize) -> Result<f64> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::format(
            source,
            format!("row {row}, column {col}: `{}` is not a finite number", cell.trim()),
        )),
    }
}

/// Inverse of [`spectrogram_csv`].
pub fn parse_spectrogram_csv(text: &str) -> Result<Spectrogram> {
    const SRC: &str = "spectrogram csv";
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::format(SRC, "empty file"))?;
    let mut cells = header.split(',');
    if cells.next().map(str::trim) != Some("time_s") {
        return Err(Error::format(SRC, "header must start with `time_s`"));
    }
    let freqs = cells
        .enumerate()
        .map(|(c, v)| parse_f64(v, SRC, 1, c + 2))
        .collect::<Result<Vec<_>>>()?;
    if freqs.is_empty() {
        return Err(Error::format(SRC, "header lists no frequency bins"));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (r, line) in lines.enumerate() {
        let row = r + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != freqs.len() + 1 {
            return Err(Error::format(
                SRC,
                format!("row {row} has {} cells, expected {}", cells.len(), freqs.len() + 1),
            ));
        }
        times.push(parse_f64(cells[0], SRC, row, 1)?);
        for (c, cell) in cells[1..].iter().enumerate() {
            values.push(parse_f64(cell, SRC, row, c + 2)?);
        }
    }
    if times.is_empty() {
        return Err(Error::format(SRC, "no data rows"));
    }
    let mags = Tensor::from_vec(&[times.len(), freqs.len()], values)?;
    Spectrogram::new(mags, times, freqs)
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
