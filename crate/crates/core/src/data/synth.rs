//! Synthetic run-to-failure bearings. Energy migrates from a set of high
//! tones to a set of low tones as the bearing ages, on a power-law schedule.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::{BearingId, BearingRun, Condition, Recording, Timestamp, RECORDING_LEN, SAMPLE_RATE_HZ};

/// Seconds between consecutive captures.
pub const CAPTURE_INTERVAL_S: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthProfile {
    pub life_n: usize,
    /// Tones that grow with wear.
    pub low_freqs_hz: Vec<f64>,
    /// Tones that fade with wear.
    pub high_freqs_hz: Vec<f64>,
    pub amplitude: f64,
    pub noise_sigma: f64,
    pub degradation_exponent: f64,
    /// Draw an independent phase per tone and recording; otherwise every
    /// tone starts at phase 0.
    pub random_phase: bool,
}

impl Default for SynthProfile {
    fn default() -> Self {
        Self {
            life_n: 120,
            low_freqs_hz: vec![390.0, 870.0],
            high_freqs_hz: vec![4200.0, 5550.0],
            amplitude: 1.0,
            noise_sigma: 0.1,
            degradation_exponent: 2.0,
            random_phase: true,
        }
    }
}

impl SynthProfile {
    pub fn validate(&self) -> Result<()> {
        if self.life_n < 2 {
            return Err(Error::arg(format!("life_n must be at least 2, got {}", self.life_n)));
        }
        if self.low_freqs_hz.is_empty() && self.high_freqs_hz.is_empty() {
            return Err(Error::arg("profile needs at least one tone"));
        }
        let nyquist = SAMPLE_RATE_HZ / 2.0;
        for &f in self.low_freqs_hz.iter().chain(&self.high_freqs_hz) {
            if !(f > 0.0 && f < nyquist) {
                return Err(Error::arg(format!("tone {f} Hz outside (0, {nyquist})")));
            }
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::arg(format!("amplitude must be positive, got {}", self.amplitude)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::arg(format!("noise_sigma must be ≥ 0, got {}", self.noise_sigma)));
        }
        if !(self.degradation_exponent.is_finite() && self.degradation_exponent > 0.0) {
            return Err(Error::arg(format!(
                "degradation_exponent must be positive, got {}",
                self.degradation_exponent
            )));
        }
        Ok(())
    }

    /// Wear fraction of recording `k`: `(k/(n−1))^p`, 0 at the first
    /// capture and 1 at the last.
    pub fn wear(&self, k: usize) -> f64 {
        (k as f64 / (self.life_n - 1) as f64).powf(self.degradation_exponent)
    }
}

pub fn synth_bearing(
    id: BearingId,
    condition: Option<Condition>,
    profile: &SynthProfile,
    seed: u64,
) -> Result<BearingRun> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, profile.noise_sigma).map_err(|e| Error::arg(e.to_string()))?;
    let start = Timestamp { hour: 9, minute: 0, second: 0, microsecond: 0 }.as_micros();
    let mut recordings = Vec::with_capacity(profile.life_n);
    for k in 0..profile.life_n {
        let wear = profile.wear(k);
        let tones: Vec<(f64, f64, f64)> = profile
            .low_freqs_hz
            .iter()
            .map(|&f| (f, profile.amplitude * wear))
            .chain(profile.high_freqs_hz.iter().map(|&f| (f, profile.amplitude * (1.0 - wear))))
            .map(|(f, a)| {
                let phase = if profile.random_phase { rng.gen_range(0.0..TAU) } else { 0.0 };
                (f, a, phase)
            })
            .collect();
        let samples = (0..RECORDING_LEN)
            .map(|i| {
                let t = i as f64 / SAMPLE_RATE_HZ;
                let clean: f64 = tones.iter().map(|&(f, a, ph)| a * (TAU * f * t + ph).sin()).sum();
                if profile.noise_sigma > 0.0 {
                    clean + noise.sample(&mut rng)
                } else {
                    clean
                }
            })
            .collect();
        let ts = Timestamp::from_micros(start + k as u64 * CAPTURE_INTERVAL_S * 1_000_000);
        recordings.push(Recording::new(Tensor::new(&[RECORDING_LEN], samples)?, ts)?);
    }
    Ok(BearingRun { id, condition, recordings })
}

/// Per-condition bearing counts of the default fleet.
pub const FLEET_LAYOUT: [(u32, usize); 3] = [(1, 3), (2, 3), (3, 2)];

/// Profile for one fleet member: tones scale with shaft speed, and the
/// amplitude and wear exponent vary per bearing.
pub fn fleet_profile(condition: &Condition, life_n: usize, rng: &mut impl Rng) -> SynthProfile {
    let shaft_hz = condition.speed_rpm / 60.0;
    SynthProfile {
        life_n,
        low_freqs_hz: vec![13.0 * shaft_hz, 29.0 * shaft_hz],
        high_freqs_hz: vec![140.0 * shaft_hz, 185.0 * shaft_hz],
        amplitude: rng.gen_range(0.9..1.1),
        noise_sigma: 0.1,
        degradation_exponent: rng.gen_range(1.5..2.5),
        random_phase: true,
    }
}

/// Eight bearings over the three rig conditions (3/3/2), `life_n`
/// recordings each, fully determined by `seed`.
pub fn synth_fleet(life_n: usize, seed: u64) -> Result<Vec<BearingRun>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fleet = Vec::new();
    for (cond_idx, count) in FLEET_LAYOUT {
        let condition = Condition::standard(cond_idx).expect("standard condition");
        for j in 1..=count {
            let profile = fleet_profile(&condition, life_n, &mut rng);
            let bearing_seed = rng.gen();
            fleet.push(synth_bearing(
                BearingId::new(format!("{cond_idx}-{j}")),
                Some(condition),
                &profile,
                bearing_seed,
            )?);
        }
    }
    Ok(fleet)
}
