//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::Tensor;

/// Settings for a gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference half step, in (0, 1e-3].
    pub step: f64,
    /// Pass threshold on the maximum relative error.
    pub tol: f64,
    /// Denominator floor for the relative error, so that two gradients that
    /// are both at round-off level do not register as a large relative miss.
    pub floor: f64,
    /// When set, probe at most this many randomly chosen coordinates per
    /// input tensor instead of all of them.
    pub max_coords_per_input: Option<usize>,
    pub seed: u64,
    /// For probes that report their region: how many times the step may be
    /// quartered when `x ± step` lands across a kink.
    pub kink_retries: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tol: 1e-4,
            floor: 1e-6,
            max_coords_per_input: None,
            seed: 0,
            kink_retries: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub checked: usize,
    /// Coordinates left out because every tried step crossed a kink.
    pub skipped: usize,
    /// `(input index, flat coordinate)` of the worst relative error.
    pub worst: Option<(usize, usize)>,
    pub pass: bool,
}

/// Something whose scalar output can be re-evaluated after nudging one of
/// its inputs in place.
pub trait Probe {
    fn num_inputs(&self) -> usize;
    fn input(&self, idx: usize) -> &Tensor;
    fn input_mut(&mut self, idx: usize) -> &mut Tensor;
    fn eval(&mut self) -> Result<f64>;

    /// Value plus a fingerprint of the smooth piece the point lies in, for
    /// piecewise-smooth functions (ReLU, max). Central differences are only
    /// trusted when both perturbed points share the unperturbed fingerprint.
    fn eval_with_region(&mut self) -> Result<(f64, Option<u64>)> {
        Ok((self.eval()?, None))
    }
}

/// Compares `analytic[i]` against central differences of `probe` for every
/// (or a seeded sample of every) coordinate of every input.
///
/// The probe is evaluated twice at the unperturbed point first; differing
/// values mean it is not deterministic and the check is refused.
pub fn check_probe<P: Probe>(
    probe: &mut P,
    analytic: &[Tensor],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    if !(cfg.step > 0.0 && cfg.step <= 1e-3) {
        return Err(Error::arg(format!(
            "grad_check step must lie in (0, 1e-3], got {}",
            cfg.step
        )));
    }
    if analytic.len() != probe.num_inputs() {
        return Err(Error::dim(
            "grad_check",
            format!(
                "{} analytic gradients for {} inputs",
                analytic.len(),
                probe.num_inputs()
            ),
        ));
    }
    for (i, g) in analytic.iter().enumerate() {
        probe.input(i).ensure_finite("grad_check input")?;
        if g.shape() != probe.input(i).shape() {
            return Err(Error::dim(
                "grad_check",
                format!(
                    "gradient {i} has shape {:?}, input has {:?}",
                    g.shape(),
                    probe.input(i).shape()
                ),
            ));
        }
    }
    let (base, region) = probe.eval_with_region()?;
    let (again, region_again) = probe.eval_with_region()?;
    if base.to_bits() != again.to_bits() || region != region_again {
        return Err(Error::arg(format!(
            "grad_check requires a deterministic function; two evaluations gave {base} and {again}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        checked: 0,
        skipped: 0,
        worst: None,
        pass: true,
    };
    for (i, grad) in analytic.iter().enumerate() {
        let n = grad.len();
        let coords: Vec<usize> = match cfg.max_coords_per_input {
            Some(k) if k < n => {
                let mut picked = sample(&mut rng, n, k).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..n).collect(),
        };
        for j in coords {
            let orig = probe.input(i).data()[j];
            let mut step = cfg.step;
            let mut numeric = None;
            for _ in 0..=cfg.kink_retries {
                probe.input_mut(i).data_mut()[j] = orig + step;
                let (plus, rp) = probe.eval_with_region()?;
                probe.input_mut(i).data_mut()[j] = orig - step;
                let (minus, rm) = probe.eval_with_region()?;
                probe.input_mut(i).data_mut()[j] = orig;
                if rp == region && rm == region {
                    numeric = Some((plus - minus) / (2.0 * step));
                    break;
                }
                step /= 4.0;
            }
            let Some(numeric) = numeric else {
                report.skipped += 1;
                continue;
            };
            let a = grad.data()[j];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(cfg.floor);
            report.checked += 1;
            report.max_abs_err = report.max_abs_err.max(abs);
            if rel > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = rel.max(report.max_rel_err);
                report.worst = Some((i, j));
            }
        }
    }
    report.pass = report.max_rel_err < cfg.tol && report.checked > 0;
    Ok(report)
}

struct FnProbe<F> {
    inputs: Vec<Tensor>,
    f: F,
}

impl<F: FnMut(&[Tensor]) -> f64> Probe for FnProbe<F> {
    fn num_inputs(&self) -> usize {
        self.inputs.len()
    }
    fn input(&self, idx: usize) -> &Tensor {
        &self.inputs[idx]
    }
    fn input_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.inputs[idx]
    }
    fn eval(&mut self) -> Result<f64> {
        Ok((self.f)(&self.inputs))
    }
}

/// Closure form of [`check_probe`]: `f` maps the inputs to a scalar and
/// `analytic` holds its claimed gradient with respect to each input.
pub fn grad_check<F>(
    f: F,
    inputs: &[Tensor],
    analytic: &[Tensor],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Tensor]) -> f64,
{
    let mut probe = FnProbe {
        inputs: inputs.to_vec(),
        f,
    };
    check_probe(&mut probe, analytic, cfg)
}
