use crate::data::{compute_norm_stats, samples_from_features, BearingFeatures, BearingId, Sample};
use crate::dsp::NormStats;
use crate::error::{Error, Result};
use crate::model::{build, ModelConfig};

use super::{mae, predict_pct, train, TrainConfig};

/// Something that can be fit on one split and predict another. Predictions
/// are in percent of life, one per test sample.
pub trait Estimator {
    fn fit_predict(
        &mut self,
        fold: &BearingId,
        train: &[Sample],
        test: &[Sample],
        stats: &NormStats,
    ) -> Result<Vec<f64>>;
}

/// The full network, trained from scratch for every fold.
#[derive(Debug, Clone)]
pub struct NetworkEstimator {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Called after every epoch with the fold, epoch and mean loss.
    pub verbose: bool,
}

impl Estimator for NetworkEstimator {
    fn fit_predict(
        &mut self,
        fold: &BearingId,
        train_set: &[Sample],
        test: &[Sample],
        stats: &NormStats,
    ) -> Result<Vec<f64>> {
        let mut params = build(&self.model, self.train.seed)?;
        params.norm_stats = Some(*stats);
        let history = train(&mut params, train_set, &self.train)?;
        if self.verbose {
            eprintln!(
                "fold {fold}: loss {:.4} -> {:.4} over {} epochs",
                history.epoch_loss[0],
                history.epoch_loss[history.epoch_loss.len() - 1],
                history.epoch_loss.len()
            );
        }
        test.iter().map(|s| predict_pct(&params, &s.window)).collect()
    }
}

/// Returns the true labels; used to test the evaluation plumbing.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectEstimator;

impl Estimator for PerfectEstimator {
    fn fit_predict(&mut self, _: &BearingId, _: &[Sample], test: &[Sample], _: &NormStats) -> Result<Vec<f64>> {
        Ok(test.iter().map(|s| s.label_rul_pct).collect())
    }
}

/// Always predicts the same value.
#[derive(Debug, Clone, Copy)]
pub struct ConstantEstimator(pub f64);

impl Estimator for ConstantEstimator {
    fn fit_predict(&mut self, _: &BearingId, _: &[Sample], test: &[Sample], _: &NormStats) -> Result<Vec<f64>> {
        Ok(vec![self.0; test.len()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionPoint {
    pub timestamp_s: f64,
    pub actual_rul_pct: f64,
    pub predicted_rul_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BearingResult {
    pub id: BearingId,
    pub mae: f64,
    pub series: Vec<PredictionPoint>,
}

impl BearingResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp_s,actual_rul_pct,predicted_rul_pct\n");
        for p in &self.series {
            out.push_str(&format!("{},{},{}\n", p.timestamp_s, p.actual_rul_pct, p.predicted_rul_pct));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub bearings: Vec<BearingResult>,
    pub mean_mae: f64,
    /// Bearings left out of evaluation, with the reason.
    pub skipped: Vec<(BearingId, String)>,
}

impl EvalReport {
    /// `bearing,mae` rows followed by a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bearing,mae\n");
        for b in &self.bearings {
            out.push_str(&format!("{},{}\n", b.id, b.mae));
        }
        out.push_str(&format!("mean,{}\n", self.mean_mae));
        out
    }
}

/// Leave-one-bearing-out evaluation. For every usable bearing the
/// estimator is fit on windows from all other bearings, normalised with
/// statistics of those bearings only, and scored on every window of the
/// held-out one.
pub fn evaluate_loocv(
    runs: &[BearingFeatures],
    window: usize,
    stride: usize,
    estimator: &mut dyn Estimator,
) -> Result<EvalReport> {
    if runs.len() < 2 {
        return Err(Error::arg(format!(
            "leave-one-out evaluation needs at least 2 bearings, got {}",
            runs.len()
        )));
    }
    let mut skipped = Vec::new();
    let usable: Vec<&BearingFeatures> = runs
        .iter()
        .filter(|r| {
            let ok = r.len() >= window && r.len() >= 2;
            if !ok {
                let why = format!("{} recordings, window needs {window}", r.len());
                eprintln!("warning: skipping bearing {}: {why}", r.id);
                skipped.push((r.id.clone(), why));
            }
            ok
        })
        .collect();
    if usable.len() < 2 {
        return Err(Error::arg(format!(
            "only {} bearing(s) are long enough for a window of {window}",
            usable.len()
        )));
    }
    let mut bearings = Vec::with_capacity(usable.len());
    for (k, held_out) in usable.iter().enumerate() {
        let others: Vec<&BearingFeatures> = usable
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, r)| *r)
            .collect();
        let stats = compute_norm_stats(others.iter().flat_map(|r| r.spectra.iter()))?;
        let mut train_set = Vec::new();
        for r in &others {
            train_set.extend(samples_from_features(r, window, stride, Some(&stats))?);
        }
        let test = samples_from_features(held_out, window, 1, Some(&stats))?;
        let predicted = estimator.fit_predict(&held_out.id, &train_set, &test, &stats)?;
        if predicted.len() != test.len() {
            return Err(Error::dim(
                "evaluate_loocv",
                format!("{} predictions for {} windows", predicted.len(), test.len()),
            ));
        }
        let actual: Vec<f64> = test.iter().map(|s| s.label_rul_pct).collect();
        let series = test
            .iter()
            .zip(&predicted)
            .map(|(s, &p)| PredictionPoint {
                timestamp_s: held_out.elapsed_s[s.end_index],
                actual_rul_pct: s.label_rul_pct,
                predicted_rul_pct: p,
            })
            .collect();
        bearings.push(BearingResult {
            id: held_out.id.clone(),
            mae: mae(&actual, &predicted)?,
            series,
        });
    }
    let mean_mae = bearings.iter().map(|b| b.mae).sum::<f64>() / bearings.len() as f64;
    Ok(EvalReport { bearings, mean_mae, skipped })
}
