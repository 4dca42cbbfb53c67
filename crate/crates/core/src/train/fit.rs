use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::model::{backward, forward, forward_cached, ModelParams, Weights};

use super::{adam_step, l1_loss_backward, AdamState, Precision, TrainConfig};

/// The network regresses remaining life as a fraction; labels and reports
/// use percent.
pub const PCT_PER_UNIT: f64 = 100.0;

/// Mean training L1 loss per epoch, in fraction-of-life units.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory {
    pub epoch_loss: Vec<f64>,
}

impl LossHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_l1\n");
        for (i, l) in self.epoch_loss.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, l));
        }
        out
    }
}

/// SplitMix64 finaliser; spreads (seed, epoch, sample) into dropout seeds.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn round_to_f32(model: &mut ModelParams) {
    for t in model.weights.tensors_mut() {
        for v in t.data_mut() {
            *v = *v as f32 as f64;
        }
    }
}

/// Mini-batch Adam on the L1 loss. Samples are reshuffled every epoch from
/// `cfg.seed`; the final short batch is kept. Gradients within a batch are
/// summed in sample order, so a run is reproducible bit for bit.
pub fn train(model: &mut ModelParams, samples: &[Sample], cfg: &TrainConfig) -> Result<LossHistory> {
    train_with(model, samples, cfg, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean loss)` after each epoch.
pub fn train_with(
    model: &mut ModelParams,
    samples: &[Sample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<LossHistory> {
    cfg.validate()?;
    model.validate()?;
    if samples.is_empty() {
        return Err(Error::arg("training set is empty"));
    }
    if cfg.precision == Precision::F32 {
        round_to_f32(model);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grads = Weights::zeros(&model.config);
    let mut state = AdamState::for_weights(&model.weights);
    let mut history = LossHistory::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.zero_();
            let mut caches = Vec::with_capacity(batch.len());
            let mut preds = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for &i in batch {
                let s = &samples[i];
                let seed = mix(cfg.seed ^ mix(epoch as u64) ^ mix(mix(i as u64)));
                let cache = forward_cached(model, &s.window, true, seed).map_err(|e| {
                    Error::Diverged(format!("epoch {}, batch {}: {e}", epoch + 1, b + 1))
                })?;
                preds.push(cache.output());
                targets.push(s.label_rul_pct / PCT_PER_UNIT);
                caches.push(cache);
            }
            let batch_abs: f64 = preds.iter().zip(&targets).map(|(p, t)| (p - t).abs()).sum();
            if !batch_abs.is_finite() {
                return Err(Error::Diverged(format!(
                    "loss is {batch_abs} at epoch {}, batch {}",
                    epoch + 1,
                    b + 1
                )));
            }
            total += batch_abs;
            let d = l1_loss_backward(&preds, &targets)?;
            for (cache, d) in caches.iter().zip(d) {
                backward(model, cache, d, &mut grads)?;
            }
            adam_step(model, &grads, &mut state, cfg).map_err(|e| match e {
                Error::NonFinite(m) => {
                    Error::Diverged(format!("epoch {}, batch {}: {m}", epoch + 1, b + 1))
                }
                e => e,
            })?;
        }
        let mean = total / samples.len() as f64;
        history.epoch_loss.push(mean);
        on_epoch(epoch + 1, mean);
    }
    Ok(history)
}

/// Inference-mode prediction for one window, in percent of life.
pub fn predict_pct(model: &ModelParams, sample_window: &crate::numerics::Tensor) -> Result<f64> {
    Ok(forward(model, sample_window, false, 0)? * PCT_PER_UNIT)
}
