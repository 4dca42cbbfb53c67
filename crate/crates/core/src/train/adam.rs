use crate::error::{Error, Result};
use crate::model::{tensor_layout, ModelParams, Weights};
use crate::numerics::Tensor;

use super::{Precision, TrainConfig};

/// First and second moment estimates, one tensor per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = params.into_iter().map(Tensor::zeros_like).collect();
        Self { v: m.clone(), m, t: 0 }
    }

    pub fn for_weights(w: &Weights) -> Self {
        Self::new(w.tensors())
    }
}

/// One bias-corrected Adam update over parallel lists of parameters and
/// gradients. Any non-finite gradient aborts before anything is modified.
pub fn adam_update(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    names: &[String],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n || names.len() != n {
        return Err(Error::dim(
            "adam_step",
            format!(
                "{n} parameters, {} gradients, {} moments, {} names",
                grads.len(),
                state.m.len(),
                names.len()
            ),
        ));
    }
    for (i, g) in grads.iter().enumerate() {
        params[i].require_same_shape(g, "adam_step")?;
        state.m[i].require_same_shape(g, "adam_step")?;
        if g.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {} is not finite", names[i])));
        }
    }
    state.t += 1;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let lr = cfg.learning_rate;
    for i in 0..n {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let p = params[i].data_mut();
        for (((p, m), v), &g) in p.iter_mut().zip(m).zip(v).zip(grads[i].data()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            if cfg.precision == Precision::F32 {
                *p = *p as f32 as f64;
            }
        }
    }
    Ok(())
}

pub fn adam_step(
    model: &mut ModelParams,
    grads: &Weights,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    let names: Vec<String> = tensor_layout(&model.config).into_iter().map(|(n, _)| n).collect();
    let mut params = model.weights.tensors_mut();
    adam_update(&mut params, &grads.tensors(), &names, state, cfg)
}
