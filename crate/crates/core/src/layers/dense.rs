use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::ops::dot;
use crate::numerics::Tensor;

/// Affine map to a single output: `w[1,H]·x[H] + b[1]`. No activation.
pub fn dense(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_dense(x, w, b)?;
    Tensor::from_vec(&[1], vec![dot(w.data(), x.data()) + b.data()[0]])
}

fn check_dense(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<()> {
    x.require_rank(1, "dense", "input")?;
    if w.shape() != [1, x.len()] {
        return Err(Error::dim(
            "dense",
            format!("weight must be [1, {}], got {:?}", x.len(), w.shape()),
        ));
    }
    if b.shape() != [1] {
        return Err(Error::dim(
            "dense",
            format!("bias must be [1], got {:?}", b.shape()),
        ));
    }
    Ok(())
}

/// Accumulates `∂L/∂w` and `∂L/∂b` for upstream scalar gradient `grad_out`
/// and returns `∂L/∂x`.
pub fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: f64,
    grad_w: &mut Tensor,
    grad_b: &mut Tensor,
) -> Result<Tensor> {
    check_dense(x, w, grad_b)?;
    for (g, &xi) in grad_w.data_mut().iter_mut().zip(x.data()) {
        *g += grad_out * xi;
    }
    grad_b.data_mut()[0] += grad_out;
    Ok(w.map(|wi| wi * grad_out).reshape(&[x.len()])?)
}

/// Inverted-dropout multipliers: each entry is 0 with probability `rate`,
/// otherwise `1/(1−rate)`. `None` when the layer is the identity
/// (inference, or `rate == 0`).
pub fn dropout_mask(len: usize, rate: f64, training: bool, seed: u64) -> Result<Option<Vec<f64>>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::arg(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    if !training || rate == 0.0 {
        return Ok(None);
    }
    let keep = 1.0 / (1.0 - rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Some(
        (0..len)
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect(),
    ))
}

pub fn dropout(x: &Tensor, rate: f64, training: bool, seed: u64) -> Result<Tensor> {
    Ok(match dropout_mask(x.len(), rate, training, seed)? {
        Some(mask) => {
            let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
            Tensor::from_vec(x.shape(), data)?
        }
        None => x.clone(),
    })
}
