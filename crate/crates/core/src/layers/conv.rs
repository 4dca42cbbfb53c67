use crate::error::{Error, Result};
use crate::numerics::{conv2d, conv2d_backward, Activation, Tensor};

/// One shape-preserving convolution followed by ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlockParams {
    pub kernels: Tensor,
    pub bias: Tensor,
}

impl ConvBlockParams {
    pub fn new(kernels: Tensor, bias: Tensor) -> Result<Self> {
        let p = Self { kernels, bias };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(c_in: usize, c_out: usize, k: usize) -> Self {
        Self {
            kernels: Tensor::zeros(&[c_out, c_in, k, k]),
            bias: Tensor::zeros(&[c_out]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernels.require_rank(4, "conv_block", "kernels")?;
        let s = self.kernels.shape();
        if s[2] % 2 == 0 || s[2] != s[3] {
            return Err(Error::dim(
                "conv_block",
                format!("kernel must be square with odd size, got {}×{}", s[2], s[3]),
            ));
        }
        if self.bias.shape() != [s[0]] {
            return Err(Error::dim(
                "conv_block",
                format!("bias must be [{}], got {:?}", s[0], self.bias.shape()),
            ));
        }
        Ok(())
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    fn padding(&self) -> usize {
        self.kernels.shape()[2] / 2
    }
}

/// Saved activations for [`conv_block_backward`].
#[derive(Debug, Clone)]
pub struct ConvBlockCache {
    input: Tensor,
    output: Tensor,
}

impl ConvBlockCache {
    pub fn output(&self) -> &Tensor {
        &self.output
    }

    /// Feeds which ReLUs are active into `h`.
    pub fn hash_region(&self, h: &mut impl std::hash::Hasher) {
        hash_active(self.output.data(), h);
    }
}

/// Hashes the `> 0` pattern of `values`, 64 entries per word.
pub(crate) fn hash_active(values: &[f64], h: &mut impl std::hash::Hasher) {
    for chunk in values.chunks(64) {
        let bits = chunk
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &v)| acc | (u64::from(v > 0.0) << i));
        h.write_u64(bits);
    }
}

/// `relu(conv2d(x, kernels) + bias)` with padding `k/2` and stride 1.
pub fn conv_block_forward(x: &Tensor, p: &ConvBlockParams) -> Result<Tensor> {
    let pre = conv2d(x, &p.kernels, &p.bias, p.padding(), 1)?;
    Ok(pre.map(|v| v.max(0.0)))
}

pub fn conv_block_forward_cached(x: &Tensor, p: &ConvBlockParams) -> Result<(Tensor, ConvBlockCache)> {
    let out = conv_block_forward(x, p)?;
    let cache = ConvBlockCache {
        input: x.clone(),
        output: out.clone(),
    };
    Ok((out, cache))
}

/// Accumulates parameter gradients into `grads` and returns the gradient
/// with respect to the block input.
pub fn conv_block_backward(
    grad_out: &Tensor,
    cache: &ConvBlockCache,
    p: &ConvBlockParams,
    grads: &mut ConvBlockParams,
) -> Result<Tensor> {
    cache.output.require_same_shape(grad_out, "conv_block_backward")?;
    let grad_pre = Tensor::from_vec(
        grad_out.shape(),
        grad_out
            .data()
            .iter()
            .zip(cache.output.data())
            .map(|(&g, &y)| g * Activation::Relu.derivative_from_output(y))
            .collect(),
    )?;
    let (gi, gk, gb) = conv2d_backward(&grad_pre, &cache.input, &p.kernels, p.padding(), 1)?;
    grads.kernels.add_assign(&gk)?;
    grads.bias.add_assign(&gb)?;
    Ok(gi)
}
