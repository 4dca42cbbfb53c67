//! Convolutional block attention: channel attention from a shared MLP over
//! average- and max-pooled descriptors, then spatial attention from a
//! convolution over the channel-pooled map. Both maps are sigmoid gates
//! multiplied into the features.

use crate::error::{Error, Result};
use crate::numerics::{
    conv2d, conv2d_backward, pool_channel, pool_channel_backward, pool_spatial,
    pool_spatial_backward, sigmoid, PoolMode, Tensor,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CbamParams {
    /// `[C/r, C]`
    pub mlp_w1: Tensor,
    pub mlp_b1: Tensor,
    /// `[C, C/r]`
    pub mlp_w2: Tensor,
    pub mlp_b2: Tensor,
    /// `[1, 2, k, k]`, no bias.
    pub spatial_kernel: Tensor,
}

impl CbamParams {
    pub fn zeros(channels: usize, hidden: usize, k: usize) -> Self {
        Self {
            mlp_w1: Tensor::zeros(&[hidden, channels]),
            mlp_b1: Tensor::zeros(&[hidden]),
            mlp_w2: Tensor::zeros(&[channels, hidden]),
            mlp_b2: Tensor::zeros(&[channels]),
            spatial_kernel: Tensor::zeros(&[1, 2, k, k]),
        }
    }

    pub fn channels(&self) -> usize {
        self.mlp_w2.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.mlp_w1.shape()[0]
    }

    pub fn validate(&self) -> Result<()> {
        let op = "cbam";
        self.mlp_w1.require_rank(2, op, "mlp_w1")?;
        self.mlp_w2.require_rank(2, op, "mlp_w2")?;
        let (hid, c) = (self.mlp_w1.shape()[0], self.mlp_w1.shape()[1]);
        let ok = self.mlp_b1.shape() == [hid]
            && self.mlp_w2.shape() == [c, hid]
            && self.mlp_b2.shape() == [c];
        if !ok {
            return Err(Error::dim(
                op,
                format!(
                    "inconsistent MLP shapes w1 {:?}, b1 {:?}, w2 {:?}, b2 {:?}",
                    self.mlp_w1.shape(),
                    self.mlp_b1.shape(),
                    self.mlp_w2.shape(),
                    self.mlp_b2.shape()
                ),
            ));
        }
        let k = self.spatial_kernel.shape();
        if k.len() != 4 || k[0] != 1 || k[1] != 2 || k[2] != k[3] || k[2] % 2 == 0 {
            return Err(Error::dim(
                op,
                format!("spatial kernel must be [1, 2, k, k] with odd k, got {k:?}"),
            ));
        }
        Ok(())
    }

    fn check_input(&self, f: &Tensor) -> Result<()> {
        self.validate()?;
        f.require_rank(3, "cbam", "feature map")?;
        if f.shape()[0] != self.channels() {
            return Err(Error::dim(
                "cbam",
                format!(
                    "feature map has {} channels, attention expects {}",
                    f.shape()[0],
                    self.channels()
                ),
            ));
        }
        Ok(())
    }

    fn spatial_padding(&self) -> usize {
        self.spatial_kernel.shape()[2] / 2
    }
}

/// Shared MLP pass for one pooled descriptor; keeps the hidden
/// post-ReLU activations for backward.
fn mlp(p: &CbamParams, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (c, hid) = (p.channels(), p.hidden());
    let (w1, b1, w2, b2) = (
        p.mlp_w1.data(),
        p.mlp_b1.data(),
        p.mlp_w2.data(),
        p.mlp_b2.data(),
    );
    let hidden: Vec<f64> = (0..hid)
        .map(|j| {
            let pre: f64 = b1[j] + (0..c).map(|i| w1[j * c + i] * v[i]).sum::<f64>();
            pre.max(0.0)
        })
        .collect();
    let out = (0..c)
        .map(|i| b2[i] + (0..hid).map(|j| w2[i * hid + j] * hidden[j]).sum::<f64>())
        .collect();
    (hidden, out)
}

/// Channel attention map `Mc = σ(MLP(AvgPool F) + MLP(MaxPool F))`, `[C,1,1]`.
pub fn cbam_channel_attention(f: &Tensor, p: &CbamParams) -> Result<Tensor> {
    Ok(channel_attention_parts(f, p)?.mc)
}

struct ChannelParts {
    avg: Tensor,
    max: Tensor,
    hidden_avg: Vec<f64>,
    hidden_max: Vec<f64>,
    mc: Tensor,
}

fn channel_attention_parts(f: &Tensor, p: &CbamParams) -> Result<ChannelParts> {
    p.check_input(f)?;
    let avg = pool_channel(f, PoolMode::Avg)?;
    let max = pool_channel(f, PoolMode::Max)?;
    let (hidden_avg, out_avg) = mlp(p, avg.data());
    let (hidden_max, out_max) = mlp(p, max.data());
    let mc = out_avg
        .iter()
        .zip(&out_max)
        .map(|(a, b)| sigmoid(a + b))
        .collect();
    Ok(ChannelParts {
        avg,
        max,
        hidden_avg,
        hidden_max,
        mc: Tensor::from_vec(&[p.channels(), 1, 1], mc)?,
    })
}

/// `[AvgPool_c F, MaxPool_c F]` stacked on the channel axis, `[2,H,W]`.
fn spatial_descriptor(f: &Tensor) -> Result<Tensor> {
    let avg = pool_spatial(f, PoolMode::Avg)?;
    let max = pool_spatial(f, PoolMode::Max)?;
    let (h, w) = (f.shape()[1], f.shape()[2]);
    let mut data = avg.into_data();
    data.extend_from_slice(max.data());
    Tensor::from_vec(&[2, h, w], data)
}

/// Spatial attention map `Ms = σ(conv([AvgPool F, MaxPool F]))`, `[1,H,W]`.
pub fn cbam_spatial_attention(f: &Tensor, p: &CbamParams) -> Result<Tensor> {
    p.check_input(f)?;
    let desc = spatial_descriptor(f)?;
    let logits = conv2d(&desc, &p.spatial_kernel, &Tensor::zeros(&[1]), p.spatial_padding(), 1)?;
    Ok(logits.map(sigmoid))
}

/// `Mc` broadcast over the spatial axes.
fn scale_channels(f: &Tensor, mc: &Tensor) -> Tensor {
    let plane = f.shape()[1] * f.shape()[2];
    let mut out = f.clone();
    for (chunk, &m) in out.data_mut().chunks_exact_mut(plane).zip(mc.data()) {
        chunk.iter_mut().for_each(|v| *v *= m);
    }
    out
}

/// `Ms` broadcast over the channel axis.
fn scale_positions(f: &Tensor, ms: &Tensor) -> Tensor {
    let plane = f.shape()[1] * f.shape()[2];
    let mut out = f.clone();
    for chunk in out.data_mut().chunks_exact_mut(plane) {
        for (v, &m) in chunk.iter_mut().zip(ms.data()) {
            *v *= m;
        }
    }
    out
}

/// `F′ = Mc(F) ⊗ F`, then `F″ = Ms(F′) ⊗ F′`.
pub fn cbam_apply(f: &Tensor, p: &CbamParams) -> Result<Tensor> {
    Ok(cbam_forward_cached(f, p)?.0)
}

#[derive(Debug, Clone)]
pub struct CbamCache {
    input: Tensor,
    avg: Tensor,
    max: Tensor,
    hidden_avg: Vec<f64>,
    hidden_max: Vec<f64>,
    mc: Tensor,
    refined: Tensor,
    descriptor: Tensor,
    ms: Tensor,
}

impl CbamCache {
    pub fn channel_attention(&self) -> &Tensor {
        &self.mc
    }

    pub fn spatial_attention(&self) -> &Tensor {
        &self.ms
    }

    /// Feeds the MLP ReLU pattern and both max-pool winners into `h`.
    pub fn hash_region(&self, h: &mut impl std::hash::Hasher) {
        super::conv::hash_active(&self.hidden_avg, h);
        super::conv::hash_active(&self.hidden_max, h);
        let c = self.input.shape()[0];
        let plane = self.input.len() / c;
        for ch in self.input.data().chunks_exact(plane) {
            h.write_usize(first_max(ch.iter().copied()));
        }
        let r = self.refined.data();
        for p in 0..plane {
            h.write_usize(first_max((0..c).map(|ch| r[ch * plane + p])));
        }
    }
}

fn first_max(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub fn cbam_forward_cached(f: &Tensor, p: &CbamParams) -> Result<(Tensor, CbamCache)> {
    let parts = channel_attention_parts(f, p)?;
    let refined = scale_channels(f, &parts.mc);
    let descriptor = spatial_descriptor(&refined)?;
    let logits = conv2d(
        &descriptor,
        &p.spatial_kernel,
        &Tensor::zeros(&[1]),
        p.spatial_padding(),
        1,
    )?;
    let ms = logits.map(sigmoid);
    let out = scale_positions(&refined, &ms);
    Ok((
        out,
        CbamCache {
            input: f.clone(),
            avg: parts.avg,
            max: parts.max,
            hidden_avg: parts.hidden_avg,
            hidden_max: parts.hidden_max,
            mc: parts.mc,
            refined,
            descriptor,
            ms,
        },
    ))
}

/// Backward of the shared MLP for one branch; accumulates into `grads` and
/// returns the gradient with respect to the pooled descriptor.
fn mlp_backward(
    p: &CbamParams,
    v: &[f64],
    hidden: &[f64],
    d_out: &[f64],
    grads: &mut CbamParams,
) -> Vec<f64> {
    let (c, hid) = (p.channels(), p.hidden());
    let (w1, w2) = (p.mlp_w1.data(), p.mlp_w2.data());
    let mut d_hidden = vec![0.0; hid];
    {
        let gw2 = grads.mlp_w2.data_mut();
        for i in 0..c {
            for j in 0..hid {
                gw2[i * hid + j] += d_out[i] * hidden[j];
                d_hidden[j] += w2[i * hid + j] * d_out[i];
            }
        }
    }
    for (g, d) in grads.mlp_b2.data_mut().iter_mut().zip(d_out) {
        *g += d;
    }
    // ReLU gate; hidden holds post-activation values
    for (d, &h) in d_hidden.iter_mut().zip(hidden) {
        if h <= 0.0 {
            *d = 0.0;
        }
    }
    let mut d_v = vec![0.0; c];
    {
        let gw1 = grads.mlp_w1.data_mut();
        for j in 0..hid {
            for i in 0..c {
                gw1[j * c + i] += d_hidden[j] * v[i];
                d_v[i] += w1[j * c + i] * d_hidden[j];
            }
        }
    }
    for (g, d) in grads.mlp_b1.data_mut().iter_mut().zip(&d_hidden) {
        *g += d;
    }
    d_v
}

/// Accumulates parameter gradients into `grads`; returns `∂L/∂F`.
pub fn cbam_backward(
    grad_out: &Tensor,
    cache: &CbamCache,
    p: &CbamParams,
    grads: &mut CbamParams,
) -> Result<Tensor> {
    cache.input.require_same_shape(grad_out, "cbam_backward")?;
    let (c, h, w) = (
        cache.input.shape()[0],
        cache.input.shape()[1],
        cache.input.shape()[2],
    );
    let plane = h * w;
    let g = grad_out.data();
    let refined = cache.refined.data();
    let ms = cache.ms.data();

    // F″ = Ms ⊗ F′
    let mut d_ms = vec![0.0; plane];
    let mut d_refined = vec![0.0; c * plane];
    for ch in 0..c {
        for q in 0..plane {
            let at = ch * plane + q;
            d_ms[q] += g[at] * refined[at];
            d_refined[at] = g[at] * ms[q];
        }
    }
    let d_logits: Vec<f64> = d_ms
        .iter()
        .zip(ms)
        .map(|(d, &s)| d * s * (1.0 - s))
        .collect();
    let d_logits = Tensor::from_vec(&[1, h, w], d_logits)?;
    let (d_desc, d_kernel, _) = conv2d_backward(
        &d_logits,
        &cache.descriptor,
        &p.spatial_kernel,
        p.spatial_padding(),
        1,
    )?;
    grads.spatial_kernel.add_assign(&d_kernel)?;
    let d_avg_map = Tensor::from_vec(&[1, h, w], d_desc.data()[..plane].to_vec())?;
    let d_max_map = Tensor::from_vec(&[1, h, w], d_desc.data()[plane..].to_vec())?;
    let mut d_refined = Tensor::from_vec(cache.input.shape(), d_refined)?;
    d_refined.add_assign(&pool_spatial_backward(&cache.refined, PoolMode::Avg, &d_avg_map)?)?;
    d_refined.add_assign(&pool_spatial_backward(&cache.refined, PoolMode::Max, &d_max_map)?)?;

    // F′ = Mc ⊗ F
    let f = cache.input.data();
    let mc = cache.mc.data();
    let dr = d_refined.data();
    let mut d_mc = vec![0.0; c];
    let mut d_input = vec![0.0; c * plane];
    for ch in 0..c {
        for q in 0..plane {
            let at = ch * plane + q;
            d_mc[ch] += dr[at] * f[at];
            d_input[at] = dr[at] * mc[ch];
        }
    }
    let d_logit_c: Vec<f64> = d_mc
        .iter()
        .zip(mc)
        .map(|(d, &s)| d * s * (1.0 - s))
        .collect();
    let d_avg = mlp_backward(p, cache.avg.data(), &cache.hidden_avg, &d_logit_c, grads);
    let d_max = mlp_backward(p, cache.max.data(), &cache.hidden_max, &d_logit_c, grads);
    let mut d_input = Tensor::from_vec(cache.input.shape(), d_input)?;
    d_input.add_assign(&pool_channel_backward(
        &cache.input,
        PoolMode::Avg,
        &Tensor::from_vec(&[c, 1, 1], d_avg)?,
    )?)?;
    d_input.add_assign(&pool_channel_backward(
        &cache.input,
        PoolMode::Max,
        &Tensor::from_vec(&[c, 1, 1], d_max)?,
    )?)?;
    Ok(d_input)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::numerics::{grad_check, GradCheckConfig};

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_params(c: usize, hid: usize, k: usize, rng: &mut ChaCha8Rng) -> CbamParams {
        CbamParams {
            mlp_w1: random(&[hid, c], rng),
            mlp_b1: random(&[hid], rng),
            mlp_w2: random(&[c, hid], rng),
            mlp_b2: random(&[c], rng),
            spatial_kernel: random(&[1, 2, k, k], rng),
        }
    }

    #[test]
    fn zero_params_give_half_maps_and_quarter_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = random(&[5, 4, 6], &mut rng);
        let p = CbamParams::zeros(5, 2, 3);
        let mc = cbam_channel_attention(&f, &p).unwrap();
        assert!(mc.data().iter().all(|&v| v == 0.5));
        let ms = cbam_spatial_attention(&f, &p).unwrap();
        assert_eq!(ms.shape(), &[1, 4, 6]);
        assert!(ms.data().iter().all(|&v| v == 0.5));
        let out = cbam_apply(&f, &p).unwrap();
        assert_eq!(out, f.map(|v| 0.25 * v));
        assert!(cbam_apply(&Tensor::zeros(&[5, 4, 6]), &p)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn constant_map_collapses_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let p = random_params(3, 2, 3, &mut rng);
        let f = Tensor::full(&[3, 4, 4], 0.7);
        let mc = cbam_channel_attention(&f, &p).unwrap();
        let (_, out) = mlp(&p, &[0.7; 3]);
        for (m, o) in mc.data().iter().zip(&out) {
            assert!((m - sigmoid(2.0 * o)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_channel_avg_equals_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let f = random(&[1, 3, 5], &mut rng);
        let desc = spatial_descriptor(&f).unwrap();
        assert_eq!(&desc.data()[..15], &desc.data()[15..]);
    }

    /// Direct transcription of the channel attention formula, evaluated
    /// step by step with plain loops.
    fn channel_oracle(f: &Tensor, p: &CbamParams) -> Vec<f64> {
        let (c, h, w) = (f.shape()[0], f.shape()[1], f.shape()[2]);
        let mut avg = vec![0.0; c];
        let mut max = vec![f64::NEG_INFINITY; c];
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let v = f.at(&[ch, y, x]);
                    avg[ch] += v / (h * w) as f64;
                    max[ch] = max[ch].max(v);
                }
            }
        }
        let hid = p.mlp_w1.shape()[0];
        let run = |v: &[f64]| -> Vec<f64> {
            let hidden: Vec<f64> = (0..hid)
                .map(|j| {
                    let mut s = p.mlp_b1.at(&[j]);
                    for i in 0..c {
                        s += p.mlp_w1.at(&[j, i]) * v[i];
                    }
                    if s > 0.0 {
                        s
                    } else {
                        0.0
                    }
                })
                .collect();
            (0..c)
                .map(|i| {
                    let mut s = p.mlp_b2.at(&[i]);
                    for j in 0..hid {
                        s += p.mlp_w2.at(&[i, j]) * hidden[j];
                    }
                    s
                })
                .collect()
        };
        let (a, m) = (run(&avg), run(&max));
        (0..c).map(|i| 1.0 / (1.0 + (-(a[i] + m[i])).exp())).collect()
    }

    #[test]
    fn channel_attention_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..20 {
            let p = random_params(5, 2, 3, &mut rng);
            let f = random(&[5, 6, 7], &mut rng);
            let mc = cbam_channel_attention(&f, &p).unwrap();
            for (a, b) in mc.data().iter().zip(channel_oracle(&f, &p)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_is_composition_of_the_two_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let p = random_params(5, 2, 3, &mut rng);
        let f = random(&[5, 6, 7], &mut rng);
        let mc = cbam_channel_attention(&f, &p).unwrap();
        let mut refined = f.clone();
        for c in 0..5 {
            for y in 0..6 {
                for x in 0..7 {
                    refined.set(&[c, y, x], mc.at(&[c, 0, 0]) * f.at(&[c, y, x]));
                }
            }
        }
        let ms = cbam_spatial_attention(&refined, &p).unwrap();
        let mut expected = refined.clone();
        for c in 0..5 {
            for y in 0..6 {
                for x in 0..7 {
                    expected.set(&[c, y, x], ms.at(&[0, y, x]) * refined.at(&[c, y, x]));
                }
            }
        }
        let out = cbam_apply(&f, &p).unwrap();
        assert!(out.max_abs_diff(&expected) < 1e-12);
        for (o, i) in out.data().iter().zip(f.data()) {
            assert!(o.abs() <= i.abs());
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for k in [3, 7] {
            let p = random_params(5, 2, k, &mut rng);
            let f = random(&[5, 4, 9], &mut rng);
            let upstream = random(&[5, 4, 9], &mut rng);
            let (_, cache) = cbam_forward_cached(&f, &p).unwrap();
            let mut grads = CbamParams::zeros(5, 2, k);
            let df = cbam_backward(&upstream, &cache, &p, &mut grads).unwrap();
            let loss = |t: &[Tensor]| {
                let p = CbamParams {
                    mlp_w1: t[1].clone(),
                    mlp_b1: t[2].clone(),
                    mlp_w2: t[3].clone(),
                    mlp_b2: t[4].clone(),
                    spatial_kernel: t[5].clone(),
                };
                let y = cbam_apply(&t[0], &p).unwrap();
                y.data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum()
            };
            let r = grad_check(
                loss,
                &[
                    f,
                    p.mlp_w1.clone(),
                    p.mlp_b1.clone(),
                    p.mlp_w2.clone(),
                    p.mlp_b2.clone(),
                    p.spatial_kernel.clone(),
                ],
                &[
                    df,
                    grads.mlp_w1,
                    grads.mlp_b1,
                    grads.mlp_w2,
                    grads.mlp_b2,
                    grads.spatial_kernel,
                ],
                &GradCheckConfig::default(),
            )
            .unwrap();
            assert!(r.max_rel_err < 1e-6, "k={k}: {r:?}");
        }
    }

    #[test]
    fn rejects_channel_mismatch() {
        let p = CbamParams::zeros(5, 2, 3);
        assert!(cbam_apply(&Tensor::zeros(&[4, 3, 3]), &p).is_err());
        let mut bad = p.clone();
        bad.spatial_kernel = Tensor::zeros(&[1, 2, 4, 4]);
        assert!(cbam_apply(&Tensor::zeros(&[5, 3, 3]), &bad).is_err());
    }
}
