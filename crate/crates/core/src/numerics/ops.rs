//! Forward and backward kernels for the primitives the network is built from.

use crate::error::{Error, Result};

use super::Tensor;

/// Geometry of one 2-D cross-correlation, validated against the operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub padding: usize,
    pub stride: usize,
}

fn output_len(len: usize, k: usize, padding: usize, stride: usize, axis: &str) -> Result<usize> {
    let padded = len + 2 * padding;
    if padded < k {
        return Err(Error::dim(
            "conv2d",
            format!("{axis}: kernel {k} exceeds padded input {padded}"),
        ));
    }
    if (padded - k) % stride != 0 {
        return Err(Error::dim(
            "conv2d",
            format!("{axis}: ({len} + 2·{padding} − {k}) is not divisible by stride {stride}"),
        ));
    }
    Ok((padded - k) / stride + 1)
}

impl ConvGeometry {
    pub fn new(input: &Tensor, kernels: &Tensor, padding: usize, stride: usize) -> Result<Self> {
        input.require_rank(3, "conv2d", "input")?;
        kernels.require_rank(4, "conv2d", "kernels")?;
        if stride == 0 {
            return Err(Error::arg("conv2d stride must be at least 1"));
        }
        let (c_in, in_h, in_w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let ks = kernels.shape();
        let (c_out, k_c, k_h, k_w) = (ks[0], ks[1], ks[2], ks[3]);
        if k_c != c_in {
            return Err(Error::dim(
                "conv2d",
                format!("channel axis: input has {c_in} channels, kernels expect {k_c}"),
            ));
        }
        if k_h % 2 == 0 || k_w % 2 == 0 {
            return Err(Error::dim(
                "conv2d",
                format!("kernel height/width axes must be odd, got {k_h}×{k_w}"),
            ));
        }
        let out_h = output_len(in_h, k_h, padding, stride, "height axis")?;
        let out_w = output_len(in_w, k_w, padding, stride, "width axis")?;
        Ok(Self {
            in_channels: c_in,
            out_channels: c_out,
            in_h,
            in_w,
            k_h,
            k_w,
            out_h,
            out_w,
            padding,
            stride,
        })
    }

    /// Output columns `[lo, hi)` whose tap `kw` lands inside the input row.
    fn col_range(&self, kw: usize) -> (usize, usize) {
        let (p, s) = (self.padding, self.stride);
        let lo = if kw >= p { 0 } else { (p - kw).div_ceil(s) };
        // largest x with x·s + kw − p ≤ in_w − 1
        let reach = self.in_w - 1 + p;
        let hi = if reach < kw {
            0
        } else {
            ((reach - kw) / s + 1).min(self.out_w)
        };
        (lo, hi.max(lo))
    }

    /// 3-wide taps, stride 1, padding 1: every output row lines up with an
    /// input row of the same width.
    fn is_same_3x3(&self) -> bool {
        self.k_w == 3 && self.stride == 1 && self.padding == 1 && self.out_w == self.in_w
    }

    /// Input row for output row `y` and tap `kh`, if inside the input.
    fn in_row(&self, y: usize, kh: usize) -> Option<usize> {
        let r = (y * self.stride + kh).checked_sub(self.padding)?;
        (r < self.in_h).then_some(r)
    }
}

/// `out[x] += w0·inp[x−1] + w1·inp[x] + w2·inp[x+1]`, zero outside `inp`.
#[inline(always)]
fn row_corr3(out: &mut [f64], inp: &[f64], w: [f64; 3]) {
    let n = inp.len();
    debug_assert_eq!(out.len(), n);
    if n == 1 {
        out[0] += w[1] * inp[0];
        return;
    }
    out[0] += w[1] * inp[0] + w[2] * inp[1];
    for (((o, a), b), c) in out[1..n - 1]
        .iter_mut()
        .zip(&inp[..n - 2])
        .zip(&inp[1..n - 1])
        .zip(&inp[2..])
    {
        *o += w[0] * a + w[1] * b + w[2] * c;
    }
    out[n - 1] += w[0] * inp[n - 2] + w[1] * inp[n - 1];
}

/// `Σ g[x]·inp[x+kw−1]` for `kw = 0, 1, 2`, over the valid overlap. One
/// pass with four-lane partial sums per tap.
#[inline(always)]
fn row_dot3(g: &[f64], inp: &[f64]) -> [f64; 3] {
    let n = inp.len();
    if n == 1 {
        return [0.0, g[0] * inp[0], 0.0];
    }
    // interior x = 1..n−1 touches inp[x−1], inp[x], inp[x+1]
    let (gm, a, b, c) = (&g[1..n - 1], &inp[..n - 2], &inp[1..n - 1], &inp[2..]);
    let mut acc = [[0.0; 4]; 3];
    let chunks = gm.len() / 4;
    for q in 0..chunks {
        let r = q * 4..q * 4 + 4;
        let (gq, aq, bq, cq) = (&gm[r.clone()], &a[r.clone()], &b[r.clone()], &c[r]);
        for l in 0..4 {
            acc[0][l] += gq[l] * aq[l];
            acc[1][l] += gq[l] * bq[l];
            acc[2][l] += gq[l] * cq[l];
        }
    }
    let mut out = acc.map(|v| (v[0] + v[1]) + (v[2] + v[3]));
    for x in chunks * 4..gm.len() {
        out[0] += gm[x] * a[x];
        out[1] += gm[x] * b[x];
        out[2] += gm[x] * c[x];
    }
    // edges
    out[0] += g[n - 1] * inp[n - 2];
    out[1] += g[0] * inp[0] + g[n - 1] * inp[n - 1];
    out[2] += g[0] * inp[1];
    out
}

/// AVX2 builds of the conv kernels. Same operations in the same order as
/// the baseline build (no fused multiply-add), so results are identical.
#[cfg(target_arch = "x86_64")]
mod wide {
    use super::ConvGeometry;

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn forward_planes(g: &ConvGeometry, x: &[f64], k: &[f64], b: &[f64], out: &mut [f64]) {
        super::forward_planes(g, x, k, b, out)
    }

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn backward_planes(
        g: &ConvGeometry,
        go: &[f64],
        x: &[f64],
        k: &[f64],
        gi: &mut [f64],
        gk: &mut [f64],
        gb: &mut [f64],
    ) {
        super::backward_planes(g, go, x, k, gi, gk, gb)
    }
}

fn check_bias(bias: &Tensor, c_out: usize) -> Result<()> {
    if bias.shape() != [c_out] {
        return Err(Error::dim(
            "conv2d",
            format!("bias axis must be [{c_out}], got {:?}", bias.shape()),
        ));
    }
    Ok(())
}

/// 2-D cross-correlation (no kernel flip) of `input[C_in,H,W]` with
/// `kernels[C_out,C_in,kH,kW]` plus a per-output-channel bias.
pub fn conv2d(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    padding: usize,
    stride: usize,
) -> Result<Tensor> {
    let g = ConvGeometry::new(input, kernels, padding, stride)?;
    check_bias(bias, g.out_channels)?;
    let mut out = vec![0.0; g.out_channels * g.out_h * g.out_w];
    let (x, k, b) = (input.data(), kernels.data(), bias.data());
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        unsafe { wide::forward_planes(&g, x, k, b, &mut out) };
        return Tensor::from_vec(&[g.out_channels, g.out_h, g.out_w], out);
    }
    forward_planes(&g, x, k, b, &mut out);
    Tensor::from_vec(&[g.out_channels, g.out_h, g.out_w], out)
}

#[inline(always)]
fn forward_planes(g: &ConvGeometry, x: &[f64], k: &[f64], bias: &[f64], out: &mut [f64]) {
    let plane_in = g.in_h * g.in_w;
    let plane_out = g.out_h * g.out_w;
    let fast = g.is_same_3x3();
    for o in 0..g.out_channels {
        let out_plane = &mut out[o * plane_out..(o + 1) * plane_out];
        out_plane.fill(bias[o]);
        for i in 0..g.in_channels {
            let in_plane = &x[i * plane_in..(i + 1) * plane_in];
            for kh in 0..g.k_h {
                let tap = ((o * g.in_channels + i) * g.k_h + kh) * g.k_w;
                if fast {
                    let w = [k[tap], k[tap + 1], k[tap + 2]];
                    for y in 0..g.out_h {
                        let Some(r) = g.in_row(y, kh) else { continue };
                        row_corr3(
                            &mut out_plane[y * g.out_w..(y + 1) * g.out_w],
                            &in_plane[r * g.in_w..(r + 1) * g.in_w],
                            w,
                        );
                    }
                    continue;
                }
                for kw in 0..g.k_w {
                    let w = k[tap + kw];
                    let (lo, hi) = g.col_range(kw);
                    if lo >= hi {
                        continue;
                    }
                    for y in 0..g.out_h {
                        let Some(r) = g.in_row(y, kh) else { continue };
                        let in_row = &in_plane[r * g.in_w..(r + 1) * g.in_w];
                        let out_row = &mut out_plane[y * g.out_w..(y + 1) * g.out_w];
                        let first = lo * g.stride + kw - g.padding;
                        if g.stride == 1 {
                            for (dst, &src) in out_row[lo..hi].iter_mut().zip(&in_row[first..]) {
                                *dst += w * src;
                            }
                        } else {
                            for (n, dst) in out_row[lo..hi].iter_mut().enumerate() {
                                *dst += w * in_row[first + n * g.stride];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of `sum(grad_out ⊙ conv2d(input, kernels, ·))` with respect to
/// the input, the kernels and the bias.
pub fn conv2d_backward(
    grad_out: &Tensor,
    input: &Tensor,
    kernels: &Tensor,
    padding: usize,
    stride: usize,
) -> Result<(Tensor, Tensor, Tensor)> {
    let g = ConvGeometry::new(input, kernels, padding, stride)?;
    if grad_out.shape() != [g.out_channels, g.out_h, g.out_w] {
        return Err(Error::dim(
            "conv2d_backward",
            format!(
                "grad_out must be {:?}, got {:?}",
                [g.out_channels, g.out_h, g.out_w],
                grad_out.shape()
            ),
        ));
    }
    let mut gi = vec![0.0; input.len()];
    let mut gk = vec![0.0; kernels.len()];
    let mut gb = vec![0.0; g.out_channels];
    let (go, x, k) = (grad_out.data(), input.data(), kernels.data());
    let mut done = false;
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        unsafe { wide::backward_planes(&g, go, x, k, &mut gi, &mut gk, &mut gb) };
        done = true;
    }
    if !done {
        backward_planes(&g, go, x, k, &mut gi, &mut gk, &mut gb);
    }
    Ok((
        Tensor::from_vec(input.shape(), gi)?,
        Tensor::from_vec(kernels.shape(), gk)?,
        Tensor::from_vec(&[g.out_channels], gb)?,
    ))
}

#[inline(always)]
fn backward_planes(
    g: &ConvGeometry,
    go: &[f64],
    x: &[f64],
    k: &[f64],
    gi: &mut [f64],
    gk: &mut [f64],
    gb: &mut [f64],
) {
    let plane_in = g.in_h * g.in_w;
    let plane_out = g.out_h * g.out_w;
    let fast = g.is_same_3x3();
    for o in 0..g.out_channels {
        let go_plane = &go[o * plane_out..(o + 1) * plane_out];
        gb[o] = go_plane.iter().sum();
        for i in 0..g.in_channels {
            let in_plane = &x[i * plane_in..(i + 1) * plane_in];
            let gi_plane = &mut gi[i * plane_in..(i + 1) * plane_in];
            for kh in 0..g.k_h {
                let tap = ((o * g.in_channels + i) * g.k_h + kh) * g.k_w;
                if fast {
                    // transposed correlation uses the mirrored taps
                    let w = [k[tap + 2], k[tap + 1], k[tap]];
                    let mut acc = [0.0; 3];
                    for y in 0..g.out_h {
                        let Some(r) = g.in_row(y, kh) else { continue };
                        let go_row = &go_plane[y * g.out_w..(y + 1) * g.out_w];
                        let row = r * g.in_w..(r + 1) * g.in_w;
                        let d = row_dot3(go_row, &in_plane[row.clone()]);
                        for (a, d) in acc.iter_mut().zip(d) {
                            *a += d;
                        }
                        row_corr3(&mut gi_plane[row], go_row, w);
                    }
                    gk[tap..tap + 3].copy_from_slice(&acc);
                    continue;
                }
                for kw in 0..g.k_w {
                    let widx = tap + kw;
                    let w = k[widx];
                    let (lo, hi) = g.col_range(kw);
                    if lo >= hi {
                        continue;
                    }
                    let mut acc = 0.0;
                    for y in 0..g.out_h {
                        let Some(r) = g.in_row(y, kh) else { continue };
                        let go_row = &go_plane[y * g.out_w + lo..y * g.out_w + hi];
                        let first = r * g.in_w + lo * g.stride + kw - g.padding;
                        if g.stride == 1 {
                            let in_row = &in_plane[first..first + (hi - lo)];
                            acc += dot(go_row, in_row);
                            let gi_row = &mut gi_plane[first..first + (hi - lo)];
                            for (dst, &d) in gi_row.iter_mut().zip(go_row) {
                                *dst += w * d;
                            }
                        } else {
                            for (n, &d) in go_row.iter().enumerate() {
                                let at = first + n * g.stride;
                                acc += d * in_plane[at];
                                gi_plane[at] += w * d;
                            }
                        }
                    }
                    gk[widx] = acc;
                }
            }
        }
    }
}

/// Pointwise nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

/// Largest `f64` strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic sigmoid, kept strictly inside (0, 1) for every finite input.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

/// Hyperbolic tangent, kept strictly inside (−1, 1).
#[inline]
pub fn tanh(x: f64) -> f64 {
    x.tanh().clamp(-BELOW_ONE, BELOW_ONE)
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => tanh(x),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the forward output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn activate(op: Activation, x: &Tensor) -> Tensor {
    x.map(|v| op.apply(v))
}

/// Backward of [`activate`], given the forward *output*.
pub fn activate_backward(op: Activation, output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    output.require_same_shape(grad_out, "activate_backward")?;
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| g * op.derivative_from_output(y))
        .collect();
    Tensor::from_vec(output.shape(), data)
}

fn matmul_dims(a: &Tensor, b: &Tensor) -> Result<(usize, usize, usize)> {
    a.require_rank(2, "matmul", "left operand")?;
    b.require_rank(2, "matmul", "right operand")?;
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    if k != k2 {
        return Err(Error::dim(
            "matmul",
            format!("inner dimensions differ: {m}×{k} · {k2}×{n}"),
        ));
    }
    Ok((m, k, n))
}

/// `a[M,K] · b[K,N]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k, n) = matmul_dims(a, b)?;
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            for (dst, &bv) in row.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                *dst += av * bv;
            }
        }
    }
    Tensor::from_vec(&[m, n], out)
}

/// Returns `(grad_out·bᵀ, aᵀ·grad_out)`.
pub fn matmul_backward(grad_out: &Tensor, a: &Tensor, b: &Tensor) -> Result<(Tensor, Tensor)> {
    let (m, k, n) = matmul_dims(a, b)?;
    if grad_out.shape() != [m, n] {
        return Err(Error::dim(
            "matmul_backward",
            format!("grad_out must be [{m}, {n}], got {:?}", grad_out.shape()),
        ));
    }
    let (ad, bd, g) = (a.data(), b.data(), grad_out.data());
    let mut ga = vec![0.0; m * k];
    let mut gb = vec![0.0; k * n];
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let b_row = &bd[p * n..(p + 1) * n];
            ga[i * k + p] = g_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            let av = ad[i * k + p];
            for (dst, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(g_row) {
                *dst += av * gv;
            }
        }
    }
    Ok((Tensor::from_vec(&[m, k], ga)?, Tensor::from_vec(&[k, n], gb)?))
}

/// `out[r] = Σ_c w[r, c] · x[c]` for a row-major `rows × x.len()` matrix.
pub(crate) fn matvec_into(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for (dst, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *dst += dot(row, x);
    }
}

/// Blocked dot product; four partial sums let the compiler vectorise.
#[inline(always)]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let (x, y) = (&a[c * 4..c * 4 + 4], &b[c * 4..c * 4 + 4]);
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Global reduction mode for the attention poolings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Avg,
    Max,
}

fn reduce(values: impl Iterator<Item = f64>, count: usize, mode: PoolMode) -> f64 {
    match mode {
        PoolMode::Avg => values.sum::<f64>() / count as f64,
        PoolMode::Max => values.fold(f64::NEG_INFINITY, f64::max),
    }
}

fn chw(x: &Tensor, op: &'static str) -> Result<(usize, usize, usize)> {
    x.require_rank(3, op, "input")?;
    Ok((x.shape()[0], x.shape()[1], x.shape()[2]))
}

/// Per-channel reduction over all spatial positions: `[C,H,W] → [C,1,1]`.
pub fn pool_channel(x: &Tensor, mode: PoolMode) -> Result<Tensor> {
    let (c, h, w) = chw(x, "pool_channel")?;
    let plane = h * w;
    let out = x
        .data()
        .chunks_exact(plane)
        .map(|p| reduce(p.iter().copied(), plane, mode))
        .collect();
    Tensor::from_vec(&[c, 1, 1], out)
}

/// Backward of [`pool_channel`]. Max routes the gradient to the first
/// maximal position of each channel.
pub fn pool_channel_backward(x: &Tensor, mode: PoolMode, grad_out: &Tensor) -> Result<Tensor> {
    let (c, h, w) = chw(x, "pool_channel_backward")?;
    if grad_out.shape() != [c, 1, 1] {
        return Err(Error::dim(
            "pool_channel_backward",
            format!("grad_out must be [{c}, 1, 1], got {:?}", grad_out.shape()),
        ));
    }
    let plane = h * w;
    let mut gi = vec![0.0; x.len()];
    for (ch, (src, dst)) in x
        .data()
        .chunks_exact(plane)
        .zip(gi.chunks_exact_mut(plane))
        .enumerate()
    {
        let g = grad_out.data()[ch];
        match mode {
            PoolMode::Avg => dst.fill(g / plane as f64),
            PoolMode::Max => dst[argmax(src)] = g,
        }
    }
    Tensor::from_vec(x.shape(), gi)
}

/// Per-position reduction across channels: `[C,H,W] → [1,H,W]`.
pub fn pool_spatial(x: &Tensor, mode: PoolMode) -> Result<Tensor> {
    let (c, h, w) = chw(x, "pool_spatial")?;
    let plane = h * w;
    let d = x.data();
    let out = (0..plane)
        .map(|p| reduce((0..c).map(|ch| d[ch * plane + p]), c, mode))
        .collect();
    Tensor::from_vec(&[1, h, w], out)
}

/// Backward of [`pool_spatial`]; max routes to the first maximal channel.
pub fn pool_spatial_backward(x: &Tensor, mode: PoolMode, grad_out: &Tensor) -> Result<Tensor> {
    let (c, h, w) = chw(x, "pool_spatial_backward")?;
    if grad_out.shape() != [1, h, w] {
        return Err(Error::dim(
            "pool_spatial_backward",
            format!("grad_out must be [1, {h}, {w}], got {:?}", grad_out.shape()),
        ));
    }
    let plane = h * w;
    let d = x.data();
    let g = grad_out.data();
    let mut gi = vec![0.0; x.len()];
    for p in 0..plane {
        match mode {
            PoolMode::Avg => {
                for ch in 0..c {
                    gi[ch * plane + p] = g[p] / c as f64;
                }
            }
            PoolMode::Max => {
                let mut best = 0;
                for ch in 1..c {
                    if d[ch * plane + p] > d[best * plane + p] {
                        best = ch;
                    }
                }
                gi[best * plane + p] = g[p];
            }
        }
    }
    Tensor::from_vec(x.shape(), gi)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
