//! Standard LSTM cell over `z = [h_{t−1}, x_t]`:
//! `f, i, o = σ(W·z + b)`, `c̃ = tanh(W_c·z + b_c)`,
//! `c_t = f ⊙ c_{t−1} + i ⊙ c̃`, `h_t = o ⊙ tanh(c_t)`.

use crate::error::{Error, Result};
use crate::numerics::ops::matvec_into;
use crate::numerics::{sigmoid, tanh, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_f: Tensor,
    pub w_i: Tensor,
    pub w_c: Tensor,
    pub w_o: Tensor,
    pub b_f: Tensor,
    pub b_i: Tensor,
    pub b_c: Tensor,
    pub b_o: Tensor,
}

const GATES: [&str; 4] = ["forget", "input", "candidate", "output"];

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = Tensor::zeros(&[hidden, hidden + input]);
        let b = Tensor::zeros(&[hidden]);
        Self {
            w_f: w.clone(),
            w_i: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_f: b.clone(),
            b_i: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_f.shape()[0]
    }

    pub fn input_size(&self) -> usize {
        self.w_f.shape().get(1).copied().unwrap_or(0).saturating_sub(self.hidden())
    }

    fn weights(&self) -> [&Tensor; 4] {
        [&self.w_f, &self.w_i, &self.w_c, &self.w_o]
    }

    fn biases(&self) -> [&Tensor; 4] {
        [&self.b_f, &self.b_i, &self.b_c, &self.b_o]
    }

    /// Checks every gate against `[H, H + input]` / `[H]`.
    pub fn validate(&self, input: usize) -> Result<()> {
        let h = self.hidden();
        for (name, (w, b)) in GATES.iter().zip(self.weights().into_iter().zip(self.biases())) {
            if w.shape() != [h, h + input] {
                return Err(Error::dim(
                    "lstm_cell",
                    format!(
                        "{name} gate weight must be [{h}, {}], got {:?}",
                        h + input,
                        w.shape()
                    ),
                ));
            }
            if b.shape() != [h] {
                return Err(Error::dim(
                    "lstm_cell",
                    format!("{name} gate bias must be [{h}], got {:?}", b.shape()),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: Tensor::zeros(&[hidden]),
            c: Tensor::zeros(&[hidden]),
        }
    }
}

/// Activations of one step, kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct StepCache {
    z: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl StepCache {
    pub fn forget_gate(&self) -> &[f64] {
        &self.f
    }
    pub fn input_gate(&self) -> &[f64] {
        &self.i
    }
    pub fn output_gate(&self) -> &[f64] {
        &self.o
    }
    pub fn candidate(&self) -> &[f64] {
        &self.g
    }
}

fn step(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &LstmParams) -> (Vec<f64>, Vec<f64>, StepCache) {
    let hid = p.hidden();
    let mut z = Vec::with_capacity(hid + x.len());
    z.extend_from_slice(h_prev);
    z.extend_from_slice(x);
    let gate = |w: &Tensor, b: &Tensor, act: fn(f64) -> f64| -> Vec<f64> {
        let mut pre = b.data().to_vec();
        matvec_into(w.data(), &z, &mut pre);
        pre.into_iter().map(act).collect()
    };
    let f = gate(&p.w_f, &p.b_f, sigmoid);
    let i = gate(&p.w_i, &p.b_i, sigmoid);
    let g = gate(&p.w_c, &p.b_c, tanh);
    let o = gate(&p.w_o, &p.b_o, sigmoid);
    let c: Vec<f64> = (0..hid).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|&v| tanh(v)).collect();
    let h: Vec<f64> = (0..hid).map(|k| o[k] * tanh_c[k]).collect();
    let cache = StepCache {
        z,
        f,
        i,
        g,
        o,
        c_prev: c_prev.to_vec(),
        tanh_c,
    };
    (h, c, cache)
}

/// One LSTM step.
pub fn lstm_cell(x: &Tensor, prev: &LstmState, p: &LstmParams) -> Result<LstmState> {
    Ok(lstm_cell_cached(x, prev, p)?.0)
}

pub fn lstm_cell_cached(x: &Tensor, prev: &LstmState, p: &LstmParams) -> Result<(LstmState, StepCache)> {
    x.require_rank(1, "lstm_cell", "input")?;
    p.validate(x.len())?;
    let hid = p.hidden();
    if prev.h.shape() != [hid] || prev.c.shape() != [hid] {
        return Err(Error::dim(
            "lstm_cell",
            format!(
                "state must be [{hid}], got h {:?}, c {:?}",
                prev.h.shape(),
                prev.c.shape()
            ),
        ));
    }
    let (h, c, cache) = step(x.data(), prev.h.data(), prev.c.data(), p);
    Ok((
        LstmState {
            h: Tensor::from_vec(&[hid], h)?,
            c: Tensor::from_vec(&[hid], c)?,
        },
        cache,
    ))
}

/// Per-layer step caches of a stacked pass.
#[derive(Debug, Clone)]
pub struct SequenceCache {
    layers: Vec<Vec<StepCache>>,
    input_size: usize,
}

impl SequenceCache {
    pub fn steps(&self, layer: usize) -> &[StepCache] {
        &self.layers[layer]
    }
}

fn check_stack(xs: &Tensor, layers: &[LstmParams]) -> Result<()> {
    xs.require_rank(2, "lstm_sequence", "input sequence")?;
    if layers.is_empty() {
        return Err(Error::arg("lstm_sequence needs at least one layer"));
    }
    let mut width = xs.shape()[1];
    for p in layers {
        p.validate(width)?;
        width = p.hidden();
    }
    Ok(())
}

/// Runs a stack of LSTM layers over `xs[T, D]` from zero state and returns
/// the top layer's hidden states `[T, H]`.
pub fn lstm_sequence(xs: &Tensor, layers: &[LstmParams]) -> Result<Tensor> {
    Ok(lstm_sequence_cached(xs, layers)?.0)
}

pub fn lstm_sequence_cached(xs: &Tensor, layers: &[LstmParams]) -> Result<(Tensor, SequenceCache)> {
    if xs.ndim() == 2 && xs.shape()[0] == 0 {
        return Err(Error::arg("lstm_sequence needs at least one step"));
    }
    check_stack(xs, layers)?;
    let steps = xs.shape()[0];
    let mut current: Vec<Vec<f64>> = xs.data().chunks_exact(xs.shape()[1]).map(<[f64]>::to_vec).collect();
    let mut caches = Vec::with_capacity(layers.len());
    for p in layers {
        let hid = p.hidden();
        let mut h = vec![0.0; hid];
        let mut c = vec![0.0; hid];
        let mut outs = Vec::with_capacity(steps);
        let mut layer_cache = Vec::with_capacity(steps);
        for x in &current {
            let (h_new, c_new, cache) = step(x, &h, &c, p);
            outs.push(h_new.clone());
            layer_cache.push(cache);
            h = h_new;
            c = c_new;
        }
        caches.push(layer_cache);
        current = outs;
    }
    let top = layers.last().expect("non-empty stack").hidden();
    let out = Tensor::from_vec(&[steps, top], current.concat())?;
    Ok((
        out,
        SequenceCache {
            layers: caches,
            input_size: xs.shape()[1],
        },
    ))
}

/// `dst += a · src`
#[inline]
fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

/// Backpropagation through time for a stacked pass. `grad_hs[T, H_top]`
/// is the loss gradient with respect to every top-layer hidden state.
/// Parameter gradients are accumulated into `grads`; the gradient with
/// respect to the input sequence is returned.
pub fn lstm_sequence_backward(
    grad_hs: &Tensor,
    cache: &SequenceCache,
    layers: &[LstmParams],
    grads: &mut [LstmParams],
) -> Result<Tensor> {
    if layers.len() != cache.layers.len() || grads.len() != layers.len() {
        return Err(Error::dim(
            "lstm_sequence_backward",
            format!(
                "{} layers, {} cached, {} gradient slots",
                layers.len(),
                cache.layers.len(),
                grads.len()
            ),
        ));
    }
    let steps = cache.layers[0].len();
    let top = layers.last().map(LstmParams::hidden).unwrap_or(0);
    if grad_hs.shape() != [steps, top] {
        return Err(Error::dim(
            "lstm_sequence_backward",
            format!("grad must be [{steps}, {top}], got {:?}", grad_hs.shape()),
        ));
    }
    let mut upstream: Vec<Vec<f64>> = grad_hs.data().chunks_exact(top).map(<[f64]>::to_vec).collect();
    for (li, p) in layers.iter().enumerate().rev() {
        let hid = p.hidden();
        let width = p.w_f.shape()[1];
        let g = &mut grads[li];
        let mut dh_next = vec![0.0; hid];
        let mut dc_next = vec![0.0; hid];
        let mut d_inputs = vec![Vec::new(); steps];
        let mut da = [vec![0.0; hid], vec![0.0; hid], vec![0.0; hid], vec![0.0; hid]];
        for t in (0..steps).rev() {
            let s = &cache.layers[li][t];
            for k in 0..hid {
                let dh = upstream[t][k] + dh_next[k];
                let o = s.o[k];
                let tc = s.tanh_c[k];
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                da[0][k] = dc * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
                da[1][k] = dc * s.g[k] * s.i[k] * (1.0 - s.i[k]);
                da[2][k] = dc * s.i[k] * (1.0 - s.g[k] * s.g[k]);
                da[3][k] = dh * tc * o * (1.0 - o);
                dc_next[k] = dc * s.f[k];
            }
            let mut dz = vec![0.0; width];
            let weights = [&p.w_f, &p.w_i, &p.w_c, &p.w_o];
            let gw = [&mut g.w_f, &mut g.w_i, &mut g.w_c, &mut g.w_o];
            for ((w, gw), d) in weights.into_iter().zip(gw).zip(&da) {
                let wd = w.data();
                let gwd = gw.data_mut();
                for k in 0..hid {
                    if d[k] == 0.0 {
                        continue;
                    }
                    axpy(&mut gwd[k * width..(k + 1) * width], d[k], &s.z);
                    axpy(&mut dz, d[k], &wd[k * width..(k + 1) * width]);
                }
            }
            for (gb, d) in [&mut g.b_f, &mut g.b_i, &mut g.b_c, &mut g.b_o].into_iter().zip(&da) {
                axpy(gb.data_mut(), 1.0, d);
            }
            dh_next.copy_from_slice(&dz[..hid]);
            d_inputs[t] = dz[hid..].to_vec();
        }
        upstream = d_inputs;
    }
    Tensor::from_vec(&[steps, cache.input_size], upstream.concat())
}
