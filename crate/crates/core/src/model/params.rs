use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::NormStats;
use crate::error::{Error, Result};
use crate::layers::{CbamParams, ConvBlockParams, LstmParams};
use crate::numerics::Tensor;

use super::ModelConfig;

/// Every learned tensor of the network. The same layout doubles as the
/// gradient accumulator during training.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub conv: Vec<ConvBlockParams>,
    pub cbam: CbamParams,
    pub compress: ConvBlockParams,
    pub lstm: Vec<LstmParams>,
    /// `[1, H]`
    pub head_w: Tensor,
    /// `[1]`
    pub head_b: Tensor,
}

/// Name and shape of every tensor in declaration order, derived from the
/// configuration alone.
pub fn tensor_layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (c, k, h) = (cfg.conv_channels, cfg.conv_kernel, cfg.lstm_hidden);
    let mut out = Vec::new();
    for d in 0..cfg.conv_depth {
        let c_in = if d == 0 { 1 } else { c };
        out.push((format!("conv{d}.kernels"), vec![c, c_in, k, k]));
        out.push((format!("conv{d}.bias"), vec![c]));
    }
    let hid = cfg.cbam_hidden();
    let ks = cfg.cbam_spatial_kernel;
    out.push(("cbam.mlp_w1".into(), vec![hid, c]));
    out.push(("cbam.mlp_b1".into(), vec![hid]));
    out.push(("cbam.mlp_w2".into(), vec![c, hid]));
    out.push(("cbam.mlp_b2".into(), vec![c]));
    out.push(("cbam.spatial_kernel".into(), vec![1, 2, ks, ks]));
    out.push(("compress.kernels".into(), vec![1, c, k, k]));
    out.push(("compress.bias".into(), vec![1]));
    let mut width = cfg.lstm_input();
    for l in 0..cfg.lstm_layers {
        for gate in ["f", "i", "c", "o"] {
            out.push((format!("lstm{l}.w_{gate}"), vec![h, h + width]));
        }
        for gate in ["f", "i", "c", "o"] {
            out.push((format!("lstm{l}.b_{gate}"), vec![h]));
        }
        width = h;
    }
    out.push(("head.w".into(), vec![1, h]));
    out.push(("head.b".into(), vec![1]));
    out
}

impl Weights {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let c = cfg.conv_channels;
        let conv = (0..cfg.conv_depth)
            .map(|d| ConvBlockParams::zeros(if d == 0 { 1 } else { c }, c, cfg.conv_kernel))
            .collect();
        let mut width = cfg.lstm_input();
        let lstm = (0..cfg.lstm_layers)
            .map(|_| {
                let p = LstmParams::zeros(width, cfg.lstm_hidden);
                width = cfg.lstm_hidden;
                p
            })
            .collect();
        Self {
            conv,
            cbam: CbamParams::zeros(c, cfg.cbam_hidden(), cfg.cbam_spatial_kernel),
            compress: ConvBlockParams::zeros(c, 1, cfg.conv_kernel),
            lstm,
            head_w: Tensor::zeros(&[1, cfg.lstm_hidden]),
            head_b: Tensor::zeros(&[1]),
        }
    }

    /// Same order as [`tensor_layout`].
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for b in &self.conv {
            out.push(&b.kernels);
            out.push(&b.bias);
        }
        let a = &self.cbam;
        out.extend([&a.mlp_w1, &a.mlp_b1, &a.mlp_w2, &a.mlp_b2, &a.spatial_kernel]);
        out.push(&self.compress.kernels);
        out.push(&self.compress.bias);
        for l in &self.lstm {
            out.extend([&l.w_f, &l.w_i, &l.w_c, &l.w_o, &l.b_f, &l.b_i, &l.b_c, &l.b_o]);
        }
        out.push(&self.head_w);
        out.push(&self.head_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for b in &mut self.conv {
            out.push(&mut b.kernels);
            out.push(&mut b.bias);
        }
        let a = &mut self.cbam;
        out.extend([
            &mut a.mlp_w1,
            &mut a.mlp_b1,
            &mut a.mlp_w2,
            &mut a.mlp_b2,
            &mut a.spatial_kernel,
        ]);
        out.push(&mut self.compress.kernels);
        out.push(&mut self.compress.bias);
        for l in &mut self.lstm {
            out.extend([
                &mut l.w_f, &mut l.w_i, &mut l.w_c, &mut l.w_o, &mut l.b_f, &mut l.b_i, &mut l.b_c,
                &mut l.b_o,
            ]);
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zero_(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    /// Checks every tensor shape against the layout implied by `cfg`.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let layout = tensor_layout(cfg);
        let tensors = self.tensors();
        if layout.len() != tensors.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, found {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in layout.iter().zip(tensors) {
            if t.shape() != shape.as_slice() {
                return Err(Error::Config(format!(
                    "parameter {name} should be {shape:?}, found {:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Number of learned scalars implied by a configuration.
pub fn param_count(cfg: &ModelConfig) -> usize {
    tensor_layout(cfg)
        .iter()
        .map(|(_, s)| s.iter().product::<usize>())
        .sum()
}

/// A configured network together with the input scaling it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub weights: Weights,
    pub norm_stats: Option<NormStats>,
}

/// Fan-in used for the init bound of each tensor in the layout.
fn fan_in(name: &str, shape: &[usize]) -> usize {
    let field = name.rsplit('.').next().unwrap_or(name);
    match field {
        // conv kernels [out, in, k, k]; the spatial kernel is [1, 2, k, k]
        "kernels" | "spatial_kernel" => shape[1] * shape[2] * shape[3],
        // dense-style matrices [out, in]
        f if f.starts_with("w_") || f == "w" || f.starts_with("mlp_w") => shape[1],
        _ => 0,
    }
}

/// Fresh parameters: uniform in `±1/√fan_in` for weights and for the biases
/// of the layer they belong to, with LSTM forget-gate biases set to 1.
pub fn build(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let layout = tensor_layout(cfg);
    let mut weights = Weights::zeros(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // biases share the bound of the weight tensor declared before them
    let mut bound = 1.0;
    for ((name, shape), t) in layout.iter().zip(weights.tensors_mut()) {
        let fi = fan_in(name, shape);
        if fi > 0 {
            bound = 1.0 / (fi as f64).sqrt();
        }
        if name.ends_with(".b_f") {
            t.fill(1.0);
            continue;
        }
        for v in t.data_mut() {
            *v = rng.gen_range(-bound..=bound);
        }
    }
    Ok(ModelParams {
        config: *cfg,
        weights,
        norm_stats: None,
    })
}

impl ModelParams {
    pub fn names(&self) -> Vec<String> {
        tensor_layout(&self.config).into_iter().map(|(n, _)| n).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.weights.validate(&self.config)?;
        if let Some(s) = &self.norm_stats {
            s.validate()?;
        }
        Ok(())
    }
}
