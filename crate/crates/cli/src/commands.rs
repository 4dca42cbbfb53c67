use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use salcnn::config::RunConfig;
use salcnn::data::{
    acc_indices, bearing_dirs, compute_norm_stats, featurize, load_bearing, samples_from_features,
    synth_fleet, window_at, write_bearing, BearingFeatures, BearingRun,
};
use salcnn::dsp::{crop_to_model_bins, normalize, stft, Spectrogram};
use salcnn::io::{encode_pgm, spectrogram_csv, spectrogram_image, unit_map_image, write_file};
use salcnn::model::{build, capture_attention, ensure_config, load, save, ModelParams};
use salcnn::train::{
    evaluate_loocv, predict_pct, train_with, Estimator, NetworkEstimator, PerfectEstimator,
};
use salcnn::{CheckpointError, Error, Tensor};

use crate::args::{
    Command, EvaluateArgs, GenerateArgs, HeatmapArgs, Overrides, PredictArgs, PreprocessArgs,
    Source, TrainArgs,
};
use crate::manifest::{Inputs, Manifest};
use crate::{CliError, CliResult};

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Predict(a) => predict(a),
        Command::Heatmap(a) => heatmap(a),
        Command::Generate(a) => generate(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Reads the config file (if any). The flag says whether it has a
/// `[model]` table.
fn read_config(path: Option<&Path>) -> CliResult<(RunConfig, bool)> {
    let Some(path) = path else {
        return Ok((RunConfig::default(), false));
    };
    if !path.is_file() {
        return Err(usage(format!("config file {} does not exist", path.display())));
    }
    let text = salcnn::io::read_text(path)?;
    let name = path.display().to_string();
    let has_model = text
        .parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{name}: {}", e.message())))?
        .contains_key("model");
    Ok((RunConfig::from_toml_str(&text, &name)?, has_model))
}

/// Defaults, then the file, then flags; validated before any work.
fn resolve(path: Option<&Path>, overrides: &Overrides) -> CliResult<RunConfig> {
    let (mut cfg, _) = read_config(path)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn require_dir(path: &Path, what: &str) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| {
        CliError::Core(Error::Io {
            context: path.display().to_string(),
            source: e,
        })
    })
}

fn create_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

/// `dir/stem.suffix` for an output file `dir/stem.ext`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn load_source(source: &Source, cfg: &RunConfig) -> CliResult<(String, Vec<BearingRun>)> {
    if source.synthetic {
        let runs = synth_fleet(cfg.data.synthetic_life_n, cfg.data.synthetic_seed)?;
        return Ok(("synthetic".into(), runs));
    }
    let root = source.data_dir.clone().or_else(|| cfg.data_root()).ok_or_else(|| {
        usage(format!(
            "no data: pass --data-dir or --synthetic, set data.data_root, or set {}",
            salcnn::config::DATA_ROOT_ENV
        ))
    })?;
    require_dir(&root, "data directory")?;
    let dirs = bearing_dirs(&root)?;
    if dirs.is_empty() {
        return Err(usage(format!("no bearing directories under {}", root.display())));
    }
    let runs = dirs.iter().map(|d| load_bearing(d)).collect::<Result<Vec<_>, _>>()?;
    Ok((root.display().to_string(), runs))
}

fn featurize_all(runs: &[BearingRun], cfg: &RunConfig) -> CliResult<Vec<BearingFeatures>> {
    Ok(runs
        .iter()
        .map(|r| featurize(r, &cfg.stft, cfg.model.freq_bins))
        .collect::<Result<Vec<_>, _>>()?)
}

fn ids(runs: &[BearingRun]) -> Vec<String> {
    runs.iter().map(|r| r.id.to_string()).collect()
}

fn preprocess(a: PreprocessArgs) -> CliResult<()> {
    let (cfg, _) = read_config(a.config.as_deref())?;
    let root = a.data_dir.clone().or_else(|| cfg.data_root()).ok_or_else(|| {
        usage("no data root: pass --data-dir or set the configured/environment default")
    })?;
    let dir = root.join(&a.bearing);
    require_dir(&dir, "bearing directory")?;
    let indices = acc_indices(&dir)?;
    let run = load_bearing(&dir)?;
    create_dir(&a.out_dir)?;
    for (&i, rec) in indices.iter().zip(&run.recordings) {
        let s = stft(&rec.samples, &cfg.stft)?;
        write_file(&a.out_dir.join(format!("spec_{i:05}.csv")), spectrogram_csv(&s))?;
        write_file(&a.out_dir.join(format!("spec_{i:05}.pgm")), encode_pgm(&spectrogram_image(&s)))?;
    }
    let inputs = Inputs {
        data: dir.display().to_string(),
        bearings: vec![run.id.to_string()],
        model: None,
    };
    Manifest::new("preprocess", &cfg, inputs).write(&a.out_dir.join("manifest.toml"))?;
    eprintln!("wrote {} spectrograms to {}", indices.len(), a.out_dir.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> CliResult<()> {
    let cfg = resolve(a.config.as_deref(), &a.overrides)?;
    let (data, runs) = load_source(&a.source, &cfg)?;
    let feats = featurize_all(&runs, &cfg)?;
    let w = cfg.model.sequence_window;
    let usable: Vec<&BearingFeatures> = feats
        .iter()
        .filter(|f| {
            let ok = f.len() >= w;
            if !ok {
                eprintln!("warning: skipping bearing {}: {} recordings, window needs {w}", f.id, f.len());
            }
            ok
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::Argument(format!("no bearing has at least {w} recordings")).into());
    }
    let stats = compute_norm_stats(usable.iter().flat_map(|f| f.spectra.iter()))?;
    let mut samples = Vec::new();
    for f in &usable {
        samples.extend(samples_from_features(f, w, cfg.data.stride, Some(&stats))?);
    }
    let mut params = build(&cfg.model, cfg.train.seed)?;
    params.norm_stats = Some(stats);
    let epochs = cfg.train.epochs;
    let history = train_with(&mut params, &samples, &cfg.train, |e, l| {
        eprintln!("epoch {e}/{epochs}: train L1 {l:.6}");
    })?;
    create_parent(&a.out)?;
    save(&params, &a.out)?;
    write_file(&sibling(&a.out, "loss.csv"), history.to_csv())?;
    let inputs = Inputs {
        data,
        bearings: ids(&runs),
        model: None,
    };
    Manifest::new("train", &cfg, inputs).write(&sibling(&a.out, "manifest.toml"))?;
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let cfg = resolve(a.config.as_deref(), &a.overrides)?;
    let (data, runs) = load_source(&a.source, &cfg)?;
    let feats = featurize_all(&runs, &cfg)?;
    let mut network = NetworkEstimator {
        model: cfg.model,
        train: cfg.train,
        verbose: true,
    };
    let estimator: &mut dyn Estimator = if a.perfect_predictor {
        &mut PerfectEstimator
    } else {
        &mut network
    };
    let report = evaluate_loocv(&feats, cfg.model.sequence_window, cfg.data.stride, estimator)?;
    create_dir(&a.out_dir)?;
    write_file(&a.out_dir.join("mae_report.csv"), report.to_csv())?;
    for b in &report.bearings {
        write_file(&a.out_dir.join(format!("predictions_{}.csv", b.id)), b.to_csv())?;
    }
    let inputs = Inputs {
        data,
        bearings: ids(&runs),
        model: None,
    };
    Manifest::new("evaluate", &cfg, inputs).write(&a.out_dir.join("manifest.toml"))?;
    print!("{}", report.to_csv());
    Ok(())
}

/// Checkpoint plus the run configuration it is used under. A `[model]`
/// table in the config file must match the checkpoint exactly.
fn load_model(model: &Path, config: Option<&Path>) -> CliResult<(ModelParams, RunConfig)> {
    if !model.is_file() {
        return Err(usage(format!("checkpoint {} does not exist", model.display())));
    }
    let (mut cfg, has_model) = read_config(config)?;
    let params = load(model)?;
    if has_model {
        ensure_config(&params, &cfg.model)?;
    }
    cfg.model = params.config;
    cfg.validate()?;
    if params.norm_stats.is_none() {
        return Err(Error::from(CheckpointError::Invalid(
            "checkpoint carries no normalisation statistics".into(),
        ))
        .into());
    }
    Ok((params, cfg))
}

fn load_one(dir: &Path, cfg: &RunConfig) -> CliResult<(BearingRun, BearingFeatures)> {
    require_dir(dir, "bearing directory")?;
    let run = load_bearing(dir)?;
    let feats = featurize(&run, &cfg.stft, cfg.model.freq_bins)?;
    Ok((run, feats))
}

fn predict(a: PredictArgs) -> CliResult<()> {
    let (params, cfg) = load_model(&a.model, a.config.as_deref())?;
    let stats = params.norm_stats.expect("checked on load");
    let (run, feats) = load_one(&a.bearing_dir, &cfg)?;
    let w = cfg.model.sequence_window;
    let mut out = String::from("end_index,predicted_rul_pct\n");
    if feats.len() < w {
        eprintln!(
            "warning: bearing {} has {} recordings, fewer than the window of {w}; no predictions",
            feats.id,
            feats.len()
        );
    } else {
        for end in w - 1..feats.len() {
            let p = predict_pct(&params, &window_at(&feats, end, w, Some(&stats))?)?;
            let _ = writeln!(out, "{end},{p}");
        }
    }
    create_parent(&a.out)?;
    write_file(&a.out, out)?;
    let inputs = Inputs {
        data: a.bearing_dir.display().to_string(),
        bearings: vec![run.id.to_string()],
        model: Some(a.model.display().to_string()),
    };
    Manifest::new("predict", &cfg, inputs).write(&sibling(&a.out, "manifest.toml"))?;
    Ok(())
}

/// Resolves `early`, `mid`, `late` and integers to window end indices in
/// `w−1 ..= n−1`, keeping the first occurrence of each.
pub fn parse_indices(spec: &str, w: usize, n: usize) -> CliResult<Vec<usize>> {
    let (lo, hi) = (w - 1, n - 1);
    let mut out = Vec::new();
    for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let i = match token {
            "early" => lo,
            "mid" => lo + (hi - lo) / 2,
            "late" => hi,
            t => t
                .parse::<usize>()
                .map_err(|_| usage(format!("index `{t}` is not a number or early/mid/late")))?,
        };
        if i < lo || i > hi {
            return Err(usage(format!("index {i} out of range; valid range is {lo}..={hi}")));
        }
        if !out.contains(&i) {
            out.push(i);
        }
    }
    if out.is_empty() {
        return Err(usage("no indices given"));
    }
    Ok(out)
}

/// Row `r` of a `[rows, …]` tensor as a tensor of the trailing shape.
fn row(t: &Tensor, r: usize) -> CliResult<Tensor> {
    let inner = &t.shape()[1..];
    let len: usize = inner.iter().product();
    Ok(Tensor::from_vec(inner, t.data()[r * len..(r + 1) * len].to_vec())?)
}

fn heatmap(a: HeatmapArgs) -> CliResult<()> {
    let (params, cfg) = load_model(&a.model, a.config.as_deref())?;
    let stats = params.norm_stats.expect("checked on load");
    let (run, feats) = load_one(&a.bearing_dir, &cfg)?;
    let w = cfg.model.sequence_window;
    if feats.len() < w {
        return Err(usage(format!(
            "bearing {} has {} recordings, fewer than the window of {w}",
            feats.id,
            feats.len()
        )));
    }
    let indices = parse_indices(&a.indices, w, feats.len())?;
    let input_dir = a.out_dir.join("input");
    create_dir(&input_dir)?;
    for &i in &indices {
        let cap = capture_attention(&params, &window_at(&feats, i, w, Some(&stats))?)?;
        // maps of the last snapshot belong to recording i
        let spatial = row(&cap.spatial, w - 1)?;
        let channel = row(&cap.channel, w - 1)?;
        let spec = crop_to_model_bins(&stft(&run.recordings[i].samples, &cfg.stft)?, cfg.model.freq_bins)?;
        let axes = |m: Tensor| Spectrogram::new(m, spec.frame_times_s().to_vec(), spec.bin_freqs_hz().to_vec());

        write_file(&a.out_dir.join(format!("attn_spatial_{i:05}.pgm")), encode_pgm(&unit_map_image(&spatial)?))?;
        write_file(&a.out_dir.join(format!("attn_spatial_{i:05}.csv")), spectrogram_csv(&axes(spatial)?))?;
        let mut csv = String::from("channel,attention\n");
        for (c, v) in channel.data().iter().enumerate() {
            let _ = writeln!(csv, "{c},{v}");
        }
        write_file(&a.out_dir.join(format!("attn_channel_{i:05}.csv")), csv)?;

        let input = normalize(&spec, &stats)?;
        write_file(&input_dir.join(format!("spec_{i:05}.pgm")), encode_pgm(&spectrogram_image(&input)))?;
        write_file(&input_dir.join(format!("spec_{i:05}.csv")), spectrogram_csv(&input))?;
    }
    let inputs = Inputs {
        data: a.bearing_dir.display().to_string(),
        bearings: vec![run.id.to_string()],
        model: Some(a.model.display().to_string()),
    };
    Manifest::new("heatmap", &cfg, inputs).write(&a.out_dir.join("manifest.toml"))?;
    Ok(())
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    let overrides = Overrides {
        synthetic_life_n: a.synthetic_life_n,
        synthetic_seed: a.synthetic_seed,
        ..Default::default()
    };
    let cfg = resolve(a.config.as_deref(), &overrides)?;
    let runs = synth_fleet(cfg.data.synthetic_life_n, cfg.data.synthetic_seed)?;
    for r in &runs {
        write_bearing(r, &a.out_dir.join(r.id.to_string()))?;
    }
    let inputs = Inputs {
        data: "synthetic".into(),
        bearings: ids(&runs),
        model: None,
    };
    Manifest::new("generate", &cfg, inputs).write(&a.out_dir.join("manifest.toml"))?;
    Ok(())
}
