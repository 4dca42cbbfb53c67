use approx::assert_abs_diff_eq;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use salcnn::data::{
    acc_file_name, featurize, load_bearing, synth_bearing, synth_fleet, write_acc_csv, write_bearing, BearingId,
    SynthProfile,
};
use salcnn::dsp::{crop_to_model_bins, stft, StftConfig};
use salcnn::model::{build, forward, param_count, tensor_layout, ModelConfig};
use salcnn::train::{adam_update, evaluate_loocv, AdamState, NetworkEstimator, TrainConfig};
use salcnn::{Error, Tensor};

fn tone(freq: f64) -> Tensor {
    let data = (0..2560).map(|i| (std::f64::consts::TAU * freq * i as f64 / 25_600.0).sin()).collect();
    Tensor::new(&[2560], data).unwrap()
}

#[test]
fn pure_tones_peak_at_their_bin() {
    let cfg = StftConfig::default();
    for bin in [3, 17, 40, 64, 99, 127] {
        let s = stft(&tone(bin as f64 * 50.0), &cfg).unwrap();
        // frames away from the zero-padded edges see the full window
        for f in 1..s.frames() - 1 {
            let row = &s.magnitudes().data()[f * s.bins()..(f + 1) * s.bins()];
            let peak = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(peak, bin, "frame {f}");
        }
    }
}

#[test]
fn input_shape_from_recording_to_lstm() {
    let cfg = StftConfig::default();
    let s = stft(&tone(1000.0), &cfg).unwrap();
    assert_eq!((s.frames(), s.bins()), (11, 129));
    assert_abs_diff_eq!(s.bin_freqs_hz()[128], 6400.0);
    let cropped = crop_to_model_bins(&s, 128).unwrap();
    assert_eq!(cropped.magnitudes().shape(), [11, 128]);
    let model = ModelConfig::default();
    assert_eq!(model.lstm_input(), 1408);
    let layout = tensor_layout(&model);
    let w_f = layout.iter().find(|(n, _)| n == "lstm0.w_f").unwrap();
    assert_eq!(w_f.1, [1408, 1408 + 1408]);
}

#[test]
fn parameter_counts() {
    // counted by hand from the layer shapes
    assert_eq!(param_count(&ModelConfig::default()), 31_732_468);
    assert_eq!(param_count(&ModelConfig { lstm_hidden: 32, ..Default::default() }), 193_172);
    let tiny = ModelConfig { conv_channels: 2, lstm_hidden: 4, ..Default::default() };
    assert_eq!(param_count(&tiny), 22_859);
}

#[test]
fn synthetic_energy_moves_to_low_band() {
    let profile = SynthProfile { life_n: 20, ..Default::default() };
    let run = synth_bearing(BearingId::new("1-1"), None, &profile, 5).unwrap();
    let feats = featurize(&run, &StftConfig::default(), 128).unwrap();
    let band = |k: usize, lo: usize, hi: usize| -> f64 {
        feats.spectra[k].data().chunks_exact(128).map(|r| r[lo..hi].iter().sum::<f64>()).sum()
    };
    let low = |k| band(k, 0, 20);
    let high = |k| band(k, 80, 128);
    assert!(low(19) > 5.0 * low(0));
    assert!(high(0) > 5.0 * high(19));
    assert!(low(19) / high(19) > low(10) / high(10));
}

#[test]
fn load_orders_by_index_and_rejects_gaps() {
    let mut run = synth_fleet(6, 2).unwrap().swap_remove(0);
    let dir = tempfile::tempdir().unwrap();
    let mut order: Vec<usize> = (0..run.recordings.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    for &i in &order {
        write_acc_csv(&run.recordings[i], &dir.path().join(acc_file_name(i + 1))).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let loaded = load_bearing(dir.path()).unwrap();
    assert_eq!(loaded.recordings, run.recordings);

    std::fs::remove_file(dir.path().join(acc_file_name(3))).unwrap();
    match load_bearing(dir.path()) {
        Err(Error::Format { detail, .. }) => assert!(detail.contains("acc_00003.csv"), "{detail}"),
        other => panic!("expected a format error, got {other:?}"),
    }

    run.recordings.truncate(2);
    let two = dir.path().join("two");
    write_bearing(&run, &two).unwrap();
    assert_eq!(load_bearing(&two).unwrap().recordings.len(), 2);
}

#[test]
fn adam_on_a_parabola() {
    let cfg = TrainConfig { learning_rate: 0.1, ..Default::default() };
    let mut theta = Tensor::new(&[1], vec![1.0]).unwrap();
    let mut state = AdamState::new([&theta]);
    let names = ["theta".to_string()];
    let expected = [0.9000000005, 0.8004122286917928, 0.7015862729460303];
    for want in expected {
        let grad = theta.map(|t| 2.0 * t);
        adam_update(&mut [&mut theta], &[&grad], &names, &mut state, &cfg).unwrap();
        assert_abs_diff_eq!(theta.data()[0], want, epsilon = 1e-12);
    }
    assert_eq!(state.t, 3);
}

#[test]
fn identical_bearings_score_identically() {
    let run = synth_fleet(10, 4).unwrap().swap_remove(1);
    let stft_cfg = StftConfig::default();
    let mut a = featurize(&run, &stft_cfg, 128).unwrap();
    let mut b = a.clone();
    a.id = BearingId::new("1-1");
    b.id = BearingId::new("1-2");
    let model = ModelConfig { conv_channels: 2, lstm_hidden: 4, sequence_window: 3, ..Default::default() };
    let train = TrainConfig { epochs: 2, batch_size: 4, seed: 1, ..Default::default() };
    let mut est = NetworkEstimator { model, train, verbose: false };
    let report = evaluate_loocv(&[a, b], 3, 1, &mut est).unwrap();
    assert_eq!(report.bearings.len(), 2);
    assert_eq!(report.bearings[0].mae, report.bearings[1].mae);
    assert_eq!(report.bearings[0].series.len(), 8);
}

#[test]
fn dropout_only_acts_in_training() {
    let cfg = ModelConfig { conv_channels: 2, lstm_hidden: 4, dropout: 0.5, ..Default::default() };
    let params = build(&cfg, 2).unwrap();
    let data = (0..5 * 11 * 128).map(|i| ((i % 37) as f64) / 37.0).collect();
    let window = Tensor::new(&[5, 11, 128], data).unwrap();
    let eval = forward(&params, &window, false, 0).unwrap();
    assert_eq!(eval, forward(&params, &window, false, 99).unwrap());
    let trained: Vec<f64> = (0..8).map(|s| forward(&params, &window, true, s).unwrap()).collect();
    assert!(trained.iter().any(|&y| y != eval));
    assert_eq!(trained[3], forward(&params, &window, true, 3).unwrap());
}
