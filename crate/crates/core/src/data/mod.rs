//! Vibration recordings on disk, windowed spectrogram datasets, and a
//! synthetic run-to-failure generator.

mod bearing;
mod dataset;
mod recording;
mod synth;

pub use bearing::{
    acc_file_name, acc_indices, bearing_dirs, load_bearing, write_bearing, BearingId, BearingRun,
    Condition,
};
pub use dataset::{
    build_dataset, compute_norm_stats, featurize, recording_spectrogram, rul_label_pct,
    samples_from_features, window_at, window_count, BearingFeatures, Sample,
};
pub use recording::{
    acc_csv_string, parse_acc_csv, parse_acc_csv_str, write_acc_csv, Recording, Timestamp,
    RECORDING_LEN, SAMPLE_RATE_HZ,
};
pub use synth::{
    fleet_profile, synth_bearing, synth_fleet, SynthProfile, CAPTURE_INTERVAL_S, FLEET_LAYOUT,
};
