//! Shared setup for the criterion benchmarks: a deterministic probe
//! recording and its extracted features.

use casdet_core::features::{extract, FeatureConfig, Features};
use casdet_core::synth::{synth_recording, CorpusConfig};

pub fn probe_features(duration_s: f64) -> Features {
    let cfg = CorpusConfig { duration_s, seed: 1234, ..Default::default() };
    let entry = synth_recording(&cfg, 0).expect("probe synthesis");
    extract(&entry.recording, &FeatureConfig::default()).expect("probe features")
}

pub fn probe_recording(duration_s: f64) -> casdet_core::Recording {
    let cfg = CorpusConfig { duration_s, seed: 1234, ..Default::default() };
    synth_recording(&cfg, 0).expect("probe synthesis").recording
}
