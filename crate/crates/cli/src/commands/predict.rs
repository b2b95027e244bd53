use std::path::PathBuf;

use clap::Args;

use casdet_core::audio::read_wav;
use casdet_core::features::{extract, FeatureConfig};
use casdet_core::model::checkpoint;
use casdet_core::postprocess::{detect_events, write_events, MergeConfig};
use casdet_core::Error;

use crate::config::{need, pick, PredictFile};
use crate::CliError;

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model checkpoint
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,

    /// Output directory for `<id>_probs.csv` and `<id>_events.txt`
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Decision threshold; defaults to the one stored in the checkpoint
    #[arg(long, value_name = "THETA")]
    theta: Option<f64>,

    /// Merge gap between events, in seconds
    #[arg(long, value_name = "S")]
    merge_gap_s: Option<f64>,

    /// Merge peak-frequency tolerance, in Hz
    #[arg(long, value_name = "HZ")]
    merge_peak_hz: Option<f64>,

    /// Minimum surviving event duration, in seconds
    #[arg(long, value_name = "S")]
    min_duration_s: Option<f64>,

    /// Recordings to run
    #[arg(value_name = "WAV", required = true)]
    inputs: Vec<PathBuf>,
}

pub fn run(args: PredictArgs, file: &PredictFile) -> Result<(), CliError> {
    let model_path = need(args.model, file.model.clone(), "--model")?;
    let out = need(args.out, file.out.clone(), "--out")?;
    let mut model = checkpoint::load(&model_path)?;
    let theta = pick(args.theta, file.theta, model.threshold);
    if !(0.0..=1.0).contains(&theta) {
        return Err(CliError::Usage(format!("--theta must lie in [0, 1], got {theta}")));
    }

    let merge_defaults = MergeConfig::default();
    let merge = MergeConfig {
        gap_s: pick(args.merge_gap_s, file.merge_gap_s, merge_defaults.gap_s),
        peak_hz: pick(args.merge_peak_hz, file.merge_peak_hz, merge_defaults.peak_hz),
        min_duration_s: pick(args.min_duration_s, file.min_duration_s, merge_defaults.min_duration_s),
    };
    merge.validate()?;

    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let feature_cfg = FeatureConfig::default();

    for wav in &args.inputs {
        let recording = read_wav(wav)?;
        let features = extract(&recording, &feature_cfg)?;
        let (probs, grid) = model.predict(&features.matrix)?;

        let mut csv = format!("# seed {}\nt,prob\n", model.seed);
        for (m, &p) in probs.iter().enumerate() {
            csv.push_str(&format!("{:.3},{:.9}\n", m as f64 * grid.hop_s, p));
        }
        let probs_path = out.join(format!("{}_probs.csv", recording.id));
        std::fs::write(&probs_path, csv).map_err(|e| Error::io(&probs_path, e))?;

        let events = detect_events(&probs, theta, &grid, &features.spectrogram, &merge)?;
        let events_path = out.join(format!("{}_events.txt", recording.id));
        write_events(&events_path, &events, Some(model.seed))?;

        println!("{}: {} events at theta {:.4}", recording.id, events.len(), theta);
    }
    Ok(())
}
