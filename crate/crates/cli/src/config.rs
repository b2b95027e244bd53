//! Optional TOML configuration: one table per subcommand, every key
//! mirroring a flag. Flags always win over file values.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub synth: SynthFile,
    #[serde(default)]
    pub train: TrainFile,
    #[serde(default)]
    pub predict: PredictFile,
    #[serde(default)]
    pub evaluate: EvaluateFile,
    #[serde(default)]
    pub benchmark: BenchmarkFile,
    #[serde(default)]
    pub report: ReportFile,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    pub out: Option<PathBuf>,
    pub n_recordings: Option<usize>,
    pub duration_s: Option<f64>,
    pub sample_rate: Option<u32>,
    pub max_events: Option<usize>,
    pub mean_duration_s: Option<f64>,
    pub snr_db: Option<f64>,
    pub noise_rms: Option<f64>,
    pub rhonchus_harmonics: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub variant: Option<String>,
    pub lr0: Option<f64>,
    pub decay_factor: Option<f64>,
    pub plateau_patience: Option<usize>,
    pub early_stop_patience: Option<usize>,
    pub folds: Option<usize>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub width_scale: Option<f64>,
    pub gru_hidden: Option<usize>,
    pub dropout: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictFile {
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub theta: Option<f64>,
    pub merge_gap_s: Option<f64>,
    pub merge_peak_hz: Option<f64>,
    pub min_duration_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateFile {
    pub manifest: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub theta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkFile {
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
    pub warmup: Option<usize>,
    pub duration_s: Option<f64>,
    pub width_scale: Option<f64>,
    pub gru_hidden: Option<usize>,
    pub variants: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub metrics: Option<PathBuf>,
    pub roc: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Flag value, then config value, then the built-in default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flag value or config value; erroring out as a usage problem otherwise.
pub fn need<T>(flag: Option<T>, file: Option<T>, what: &str) -> Result<T, CliError> {
    flag.or(file).ok_or_else(|| {
        CliError::Usage(format!("missing {what}: pass the flag or set it in the config file"))
    })
}
