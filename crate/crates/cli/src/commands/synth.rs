use std::path::PathBuf;

use clap::Args;

use casdet_core::audio::write_wav;
use casdet_core::dataset::write_manifest;
use casdet_core::labels::write_labels;
use casdet_core::synth::{synth_corpus, CorpusConfig};
use casdet_core::Error;

use crate::config::{need, pick, SynthFile};
use crate::CliError;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for WAVs, label files, and the manifest
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Number of recordings
    #[arg(long = "n", value_name = "N")]
    n_recordings: Option<usize>,

    /// Recording duration in seconds
    #[arg(long, value_name = "S")]
    duration_s: Option<f64>,

    #[arg(long, value_name = "HZ")]
    sample_rate: Option<u32>,

    /// Events per recording are drawn from 0..=MAX
    #[arg(long, value_name = "MAX")]
    max_events: Option<usize>,

    /// Target mean event duration in seconds
    #[arg(long, value_name = "S")]
    mean_duration_s: Option<f64>,

    /// Tone power over the noise floor, in dB
    #[arg(long, value_name = "DB")]
    snr_db: Option<f64>,

    /// RMS of the pink-noise background
    #[arg(long, value_name = "RMS")]
    noise_rms: Option<f64>,

    /// Allow harmonics on rhonchus events
    #[arg(long)]
    rhonchus_harmonics: bool,

    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

pub fn run(args: SynthArgs, file: &SynthFile) -> Result<(), CliError> {
    let defaults = CorpusConfig::default();
    let out = need(args.out, file.out.clone(), "--out")?;
    let cfg = CorpusConfig {
        n_recordings: pick(args.n_recordings, file.n_recordings, defaults.n_recordings),
        duration_s: pick(args.duration_s, file.duration_s, defaults.duration_s),
        sample_rate: pick(args.sample_rate, file.sample_rate, defaults.sample_rate),
        max_events: pick(args.max_events, file.max_events, defaults.max_events),
        mean_duration_s: pick(args.mean_duration_s, file.mean_duration_s, defaults.mean_duration_s),
        snr_db: pick(args.snr_db, file.snr_db, defaults.snr_db),
        noise_rms: pick(args.noise_rms, file.noise_rms, defaults.noise_rms),
        rhonchus_harmonics: args.rhonchus_harmonics
            || file.rhonchus_harmonics.unwrap_or(defaults.rhonchus_harmonics),
        seed: pick(args.seed, file.seed, defaults.seed),
    };

    let corpus = synth_corpus(&cfg)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let mut pairs = Vec::with_capacity(corpus.len());
    let mut n_events = 0usize;
    for entry in &corpus.entries {
        let wav = PathBuf::from(format!("{}.wav", entry.recording.id));
        let lab = PathBuf::from(format!("{}.txt", entry.recording.id));
        write_wav(&out.join(&wav), entry.recording.sample_rate, &entry.recording.samples)?;
        write_labels(&out.join(&lab), &entry.labels, Some(cfg.seed))?;
        n_events += entry.labels.len();
        pairs.push((wav, lab));
    }
    write_manifest(&out.join("manifest.txt"), &pairs, Some(cfg.seed))?;

    println!(
        "wrote {} recordings ({} events) to {}",
        corpus.len(),
        n_events,
        out.display()
    );
    Ok(())
}
