use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;

use casdet_core::features::{extract, FeatureConfig};
use casdet_core::latency::{benchmark_variants, latency_csv, latency_table};
use casdet_core::synth::{synth_recording, CorpusConfig};
use casdet_core::{Error, ModelSpec, Variant};

use crate::config::{need, pick, BenchmarkFile};
use crate::CliError;

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Output directory for latency.csv and latency.txt
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Timed repetitions per variant (median of N)
    #[arg(long, value_name = "N")]
    reps: Option<usize>,

    /// Untimed warm-up runs per variant
    #[arg(long, value_name = "N")]
    warmup: Option<usize>,

    /// Duration of the synthetic probe recording, in seconds
    #[arg(long, value_name = "S")]
    duration_s: Option<f64>,

    /// Channel-width multiplier applied to every convolution
    #[arg(long, value_name = "F")]
    width_scale: Option<f64>,

    /// Recurrent state size per direction
    #[arg(long, value_name = "H")]
    gru_hidden: Option<usize>,

    /// Comma-separated variants; the baseline is always included
    #[arg(long, value_name = "LIST")]
    variants: Option<String>,

    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

pub fn run(args: BenchmarkArgs, file: &BenchmarkFile) -> Result<(), CliError> {
    let out = need(args.out, file.out.clone(), "--out")?;
    let reps = pick(args.reps, file.reps, 30);
    let warmup = pick(args.warmup, file.warmup, 3);
    let duration_s = pick(args.duration_s, file.duration_s, 15.0);
    let width_scale = pick(args.width_scale, file.width_scale, 1.0);
    let gru_hidden = pick(args.gru_hidden, file.gru_hidden, 256);
    let seed = pick(args.seed, file.seed, 0);
    if reps < 1 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }

    let mut variants: Vec<Variant> = match pick(args.variants, file.variants.clone(), String::new())
    {
        s if s.is_empty() => Variant::ALL.to_vec(),
        s => s
            .split(',')
            .map(|name| Variant::from_str(name.trim()))
            .collect::<Result<_, _>>()?,
    };
    if !variants.contains(&Variant::Baseline) {
        variants.insert(0, Variant::Baseline);
    }
    let specs: Vec<ModelSpec> = variants
        .iter()
        .map(|&v| ModelSpec { gru_hidden, width_scale, ..ModelSpec::for_variant(v) })
        .collect();

    let probe = synth_recording(&CorpusConfig { duration_s, seed, ..Default::default() }, 0)?;
    let features = extract(&probe.recording, &FeatureConfig::default())?;
    println!(
        "timing {} variants on a {:.1} s probe ({} rows x {} frames, {reps} reps)...",
        specs.len(),
        duration_s,
        features.matrix.n_rows(),
        features.matrix.n_frames,
    );

    let rows = benchmark_variants(&specs, &features.matrix, reps, warmup, seed)?;

    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let csv_path = out.join("latency.csv");
    std::fs::write(&csv_path, format!("# seed {seed}\n{}", latency_csv(&rows)))
        .map_err(|e| Error::io(&csv_path, e))?;
    let table = latency_table(&rows);
    let txt_path = out.join("latency.txt");
    std::fs::write(&txt_path, format!("# seed {seed}\n{table}"))
        .map_err(|e| Error::io(&txt_path, e))?;

    print!("{table}");
    println!("wrote {} and {}", csv_path.display(), txt_path.display());
    Ok(())
}
