use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use serde::Serialize;

use casdet_core::dataset::load_dataset;
use casdet_core::model::checkpoint;
use casdet_core::train::{prepare_dataset, train_cv, StoppingReason, TrainConfig};
use casdet_core::{Error, ModelSpec, Variant};

use crate::config::{need, pick, TrainFile};
use crate::CliError;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Manifest of `<wav> <labels>` pairs
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,

    /// Output directory for checkpoints, histories, and the summary
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// baseline | rb1 | rb2 | cnn96 | cnn128 | multipath
    #[arg(long, value_name = "NAME")]
    variant: Option<String>,

    /// Initial learning rate
    #[arg(long, value_name = "LR")]
    lr0: Option<f64>,

    /// Learning-rate multiplier on validation plateau
    #[arg(long, value_name = "F")]
    decay_factor: Option<f64>,

    /// Epochs without a new best before the learning rate decays
    #[arg(long, value_name = "N")]
    plateau_patience: Option<usize>,

    /// Epochs without a new best before training stops
    #[arg(long, value_name = "N")]
    early_stop_patience: Option<usize>,

    /// Cross-validation folds
    #[arg(long, value_name = "K")]
    folds: Option<usize>,

    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,

    #[arg(long, value_name = "N")]
    max_epochs: Option<usize>,

    /// Channel-width multiplier applied to every convolution
    #[arg(long, value_name = "F")]
    width_scale: Option<f64>,

    /// Recurrent state size per direction
    #[arg(long, value_name = "H")]
    gru_hidden: Option<usize>,

    /// Dropout rate after each pooling stage
    #[arg(long, value_name = "P")]
    dropout: Option<f64>,

    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct FoldSummary {
    fold: usize,
    best_epoch: usize,
    best_val_loss: f64,
    n_epochs: usize,
    stopping_reason: StoppingReason,
    threshold: f64,
    val_ids: Vec<String>,
}

#[derive(Serialize)]
struct TrainSummary {
    seed: u64,
    variant: String,
    width_scale: f64,
    gru_hidden: usize,
    dropout_rate: f64,
    n_folds: usize,
    n_recordings: usize,
    folds: Vec<FoldSummary>,
}

pub fn run(args: TrainArgs, file: &TrainFile) -> Result<(), CliError> {
    let manifest = need(args.manifest, file.manifest.clone(), "--manifest")?;
    let out = need(args.out, file.out.clone(), "--out")?;
    let variant_name = pick(args.variant, file.variant.clone(), "baseline".to_string());
    let variant = Variant::from_str(&variant_name)?;

    let base = ModelSpec::for_variant(variant);
    let spec = ModelSpec {
        gru_hidden: pick(args.gru_hidden, file.gru_hidden, base.gru_hidden),
        dropout_rate: pick(args.dropout, file.dropout, base.dropout_rate),
        width_scale: pick(args.width_scale, file.width_scale, base.width_scale),
        ..base
    };
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        lr0: pick(args.lr0, file.lr0, defaults.lr0),
        decay_factor: pick(args.decay_factor, file.decay_factor, defaults.decay_factor),
        plateau_patience: pick(args.plateau_patience, file.plateau_patience, defaults.plateau_patience),
        early_stop_patience: pick(
            args.early_stop_patience,
            file.early_stop_patience,
            defaults.early_stop_patience,
        ),
        n_folds: pick(args.folds, file.folds, defaults.n_folds),
        batch_size: pick(args.batch_size, file.batch_size, defaults.batch_size),
        max_epochs: pick(args.max_epochs, file.max_epochs, defaults.max_epochs),
        seed: pick(args.seed, file.seed, defaults.seed),
    };
    cfg.validate()?;

    let dataset = load_dataset(&manifest)?;
    println!("loaded {} recordings from {}", dataset.len(), manifest.display());
    let prepared = prepare_dataset(&dataset)?;

    let outcomes = train_cv(&spec, &prepared, &cfg)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let mut folds = Vec::with_capacity(outcomes.len());
    for mut outcome in outcomes {
        let ckpt = out.join(format!("fold_{}.ckpt", outcome.fold));
        checkpoint::save(&mut outcome.model, &ckpt)?;

        let history_path = out.join(format!("history_fold_{}.csv", outcome.fold));
        let csv = format!("# seed {}\n{}", cfg.seed, outcome.history.to_csv());
        std::fs::write(&history_path, csv).map_err(|e| Error::io(&history_path, e))?;

        let best_val_loss = outcome.history.best_val_loss();
        println!(
            "fold {}: {} epochs, best epoch {} (val loss {:.6}), threshold {:.4}",
            outcome.fold,
            outcome.history.epochs.len(),
            outcome.history.best_epoch,
            best_val_loss,
            outcome.threshold,
        );
        folds.push(FoldSummary {
            fold: outcome.fold,
            best_epoch: outcome.history.best_epoch,
            best_val_loss,
            n_epochs: outcome.history.epochs.len(),
            stopping_reason: outcome.history.stopping_reason,
            threshold: outcome.threshold,
            val_ids: outcome.val_indices.iter().map(|&i| prepared[i].id.clone()).collect(),
        });
    }

    let summary = TrainSummary {
        seed: cfg.seed,
        variant: variant.name().to_string(),
        width_scale: spec.width_scale,
        gru_hidden: spec.gru_hidden,
        dropout_rate: spec.dropout_rate,
        n_folds: cfg.n_folds,
        n_recordings: prepared.len(),
        folds,
    };
    let path = out.join("summary.json");
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Data(format!("cannot serialize summary: {e}")))?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}
