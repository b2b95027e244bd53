//! Cross-validated training: Adam at 1e-4 with 0.2× plateau decay
//! (patience 10), early stop after 50 non-improving epochs, best-epoch
//! weight restore, and accuracy-optimal threshold selection.

use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::rasterize_labels;
use crate::features::{extract, FeatureConfig, FeatureMatrix, FrameGrid, Spectrogram};
use crate::labels::LabelEvent;
use crate::model::{build_model, output_len, Model, ModelSpec};
use crate::tensor::{bce_loss, Adam, Phase, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay_factor: f64,
    pub plateau_patience: usize,
    pub early_stop_patience: usize,
    pub n_folds: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 1e-4,
            decay_factor: 0.2,
            plateau_patience: 10,
            early_stop_patience: 50,
            n_folds: 5,
            batch_size: 16,
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) || !self.lr0.is_finite() {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return Err(Error::Config(format!(
                "decay_factor must lie in (0, 1), got {}",
                self.decay_factor
            )));
        }
        if self.plateau_patience == 0 || self.plateau_patience >= self.early_stop_patience {
            return Err(Error::Config(format!(
                "plateau_patience ({}) must be positive and below early_stop_patience ({})",
                self.plateau_patience, self.early_stop_patience
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be at least 1".into()));
        }
        if self.n_folds < 2 {
            return Err(Error::Config(format!("n_folds must be at least 2, got {}", self.n_folds)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingReason {
    EarlyStop,
    MaxEpochs,
    Observer,
}

#[derive(Debug, Clone, Serialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights the returned model carries.
    pub best_epoch: usize,
    pub stopping_reason: StoppingReason,
}

impl History {
    pub fn best_val_loss(&self) -> f64 {
        self.epochs[self.best_epoch - 1].val_loss
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,lr\n");
        for r in &self.epochs {
            out.push_str(&format!("{},{:.9},{:.9},{:.9e}\n", r.epoch, r.train_loss, r.val_loss, r.lr));
        }
        out
    }
}

/// One recording, fully preprocessed: normalized features, the
/// pre-normalization spectrogram (postprocessing needs it for peak
/// frequencies), and ground truth rasterized at the model's output grid.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub id: String,
    pub features: FeatureMatrix,
    pub spectrogram: Spectrogram,
    pub labels: Vec<LabelEvent>,
    pub target: Vec<f64>,
    pub out_grid: FrameGrid,
}

/// Preprocess every entry of a dataset. Fails on recordings too short to
/// produce at least one output step.
pub fn prepare_dataset(dataset: &Dataset) -> Result<Vec<PreparedSample>> {
    let cfg = FeatureConfig::default();
    let mut out = Vec::with_capacity(dataset.len());
    for entry in &dataset.entries {
        let feats = extract(&entry.recording, &cfg)?;
        let k = output_len(feats.matrix.n_frames);
        if k == 0 {
            return Err(Error::Data(format!(
                "recording {} too short: {} feature frames",
                entry.recording.id, feats.matrix.n_frames
            )));
        }
        let out_grid = FrameGrid { n_frames: k, hop_s: feats.matrix.grid.hop_s * 2.0 };
        let target: Vec<f64> = rasterize_labels(&entry.labels, &out_grid)?
            .into_iter()
            .map(f64::from)
            .collect();
        out.push(PreparedSample {
            id: entry.recording.id.clone(),
            features: feats.matrix,
            spectrogram: feats.spectrogram,
            labels: entry.labels.clone(),
            target,
            out_grid,
        });
    }
    Ok(out)
}

/// Shuffle indices with the seed, then slice into `n_folds` contiguous
/// chunks whose sizes differ by at most one. Returns (train, validation)
/// index lists per fold.
pub fn kfold_split(n: usize, n_folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if n_folds < 2 {
        return Err(Error::Config(format!("n_folds must be at least 2, got {n_folds}")));
    }
    if n < n_folds {
        return Err(Error::Data(format!("{n} entries cannot be split into {n_folds} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);

    let base = n / n_folds;
    let extra = n % n_folds;
    let mut folds = Vec::with_capacity(n_folds);
    let mut start = 0;
    for f in 0..n_folds {
        let size = base + usize::from(f < extra);
        let val: Vec<usize> = idx[start..start + size].to_vec();
        let train: Vec<usize> =
            idx[..start].iter().chain(&idx[start + size..]).copied().collect();
        folds.push((train, val));
        start += size;
    }
    Ok(folds)
}

/// Threshold with the best segment accuracy over the candidate grid
/// ({0, 1} plus every midpoint of adjacent unique scores); ties break toward
/// the smallest candidate.
pub fn select_threshold(probs: &[f64], truth: &[u8]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::Data("select_threshold: empty input".into()));
    }
    if probs.len() != truth.len() {
        return Err(Error::shape(
            "select_threshold",
            format!("{} scores", truth.len()),
            format!("{} scores", probs.len()),
        ));
    }
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("select_threshold: non-finite score".into()));
    }
    if truth.iter().any(|&t| t > 1) {
        return Err(Error::Data("select_threshold: truth must be 0/1".into()));
    }

    // group scores: per unique value, how many positives / negatives
    let mut pairs: Vec<(f64, u8)> = probs.iter().copied().zip(truth.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut uniq: Vec<(f64, usize, usize)> = Vec::new(); // (value, n_pos, n_neg)
    for (p, t) in pairs {
        match uniq.last_mut() {
            Some(last) if last.0 == p => {
                last.1 += usize::from(t == 1);
                last.2 += usize::from(t == 0);
            }
            _ => uniq.push((p, usize::from(t == 1), usize::from(t == 0))),
        }
    }

    let mut candidates = vec![0.0];
    for w in uniq.windows(2) {
        candidates.push((w[0].0 + w[1].0) / 2.0);
    }
    candidates.push(1.0);
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();

    // prefix_neg[i] = negatives below uniq[i]; suffix_pos[i] = positives at or
    // above uniq[i]; at threshold θ, correct = prefix_neg[cut] + suffix_pos[cut]
    // where cut is the first unique value ≥ θ
    let u = uniq.len();
    let mut prefix_neg = vec![0usize; u + 1];
    let mut suffix_pos = vec![0usize; u + 1];
    for i in 0..u {
        prefix_neg[i + 1] = prefix_neg[i] + uniq[i].2;
    }
    for i in (0..u).rev() {
        suffix_pos[i] = suffix_pos[i + 1] + uniq[i].1;
    }

    let n = probs.len() as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &theta in &candidates {
        let cut = uniq.partition_point(|&(p, _, _)| p < theta);
        let acc = (prefix_neg[cut] + suffix_pos[cut]) as f64 / n;
        if acc > best.0 {
            best = (acc, theta);
        }
    }
    Ok(best.1)
}

/// Mean BCE over the samples at the given phase, batching maximal runs of
/// equal-length samples. Also returns the pooled per-step probabilities in
/// input order when `collect` is set.
fn epoch_pass(
    model: &mut Model,
    samples: &[PreparedSample],
    order: &[usize],
    batch_size: usize,
    phase: Phase,
    adam: Option<&mut Adam>,
    rng: &mut ChaCha8Rng,
    coords: (usize, &str),
) -> Result<f64> {
    let (epoch, what) = coords;
    let mut adam = adam;
    let mut loss_sum = 0.0;
    let mut n_steps = 0usize;

    let mut batch_no = 0;
    let mut i = 0;
    while i < order.len() {
        let f = samples[order[i]].features.n_frames;
        let mut j = i + 1;
        while j < order.len() && j - i < batch_size && samples[order[j]].features.n_frames == f {
            j += 1;
        }
        let members = &order[i..j];
        let b = members.len();
        let rows = model.n_input_rows;
        let k = output_len(f);

        let mut x = Tensor::zeros(&[b, rows, f]);
        let mut y = Tensor::zeros(&[b, k, 1]);
        for (bi, &s) in members.iter().enumerate() {
            x.data[bi * rows * f..(bi + 1) * rows * f].copy_from_slice(&samples[s].features.data);
            y.data[bi * k..(bi + 1) * k].copy_from_slice(&samples[s].target);
        }

        let pred = model.forward(&x, phase, rng)?;
        let (loss, dloss) = bce_loss(&pred, &y)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite {what} loss at epoch {epoch}, batch {batch_no}"
            )));
        }
        loss_sum += loss * (b * k) as f64;
        n_steps += b * k;

        if let Some(adam) = adam.as_deref_mut() {
            model.zero_grads();
            model.backward(dloss)?;
            adam.begin_step();
            model.visit_params(&mut |name, p, trainable| {
                if trainable {
                    adam.update(name, p)?;
                }
                Ok(())
            })?;
        }
        batch_no += 1;
        i = j;
    }
    Ok(loss_sum / n_steps as f64)
}

fn snapshot(model: &mut Model) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    model
        .visit_params(&mut |_, p, _| {
            out.push(p.value.data.clone());
            Ok(())
        })
        .expect("snapshot cannot fail");
    out
}

fn restore(model: &mut Model, snap: &[Vec<f64>]) {
    let mut i = 0;
    model
        .visit_params(&mut |_, p, _| {
            p.value.data.copy_from_slice(&snap[i]);
            i += 1;
            Ok(())
        })
        .expect("restore cannot fail");
    assert_eq!(i, snap.len());
}

/// Train one fold. The observer runs after every epoch with the live model
/// and that epoch's record; `ControlFlow::Break` stops training (the best
/// epoch so far is still restored). Randomness: `seed` initializes the
/// weights, `seed+1` drives the shuffle, `seed+2` drives dropout.
pub fn train_with_observer(
    spec: &ModelSpec,
    train_part: &[PreparedSample],
    val_part: &[PreparedSample],
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&mut Model, &EpochRecord) -> ControlFlow<()>,
) -> Result<(Model, History)> {
    cfg.validate()?;
    if train_part.is_empty() {
        return Err(Error::Data("empty training fold".into()));
    }
    if val_part.is_empty() {
        return Err(Error::Data("empty validation fold".into()));
    }
    let rows = train_part[0].features.n_rows();
    let mut model = build_model(spec, rows, cfg.seed)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut adam = Adam::new(cfg.lr0);

    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_weights: Vec<Vec<f64>> = Vec::new();
    let mut since_best_plateau = 0usize;
    let mut since_best_stop = 0usize;
    let mut reason = StoppingReason::MaxEpochs;

    let mut train_order: Vec<usize> = (0..train_part.len()).collect();
    let val_order: Vec<usize> = (0..val_part.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        train_order.shuffle(&mut shuffle_rng);
        let train_loss = epoch_pass(
            &mut model,
            train_part,
            &train_order,
            cfg.batch_size,
            Phase::Train,
            Some(&mut adam),
            &mut dropout_rng,
            (epoch, "training"),
        )?;
        let val_loss = epoch_pass(
            &mut model,
            val_part,
            &val_order,
            cfg.batch_size,
            Phase::Infer,
            None,
            &mut dropout_rng,
            (epoch, "validation"),
        )?;
        let record = EpochRecord { epoch, train_loss, val_loss, lr: adam.lr };
        epochs.push(record);

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_weights = snapshot(&mut model);
            since_best_plateau = 0;
            since_best_stop = 0;
        } else {
            since_best_plateau += 1;
            since_best_stop += 1;
        }

        if observer(&mut model, &record).is_break() {
            reason = StoppingReason::Observer;
            break;
        }
        if since_best_stop >= cfg.early_stop_patience {
            reason = StoppingReason::EarlyStop;
            break;
        }
        // a decay event resets the plateau counter but not the stop counter
        if since_best_plateau >= cfg.plateau_patience {
            adam.lr *= cfg.decay_factor;
            since_best_plateau = 0;
        }
    }

    restore(&mut model, &best_weights);
    Ok((model, History { epochs, best_epoch, stopping_reason: reason }))
}

/// Train one fold to completion (no observer).
pub fn train_fold(
    spec: &ModelSpec,
    train_part: &[PreparedSample],
    val_part: &[PreparedSample],
    cfg: &TrainConfig,
) -> Result<(Model, History)> {
    train_with_observer(spec, train_part, val_part, cfg, &mut |_, _| ControlFlow::Continue(()))
}

/// Inference probabilities for one prepared sample.
pub fn infer_probs(model: &mut Model, sample: &PreparedSample) -> Result<Vec<f64>> {
    let (probs, _) = model.predict(&sample.features)?;
    Ok(probs)
}

#[derive(Debug)]
pub struct FoldOutcome {
    pub fold: usize,
    pub model: Model,
    pub history: History,
    pub threshold: f64,
    pub val_indices: Vec<usize>,
}

/// Full cross-validation: split, train each fold, then pick each fold's
/// threshold by segment accuracy on its own validation part. The chosen
/// threshold is stored on the fold's model.
pub fn train_cv(
    spec: &ModelSpec,
    samples: &[PreparedSample],
    cfg: &TrainConfig,
) -> Result<Vec<FoldOutcome>> {
    let folds = kfold_split(samples.len(), cfg.n_folds, cfg.seed)?;
    let mut outcomes = Vec::with_capacity(folds.len());
    for (f, (train_idx, val_idx)) in folds.into_iter().enumerate() {
        let train_part: Vec<PreparedSample> =
            train_idx.iter().map(|&i| samples[i].clone()).collect();
        let val_part: Vec<PreparedSample> = val_idx.iter().map(|&i| samples[i].clone()).collect();
        let (mut model, history) = train_fold(spec, &train_part, &val_part, cfg)?;

        let mut probs = Vec::new();
        let mut truth = Vec::new();
        for s in &val_part {
            probs.extend(infer_probs(&mut model, s)?);
            truth.extend(s.target.iter().map(|&t| t as u8));
        }
        let theta = select_threshold(&probs, &truth)?;
        model.threshold = theta;
        outcomes.push(FoldOutcome { fold: f, model, history, threshold: theta, val_indices: val_idx });
    }
    Ok(outcomes)
}
