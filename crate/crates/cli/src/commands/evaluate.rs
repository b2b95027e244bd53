use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use casdet_core::dataset::load_dataset;
use casdet_core::eval::{
    event_metrics, match_events, rasterize_labels, roc_auc, segment_confusion, segment_metrics,
    EventCounts, EventMetrics, RocCurve, SegmentConfusion, SegmentMetrics,
};
use casdet_core::features::{FrameGrid, HOP};
use casdet_core::model::output_len;
use casdet_core::postprocess::{read_events, threshold_segments};
use casdet_core::{Error, LabelEvent};

use crate::config::{need, pick, EvaluateFile};
use crate::CliError;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground-truth manifest of `<wav> <labels>` pairs
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,

    /// Directory holding `<id>_probs.csv` and `<id>_events.txt`
    #[arg(long, value_name = "DIR")]
    pred: Option<PathBuf>,

    /// Output directory for metrics.json and roc.csv
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Segment decision threshold
    #[arg(long, value_name = "THETA")]
    theta: Option<f64>,
}

#[derive(Serialize)]
struct SegmentReport {
    confusion: SegmentConfusion,
    metrics: SegmentMetrics,
}

#[derive(Serialize)]
struct EventReport {
    counts: EventCounts,
    metrics: EventMetrics,
}

#[derive(Serialize)]
struct MetricsReport {
    theta: f64,
    n_recordings: usize,
    segment: SegmentReport,
    events: EventReport,
    auc: Option<f64>,
}

fn read_probs(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut probs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("t,") {
            continue;
        }
        let prob = line
            .split(',')
            .nth(1)
            .and_then(|f| f.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::bad_line(path, idx + 1, "expected `t,prob`"))?;
        probs.push(prob);
    }
    if probs.is_empty() {
        return Err(Error::bad_file(path, "no probability rows").into());
    }
    Ok(probs)
}

pub fn run(args: EvaluateArgs, file: &EvaluateFile) -> Result<(), CliError> {
    let manifest = need(args.manifest, file.manifest.clone(), "--manifest")?;
    let pred = need(args.pred, file.pred.clone(), "--pred")?;
    let out = need(args.out, file.out.clone(), "--out")?;
    let theta = pick(args.theta, file.theta, 0.5);
    if !(0.0..=1.0).contains(&theta) {
        return Err(CliError::Usage(format!("--theta must lie in [0, 1], got {theta}")));
    }

    let dataset = load_dataset(&manifest)?;
    if dataset.is_empty() {
        return Err(Error::Data(format!("empty manifest {}", manifest.display())).into());
    }

    let mut confusion = SegmentConfusion::default();
    let mut counts = EventCounts::default();
    let mut pooled_probs: Vec<f64> = Vec::new();
    let mut pooled_truth: Vec<u8> = Vec::new();

    for entry in &dataset.entries {
        let id = &entry.recording.id;
        let probs = read_probs(&pred.join(format!("{id}_probs.csv")))?;
        let n_frames = casdet_core::features::stft::n_frames_for(entry.recording.samples.len());
        let k = output_len(n_frames);
        if probs.len() != k {
            return Err(Error::Data(format!(
                "{id}: expected {k} probability rows for a {:.3} s recording, found {}",
                entry.recording.duration_s(),
                probs.len()
            ))
            .into());
        }
        let grid = FrameGrid {
            n_frames: k,
            hop_s: 2.0 * HOP as f64 / entry.recording.sample_rate as f64,
        };
        let truth = rasterize_labels(&entry.labels, &grid)?;
        let predicted = threshold_segments(&probs, theta);
        confusion.add(&segment_confusion(&predicted, &truth)?);

        let events = read_events(&pred.join(format!("{id}_events.txt")))?;
        let cas: Vec<LabelEvent> =
            entry.labels.iter().filter(|l| l.kind.is_cas()).cloned().collect();
        counts.add(&match_events(&events, &cas)?);

        pooled_probs.extend_from_slice(&probs);
        pooled_truth.extend_from_slice(&truth);
    }

    let has_both_classes =
        pooled_truth.iter().any(|&t| t == 1) && pooled_truth.iter().any(|&t| t == 0);
    let roc: Option<RocCurve> =
        if has_both_classes { Some(roc_auc(&pooled_probs, &pooled_truth)?) } else { None };

    let report = MetricsReport {
        theta,
        n_recordings: dataset.len(),
        segment: SegmentReport { metrics: segment_metrics(&confusion), confusion },
        events: EventReport { metrics: event_metrics(&counts), counts },
        auc: roc.as_ref().map(|r| r.auc),
    };

    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let metrics_path = out.join("metrics.json");
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Data(format!("cannot serialize metrics: {e}")))?;
    std::fs::write(&metrics_path, json + "\n").map_err(|e| Error::io(&metrics_path, e))?;

    let roc_path = out.join("roc.csv");
    let mut csv = String::from("threshold,fpr,tpr\n");
    if let Some(curve) = &roc {
        for p in &curve.points {
            csv.push_str(&format!("{},{:.6},{:.6}\n", p.threshold, p.fpr, p.tpr));
        }
    }
    std::fs::write(&roc_path, csv).map_err(|e| Error::io(&roc_path, e))?;

    match report.auc {
        Some(auc) => println!(
            "evaluated {} recordings: segment acc {}, event f1 {}, auc {auc:.4}",
            report.n_recordings,
            fmt_opt(report.segment.metrics.acc),
            fmt_opt(report.events.metrics.f1),
        ),
        None => println!(
            "evaluated {} recordings: segment acc {}, event f1 {} (single-class truth, no ROC)",
            report.n_recordings,
            fmt_opt(report.segment.metrics.acc),
            fmt_opt(report.events.metrics.f1),
        ),
    }
    println!("wrote {} and {}", metrics_path.display(), roc_path.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}
