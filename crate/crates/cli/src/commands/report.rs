use std::path::{Path, PathBuf};

use clap::Args;

use casdet_core::Error;

use crate::config::{need, ReportFile};
use crate::svg::roc_svg;
use crate::CliError;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// metrics.json produced by `evaluate`
    #[arg(long, value_name = "PATH")]
    metrics: Option<PathBuf>,

    /// roc.csv produced by `evaluate`
    #[arg(long, value_name = "PATH")]
    roc: Option<PathBuf>,

    /// Output directory for report.txt and roc.svg
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn opt_num(v: &serde_json::Value, key: &str) -> String {
    match v.get(key) {
        Some(serde_json::Value::Number(n)) => {
            n.as_f64().map_or_else(|| n.to_string(), |x| format!("{x:.4}"))
        }
        Some(serde_json::Value::Null) | None => "n/a".to_string(),
        Some(other) => other.to_string(),
    }
}

fn int_of(v: &serde_json::Value, key: &str) -> String {
    v.get(key).and_then(|n| n.as_u64()).map_or_else(|| "?".to_string(), |n| n.to_string())
}

fn read_roc_points(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("threshold") {
            continue;
        }
        let mut fields = line.split(',').skip(1);
        let parse = |f: Option<&str>| f.and_then(|x| x.trim().parse::<f64>().ok());
        match (parse(fields.next()), parse(fields.next())) {
            (Some(fpr), Some(tpr)) => points.push((fpr, tpr)),
            _ => return Err(Error::bad_line(path, idx + 1, "expected `threshold,fpr,tpr`").into()),
        }
    }
    Ok(points)
}

pub fn run(args: ReportArgs, file: &ReportFile) -> Result<(), CliError> {
    let metrics_path = need(args.metrics, file.metrics.clone(), "--metrics")?;
    let out = need(args.out, file.out.clone(), "--out")?;
    // default to the roc.csv that evaluate writes next to metrics.json
    let roc_path = args
        .roc
        .or_else(|| file.roc.clone())
        .unwrap_or_else(|| metrics_path.with_file_name("roc.csv"));
    let roc_path = roc_path.exists().then_some(roc_path);

    let text =
        std::fs::read_to_string(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let metrics: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::bad_file(&metrics_path, format!("not valid JSON: {e}")))?;

    let seg = &metrics["segment"];
    let conf = &seg["confusion"];
    let segm = &seg["metrics"];
    let ev = &metrics["events"];
    let evc = &ev["counts"];
    let evm = &ev["metrics"];

    let mut report = String::new();
    report.push_str("detection report\n");
    report.push_str("================\n\n");
    report.push_str(&format!("threshold: {}\n", opt_num(&metrics, "theta")));
    report.push_str(&format!("recordings: {}\n\n", int_of(&metrics, "n_recordings")));
    report.push_str("segment level\n");
    report.push_str(&format!(
        "  confusion: tp={} tn={} fp={} fn={}\n",
        int_of(conf, "tp"),
        int_of(conf, "tn"),
        int_of(conf, "fp"),
        int_of(conf, "fn"),
    ));
    for key in ["acc", "ppv", "sen", "spe", "f1"] {
        report.push_str(&format!("  {key}: {}\n", opt_num(segm, key)));
    }
    report.push_str("\nevent level\n");
    report.push_str(&format!(
        "  counts: tp={} fp={} fn={}\n",
        int_of(evc, "tp"),
        int_of(evc, "fp"),
        int_of(evc, "fn"),
    ));
    for key in ["ppv", "sen", "f1"] {
        report.push_str(&format!("  {key}: {}\n", opt_num(evm, key)));
    }
    report.push_str(&format!("\nroc auc: {}\n", opt_num(&metrics, "auc")));

    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let report_path = out.join("report.txt");
    std::fs::write(&report_path, &report).map_err(|e| Error::io(&report_path, e))?;
    println!("wrote {}", report_path.display());

    if let Some(roc_path) = roc_path {
        let points = read_roc_points(&roc_path)?;
        if !points.is_empty() {
            let auc = metrics.get("auc").and_then(|a| a.as_f64());
            let svg_path = out.join("roc.svg");
            std::fs::write(&svg_path, roc_svg(&points, auc))
                .map_err(|e| Error::io(&svg_path, e))?;
            println!("wrote {}", svg_path.display());
        }
    }
    print!("{report}");
    Ok(())
}
