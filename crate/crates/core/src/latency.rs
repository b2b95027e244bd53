//! Wall-clock inference benchmarking across model variants.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::model::{build_model, ModelSpec, Variant};

/// Linearly interpolated quantile of an ascending-sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&q), "quantile order {q} outside [0, 1]");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LatencyRow {
    pub variant: String,
    pub n_reps: usize,
    pub median_ms: f64,
    pub q1_ms: f64,
    pub q3_ms: f64,
    /// Median relative to the Baseline row.
    pub ratio: f64,
}

/// Per-call wall-clock times for repeated single-recording inference,
/// in milliseconds, warmup excluded.
pub fn measure_inference(
    spec: &ModelSpec,
    features: &FeatureMatrix,
    reps: usize,
    warmup: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if reps == 0 {
        return Err(Error::Config("need at least one timed repetition".into()));
    }
    let mut model = build_model(spec, features.n_rows(), seed)?;
    for _ in 0..warmup {
        model.predict(features)?;
    }
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        model.predict(features)?;
        times.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    Ok(times)
}

/// Benchmark each spec on the same input and report medians with
/// interquartile ranges, expressed relative to the Baseline entry.
pub fn benchmark_variants(
    specs: &[ModelSpec],
    features: &FeatureMatrix,
    reps: usize,
    warmup: usize,
    seed: u64,
) -> Result<Vec<LatencyRow>> {
    if !specs.iter().any(|s| s.variant == Variant::Baseline) {
        return Err(Error::Config("benchmark needs the baseline variant for ratios".into()));
    }
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut times = measure_inference(spec, features, reps, warmup, seed)?;
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push(LatencyRow {
            variant: spec.variant.name().to_string(),
            n_reps: reps,
            median_ms: quantile(&times, 0.5),
            q1_ms: quantile(&times, 0.25),
            q3_ms: quantile(&times, 0.75),
            ratio: 0.0,
        });
    }
    let base = rows
        .iter()
        .find(|r| r.variant == Variant::Baseline.name())
        .map(|r| r.median_ms)
        .expect("baseline presence checked above");
    for row in &mut rows {
        row.ratio = row.median_ms / base;
    }
    Ok(rows)
}

pub fn latency_csv(rows: &[LatencyRow]) -> String {
    let mut out = String::from("variant,n_reps,median_ms,q1_ms,q3_ms,ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.3},{:.3},{:.3},{:.3}\n",
            r.variant, r.n_reps, r.median_ms, r.q1_ms, r.q3_ms, r.ratio
        ));
    }
    out
}

pub fn latency_table(rows: &[LatencyRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>6} {:>12} {:>12} {:>12} {:>8}\n",
        "variant", "n", "median_ms", "q1_ms", "q3_ms", "ratio"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:>6} {:>12.3} {:>12.3} {:>12.3} {:>7.2}x\n",
            r.variant, r.n_reps, r.median_ms, r.q1_ms, r.q3_ms, r.ratio
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FrameGrid;
    use crate::model::DEFAULT_INPUT_ROWS;

    fn tiny_features(n_frames: usize) -> FeatureMatrix {
        let rows = DEFAULT_INPUT_ROWS;
        FeatureMatrix {
            n_spec_rows: 129,
            n_mfcc_rows: 60,
            n_energy_rows: 4,
            n_frames,
            data: (0..rows * n_frames).map(|i| ((i % 17) as f64 - 8.0) / 8.0).collect(),
            grid: FrameGrid { n_frames, hop_s: 0.016 },
            normalized: true,
        }
    }

    #[test]
    fn quantile_interpolates_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.5), 7.0);
    }

    #[test]
    fn measure_returns_positive_times_per_rep() {
        let spec = ModelSpec {
            gru_hidden: 2,
            width_scale: 0.05,
            ..ModelSpec::for_variant(Variant::Baseline)
        };
        let feats = tiny_features(20);
        let times = measure_inference(&spec, &feats, 4, 1, 0).unwrap();
        assert_eq!(times.len(), 4);
        assert!(times.iter().all(|&t| t > 0.0));
        assert!(measure_inference(&spec, &feats, 0, 0, 0).is_err());
    }

    #[test]
    fn benchmark_reports_unit_baseline_ratio() {
        let specs: Vec<ModelSpec> = [Variant::Baseline, Variant::Rb1]
            .iter()
            .map(|&v| ModelSpec {
                gru_hidden: 2,
                width_scale: 0.05,
                ..ModelSpec::for_variant(v)
            })
            .collect();
        let feats = tiny_features(20);
        let rows = benchmark_variants(&specs, &feats, 5, 1, 0).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].variant, "baseline");
        assert!((rows[0].ratio - 1.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.median_ms > 0.0 && r.q1_ms <= r.median_ms));
        assert!(rows.iter().all(|r| r.median_ms <= r.q3_ms));

        // without a baseline entry there is no ratio reference
        let no_base = vec![specs[1].clone()];
        assert!(benchmark_variants(&no_base, &feats, 2, 0, 0).is_err());
    }

    #[test]
    fn report_formats_are_well_formed() {
        let rows = vec![LatencyRow {
            variant: "baseline".into(),
            n_reps: 30,
            median_ms: 12.3456,
            q1_ms: 11.0,
            q3_ms: 13.5,
            ratio: 1.0,
        }];
        let csv = latency_csv(&rows);
        assert!(csv.starts_with("variant,n_reps,median_ms,"));
        assert!(csv.contains("baseline,30,12.346,11.000,13.500,1.000"));
        let table = latency_table(&rows);
        assert!(table.contains("baseline"));
        assert!(table.contains("1.00x"));
    }
}
