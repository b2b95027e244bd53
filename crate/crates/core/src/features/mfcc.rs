//! MFCC family: 20 static coefficients from a mel filterbank + DCT-II over the
//! power spectrum, plus delta and acceleration rows from a ±2 regression window.

use crate::error::Result;
use crate::features::stft::Spectrogram;

#[derive(Debug, Clone)]
pub struct MfccConfig {
    pub n_filters: usize,
    pub n_coeffs: usize,
    pub fmin_hz: f64,
    /// Upper filterbank edge; `None` means the Nyquist frequency.
    pub fmax_hz: Option<f64>,
    pub log_floor: f64,
    /// Regression half-window for delta/acceleration rows.
    pub delta_window: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            n_filters: 40,
            n_coeffs: 20,
            fmin_hz: 0.0,
            fmax_hz: None,
            log_floor: 1e-10,
            delta_window: 2,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank as a dense `[n_filters, n_bins]` matrix over the
/// bin center frequencies (unit-peak triangles).
pub fn mel_filterbank(
    n_filters: usize,
    n_bins: usize,
    freq_resolution: f64,
    fmin_hz: f64,
    fmax_hz: f64,
) -> Vec<f64> {
    let mel_lo = hz_to_mel(fmin_hz);
    let mel_hi = hz_to_mel(fmax_hz);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_filters + 1) as f64))
        .collect();
    let mut fb = vec![0.0; n_filters * n_bins];
    for j in 0..n_filters {
        let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
        for b in 0..n_bins {
            let f = b as f64 * freq_resolution;
            let w = if f <= mid {
                (f - lo) / (mid - lo)
            } else {
                (hi - f) / (hi - mid)
            };
            if w > 0.0 {
                fb[j * n_bins + b] = w;
            }
        }
    }
    fb
}

/// Orthonormal DCT-II matrix `[n_coeffs, n_inputs]`.
fn dct_matrix(n_coeffs: usize, n_inputs: usize) -> Vec<f64> {
    let m = n_inputs as f64;
    let mut d = vec![0.0; n_coeffs * n_inputs];
    for k in 0..n_coeffs {
        let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
        for i in 0..n_inputs {
            d[k * n_inputs + i] =
                scale * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * m)).cos();
        }
    }
    d
}

/// Per-row delta regression over time with edge replication:
/// `d[t] = Σ_τ τ·(x[t+τ] − x[t−τ]) / (2·Σ_τ τ²)`.
pub fn deltas(values: &[f64], n_rows: usize, n_cols: usize, window: usize) -> Vec<f64> {
    let denom: f64 = 2.0 * (1..=window).map(|t| (t * t) as f64).sum::<f64>();
    let mut out = vec![0.0; values.len()];
    for r in 0..n_rows {
        let row = &values[r * n_cols..(r + 1) * n_cols];
        for t in 0..n_cols {
            let mut acc = 0.0;
            for tau in 1..=window {
                let ahead = row[(t + tau).min(n_cols - 1)];
                let behind = row[t.saturating_sub(tau)];
                acc += tau as f64 * (ahead - behind);
            }
            out[r * n_cols + t] = acc / denom;
        }
    }
    out
}

/// The 3·n_coeffs × F MFCC block: rows `0..n` static, `n..2n` delta,
/// `2n..3n` acceleration (delta of delta).
pub fn mfcc(spec: &Spectrogram, cfg: &MfccConfig) -> Result<Vec<f64>> {
    let n_frames = spec.n_frames;
    let n_bins = spec.n_bins;
    let fmax = cfg
        .fmax_hz
        .unwrap_or((n_bins - 1) as f64 * spec.freq_resolution);
    let fb = mel_filterbank(cfg.n_filters, n_bins, spec.freq_resolution, cfg.fmin_hz, fmax);
    let dct = dct_matrix(cfg.n_coeffs, cfg.n_filters);

    // log mel energies of the power spectrum: [n_filters, F]
    let mut logmel = vec![0.0; cfg.n_filters * n_frames];
    for j in 0..cfg.n_filters {
        let weights = &fb[j * n_bins..(j + 1) * n_bins];
        for m in 0..n_frames {
            let mut e = 0.0;
            for (b, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    let mag = spec.magnitudes[b * n_frames + m];
                    e += w * mag * mag;
                }
            }
            logmel[j * n_frames + m] = e.max(cfg.log_floor).ln();
        }
    }

    // static coefficients: DCT · logmel = [n_coeffs, F]
    let n = cfg.n_coeffs;
    let mut stat = vec![0.0; n * n_frames];
    for k in 0..n {
        let drow = &dct[k * cfg.n_filters..(k + 1) * cfg.n_filters];
        for m in 0..n_frames {
            let mut acc = 0.0;
            for (j, &d) in drow.iter().enumerate() {
                acc += d * logmel[j * n_frames + m];
            }
            stat[k * n_frames + m] = acc;
        }
    }

    let delta = deltas(&stat, n, n_frames, cfg.delta_window);
    let accel = deltas(&delta, n, n_frames, cfg.delta_window);

    let mut out = Vec::with_capacity(3 * n * n_frames);
    out.extend_from_slice(&stat);
    out.extend_from_slice(&delta);
    out.extend_from_slice(&accel);
    Ok(out)
}
