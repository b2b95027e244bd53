//! Preprocessing: high-pass filter → spectrogram → {MFCCs, band energies} →
//! per-group normalization → the stacked per-frame feature matrix.

pub mod dump;
pub mod energy;
pub mod filter;
pub mod mfcc;
pub mod stft;

pub use filter::highpass_80;
pub use mfcc::MfccConfig;
pub use stft::{stft, FrameGrid, Spectrogram, HOP, N_BINS, WINDOW_SIZE};

use crate::audio::Recording;
use crate::error::{Error, Result};

/// Feature rows stacked per frame: spectrogram bins, then static/delta/
/// acceleration MFCCs, then band-energy rows. With the default configuration
/// that is 129 + 60 + 4 = 193 rows.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub n_spec_rows: usize,
    pub n_mfcc_rows: usize,
    pub n_energy_rows: usize,
    pub n_frames: usize,
    /// Row-major `[n_rows, n_frames]`.
    pub data: Vec<f64>,
    pub grid: FrameGrid,
    pub normalized: bool,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_spec_rows + self.n_mfcc_rows + self.n_energy_rows
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_frames..(r + 1) * self.n_frames]
    }

    /// Row range of the spectrogram block.
    pub fn spec_rows(&self) -> std::ops::Range<usize> {
        0..self.n_spec_rows
    }

    /// Row range of the MFCC block (static ‖ delta ‖ acceleration).
    pub fn mfcc_rows(&self) -> std::ops::Range<usize> {
        self.n_spec_rows..self.n_spec_rows + self.n_mfcc_rows
    }

    /// Row range of the band-energy block.
    pub fn energy_rows(&self) -> std::ops::Range<usize> {
        self.n_spec_rows + self.n_mfcc_rows..self.n_rows()
    }
}

#[derive(Debug, Clone, Default)]
pub struct FeatureConfig {
    pub mfcc: MfccConfig,
}

/// The feature matrix together with the pre-normalization spectrogram, which
/// postprocessing needs for energy-peak frequencies.
#[derive(Debug, Clone)]
pub struct Features {
    pub matrix: FeatureMatrix,
    pub spectrogram: Spectrogram,
}

/// Z-score a group in place over all its entries: `(x − μ)/σ` with the
/// population σ; a constant group (σ < 1e-12) becomes all zeros.
pub fn normalize_group(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd < 1e-12 {
        values.fill(0.0);
    } else {
        for v in values.iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
}

/// Full preprocessing for one recording. The seven normalization groups are
/// the spectrogram block, each of the three MFCC sub-blocks, and each of the
/// four energy rows, z-scored independently.
pub fn extract(recording: &Recording, cfg: &FeatureConfig) -> Result<Features> {
    let filtered = highpass_80(&recording.samples, recording.sample_rate)?;
    let spectrogram = stft(&filtered, recording.sample_rate)?;
    let mfcc_block = mfcc::mfcc(&spectrogram, &cfg.mfcc)?;
    let energy_block = energy::band_energy(&spectrogram);

    let f = spectrogram.n_frames;
    let n_spec = spectrogram.n_bins;
    let n_mfcc = 3 * cfg.mfcc.n_coeffs;
    let n_energy = energy::BANDS_HZ.len();

    let mut data = Vec::with_capacity((n_spec + n_mfcc + n_energy) * f);
    data.extend_from_slice(&spectrogram.magnitudes);
    data.extend_from_slice(&mfcc_block);
    data.extend_from_slice(&energy_block);

    // normalization groups: spectrogram; static/delta/accel MFCCs; 4 energy rows
    let nc = cfg.mfcc.n_coeffs;
    normalize_group(&mut data[..n_spec * f]);
    let m0 = n_spec * f;
    normalize_group(&mut data[m0..m0 + nc * f]);
    normalize_group(&mut data[m0 + nc * f..m0 + 2 * nc * f]);
    normalize_group(&mut data[m0 + 2 * nc * f..m0 + 3 * nc * f]);
    let e0 = m0 + n_mfcc * f;
    for b in 0..n_energy {
        normalize_group(&mut data[e0 + b * f..e0 + (b + 1) * f]);
    }

    Ok(Features {
        matrix: FeatureMatrix {
            n_spec_rows: n_spec,
            n_mfcc_rows: n_mfcc,
            n_energy_rows: n_energy,
            n_frames: f,
            data,
            grid: spectrogram.grid,
            normalized: true,
        },
        spectrogram,
    })
}

/// Preprocess with the default configuration, returning just the matrix.
pub fn assemble_features(recording: &Recording) -> Result<FeatureMatrix> {
    Ok(extract(recording, &FeatureConfig::default())?.matrix)
}

/// Validate that every value is finite; used at ingestion boundaries.
pub fn check_finite(values: &[f64], context: &str) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("non-finite value at index {i} in {context}")));
        }
    }
    Ok(())
}
