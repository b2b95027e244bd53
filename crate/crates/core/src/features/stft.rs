//! Magnitude spectrogram: Hanning window 256, hop 64, centered framing with
//! reflection padding, no FFT zero-padding.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const WINDOW_SIZE: usize = 256;
pub const HOP: usize = 64;
pub const N_BINS: usize = WINDOW_SIZE / 2 + 1; // 129

/// Uniform tiling of the time axis: frame `m` owns the half-open interval
/// `[m·hop_s, (m+1)·hop_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGrid {
    pub n_frames: usize,
    pub hop_s: f64,
}

impl FrameGrid {
    pub fn frame_span(&self, m: usize) -> (f64, f64) {
        (m as f64 * self.hop_s, (m + 1) as f64 * self.hop_s)
    }

    /// Total time covered by the grid.
    pub fn span_s(&self) -> f64 {
        self.n_frames as f64 * self.hop_s
    }
}

/// Non-negative magnitudes, `n_bins` frequency rows × `n_frames` columns,
/// stored row-major by bin.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub n_bins: usize,
    pub n_frames: usize,
    pub magnitudes: Vec<f64>,
    /// Hz per bin: sample_rate / 256.
    pub freq_resolution: f64,
    pub grid: FrameGrid,
}

impl Spectrogram {
    pub fn mag(&self, bin: usize, frame: usize) -> f64 {
        self.magnitudes[bin * self.n_frames + frame]
    }

    /// Center frequency of a bin in Hz.
    pub fn bin_center_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.freq_resolution
    }

    /// One frequency row across all frames.
    pub fn bin_row(&self, bin: usize) -> &[f64] {
        &self.magnitudes[bin * self.n_frames..(bin + 1) * self.n_frames]
    }
}

/// Number of frames produced for `n_samples` under centered framing.
pub fn n_frames_for(n_samples: usize) -> usize {
    1 + n_samples / HOP
}

fn reflect(idx: isize, n: isize) -> usize {
    // mirror without repeating the edge sample: -1 → 1, n → n-2
    let mut i = idx;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * n - 2 - i;
    }
    debug_assert!((0..n).contains(&i));
    i as usize
}

/// Compute the magnitude spectrogram. The signal is padded by 128 reflected
/// samples at each edge so that `n_frames = 1 + floor(n / 64)`.
pub fn stft(samples: &[f64], sample_rate: u32) -> Result<Spectrogram> {
    let n = samples.len();
    if n < WINDOW_SIZE {
        return Err(Error::Data(format!(
            "signal of {n} samples is shorter than one {WINDOW_SIZE}-sample window"
        )));
    }
    let n_frames = n_frames_for(n);
    let half = WINDOW_SIZE / 2;

    let window: Vec<f64> = (0..WINDOW_SIZE)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / WINDOW_SIZE as f64).cos())
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(WINDOW_SIZE);
    let mut buf = vec![Complex::new(0.0, 0.0); WINDOW_SIZE];

    let mut magnitudes = vec![0.0; N_BINS * n_frames];
    let ni = n as isize;
    for m in 0..n_frames {
        let start = m as isize * HOP as isize - half as isize;
        for (i, w) in window.iter().enumerate() {
            let src = reflect(start + i as isize, ni);
            buf[i] = Complex::new(samples[src] * w, 0.0);
        }
        fft.process(&mut buf);
        for (bin, value) in buf.iter().take(N_BINS).enumerate() {
            magnitudes[bin * n_frames + m] = value.norm();
        }
    }

    Ok(Spectrogram {
        n_bins: N_BINS,
        n_frames,
        magnitudes,
        freq_resolution: sample_rate as f64 / WINDOW_SIZE as f64,
        grid: FrameGrid { n_frames, hop_s: HOP as f64 / sample_rate as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn fifteen_seconds_gives_129_by_938() {
        let spec = stft(&vec![0.0; 60000], 4000).unwrap();
        assert_eq!(spec.n_bins, 129);
        assert_eq!(spec.n_frames, 938);
        assert_eq!(spec.magnitudes.len(), 129 * 938);
        assert!((spec.freq_resolution - 15.625).abs() < 1e-12);
        assert!((spec.grid.hop_s - 0.016).abs() < 1e-12);
    }

    #[test]
    fn frame_count_formula() {
        for n in [256, 300, 1000, 60000, 60001, 59999] {
            let spec = stft(&vec![0.0; n], 4000).unwrap();
            assert_eq!(spec.n_frames, 1 + n / 64, "n={n}");
        }
    }

    #[test]
    fn all_zero_signal_gives_all_zero_magnitudes() {
        let spec = stft(&vec![0.0; 4000], 4000).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn short_signal_rejected() {
        assert!(stft(&vec![0.0; 255], 4000).is_err());
    }

    #[test]
    fn sine_at_exact_bin_concentrates_with_hann_lobe_shape() {
        // 500 Hz at 4000 Hz is exactly bin 32; the periodic Hann transform
        // puts ±64 at the two neighbours and 128 at the center, halved for a
        // real sinusoid: |X[32]| = 64, |X[31]| = |X[33]| = 32.
        let spec = stft(&sine(500.0, 4000.0, 8000), 4000).unwrap();
        for m in 10..spec.n_frames - 10 {
            let col: Vec<f64> = (0..spec.n_bins).map(|b| spec.mag(b, m)).collect();
            let argmax = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, 32, "frame {m}");
            assert!((col[32] - 64.0).abs() < 1e-6, "frame {m}: {}", col[32]);
            assert!((col[31] - 32.0).abs() < 1e-6);
            assert!((col[33] - 32.0).abs() < 1e-6);
            assert!(col[35] < 1e-6 && col[29] < 1e-6);
        }
    }

    #[test]
    fn windowed_sine_power_concentrates_within_two_bins() {
        // also at a non-bin-aligned frequency
        let spec = stft(&sine(487.0, 4000.0, 8000), 4000).unwrap();
        let k0 = (487.0f64 / 15.625).round() as usize;
        for m in 10..spec.n_frames - 10 {
            let total: f64 = (0..spec.n_bins).map(|b| spec.mag(b, m).powi(2)).sum();
            let local: f64 = (k0 - 2..=k0 + 2).map(|b| spec.mag(b, m).powi(2)).sum();
            assert!(local >= 0.9 * total, "frame {m}: {local} vs {total}");
        }
    }

    #[test]
    fn all_entries_finite_and_nonnegative() {
        let x: Vec<f64> = (0..4000).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect();
        let spec = stft(&x, 4000).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m.is_finite() && m >= 0.0));
    }

    #[test]
    fn grid_tiles_are_half_open_hops() {
        let spec = stft(&vec![0.0; 4000], 4000).unwrap();
        let (s0, e0) = spec.grid.frame_span(0);
        assert_eq!(s0, 0.0);
        assert!((e0 - 0.016).abs() < 1e-12);
        let (s5, e5) = spec.grid.frame_span(5);
        assert!((s5 - 0.080).abs() < 1e-12);
        assert!((e5 - 0.096).abs() < 1e-12);
    }

    #[test]
    fn determinism() {
        let x: Vec<f64> = (0..4000).map(|i| ((i * 13) % 29) as f64 / 29.0).collect();
        let a = stft(&x, 4000).unwrap();
        let b = stft(&x, 4000).unwrap();
        assert_eq!(a.magnitudes, b.magnitudes);
    }
}
