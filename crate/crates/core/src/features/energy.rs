//! Band energy rows: per-frame sums of squared magnitudes over fixed
//! frequency bands.

use crate::features::stft::Spectrogram;

/// The four bands in Hz. Membership is by bin center in `[lo, hi)`, except the
/// last (full) band, which covers every bin including the Nyquist bin.
pub const BANDS_HZ: [(f64, f64); 4] = [
    (0.0, 250.0),
    (250.0, 500.0),
    (500.0, 1000.0),
    (0.0, 2000.0),
];

/// `[4, F]` matrix: row `b`, frame `m` = Σ magnitude² over the band's bins.
pub fn band_energy(spec: &Spectrogram) -> Vec<f64> {
    let n_frames = spec.n_frames;
    let mut out = vec![0.0; BANDS_HZ.len() * n_frames];
    for (row, &(lo, hi)) in BANDS_HZ.iter().enumerate() {
        let full_band = row == BANDS_HZ.len() - 1;
        for bin in 0..spec.n_bins {
            let f = spec.bin_center_hz(bin);
            if full_band || (f >= lo && f < hi) {
                let mags = spec.bin_row(bin);
                let dst = &mut out[row * n_frames..(row + 1) * n_frames];
                for (d, &m) in dst.iter_mut().zip(mags) {
                    *d += m * m;
                }
            }
        }
    }
    out
}
