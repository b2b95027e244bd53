//! Butterworth high-pass design and zero-phase (forward-backward) filtering.

use crate::error::{Error, Result};

/// One second-order section; `a[0]` is normalized to 1.
#[derive(Debug, Clone, Copy)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

/// Design an even-order Butterworth high-pass as a cascade of biquads via the
/// bilinear transform with frequency prewarping.
pub fn butter_highpass_sos(order: usize, cutoff_hz: f64, sample_rate: f64) -> Result<Vec<Sos>> {
    if order == 0 || order % 2 != 0 {
        return Err(Error::Config(format!("filter order {order} must be a positive even number")));
    }
    if !(cutoff_hz > 0.0) || cutoff_hz >= sample_rate / 2.0 {
        return Err(Error::Config(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) for sample rate {sample_rate} Hz",
            sample_rate / 2.0
        )));
    }
    let lambda = (std::f64::consts::PI * cutoff_hz / sample_rate).tan();
    let n = order as f64;
    let sections = (0..order / 2)
        .map(|k| {
            // conjugate pole pair of the analog prototype: s² + s/Q + 1
            let q = 1.0 / (2.0 * (std::f64::consts::PI * (2 * k + 1) as f64 / (2.0 * n)).sin());
            // analog HP biquad s²/(s² + (ω0/Q)s + ω0²) through s = (1−z⁻¹)/(λ(1+z⁻¹))
            let a_ = 1.0;
            let b_ = lambda / q;
            let c_ = lambda * lambda;
            let den0 = a_ + b_ + c_;
            Sos {
                b: [a_ / den0, -2.0 * a_ / den0, a_ / den0],
                a: [1.0, (2.0 * c_ - 2.0 * a_) / den0, (a_ - b_ + c_) / den0],
            }
        })
        .collect();
    Ok(sections)
}

/// Steady-state initial filter state for a unit-step input (transposed
/// direct-form II), used to suppress start-up transients.
fn step_state(s: &Sos) -> (f64, f64) {
    let h1 = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[1] + s.a[2]);
    (h1 - s.b[0], s.b[2] - s.a[2] * h1)
}

fn biquad(s: &Sos, x: &mut [f64]) {
    let (z0, z1) = step_state(s);
    let x0 = if x.is_empty() { 0.0 } else { x[0] };
    let (mut s0, mut s1) = (z0 * x0, z1 * x0);
    for v in x.iter_mut() {
        let xi = *v;
        let y = s.b[0] * xi + s0;
        s0 = s.b[1] * xi - s.a[1] * y + s1;
        s1 = s.b[2] * xi - s.a[2] * y;
        *v = y;
    }
}

/// Zero-phase filtering: odd-extension edge padding, forward pass through the
/// cascade, time reversal, second pass, reversal, trim. Output length equals
/// input length.
pub fn filtfilt_sos(sos: &[Sos], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = n.saturating_sub(1).min(300);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in 0..pad {
        ext.push(2.0 * x[0] - x[pad - i]);
    }
    ext.extend_from_slice(x);
    for i in 0..pad {
        ext.push(2.0 * x[n - 1] - x[n - 2 - i]);
    }
    for s in sos {
        biquad(s, &mut ext);
    }
    ext.reverse();
    for s in sos {
        biquad(s, &mut ext);
    }
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// The pipeline's preprocessing filter: 80 Hz high-pass Butterworth, order 4,
/// applied forward-backward so event timing is phase-true.
pub fn highpass_80(samples: &[f64], sample_rate: u32) -> Result<Vec<f64>> {
    if sample_rate <= 160 {
        return Err(Error::Config(format!(
            "sample rate {sample_rate} Hz too low for the 80 Hz high-pass"
        )));
    }
    let sos = butter_highpass_sos(4, 80.0, sample_rate as f64)?;
    Ok(filtfilt_sos(&sos, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Squared analytic Butterworth magnitude at digital frequency `f`,
    /// squared again because the filter runs forward and backward.
    fn zero_phase_gain(f: f64, fc: f64, fs: f64, order: i32) -> f64 {
        let ratio = (std::f64::consts::PI * fc / fs).tan() / (std::f64::consts::PI * f / fs).tan();
        let single = 1.0 / (1.0 + ratio.powi(2 * order));
        single * single
    }

    fn interior_amplitude(y: &[f64]) -> f64 {
        let lo = y.len() / 4;
        let hi = 3 * y.len() / 4;
        let mean_sq = y[lo..hi].iter().map(|v| v * v).sum::<f64>() / (hi - lo) as f64;
        (2.0 * mean_sq).sqrt()
    }

    fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn dc_is_rejected() {
        let y = highpass_80(&vec![1.0; 20000], 4000).unwrap();
        let settled = &y[2000..18000];
        assert!(settled.iter().all(|v| v.abs() < 1e-3), "max {:?}",
            settled.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }

    #[test]
    fn passband_500hz_within_one_percent() {
        let y = highpass_80(&sine(500.0, 4000.0, 20000), 4000).unwrap();
        let amp = interior_amplitude(&y);
        let expected = zero_phase_gain(500.0, 80.0, 4000.0, 4).sqrt();
        assert!((amp - 1.0).abs() < 0.01, "amplitude {amp}, analytic {expected}");
        assert!((amp - expected).abs() < 0.005, "amplitude {amp}, analytic {expected}");
    }

    #[test]
    fn stopband_10hz_heavily_attenuated() {
        let y = highpass_80(&sine(10.0, 4000.0, 40000), 4000).unwrap();
        let amp = interior_amplitude(&y);
        assert!(amp < 1e-5, "amplitude {amp}");
        // and consistent with the analytic zero-phase response
        let expected = zero_phase_gain(10.0, 80.0, 4000.0, 4).sqrt();
        assert!(amp < expected * 3.0, "amplitude {amp}, analytic {expected}");
    }

    #[test]
    fn matches_analytic_response_at_several_frequencies() {
        for f in [60.0, 80.0, 120.0, 250.0, 1000.0] {
            let y = highpass_80(&sine(f, 4000.0, 40000), 4000).unwrap();
            let amp = interior_amplitude(&y);
            let expected = zero_phase_gain(f, 80.0, 4000.0, 4).sqrt();
            assert!(
                (amp - expected).abs() < 0.01,
                "f={f}: amplitude {amp}, analytic {expected}"
            );
        }
    }

    #[test]
    fn output_length_matches_input() {
        for n in [0, 1, 5, 257, 1000] {
            let x = vec![0.5; n];
            assert_eq!(highpass_80(&x, 4000).unwrap().len(), n);
        }
    }

    #[test]
    fn low_sample_rate_rejected() {
        let err = highpass_80(&[0.0; 10], 160).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn linearity() {
        let a = sine(300.0, 4000.0, 4000);
        let b = sine(700.0, 4000.0, 4000);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let ya = highpass_80(&a, 4000).unwrap();
        let yb = highpass_80(&b, 4000).unwrap();
        let ysum = highpass_80(&sum, 4000).unwrap();
        for i in 0..ya.len() {
            assert!((ya[i] + yb[i] - ysum[i]).abs() < 1e-9);
        }
    }
}
