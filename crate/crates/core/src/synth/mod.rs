//! Synthetic labeled corpus generation: tonal adventitious events over a
//! pink-noise breathing background, with exact labels by construction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::audio::Recording;
use crate::dataset::{Dataset, DatasetEntry};
use crate::error::{Error, Result};
use crate::labels::{LabelEvent, SoundKind};

/// Frequency trajectory shape of one tonal event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contour {
    Flat,
    Wiggle,
    /// Rise then fall: the ridge frequency peaks at the event midpoint.
    V,
    W,
    InvertedV,
}

impl Contour {
    const ALL: [Contour; 5] =
        [Contour::Flat, Contour::Wiggle, Contour::V, Contour::W, Contour::InvertedV];

    /// Knot multipliers applied to `f0`, evenly spaced over the event.
    fn knots(self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Contour::Flat => vec![1.0, 1.0],
            Contour::V => vec![1.0, 5.0 / 3.0, 1.0],
            Contour::InvertedV => vec![5.0 / 3.0, 1.0, 5.0 / 3.0],
            Contour::W => vec![1.5, 1.0, 1.5, 1.0, 1.5],
            Contour::Wiggle => (0..9).map(|_| 1.0 + 0.1 * rng.random_range(-1.0..1.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreathPhase {
    Inspiratory,
    Expiratory,
    Both,
}

/// One tonal event to synthesize.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Fundamental frequency in Hz at the contour's unit multiplier.
    pub f0: f64,
    /// Harmonics above the fundamental; those crossing Nyquist are dropped.
    pub n_harmonics: usize,
    pub contour: Contour,
    pub phase: BreathPhase,
    /// Adds a second voice a fourth above the fundamental.
    pub polyphonic: bool,
    /// Tone power over a unit-RMS background.
    pub snr_db: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Label kind implied by the spectral content: low fundamentals are
    /// rhonchi, inspiratory tones are stridor, the rest are wheezes.
    pub fn kind(&self) -> SoundKind {
        if self.f0 < 200.0 {
            SoundKind::R
        } else if self.phase == BreathPhase::Inspiratory {
            SoundKind::S
        } else {
            SoundKind::W
        }
    }
}

const EDGE_RAMP_S: f64 = 0.010;

/// Synthesize one labeled tonal event.
///
/// The waveform is a sum of harmonic sinusoids following a piecewise-linear
/// frequency contour, with raised-cosine edge ramps, normalized so the RMS
/// over a unit-RMS background realizes `snr_db`. The caller scales it by the
/// actual background RMS when mixing.
pub fn synth_cas(
    spec: &SynthSpec,
    sample_rate: u32,
    duration_s: f64,
    t_start: f64,
) -> Result<(Vec<f64>, LabelEvent)> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::Config(format!("event duration must be positive, got {duration_s}")));
    }
    if !(t_start >= 0.0) {
        return Err(Error::Config(format!("event start must be non-negative, got {t_start}")));
    }
    if !(spec.f0 > 0.0) || !spec.f0.is_finite() {
        return Err(Error::Config(format!("fundamental must be positive, got {}", spec.f0)));
    }
    let sr = sample_rate as f64;
    let nyquist = sr / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let knots = spec.contour.knots(&mut rng);
    let max_mult = knots.iter().cloned().fold(f64::MIN, f64::max);
    let voice_f0s: Vec<f64> = if spec.polyphonic {
        vec![spec.f0, spec.f0 * 4.0 / 3.0]
    } else {
        vec![spec.f0]
    };
    for &f0 in &voice_f0s {
        if f0 * max_mult > nyquist {
            return Err(Error::Data(format!(
                "contour reaches {:.1} Hz, above the {nyquist:.1} Hz Nyquist limit",
                f0 * max_mult
            )));
        }
    }

    let n = (duration_s * sr).round() as usize;
    let n = n.max(1);
    let mut wave = vec![0.0; n];
    for &f0 in &voice_f0s {
        // drop harmonics whose contour would cross Nyquist
        let harmonics: Vec<usize> =
            (1..=spec.n_harmonics + 1).filter(|&h| h as f64 * f0 * max_mult <= nyquist).collect();
        let mut phases: Vec<f64> =
            harmonics.iter().map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        for i in 0..n {
            let pos = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            let x = pos * (knots.len() - 1) as f64;
            let k = (x.floor() as usize).min(knots.len() - 2);
            let frac = x - k as f64;
            let f = f0 * (knots[k] * (1.0 - frac) + knots[k + 1] * frac);
            for (j, &h) in harmonics.iter().enumerate() {
                phases[j] = (phases[j] + std::f64::consts::TAU * h as f64 * f / sr)
                    % std::f64::consts::TAU;
                wave[i] += phases[j].sin() / h as f64;
            }
        }
    }

    let ramp = (EDGE_RAMP_S.min(duration_s / 2.0) * sr).round() as usize;
    for i in 0..ramp.min(n) {
        let g = 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / ramp as f64).cos());
        wave[i] *= g;
        wave[n - 1 - i] *= g;
    }

    let rms = (wave.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        let target = 10f64.powf(spec.snr_db / 20.0);
        let gain = target / rms;
        for x in &mut wave {
            *x *= gain;
        }
    }

    let label = LabelEvent::new(spec.kind(), t_start, t_start + duration_s);
    Ok((wave, label))
}

/// Corpus generation parameters.
#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub n_recordings: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    /// Events per recording are drawn uniformly from `0..=max_events`.
    pub max_events: usize,
    pub mean_duration_s: f64,
    pub snr_db: f64,
    /// RMS of the pink-noise background.
    pub noise_rms: f64,
    /// Allow harmonics on rhonchus events (otherwise they stay pure tones).
    pub rhonchus_harmonics: bool,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_recordings: 10,
            duration_s: 15.0,
            sample_rate: 4000,
            max_events: 4,
            mean_duration_s: 0.8,
            snr_db: 15.0,
            noise_rms: 0.05,
            rhonchus_harmonics: false,
            seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_recordings == 0 {
            return Err(Error::Config("corpus needs at least one recording".into()));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::Config(format!(
                "recording duration must be positive, got {}",
                self.duration_s
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if !(self.mean_duration_s > 0.0) {
            return Err(Error::Config(format!(
                "mean event duration must be positive, got {}",
                self.mean_duration_s
            )));
        }
        if !(self.noise_rms > 0.0) {
            return Err(Error::Config(format!(
                "noise RMS must be positive, got {}",
                self.noise_rms
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Config("SNR must be finite".into()));
        }
        Ok(())
    }
}

// Paul Kellett's economy pink-noise filter over white Gaussian input.
fn pink_noise(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let w: f64 = StandardNormal.sample(rng);
        b[0] = 0.99886 * b[0] + w * 0.0555179;
        b[1] = 0.99332 * b[1] + w * 0.0750759;
        b[2] = 0.96900 * b[2] + w * 0.1538520;
        b[3] = 0.86650 * b[3] + w * 0.3104856;
        b[4] = 0.55000 * b[4] + w * 0.5329522;
        b[5] = -0.7616 * b[5] - w * 0.0168980;
        out.push(b.iter().sum::<f64>() + w * 0.5362);
        b[6] = w * 0.115926;
    }
    out
}

fn quantize_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

// Minimum silence between events; wider than the postprocess merge gap so
// distinct synthetic events never fuse.
const MIN_EVENT_GAP_S: f64 = 0.7;
const EDGE_MARGIN_S: f64 = 0.25;

fn plan_events(cfg: &CorpusConfig, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let n_events = rng.random_range(0..=cfg.max_events);
    let dur_dist = Normal::new(cfg.mean_duration_s, 0.2).expect("std is positive");
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for _ in 0..n_events {
        for _attempt in 0..50 {
            let d = quantize_ms(dur_dist.sample(rng).clamp(0.25, 1.6));
            let hi = cfg.duration_s - EDGE_MARGIN_S - d;
            if hi <= EDGE_MARGIN_S {
                break;
            }
            let t0 = quantize_ms(rng.random_range(EDGE_MARGIN_S..hi));
            let t1 = t0 + d;
            let clear = spans
                .iter()
                .all(|&(s, e)| t1 + MIN_EVENT_GAP_S <= s || e + MIN_EVENT_GAP_S <= t0);
            if clear {
                spans.push((t0, t1));
                break;
            }
        }
    }
    spans.sort_by(|a, b| a.partial_cmp(b).unwrap());
    spans
}

fn draw_spec(cfg: &CorpusConfig, rng: &mut ChaCha8Rng) -> SynthSpec {
    let rhonchus = rng.random_range(0..4) == 0;
    let (f0, phase) = if rhonchus {
        (rng.random_range(100.0..180.0), BreathPhase::Expiratory)
    } else {
        let phase = match rng.random_range(0..3) {
            0 => BreathPhase::Inspiratory,
            1 => BreathPhase::Expiratory,
            _ => BreathPhase::Both,
        };
        (rng.random_range(250.0..800.0), phase)
    };
    let n_harmonics =
        if rhonchus && !cfg.rhonchus_harmonics { 0 } else { rng.random_range(0..=2) };
    // rhonchus contours stay gentle so the instantaneous frequency holds
    // under 200 Hz
    let contour = if rhonchus {
        [Contour::Flat, Contour::Wiggle][rng.random_range(0..2)]
    } else {
        Contour::ALL[rng.random_range(0..Contour::ALL.len())]
    };
    SynthSpec {
        f0,
        n_harmonics,
        contour,
        phase,
        polyphonic: rng.random_range(0..10) == 0,
        snr_db: cfg.snr_db,
        seed: rng.random(),
    }
}

/// Generate one recording with its exact labels.
pub fn synth_recording(cfg: &CorpusConfig, index: usize) -> Result<DatasetEntry> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64),
    );
    let sr = cfg.sample_rate as f64;
    let n = (cfg.duration_s * sr).round() as usize;
    let mut samples = pink_noise(n, &mut rng);
    let noise_rms = (samples.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let gain = cfg.noise_rms / noise_rms.max(1e-12);
    for x in &mut samples {
        *x *= gain;
    }

    let mut labels = Vec::new();
    for (t0, t1) in plan_events(cfg, &mut rng) {
        let spec = draw_spec(cfg, &mut rng);
        let (wave, label) = synth_cas(&spec, cfg.sample_rate, t1 - t0, t0)?;
        let offset = (t0 * sr).round() as usize;
        for (i, &w) in wave.iter().enumerate() {
            if offset + i < n {
                samples[offset + i] += w * cfg.noise_rms;
            }
        }
        labels.push(label);
    }

    let peak = samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if peak > 0.99 {
        let s = 0.99 / peak;
        for x in &mut samples {
            *x *= s;
        }
    }

    Ok(DatasetEntry {
        recording: Recording::new(format!("synth_{index:04}"), cfg.sample_rate, samples),
        labels,
    })
}

/// Generate a corpus; deterministic under `cfg.seed`, with per-recording
/// derived seeds so recordings are independent of corpus size.
pub fn synth_corpus(cfg: &CorpusConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut entries = Vec::with_capacity(cfg.n_recordings);
    for r in 0..cfg.n_recordings {
        entries.push(synth_recording(cfg, r)?);
    }
    Ok(Dataset { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::stft::{stft, Spectrogram};

    fn flat_spec(f0: f64, n_harmonics: usize) -> SynthSpec {
        SynthSpec {
            f0,
            n_harmonics,
            contour: Contour::Flat,
            phase: BreathPhase::Expiratory,
            polyphonic: false,
            snr_db: 20.0,
            seed: 5,
        }
    }

    fn tone_spectrogram(spec: &SynthSpec, duration_s: f64) -> Spectrogram {
        let (wave, _) = synth_cas(spec, 4000, duration_s, 0.0).unwrap();
        stft(&wave, 4000).unwrap()
    }

    fn frame_peak_bin(s: &Spectrogram, frame: usize) -> usize {
        (0..s.n_bins)
            .max_by(|&a, &b| s.mag(a, frame).partial_cmp(&s.mag(b, frame)).unwrap())
            .unwrap()
    }

    #[test]
    fn flat_tone_puts_ridges_at_fundamental_and_harmonics() {
        let s = tone_spectrogram(&flat_spec(400.0, 2), 1.0);
        let bin_hz = s.freq_resolution;
        // interior frames only; edge ramps blur the first and last few
        for frame in 5..s.n_frames - 5 {
            for target_hz in [400.0, 800.0, 1200.0] {
                let target = (target_hz / bin_hz).round() as usize;
                let lo = target - 3;
                let hi = target + 3;
                let local = (lo..=hi)
                    .max_by(|&a, &b| s.mag(a, frame).partial_cmp(&s.mag(b, frame)).unwrap())
                    .unwrap();
                assert!(
                    local.abs_diff(target) <= 1,
                    "frame {frame}: ridge near {target_hz} Hz found at bin {local}, want {target}±1"
                );
                let mut mags: Vec<f64> = (0..s.n_bins).map(|b| s.mag(b, frame)).collect();
                mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = mags[s.n_bins / 2];
                assert!(s.mag(local, frame) > 10.0 * median);
            }
        }
    }

    #[test]
    fn zero_harmonics_leaves_a_single_ridge() {
        let s = tone_spectrogram(&flat_spec(400.0, 0), 1.0);
        let cutoff = (600.0 / s.freq_resolution).ceil() as usize;
        for frame in 5..s.n_frames - 5 {
            let peak = s.mag(frame_peak_bin(&s, frame), frame);
            let above: f64 =
                (cutoff..s.n_bins).map(|b| s.mag(b, frame)).fold(0.0, f64::max);
            assert!(above < 0.05 * peak, "frame {frame}: energy above 600 Hz");
        }
    }

    #[test]
    fn v_contour_ridge_is_unimodal_with_midpoint_max() {
        let spec = SynthSpec { contour: Contour::V, ..flat_spec(300.0, 0) };
        let s = tone_spectrogram(&spec, 2.0);
        let ridge: Vec<usize> =
            (3..s.n_frames - 3).map(|f| frame_peak_bin(&s, f)).collect();
        let (argmax, &max_bin) =
            ridge.iter().enumerate().max_by_key(|&(_, &b)| b).unwrap();
        let mid = ridge.len() / 2;
        assert!(
            argmax.abs_diff(mid) < ridge.len() / 5,
            "ridge max at frame {argmax}, expected near {mid}"
        );
        // 300 Hz ≈ bin 19, 500 Hz ≈ bin 32
        assert!(max_bin >= ridge[0] + 8 && max_bin >= *ridge.last().unwrap() + 8);
        let up = &ridge[..argmax];
        assert!(up.windows(2).all(|w| w[1] + 2 >= w[0]), "rise is not monotone: {up:?}");
        let down = &ridge[argmax..];
        assert!(down.windows(2).all(|w| w[0] + 2 >= w[1]), "fall is not monotone: {down:?}");
    }

    #[test]
    fn polyphonic_adds_a_second_voice() {
        let spec = SynthSpec { polyphonic: true, ..flat_spec(300.0, 0) };
        let s = tone_spectrogram(&spec, 1.0);
        let frame = s.n_frames / 2;
        for target_hz in [300.0, 400.0] {
            let target = (target_hz / s.freq_resolution).round() as usize;
            let local = (target - 3..=target + 3)
                .max_by(|&a, &b| s.mag(a, frame).partial_cmp(&s.mag(b, frame)).unwrap())
                .unwrap();
            assert!(local.abs_diff(target) <= 1);
            let mut mags: Vec<f64> = (0..s.n_bins).map(|b| s.mag(b, frame)).collect();
            mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert!(s.mag(local, frame) > 10.0 * mags[s.n_bins / 2]);
        }
    }

    #[test]
    fn contour_above_nyquist_is_rejected_but_harmonics_clip() {
        // V contour peaks at 5/3 of f0: 1300 Hz stays under 2000, fine
        let ok = SynthSpec { contour: Contour::V, ..flat_spec(1170.0, 0) };
        assert!(synth_cas(&ok, 4000, 0.5, 0.0).is_ok());
        // 1250 · 5/3 > 2000 → error
        let bad = SynthSpec { contour: Contour::V, ..flat_spec(1250.0, 0) };
        let err = synth_cas(&bad, 4000, 0.5, 0.0).unwrap_err().to_string();
        assert!(err.contains("Nyquist"), "{err}");
        // harmonics above Nyquist are dropped silently: 1500·2 = 3000 > 2000
        let clipped = flat_spec(1500.0, 2);
        let s = tone_spectrogram(&clipped, 1.0);
        let frame = s.n_frames / 2;
        let peak = frame_peak_bin(&s, frame);
        assert_eq!(
            (peak as f64 * s.freq_resolution / 1500.0).round() as usize,
            1,
            "only the fundamental should remain"
        );
    }

    #[test]
    fn kind_follows_frequency_and_phase() {
        assert_eq!(flat_spec(150.0, 0).kind(), SoundKind::R);
        let s = SynthSpec { phase: BreathPhase::Inspiratory, ..flat_spec(400.0, 0) };
        assert_eq!(s.kind(), SoundKind::S);
        assert_eq!(flat_spec(400.0, 0).kind(), SoundKind::W);
        let both = SynthSpec { phase: BreathPhase::Both, ..flat_spec(400.0, 0) };
        assert_eq!(both.kind(), SoundKind::W);
    }

    #[test]
    fn label_matches_requested_span() {
        let (wave, label) = synth_cas(&flat_spec(400.0, 1), 4000, 0.75, 2.5).unwrap();
        assert_eq!(wave.len(), 3000);
        assert_eq!(label.kind, SoundKind::W);
        assert!((label.t_start - 2.5).abs() < 1e-12);
        assert!((label.t_end - 3.25).abs() < 1e-12);
    }

    #[test]
    fn snr_scaling_sets_tone_rms() {
        let (wave, _) = synth_cas(&flat_spec(400.0, 0), 4000, 1.0, 0.0).unwrap();
        let rms = (wave.iter().map(|x| x * x).sum::<f64>() / wave.len() as f64).sqrt();
        assert!((rms - 10.0).abs() < 1e-9, "20 dB over unit noise → RMS 10, got {rms}");
    }

    #[test]
    fn corpus_is_deterministic_and_seed_sensitive() {
        let cfg = CorpusConfig { n_recordings: 3, duration_s: 4.0, seed: 11, ..Default::default() };
        let a = synth_corpus(&cfg).unwrap();
        let b = synth_corpus(&cfg).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!(x.recording.samples, y.recording.samples);
            assert_eq!(x.labels.len(), y.labels.len());
        }
        let c = synth_corpus(&CorpusConfig { seed: 12, ..cfg }).unwrap();
        assert!(
            a.entries.iter().zip(&c.entries).any(|(x, y)| x.recording.samples
                != y.recording.samples),
            "distinct seeds should give distinct corpora"
        );
    }

    #[test]
    fn recordings_do_not_depend_on_corpus_size() {
        let small = CorpusConfig { n_recordings: 2, duration_s: 3.0, seed: 7, ..Default::default() };
        let large = CorpusConfig { n_recordings: 5, ..small.clone() };
        let a = synth_corpus(&small).unwrap();
        let b = synth_corpus(&large).unwrap();
        for i in 0..2 {
            assert_eq!(a.entries[i].recording.samples, b.entries[i].recording.samples);
        }
    }

    #[test]
    fn no_events_mix_yields_empty_cas_filter() {
        let cfg = CorpusConfig {
            n_recordings: 4,
            duration_s: 3.0,
            max_events: 0,
            seed: 2,
            ..Default::default()
        };
        let ds = synth_corpus(&cfg).unwrap();
        assert!(ds.entries.iter().all(|e| e.labels.is_empty()));
        assert!(crate::dataset::filter_cas_dataset(ds).is_empty());
    }

    #[test]
    fn corpus_structure_invariants() {
        let cfg = CorpusConfig { n_recordings: 20, seed: 3, ..Default::default() };
        let ds = synth_corpus(&cfg).unwrap();
        for e in &ds.entries {
            assert_eq!(e.recording.samples.len(), 60_000);
            assert_eq!(e.recording.sample_rate, 4000);
            assert!(e.recording.samples.iter().all(|x| x.abs() <= 0.99 + 1e-12));
            for w in e.labels.windows(2) {
                assert!(
                    w[1].t_start - w[0].t_end >= MIN_EVENT_GAP_S - 1e-9,
                    "events too close: {w:?}"
                );
            }
            for l in &e.labels {
                assert!(l.kind.is_cas());
                assert!(l.t_start >= EDGE_MARGIN_S - 1e-9);
                assert!(l.t_end <= cfg.duration_s - EDGE_MARGIN_S + 1e-9);
                // times land on the millisecond grid, so label files roundtrip exactly
                for t in [l.t_start, l.t_end] {
                    assert!((t * 1000.0 - (t * 1000.0).round()).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn mean_event_duration_tracks_target() {
        let cfg = CorpusConfig { n_recordings: 100, seed: 4, ..Default::default() };
        let ds = synth_corpus(&cfg).unwrap();
        let durations: Vec<f64> = ds
            .entries
            .iter()
            .flat_map(|e| e.labels.iter().map(|l| l.duration_s()))
            .collect();
        assert!(durations.len() > 100, "expected a populated corpus, got {}", durations.len());
        let mean = durations.iter().sum::<f64>() / durations.len() as f64;
        assert!((mean - 0.8).abs() < 0.2, "mean duration {mean}");
    }

    #[test]
    fn labeled_band_outpowers_unlabeled_band_by_snr_margin() {
        // one flat event mixed over pink noise exactly as the corpus does
        let snr_db = 15.0;
        let f0 = 420.0;
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let n = 4000 * 6;
        let mut samples = pink_noise(n, &mut rng);
        let noise_rms = 0.05;
        let rms = (samples.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
        for x in &mut samples {
            *x *= noise_rms / rms;
        }
        let spec = SynthSpec { snr_db, ..flat_spec(f0, 0) };
        let (wave, label) = synth_cas(&spec, 4000, 1.0, 2.0).unwrap();
        let offset = 8000;
        for (i, &w) in wave.iter().enumerate() {
            samples[offset + i] += w * noise_rms;
        }
        let s = stft(&samples, 4000).unwrap();
        let bin = (f0 / s.freq_resolution).round() as usize;
        let band = bin - 1..=bin + 1;
        let frame_of = |t: f64| (t / s.grid.hop_s) as usize;
        let band_power = |frames: std::ops::Range<usize>| {
            let mut acc = 0.0;
            let mut cnt = 0usize;
            for f in frames {
                for b in band.clone() {
                    acc += s.mag(b, f).powi(2);
                    cnt += 1;
                }
            }
            acc / cnt as f64
        };
        let inside = band_power(frame_of(label.t_start) + 2..frame_of(label.t_end) - 2);
        let outside = band_power(frame_of(4.0)..frame_of(5.5));
        let gain_db = 10.0 * (inside / outside).log10();
        assert!(
            gain_db >= snr_db - 3.0,
            "labeled band only {gain_db:.1} dB above background"
        );
    }

    #[test]
    fn rhonchus_events_stay_below_200_hz() {
        let spec = SynthSpec { contour: Contour::V, ..flat_spec(120.0, 0) };
        assert_eq!(spec.kind(), SoundKind::R);
        let s = tone_spectrogram(&spec, 1.0);
        let cutoff = (250.0 / s.freq_resolution).ceil() as usize;
        let total: f64 = (0..s.n_bins)
            .map(|b| s.bin_row(b).iter().map(|m| m * m).sum::<f64>())
            .sum();
        let high: f64 = (cutoff..s.n_bins)
            .map(|b| s.bin_row(b).iter().map(|m| m * m).sum::<f64>())
            .sum();
        assert!(high < 0.02 * total, "rhonchus leaks {high} of {total} above 250 Hz");
        // corpus draws keep rhonchus instantaneous frequency under 200 Hz
        let cfg = CorpusConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut seen = 0;
        for _ in 0..200 {
            let d = draw_spec(&cfg, &mut rng);
            if d.kind() == SoundKind::R {
                seen += 1;
                assert_eq!(d.n_harmonics, 0);
                assert!(matches!(d.contour, Contour::Flat | Contour::Wiggle));
                assert!(d.f0 * 1.1 < 200.0, "instantaneous max {}", d.f0 * 1.1);
            }
        }
        assert!(seen > 20, "rhonchus draws too rare: {seen}");
    }
}
