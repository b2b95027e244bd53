//! From the per-step probability vector to detected events: threshold,
//! connect runs into events, merge neighbors that are close in time and in
//! energy-peak frequency, then delete sub-0.05 s bursts.

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FrameGrid, Spectrogram};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectedEvent {
    pub t_start: f64,
    pub t_end: f64,
    /// Center frequency of the argmax bin of the event-averaged power
    /// spectrum; drives the merge rule.
    pub peak_freq: f64,
}

impl DetectedEvent {
    pub fn duration_s(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeConfig {
    /// Merge candidates must be closer in time than this (strict).
    pub gap_s: f64,
    /// ... and closer in peak frequency than this (strict).
    pub peak_hz: f64,
    /// Events shorter than this (strict) are deleted at the end.
    pub min_duration_s: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig { gap_s: 0.5, peak_hz: 25.0, min_duration_s: 0.05 }
    }
}

impl MergeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gap_s", self.gap_s), ("peak_hz", self.peak_hz), ("min_duration_s", self.min_duration_s)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Element i is 1 iff `probs[i] ≥ theta` (boundary inclusive).
pub fn threshold_segments(probs: &[f64], theta: f64) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= theta)).collect()
}

/// Maximal runs of ones become events `[first·step, (last+1)·step)`.
/// Peak frequencies are left at 0 until attached from a spectrogram.
pub fn segments_to_events(binary: &[u8], grid: &FrameGrid) -> Result<Vec<DetectedEvent>> {
    if binary.len() != grid.n_frames {
        return Err(Error::shape(
            "segments_to_events",
            format!("{} steps", grid.n_frames),
            format!("{} steps", binary.len()),
        ));
    }
    let mut events = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &b) in binary.iter().enumerate() {
        match (b, run_start) {
            (1, None) => run_start = Some(i),
            (0, Some(s)) => {
                events.push(DetectedEvent {
                    t_start: s as f64 * grid.hop_s,
                    t_end: i as f64 * grid.hop_s,
                    peak_freq: 0.0,
                });
                run_start = None;
            }
            (0, None) | (1, Some(_)) => {}
            (v, _) => return Err(Error::Data(format!("binary vector contains {v}"))),
        }
    }
    if let Some(s) = run_start {
        events.push(DetectedEvent {
            t_start: s as f64 * grid.hop_s,
            t_end: grid.n_frames as f64 * grid.hop_s,
            peak_freq: 0.0,
        });
    }
    Ok(events)
}

/// Average the power spectrum (squared magnitudes) over the event's frames
/// and return the center frequency of the argmax bin; ties break toward the
/// lowest frequency, so an all-zero spectrum maps to 0 Hz.
pub fn event_peak_frequency(t_start: f64, t_end: f64, spec: &Spectrogram) -> Result<f64> {
    let h = spec.grid.hop_s;
    let span = spec.grid.span_s();
    if t_start < -1e-9 || t_end > span + 1e-9 || t_end <= t_start {
        return Err(Error::Data(format!(
            "event [{t_start:.3}, {t_end:.3}) outside the spectrogram span [0, {span:.3})"
        )));
    }
    // every frame whose tile overlaps the event
    let m0 = ((t_start / h + 1e-9).floor().max(0.0)) as usize;
    let m1 = ((t_end / h - 1e-9).ceil() as usize).min(spec.n_frames);
    let m1 = m1.max(m0 + 1);

    let mut best_bin = 0;
    let mut best_power = f64::NEG_INFINITY;
    for bin in 0..spec.n_bins {
        let row = spec.bin_row(bin);
        let power: f64 = row[m0..m1].iter().map(|&m| m * m).sum::<f64>() / (m1 - m0) as f64;
        if power > best_power {
            best_power = power;
            best_bin = bin;
        }
    }
    Ok(spec.bin_center_hz(best_bin))
}

fn check_sorted_disjoint(events: &[DetectedEvent]) -> Result<()> {
    for pair in events.windows(2) {
        if pair[1].t_start < pair[0].t_end {
            return Err(Error::Data(format!(
                "events must be sorted and non-overlapping: [{:.3}, {:.3}) then [{:.3}, {:.3})",
                pair[0].t_start, pair[0].t_end, pair[1].t_start, pair[1].t_end
            )));
        }
    }
    Ok(())
}

fn mergeable(left: &DetectedEvent, right: &DetectedEvent, cfg: &MergeConfig) -> bool {
    right.t_start - left.t_end < cfg.gap_s && (right.peak_freq - left.peak_freq).abs() < cfg.peak_hz
}

/// Left-to-right merge scan. Whenever two neighbors are closer than `gap_s`
/// in time and `peak_hz` in peak frequency (both strict), they fuse into one
/// event spanning both, with the peak recomputed over the merged span; the
/// fused event is then re-compared against its left neighbor, so the result
/// is a fixpoint.
pub fn merge_events(
    events: &[DetectedEvent],
    spec: &Spectrogram,
    cfg: &MergeConfig,
) -> Result<Vec<DetectedEvent>> {
    cfg.validate()?;
    check_sorted_disjoint(events)?;
    let mut out: Vec<DetectedEvent> = Vec::with_capacity(events.len());
    for &ev in events {
        let mut cur = ev;
        while let Some(top) = out.last() {
            if mergeable(top, &cur, cfg) {
                let top = out.pop().expect("non-empty");
                cur = DetectedEvent {
                    t_start: top.t_start,
                    t_end: cur.t_end,
                    peak_freq: event_peak_frequency(top.t_start, cur.t_end, spec)?,
                };
            } else {
                break;
            }
        }
        out.push(cur);
    }
    Ok(out)
}

/// Drop events shorter than `min_duration_s` (strict; an exactly 0.05 s
/// event survives the default config).
pub fn remove_bursts(events: Vec<DetectedEvent>, cfg: &MergeConfig) -> Vec<DetectedEvent> {
    events.into_iter().filter(|e| e.duration_s() >= cfg.min_duration_s).collect()
}

/// The full chain: threshold → runs → peaks → merge → burst removal.
pub fn detect_events(
    probs: &[f64],
    theta: f64,
    grid: &FrameGrid,
    spec: &Spectrogram,
    cfg: &MergeConfig,
) -> Result<Vec<DetectedEvent>> {
    let binary = threshold_segments(probs, theta);
    let mut events = segments_to_events(&binary, grid)?;
    for ev in &mut events {
        ev.peak_freq = event_peak_frequency(ev.t_start, ev.t_end, spec)?;
    }
    let merged = merge_events(&events, spec, cfg)?;
    Ok(remove_bursts(merged, cfg))
}

/// One `<t_start> <t_end> <peak_freq_hz>` line per event, 3 decimals,
/// optionally preceded by a `# seed <n>` header.
pub fn write_events(path: &Path, events: &[DetectedEvent], seed: Option<u64>) -> Result<()> {
    let mut out = String::new();
    if let Some(seed) = seed {
        out.push_str(&format!("# seed {seed}\n"));
    }
    for ev in events {
        out.push_str(&format!("{:.3} {:.3} {:.3}\n", ev.t_start, ev.t_end, ev.peak_freq));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_events(path: &Path) -> Result<Vec<DetectedEvent>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::bad_line(
                path,
                idx + 1,
                format!("expected `<t_start> <t_end> <peak_freq_hz>`, got {} fields", fields.len()),
            ));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::bad_line(path, idx + 1, format!("non-numeric {what} {s:?}")))
        };
        let ev = DetectedEvent {
            t_start: parse(fields[0], "t_start")?,
            t_end: parse(fields[1], "t_end")?,
            peak_freq: parse(fields[2], "peak_freq")?,
        };
        if !ev.t_start.is_finite() || !ev.t_end.is_finite() || ev.t_end <= ev.t_start {
            return Err(Error::bad_line(path, idx + 1, "bad event interval"));
        }
        events.push(ev);
    }
    Ok(events)
}

/// Reference merge used to validate the scan: after every single merge,
/// restart the search for the leftmost mergeable pair from scratch.
#[doc(hidden)]
pub fn merge_events_restart_oracle(
    events: &[DetectedEvent],
    spec: &Spectrogram,
    cfg: &MergeConfig,
) -> Result<Vec<DetectedEvent>> {
    cfg.validate()?;
    check_sorted_disjoint(events)?;
    let mut list = events.to_vec();
    'outer: loop {
        for i in 0..list.len().saturating_sub(1) {
            if mergeable(&list[i], &list[i + 1], cfg) {
                let merged = DetectedEvent {
                    t_start: list[i].t_start,
                    t_end: list[i + 1].t_end,
                    peak_freq: event_peak_frequency(list[i].t_start, list[i + 1].t_end, spec)?,
                };
                list.splice(i..=i + 1, [merged]);
                continue 'outer;
            }
        }
        return Ok(list);
    }
}
