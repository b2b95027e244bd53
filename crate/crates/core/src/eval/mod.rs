//! Scoring: ground-truth rasterization onto the output grid, segment
//! confusion and metrics, ROC/AUC, and Jaccard-matched event counts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::FrameGrid;
use crate::labels::LabelEvent;
use crate::postprocess::DetectedEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SegmentConfusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl SegmentConfusion {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, other: &SegmentConfusion) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EventCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl EventCounts {
    pub fn add(&mut self, other: &EventCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// `None` marks an undefined metric (zero denominator), kept distinct from a
/// true zero; JSON shows it as null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentMetrics {
    pub acc: Option<f64>,
    pub ppv: Option<f64>,
    pub sen: Option<f64>,
    pub spe: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventMetrics {
    pub ppv: Option<f64>,
    pub sen: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Rasterize CAS-family labels onto a grid: step s is 1 iff the union of CAS
/// intervals covers at least half of the step's tile (boundary inclusive,
/// with 1e-9 absolute slack). Non-CAS labels are ignored.
pub fn rasterize_labels(labels: &[LabelEvent], grid: &FrameGrid) -> Result<Vec<u8>> {
    let span = grid.span_s();
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for ev in labels {
        if !ev.kind.is_cas() {
            continue;
        }
        if ev.t_start < -1e-9 || ev.t_end > span + 1e-9 {
            return Err(Error::Data(format!(
                "label {} [{:.3}, {:.3}) outside the {span:.3} s grid span",
                ev.kind, ev.t_start, ev.t_end
            )));
        }
        intervals.push((ev.t_start, ev.t_end));
    }
    intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // collapse to a disjoint union so overlapping labels are not double-counted
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in intervals {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }

    let h = grid.hop_s;
    let mut out = vec![0u8; grid.n_frames];
    let mut j = 0;
    for (s, step) in out.iter_mut().enumerate() {
        let (t0, t1) = (s as f64 * h, (s + 1) as f64 * h);
        while j < merged.len() && merged[j].1 <= t0 {
            j += 1;
        }
        let mut covered = 0.0;
        for &(a, b) in &merged[j..] {
            if a >= t1 {
                break;
            }
            covered += (b.min(t1) - a.max(t0)).max(0.0);
        }
        if covered >= 0.5 * h - 1e-9 {
            *step = 1;
        }
    }
    Ok(out)
}

pub fn segment_confusion(predicted: &[u8], truth: &[u8]) -> Result<SegmentConfusion> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(
            "segment_confusion",
            format!("{} steps", truth.len()),
            format!("{} steps", predicted.len()),
        ));
    }
    let mut c = SegmentConfusion::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        if p > 1 || t > 1 {
            return Err(Error::Data(format!("binary vectors expected, got ({p}, {t})")));
        }
        match (p, t) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (1, 0) => c.fp += 1,
            _ => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// ACC, PPV, SEN, SPE, and F1 from a confusion tally. F1 is computed as
/// 2tp/(2tp+fp+fn), which equals the harmonic mean of PPV and SEN wherever
/// those are defined and extends it to 0 when tp=0 with errors present.
pub fn segment_metrics(c: &SegmentConfusion) -> SegmentMetrics {
    SegmentMetrics {
        acc: ratio(c.tp + c.tn, c.total()),
        ppv: ratio(c.tp, c.tp + c.fp),
        sen: ratio(c.tp, c.tp + c.fn_),
        spe: ratio(c.tn, c.tn + c.fp),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    }
}

pub fn event_metrics(c: &EventCounts) -> EventMetrics {
    EventMetrics {
        ppv: ratio(c.tp, c.tp + c.fp),
        sen: ratio(c.tp, c.tp + c.fn_),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    }
}

/// Exact ROC by sweeping the threshold over every unique score (inclusive
/// `p ≥ θ` rule). The first point is the all-negative corner at a +∞
/// sentinel threshold; the last is (1,1) at the smallest score. AUC by
/// trapezoid, which equals the Mann-Whitney rank statistic.
pub fn roc_auc(probs: &[f64], truth: &[u8]) -> Result<RocCurve> {
    if probs.len() != truth.len() {
        return Err(Error::shape(
            "roc_auc",
            format!("{} scores", truth.len()),
            format!("{} scores", probs.len()),
        ));
    }
    if probs.is_empty() {
        return Err(Error::Data("roc_auc: empty input".into()));
    }
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("roc_auc: non-finite score".into()));
    }
    let n_pos = truth.iter().filter(|&&t| t == 1).count();
    let n_neg = truth.len() - n_pos;
    if truth.iter().any(|&t| t > 1) {
        return Err(Error::Data("roc_auc: truth must be 0/1".into()));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Data(format!(
            "roc_auc: single-class truth ({n_pos} positive, {n_neg} negative)"
        )));
    }

    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap());

    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let theta = probs[order[i]];
        // consume the whole tie group: at θ = this value, all of them flip
        while i < order.len() && probs[order[i]] == theta {
            if truth[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: theta,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    debug_assert_eq!(points.last().unwrap().fpr, 1.0);
    debug_assert_eq!(points.last().unwrap().tpr, 1.0);

    let mut auc = 0.0;
    for pair in points.windows(2) {
        auc += (pair[1].fpr - pair[0].fpr) * (pair[0].tpr + pair[1].tpr) / 2.0;
    }
    Ok(RocCurve { points, auc })
}

/// Intersection over union of two half-open intervals; 0 for disjoint or
/// zero-length inputs.
pub fn jaccard(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Bidirectional event matching at JI ≥ 0.5. Pass 1: every ground-truth
/// label with a matching prediction is a TP, else an FN. Pass 2: every
/// prediction without a matching label is an FP. The TP count is the number
/// of matched labels, so a pair found in both passes is counted once.
pub fn match_events(predicted: &[DetectedEvent], truth: &[LabelEvent]) -> Result<EventCounts> {
    for pair in predicted.windows(2) {
        if pair[1].t_start < pair[0].t_start {
            return Err(Error::Data("match_events: predictions not sorted by start".into()));
        }
    }
    for pair in truth.windows(2) {
        if pair[1].t_start < pair[0].t_start {
            return Err(Error::Data("match_events: labels not sorted by start".into()));
        }
    }

    // JI ≥ 0.5 needs overlap, so only intersecting pairs can match; with both
    // lists sorted by start, a window whose lower edge only ever advances
    // covers all candidates. (Overlapping labels make end times non-monotone,
    // so stale window members are skipped inside the scan, not dropped.)
    let matched = |window: &[DetectedEvent], lab: &LabelEvent| {
        window
            .iter()
            .take_while(|p| p.t_start < lab.t_end)
            .filter(|p| p.t_end > lab.t_start)
            .any(|p| jaccard((p.t_start, p.t_end), (lab.t_start, lab.t_end)) >= 0.5)
    };

    let mut matched_labels = 0;
    let mut lo = 0;
    for lab in truth {
        while lo < predicted.len() && predicted[lo].t_end <= lab.t_start {
            lo += 1;
        }
        if matched(&predicted[lo..], lab) {
            matched_labels += 1;
        }
    }

    let mut matched_preds = 0;
    let mut lo = 0;
    for p in predicted {
        while lo < truth.len() && truth[lo].t_end <= p.t_start {
            lo += 1;
        }
        let hit = truth[lo..]
            .iter()
            .take_while(|lab| lab.t_start < p.t_end)
            .filter(|lab| lab.t_end > p.t_start)
            .any(|lab| jaccard((p.t_start, p.t_end), (lab.t_start, lab.t_end)) >= 0.5);
        if hit {
            matched_preds += 1;
        }
    }

    Ok(EventCounts {
        tp: matched_labels,
        fp: predicted.len() - matched_preds,
        fn_: truth.len() - matched_labels,
    })
}

/// Pairwise brute-force reference for `match_events`: enumerate every
/// label-prediction pair and apply the two passes independently.
#[doc(hidden)]
pub fn match_events_bruteforce(predicted: &[DetectedEvent], truth: &[LabelEvent]) -> EventCounts {
    let hit = |p: &DetectedEvent, l: &LabelEvent| {
        jaccard((p.t_start, p.t_end), (l.t_start, l.t_end)) >= 0.5
    };
    let matched_labels = truth.iter().filter(|l| predicted.iter().any(|p| hit(p, l))).count();
    let matched_preds = predicted.iter().filter(|p| truth.iter().any(|l| hit(p, l))).count();
    EventCounts {
        tp: matched_labels,
        fp: predicted.len() - matched_preds,
        fn_: truth.len() - matched_labels,
    }
}

/// Midrank Mann-Whitney statistic; the rank-based AUC oracle.
#[doc(hidden)]
pub fn mann_whitney_auc(probs: &[f64], truth: &[u8]) -> f64 {
    let n = probs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| probs[a].partial_cmp(&probs[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && probs[order[j]] == probs[order[i]] {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0; // average of ranks i+1 ..= j
        for &idx in &order[i..j] {
            ranks[idx] = mid;
        }
        i = j;
    }
    let n_pos = truth.iter().filter(|&&t| t == 1).count();
    let n_neg = n - n_pos;
    let rank_sum: f64 = (0..n).filter(|&i| truth[i] == 1).map(|i| ranks[i]).sum();
    (rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64)
}
