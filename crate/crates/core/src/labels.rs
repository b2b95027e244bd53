//! Ground-truth label files: one `<kind> <t_start> <t_end>` event per line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The seven annotation letters. I/E are inhalation/exhalation, D is a
/// discontinuous sound; the CAS family is {C, W, S, R}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SoundKind {
    /// inhalation
    I,
    /// exhalation
    E,
    /// continuous adventitious sound, unspecified subtype
    C,
    /// wheeze
    W,
    /// stridor
    S,
    /// rhonchus
    R,
    /// discontinuous adventitious sound
    D,
}

impl SoundKind {
    pub fn is_cas(self) -> bool {
        matches!(self, SoundKind::C | SoundKind::W | SoundKind::S | SoundKind::R)
    }
}

impl FromStr for SoundKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "I" => Ok(SoundKind::I),
            "E" => Ok(SoundKind::E),
            "C" => Ok(SoundKind::C),
            "W" => Ok(SoundKind::W),
            "S" => Ok(SoundKind::S),
            "R" => Ok(SoundKind::R),
            "D" => Ok(SoundKind::D),
            other => Err(format!("unknown label kind {other:?} (expected one of I E C W S R D)")),
        }
    }
}

impl fmt::Display for SoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            SoundKind::I => 'I',
            SoundKind::E => 'E',
            SoundKind::C => 'C',
            SoundKind::W => 'W',
            SoundKind::S => 'S',
            SoundKind::R => 'R',
            SoundKind::D => 'D',
        };
        write!(f, "{c}")
    }
}

/// A labeled interval `[t_start, t_end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelEvent {
    pub kind: SoundKind,
    pub t_start: f64,
    pub t_end: f64,
}

impl LabelEvent {
    pub fn new(kind: SoundKind, t_start: f64, t_end: f64) -> Self {
        LabelEvent { kind, t_start, t_end }
    }

    pub fn duration_s(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Parse a label file. Blank lines and `#` comments are skipped; events are
/// returned sorted by start time. Errors carry the 1-based line number.
pub fn read_labels(path: &Path) -> Result<Vec<LabelEvent>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::bad_line(
                path,
                line_no,
                format!("expected 3 fields `<kind> <t_start> <t_end>`, got {}", fields.len()),
            ));
        }
        let kind = SoundKind::from_str(fields[0])
            .map_err(|e| Error::bad_line(path, line_no, e))?;
        let t_start: f64 = fields[1]
            .parse()
            .map_err(|_| Error::bad_line(path, line_no, format!("non-numeric t_start {:?}", fields[1])))?;
        let t_end: f64 = fields[2]
            .parse()
            .map_err(|_| Error::bad_line(path, line_no, format!("non-numeric t_end {:?}", fields[2])))?;
        if !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::bad_line(path, line_no, "non-finite time"));
        }
        if t_start < 0.0 {
            return Err(Error::bad_line(path, line_no, format!("t_start {t_start} < 0")));
        }
        if t_end <= t_start {
            return Err(Error::bad_line(path, line_no, "t_end ≤ t_start"));
        }
        events.push(LabelEvent { kind, t_start, t_end });
    }
    events.sort_by(|a, b| (a.t_start, a.t_end).partial_cmp(&(b.t_start, b.t_end)).unwrap());
    Ok(events)
}

/// Write events with 3-decimal seconds, optionally preceded by a
/// `# seed <n>` header.
pub fn write_labels(path: &Path, events: &[LabelEvent], seed: Option<u64>) -> Result<()> {
    let mut out = String::new();
    if let Some(seed) = seed {
        out.push_str(&format!("# seed {seed}\n"));
    }
    for ev in events {
        out.push_str(&format!("{} {:.3} {:.3}\n", ev.kind, ev.t_start, ev.t_end));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("casdet-label-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn parses_single_line() {
        let path = tmp("one.txt");
        std::fs::write(&path, "W 1.25 2.10\n").unwrap();
        let evs = read_labels(&path).unwrap();
        assert_eq!(evs, vec![LabelEvent::new(SoundKind::W, 1.25, 2.10)]);
    }

    #[test]
    fn empty_file_gives_empty_list() {
        let path = tmp("empty.txt");
        std::fs::write(&path, "").unwrap();
        assert!(read_labels(&path).unwrap().is_empty());
    }

    #[test]
    fn reversed_times_rejected_with_line_number() {
        let path = tmp("rev.txt");
        std::fs::write(&path, "W 2.0 1.0\n").unwrap();
        let err = read_labels(&path).unwrap_err().to_string();
        assert!(err.contains(":1:"), "got: {err}");
        assert!(err.contains("t_end ≤ t_start"), "got: {err}");
    }

    #[test]
    fn unknown_kind_rejected() {
        let path = tmp("kind.txt");
        std::fs::write(&path, "I 0.0 1.0\nX 1.0 2.0\n").unwrap();
        let err = read_labels(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "got: {err}");
        assert!(err.contains("unknown label kind"), "got: {err}");
    }

    #[test]
    fn wrong_field_count_rejected() {
        let path = tmp("fields.txt");
        std::fs::write(&path, "W 1.0\n").unwrap();
        let err = read_labels(&path).unwrap_err().to_string();
        assert!(err.contains("expected 3 fields"), "got: {err}");
    }

    #[test]
    fn non_numeric_time_rejected() {
        let path = tmp("nan.txt");
        std::fs::write(&path, "W abc 2.0\n").unwrap();
        let err = read_labels(&path).unwrap_err().to_string();
        assert!(err.contains("non-numeric t_start"), "got: {err}");
    }

    #[test]
    fn events_sorted_by_start() {
        let path = tmp("sort.txt");
        std::fs::write(&path, "W 3.0 4.0\nR 1.0 2.0\nI 2.0 2.5\n").unwrap();
        let evs = read_labels(&path).unwrap();
        let starts: Vec<f64> = evs.iter().map(|e| e.t_start).collect();
        assert_eq!(starts, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn roundtrip_at_three_decimals() {
        let path = tmp("rt.txt");
        let evs = vec![
            LabelEvent::new(SoundKind::W, 0.125, 1.5),
            LabelEvent::new(SoundKind::R, 3.002, 4.75),
            LabelEvent::new(SoundKind::I, 5.0, 6.0),
        ];
        write_labels(&path, &evs, Some(7)).unwrap();
        let back = read_labels(&path).unwrap();
        assert_eq!(back, evs);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# seed 7\n"));
    }

    #[test]
    fn cas_family_is_cwsr() {
        use SoundKind::*;
        for k in [C, W, S, R] {
            assert!(k.is_cas());
        }
        for k in [I, E, D] {
            assert!(!k.is_cas());
        }
    }
}
