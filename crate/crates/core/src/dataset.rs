//! Dataset assembly: manifests pairing WAV files with label files, and the
//! CAS-containing-recordings filter applied before training.

use std::path::{Path, PathBuf};

use crate::audio::{read_wav, Recording};
use crate::error::{Error, Result};
use crate::labels::{read_labels, LabelEvent};

#[derive(Debug, Clone)]
pub struct DatasetEntry {
    pub recording: Recording,
    pub labels: Vec<LabelEvent>,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub entries: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parse a manifest: one `<wav-path> <label-path>` pair per line, `#` comments
/// and blank lines skipped. Relative paths resolve against the manifest's
/// directory. Paths must not contain whitespace.
pub fn read_manifest(path: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::bad_line(
                path,
                idx + 1,
                format!("expected `<wav-path> <label-path>`, got {} fields", fields.len()),
            ));
        }
        let resolve = |p: &str| {
            let pb = PathBuf::from(p);
            if pb.is_absolute() { pb } else { base.join(pb) }
        };
        pairs.push((resolve(fields[0]), resolve(fields[1])));
    }
    Ok(pairs)
}

/// Write a manifest with paths as given, optionally preceded by a
/// `# seed <n>` header.
pub fn write_manifest(path: &Path, pairs: &[(PathBuf, PathBuf)], seed: Option<u64>) -> Result<()> {
    let mut out = String::new();
    if let Some(seed) = seed {
        out.push_str(&format!("# seed {seed}\n"));
    }
    for (wav, labels) in pairs {
        out.push_str(&format!("{} {}\n", wav.display(), labels.display()));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Load every recording/label pair listed in a manifest and validate that
/// labels fall inside their recording's span.
pub fn load_dataset(manifest: &Path) -> Result<Dataset> {
    let pairs = read_manifest(manifest)?;
    let mut entries = Vec::with_capacity(pairs.len());
    for (wav_path, label_path) in pairs {
        let recording = read_wav(&wav_path)?;
        let labels = read_labels(&label_path)?;
        let duration = recording.duration_s();
        for ev in &labels {
            if ev.t_end > duration + 1e-9 {
                return Err(Error::bad_file(
                    &label_path,
                    format!(
                        "label {} [{:.3}, {:.3}) extends past the {duration:.3} s recording",
                        ev.kind, ev.t_start, ev.t_end
                    ),
                ));
            }
        }
        entries.push(DatasetEntry { recording, labels });
    }
    Ok(Dataset { entries })
}

/// Keep exactly the entries that carry at least one CAS-family label
/// (C, W, S, or R); order is preserved. Idempotent.
pub fn filter_cas_dataset(dataset: Dataset) -> Dataset {
    Dataset {
        entries: dataset
            .entries
            .into_iter()
            .filter(|e| e.labels.iter().any(|l| l.kind.is_cas()))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::SoundKind;

    fn entry(kinds: &[SoundKind]) -> DatasetEntry {
        DatasetEntry {
            recording: Recording::new("r", 4000, vec![0.0; 4000]),
            labels: kinds
                .iter()
                .map(|&k| LabelEvent::new(k, 0.1, 0.5))
                .collect(),
        }
    }

    #[test]
    fn filter_keeps_cas_drops_ie_only() {
        use SoundKind::*;
        let ds = Dataset {
            entries: vec![entry(&[I, E]), entry(&[R]), entry(&[I, W, E]), entry(&[D]), entry(&[])],
        };
        let filtered = filter_cas_dataset(ds);
        assert_eq!(filtered.len(), 2);
        assert!(filtered.entries[0].labels.iter().any(|l| l.kind == R));
        assert!(filtered.entries[1].labels.iter().any(|l| l.kind == W));
    }

    #[test]
    fn filter_empty_dataset_is_empty() {
        assert!(filter_cas_dataset(Dataset::default()).is_empty());
    }

    #[test]
    fn filter_is_idempotent_and_never_adds() {
        use SoundKind::*;
        let ds = Dataset { entries: vec![entry(&[I]), entry(&[C]), entry(&[S])] };
        let n0 = ds.len();
        let once = filter_cas_dataset(ds);
        assert!(once.len() <= n0);
        let n1 = once.len();
        let twice = filter_cas_dataset(once);
        assert_eq!(twice.len(), n1);
    }

    #[test]
    fn manifest_roundtrip_and_relative_resolution() {
        let dir = std::env::temp_dir().join("casdet-dataset-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let manifest = dir.join("manifest.txt");
        let pairs = vec![
            (PathBuf::from("a.wav"), PathBuf::from("a.txt")),
            (PathBuf::from("/abs/b.wav"), PathBuf::from("/abs/b.txt")),
        ];
        write_manifest(&manifest, &pairs, Some(3)).unwrap();
        let back = read_manifest(&manifest).unwrap();
        assert_eq!(back[0].0, dir.join("a.wav"));
        assert_eq!(back[0].1, dir.join("a.txt"));
        assert_eq!(back[1].0, PathBuf::from("/abs/b.wav"));
    }

    #[test]
    fn load_dataset_roundtrip_with_validation() {
        let dir = std::env::temp_dir().join("casdet-dataset-load");
        std::fs::create_dir_all(&dir).unwrap();
        crate::audio::write_wav(&dir.join("r0.wav"), 4000, &vec![0.1; 8000]).unwrap();
        std::fs::write(dir.join("r0.txt"), "W 0.5 1.5\n").unwrap();
        write_manifest(
            &dir.join("m.txt"),
            &[(PathBuf::from("r0.wav"), PathBuf::from("r0.txt"))],
            None,
        )
        .unwrap();
        let ds = load_dataset(&dir.join("m.txt")).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.entries[0].labels.len(), 1);

        // a label past the end of the 2 s recording must be rejected
        std::fs::write(dir.join("r0.txt"), "W 0.5 3.5\n").unwrap();
        let err = load_dataset(&dir.join("m.txt")).unwrap_err().to_string();
        assert!(err.contains("extends past"), "got: {err}");
    }
}
