//! Versioned binary feature dump: one file per recording holding the stacked
//! feature matrix and its grid metadata.
//!
//! Layout: magic `CASFEAT1` · u32-LE header length · JSON header · row-major
//! f64-LE matrix payload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::stft::FrameGrid;
use crate::features::FeatureMatrix;

const MAGIC: &[u8; 8] = b"CASFEAT1";

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    id: String,
    n_spec_rows: usize,
    n_mfcc_rows: usize,
    n_energy_rows: usize,
    n_frames: usize,
    hop_s: f64,
    normalized: bool,
}

pub fn write_features(path: &Path, id: &str, matrix: &FeatureMatrix) -> Result<()> {
    let header = Header {
        version: 1,
        id: id.to_string(),
        n_spec_rows: matrix.n_spec_rows,
        n_mfcc_rows: matrix.n_mfcc_rows,
        n_energy_rows: matrix.n_energy_rows,
        n_frames: matrix.n_frames,
        hop_s: matrix.grid.hop_s,
        normalized: matrix.normalized,
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::bad_file(path, format!("header encoding: {e}")))?;
    let mut out = Vec::with_capacity(12 + header_json.len() + matrix.data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for v in &matrix.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<(String, FeatureMatrix)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::bad_file(path, reason);
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(bad("not a feature dump (bad magic)".into()));
    }
    let hlen = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    if 12 + hlen > bytes.len() {
        return Err(bad("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[12..12 + hlen])
        .map_err(|e| bad(format!("header decoding: {e}")))?;
    if header.version != 1 {
        return Err(bad(format!("unsupported version {}", header.version)));
    }
    let n_rows = header.n_spec_rows + header.n_mfcc_rows + header.n_energy_rows;
    let expected = n_rows * header.n_frames * 8;
    let payload = &bytes[12 + hlen..];
    if payload.len() != expected {
        return Err(bad(format!(
            "payload is {} bytes, expected {expected} ({n_rows}×{} f64)",
            payload.len(),
            header.n_frames
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((
        header.id,
        FeatureMatrix {
            n_spec_rows: header.n_spec_rows,
            n_mfcc_rows: header.n_mfcc_rows,
            n_energy_rows: header.n_energy_rows,
            n_frames: header.n_frames,
            data,
            grid: FrameGrid { n_frames: header.n_frames, hop_s: header.hop_s },
            normalized: header.normalized,
        },
    ))
}
