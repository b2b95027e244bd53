//! WAV recording I/O: RIFF PCM, mono, 16-bit little-endian.

use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 4000;

/// A mono audio recording with samples in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Recording {
    /// Usually the WAV file stem; used to name per-recording artifacts.
    pub id: String,
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl Recording {
    pub fn new(id: impl Into<String>, sample_rate: u32, samples: Vec<f64>) -> Self {
        Recording { id: id.into(), sample_rate, samples }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn chunk_id(bytes: &[u8]) -> [u8; 4] {
    [bytes[0], bytes[1], bytes[2], bytes[3]]
}

fn read_u16(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Read a mono 16-bit PCM WAV file. Integer samples are rescaled to
/// `[-1, 1)` by dividing by 32768; the sample rate comes from the header.
pub fn read_wav(path: &Path) -> Result<Recording> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::bad_file(path, reason);

    if bytes.len() < 12 || chunk_id(&bytes) != *b"RIFF" || chunk_id(&bytes[8..]) != *b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // codec, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = chunk_id(&bytes[pos..]);
        let size = read_u32(&bytes, pos + 4) as usize;
        let body_start = pos + 8;
        match &id {
            b"fmt " => {
                if body_start + 16 > bytes.len() || size < 16 {
                    return Err(bad("truncated fmt chunk"));
                }
                fmt = Some((
                    read_u16(&bytes, body_start),
                    read_u16(&bytes, body_start + 2),
                    read_u32(&bytes, body_start + 4),
                    read_u16(&bytes, body_start + 14),
                ));
            }
            b"data" => {
                if body_start + size > bytes.len() {
                    return Err(bad(&format!(
                        "truncated data payload: header declares {size} bytes, {} available",
                        bytes.len() - body_start
                    )));
                }
                data = Some(&bytes[body_start..body_start + size]);
            }
            _ => {} // skip LIST, fact, ...
        }
        pos = body_start + size + (size & 1); // chunks are word-aligned
    }

    let (codec, channels, sample_rate, bits) = fmt.ok_or_else(|| bad("missing fmt chunk"))?;
    if codec != 1 {
        return Err(bad(&format!("codec {codec} unsupported (PCM only)")));
    }
    if channels != 1 {
        return Err(bad(&format!("channel count {channels} unsupported")));
    }
    if bits != 16 {
        return Err(bad(&format!("bit depth {bits} unsupported (16-bit only)")));
    }
    if sample_rate == 0 {
        return Err(bad("sample rate 0"));
    }
    let payload = data.ok_or_else(|| bad("missing data chunk"))?;
    if payload.len() % 2 != 0 {
        return Err(bad("truncated data payload: odd byte count for 16-bit samples"));
    }

    let samples = payload
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recording".to_string());
    Ok(Recording { id, sample_rate, samples })
}

/// Write a mono 16-bit PCM WAV file. Samples are clamped to `[-1, 1]`
/// and scaled by 32767.
pub fn write_wav(path: &Path, sample_rate: u32, samples: &[f64]) -> Result<()> {
    let n_bytes = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + n_bytes);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + n_bytes) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(n_bytes as u32).to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Linear-interpolation resampling to `target_rate`.
pub fn resample_linear(rec: &Recording, target_rate: u32) -> Recording {
    if rec.sample_rate == target_rate || rec.samples.is_empty() {
        let mut out = rec.clone();
        out.sample_rate = target_rate;
        return out;
    }
    let ratio = rec.sample_rate as f64 / target_rate as f64;
    let out_len = (rec.samples.len() as f64 / ratio).round() as usize;
    let n = rec.samples.len();
    let samples = (0..out_len)
        .map(|i| {
            let x = i as f64 * ratio;
            let i0 = (x.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            let frac = x - i0 as f64;
            rec.samples[i0] * (1.0 - frac) + rec.samples[i1] * frac
        })
        .collect();
    Recording { id: rec.id.clone(), sample_rate: target_rate, samples }
}
