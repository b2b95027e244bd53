//! Model serialization: a magic tag, a JSON header describing the spec and
//! tensor inventory, then raw little-endian f64 payloads in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_model, Model, ModelSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CASDET01";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    spec: ModelSpec,
    n_input_rows: usize,
    seed: u64,
    threshold: f64,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

/// Serializes the model (weights and batch-norm buffers, not gradients).
/// The byte stream is a pure function of the model state.
pub fn save(model: &mut Model, path: &Path) -> Result<()> {
    let mut entries = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    model.visit_params(&mut |name, p, _| {
        entries.push(TensorEntry { name: name.to_string(), shape: p.value.shape.clone() });
        for &v in &p.value.data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        Ok(())
    })?;
    let header = Header {
        version: FORMAT_VERSION,
        spec: model.spec.clone(),
        n_input_rows: model.n_input_rows,
        seed: model.seed,
        threshold: model.threshold,
        tensors: entries,
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| Error::Data(format!("checkpoint header: {e}")))?;
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let put = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| Error::io(path, e))
    };
    put(&mut w, MAGIC)?;
    put(&mut w, &(header_json.len() as u32).to_le_bytes())?;
    put(&mut w, &header_json)?;
    put(&mut w, &payload)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Rebuilds the architecture from the stored spec, then overwrites every
/// tensor by name. Fails on magic/version mismatch, unknown or missing
/// tensors, shape disagreement, or a truncated payload.
pub fn load(path: &Path) -> Result<Model> {
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::bad_file(path, "too short for a checkpoint magic"))?;
    if &magic != MAGIC {
        return Err(Error::bad_file(path, "not a checkpoint (bad magic)"));
    }
    let mut len4 = [0u8; 4];
    r.read_exact(&mut len4).map_err(|_| Error::bad_file(path, "truncated header length"))?;
    let hlen = u32::from_le_bytes(len4) as usize;
    let mut hjson = vec![0u8; hlen];
    r.read_exact(&mut hjson).map_err(|_| Error::bad_file(path, "truncated header"))?;
    let header: Header = serde_json::from_slice(&hjson)
        .map_err(|e| Error::bad_file(path, format!("malformed header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::bad_file(
            path,
            format!("format version {} (this build reads {FORMAT_VERSION})", header.version),
        ));
    }

    let mut model = build_model(&header.spec, header.n_input_rows, header.seed)?;
    model.threshold = header.threshold;

    let mut stored: std::collections::BTreeMap<String, Vec<f64>> = std::collections::BTreeMap::new();
    let mut order = Vec::new();
    for entry in &header.tensors {
        let n: usize = entry.shape.iter().product();
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)
            .map_err(|_| Error::bad_file(path, format!("truncated payload for {}", entry.name)))?;
        let values: Vec<f64> =
            buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if stored.insert(entry.name.clone(), values).is_some() {
            return Err(Error::bad_file(path, format!("duplicate tensor {}", entry.name)));
        }
        order.push((entry.name.clone(), entry.shape.clone()));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::bad_file(path, "trailing bytes after tensor payload"));
    }

    let shapes: std::collections::BTreeMap<String, Vec<usize>> = order.into_iter().collect();
    model.visit_params(&mut |name, p, _| {
        let values = stored
            .remove(name)
            .ok_or_else(|| Error::bad_file(path, format!("missing tensor {name}")))?;
        let shape = &shapes[name];
        if *shape != p.value.shape {
            return Err(Error::bad_file(
                path,
                format!("tensor {name}: stored shape {:?}, model wants {:?}", shape, p.value.shape),
            ));
        }
        p.value.data.copy_from_slice(&values);
        Ok(())
    })?;
    if let Some((name, _)) = stored.into_iter().next() {
        return Err(Error::bad_file(path, format!("unknown tensor {name}")));
    }
    Ok(model)
}
