//! Model file format: a versioned binary blob that round-trips a trained
//! model exactly.
//!
//! Layout:
//! ```text
//! magic   b"OCCM"
//! version u32 LE (currently 1)
//! hlen    u32 LE, length of the JSON header
//! header  JSON: config echo, train record, param/buffer shapes
//! params  f64 LE, tensors concatenated in network traversal order
//! buffers f64 LE, batch-norm running stats in traversal order
//! digest  SHA-256 of everything above
//! ```
//!
//! The trailing digest makes truncation and bit rot loud; the embedded
//! shapes make a header/tensor mismatch loud before any tensor is read.

use super::network::Network;
use super::{ClassifierConfig, TrainRecord, TrainedModel};
use crate::error::{Error, Result};
use byteorder::{ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write as _;
use std::path::Path;

const MAGIC: &[u8; 4] = b"OCCM";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ClassifierConfig,
    record: TrainRecord,
    param_shapes: Vec<Vec<usize>>,
    buffer_lens: Vec<usize>,
}

/// Serializes a model to its blob form.
pub fn model_to_bytes(model: &TrainedModel) -> Vec<u8> {
    // the visitors hand out &mut, so walk a scratch clone
    let mut work = model.clone();
    let param_shapes: Vec<Vec<usize>> = work
        .network_mut()
        .params_mut()
        .iter()
        .map(|p| p.value.shape().to_vec())
        .collect();
    let buffer_lens: Vec<usize> = work
        .network_mut()
        .buffers_mut()
        .iter()
        .map(|b| b.len())
        .collect();
    let header = Header {
        config: model.config().clone(),
        record: model.record().clone(),
        param_shapes,
        buffer_lens,
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");

    let mut out = Vec::new();
    out.write_all(MAGIC).unwrap();
    out.write_u32::<LittleEndian>(VERSION).unwrap();
    out.write_u32::<LittleEndian>(header_json.len() as u32)
        .unwrap();
    out.write_all(&header_json).unwrap();
    for p in work.network_mut().params_mut() {
        for v in p.value.iter() {
            out.write_f64::<LittleEndian>(*v).unwrap();
        }
    }
    for b in work.network_mut().buffers_mut() {
        for v in b.iter() {
            out.write_f64::<LittleEndian>(*v).unwrap();
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Reconstructs a model from blob bytes, verifying magic, version,
/// digest, and tensor shapes.
pub fn load_model_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    let corrupt = |reason: &str| Error::CorruptModel(reason.to_string());
    if bytes.len() < MAGIC.len() + 8 + 32 {
        return Err(corrupt("file shorter than the fixed framing"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    let expected = Sha256::digest(body);
    if digest != expected.as_slice() {
        return Err(corrupt("checksum mismatch (truncated or altered file)"));
    }
    if &body[..4] != MAGIC {
        return Err(corrupt("bad magic; not a model file"));
    }
    let version = LittleEndian::read_u32(&body[4..8]);
    if version != VERSION {
        return Err(Error::ModelVersion {
            found: version,
            expected: VERSION,
        });
    }
    let hlen = LittleEndian::read_u32(&body[8..12]) as usize;
    let tensors_at = 12 + hlen;
    if tensors_at > body.len() {
        return Err(corrupt("header length exceeds file size"));
    }
    let header: Header = serde_json::from_slice(&body[12..tensors_at])
        .map_err(|e| Error::CorruptModel(format!("header: {e}")))?;
    header
        .config
        .validate()
        .map_err(|e| Error::CorruptModel(e.to_string()))?;

    // validate the declared shapes against the payload length first, with
    // checked math so an absurd shape list errors instead of overflowing
    let expected_values: Option<usize> = header
        .param_shapes
        .iter()
        .map(|s| s.iter().try_fold(1usize, |a, &d| a.checked_mul(d)))
        .chain(header.buffer_lens.iter().map(|&l| Some(l)))
        .try_fold(0usize, |a, n| a.checked_add(n?));
    let tensor_bytes = &body[tensors_at..];
    if expected_values.and_then(|n| n.checked_mul(8)) != Some(tensor_bytes.len()) {
        return Err(corrupt(
            "tensor payload length disagrees with header shapes",
        ));
    }

    // rebuild the architecture, then overwrite every tensor from the blob
    let mut rng = ChaCha8Rng::seed_from_u64(header.config.seed);
    let mut network = Network::build(
        header.config.architecture,
        header.config.input_dims,
        header.config.n_classes,
        &mut rng,
    )
    .map_err(|e| Error::CorruptModel(e.to_string()))?;

    let mut reader = tensor_bytes;
    {
        let params = network.params_mut();
        if params.len() != header.param_shapes.len() {
            return Err(corrupt("parameter count disagrees with architecture"));
        }
        for (p, shape) in params.into_iter().zip(&header.param_shapes) {
            if p.value.shape() != shape.as_slice() {
                return Err(corrupt("parameter shape disagrees with architecture"));
            }
            for v in p.value.iter_mut() {
                *v = reader.read_f64::<LittleEndian>().unwrap();
            }
            p.zero_grad();
        }
    }
    {
        let buffers = network.buffers_mut();
        if buffers.len() != header.buffer_lens.len() {
            return Err(corrupt("buffer count disagrees with architecture"));
        }
        for (b, len) in buffers.into_iter().zip(&header.buffer_lens) {
            if b.len() != *len {
                return Err(corrupt("buffer length disagrees with architecture"));
            }
            for v in b.iter_mut() {
                *v = reader.read_f64::<LittleEndian>().unwrap();
            }
        }
    }

    Ok(TrainedModel::from_parts(
        header.config,
        header.record,
        network,
    ))
}

/// Writes the model blob via a temp file and rename, so readers never see
/// a half-written model.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let bytes = model_to_bytes(model);
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            Error::io(path, e)
        }
    })?;
    load_model_bytes(&bytes).map_err(|e| match e {
        Error::CorruptModel(reason) => Error::ModelFile {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}
