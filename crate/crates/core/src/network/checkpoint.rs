//! Self-describing checkpoint container.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` header length, a JSON header (config echo,
//! training metadata, tensor table) and the concatenated little-endian tensor payloads.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::config::{MoCoPnetCfg, TrainCfg};
use crate::network::model::MoCoPnet;
use crate::numerics::{ParamStore, Tensor};
use crate::scalar::Real;

pub const MAGIC: &[u8; 8] = b"IRSRCKPT";
pub const VERSION: u32 = 1;

const ADAM_FIRST: &str = "adam.m/";
const ADAM_SECOND: &str = "adam.v/";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Completed training iterations.
    pub iteration: usize,
    pub seed: u64,
    pub loss: Option<f64>,
    pub train: Option<TrainCfg>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamSnapshot<T> {
    pub step: u64,
    pub first: Vec<Tensor<T>>,
    pub second: Vec<Tensor<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub cfg: MoCoPnetCfg,
    pub meta: CheckpointMeta,
    pub params: ParamStore<T>,
    pub adam: Option<AdamSnapshot<T>>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: usize,
    bytes: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    cfg: MoCoPnetCfg,
    meta: CheckpointMeta,
    adam_step: Option<u64>,
    tensors: Vec<TensorEntry>,
}

fn decode<T: Real>(dtype: &str, bytes: &[u8]) -> Result<Vec<T>> {
    match dtype {
        "f32" => Ok(f32::from_le_bytes_slice(bytes).into_iter().map(|v| T::lit(v as f64)).collect()),
        "f64" => Ok(f64::from_le_bytes_slice(bytes).into_iter().map(T::lit).collect()),
        other => Err(Error::Checkpoint(format!("unsupported dtype {other:?}"))),
    }
}

impl<T: Real> Checkpoint<T> {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut tensors = Vec::new();
        let mut payload = Vec::new();
        let mut push = |name: String, t: &Tensor<T>| {
            let raw = T::to_le_bytes_vec(t.data());
            tensors.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                dtype: T::DTYPE.to_string(),
                offset: payload.len(),
                bytes: raw.len(),
            });
            payload.extend_from_slice(&raw);
        };
        for (name, t) in self.params.iter() {
            push(name.to_string(), t);
        }
        if let Some(adam) = &self.adam {
            let names: Vec<&str> = self.params.iter().map(|(n, _)| n).collect();
            if adam.first.len() != names.len() || adam.second.len() != names.len() {
                return Err(Error::Checkpoint("optimizer state does not match parameters".into()));
            }
            for ((name, m), v) in names.iter().zip(&adam.first).zip(&adam.second) {
                push(format!("{ADAM_FIRST}{name}"), m);
                push(format!("{ADAM_SECOND}{name}"), v);
            }
        }
        let header = Header {
            cfg: self.cfg.clone(),
            meta: self.meta.clone(),
            adam_step: self.adam.as_ref().map(|a| a.step),
            tensors,
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(20 + json.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(20..20 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let payload = &bytes[20 + hlen..];

        let mut params = ParamStore::new();
        let mut first = Vec::new();
        let mut second = Vec::new();
        for e in &header.tensors {
            let raw = payload
                .get(e.offset..e.offset + e.bytes)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {} out of range", e.name)))?;
            let t = Tensor::new(&e.shape, decode(&e.dtype, raw)?)?;
            if e.name.starts_with(ADAM_FIRST) {
                first.push(t);
            } else if e.name.starts_with(ADAM_SECOND) {
                second.push(t);
            } else {
                params.insert(e.name.clone(), t)?;
            }
        }
        let adam = header.adam_step.map(|step| AdamSnapshot { step, first, second });
        Ok(Self {
            cfg: header.cfg,
            meta: header.meta,
            params,
            adam,
        })
    }

    /// Network layout for `cfg` carrying the stored parameters.
    pub fn network(&self) -> Result<(MoCoPnet, ParamStore<T>)> {
        let (net, mut params) = MoCoPnet::init(self.cfg.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
        params.load_from(&self.params)?;
        Ok((net, params))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
