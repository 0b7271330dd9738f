//! On-disk network formats.
//!
//! JSON manifest:
//!
//! ```json
//! {"activation": "tanh",
//!  "layers": [{"rows": 2, "cols": 3, "weights": [/* row-major */], "bias": [/* optional */]}]}
//! ```
//!
//! Floats are written in the shortest form that parses back to the same
//! double, so a save/load cycle is bit-exact.
//!
//! Binary sidecar (all integers `u32`, all floats `f64`, little-endian):
//!
//! ```text
//! "LNET" | version | activation (0 relu, 1 tanh, 2 sigmoid) | layer count
//! per layer: rows | cols | has_bias (0 or 1)
//! per layer: rows*cols row-major weights, then rows bias entries if present
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Layer, Network};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const BINARY_MAGIC: &[u8; 4] = b"LNET";
pub const BINARY_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    activation: Activation,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
}

pub fn network_to_json(net: &Network) -> String {
    let file = NetworkFile {
        activation: net.activation(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerFile {
                rows: l.weights.rows(),
                cols: l.weights.cols(),
                weights: l.weights.as_slice().to_vec(),
                bias: l.bias.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("network manifest always serializes")
}

pub fn network_from_json(text: &str) -> Result<Network> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: "<memory>".into(),
        message: e.to_string(),
    })?;
    let layers = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(k, l)| {
            let weights = DenseMatrix::from_row_major(l.rows, l.cols, l.weights)
                .map_err(|e| Error::InvalidNetwork(format!("layer {}: {e}", k + 1)))?;
            Ok(Layer {
                weights,
                bias: l.bias,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers, file.activation)
}

pub fn write_binary(net: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    let act: u32 = match net.activation() {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Sigmoid => 2,
    };
    out.extend_from_slice(&act.to_le_bytes());
    out.extend_from_slice(&(net.num_layers() as u32).to_le_bytes());
    for l in net.layers() {
        out.extend_from_slice(&(l.weights.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(l.weights.cols() as u32).to_le_bytes());
        out.extend_from_slice(&u32::from(l.bias.is_some()).to_le_bytes());
    }
    for l in net.layers() {
        for v in l.weights.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in l.bias.iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::InvalidNetwork(format!(
                "binary network truncated at byte {}",
                self.pos
            ))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::InvalidNetwork("binary layer size overflows".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn read_binary(bytes: &[u8]) -> Result<Network> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != BINARY_MAGIC {
        return Err(Error::InvalidNetwork("missing LNET magic".into()));
    }
    let version = cur.u32()?;
    if version != BINARY_VERSION {
        return Err(Error::InvalidNetwork(format!(
            "unsupported binary version {version}"
        )));
    }
    let activation = match cur.u32()? {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        2 => Activation::Sigmoid,
        other => {
            return Err(Error::InvalidNetwork(format!(
                "unknown activation code {other}"
            )))
        }
    };
    let count = cur.u32()? as usize;
    let mut table = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let has_bias = match cur.u32()? {
            0 => false,
            1 => true,
            other => {
                return Err(Error::InvalidNetwork(format!("bad bias flag {other}")));
            }
        };
        table.push((rows, cols, has_bias));
    }
    let mut layers = Vec::with_capacity(count);
    for (k, (rows, cols, has_bias)) in table.into_iter().enumerate() {
        let weights = DenseMatrix::from_row_major(rows, cols, cur.f64s(rows * cols)?)
            .map_err(|e| Error::InvalidNetwork(format!("layer {}: {e}", k + 1)))?;
        let bias = if has_bias {
            Some(cur.f64s(rows)?)
        } else {
            None
        };
        layers.push(Layer { weights, bias });
    }
    if cur.pos != bytes.len() {
        return Err(Error::InvalidNetwork(format!(
            "{} trailing bytes after binary network",
            bytes.len() - cur.pos
        )));
    }
    Network::new(layers, activation)
}

/// Loads a network, detecting the binary format by its magic bytes.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let with_path = |e: Error| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        Error::InvalidNetwork(message) => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    };
    if bytes.starts_with(BINARY_MAGIC) {
        return read_binary(&bytes).map_err(with_path);
    }
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    network_from_json(text).map_err(with_path)
}

pub fn save_network_json(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, network_to_json(net))?;
    Ok(())
}

pub fn save_network_binary(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_binary(net))?;
    Ok(())
}

/// Saves as binary when the extension is `.lnet`, JSON otherwise.
pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "lnet") {
        save_network_binary(net, path)
    } else {
        save_network_json(net, path)
    }
}
