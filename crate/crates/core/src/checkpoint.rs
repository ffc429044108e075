//! `TTNBORN1` checkpoint container.
//!
//! Layout: the 8-byte magic, a little-endian `u64` header length, a UTF-8
//! JSON header, then one block per tensor (a little-endian `u64` byte
//! length followed by little-endian `f64` values in row-major order).
//! Tensor log-scales are folded into the values before writing.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::OrderingDescriptor;
use crate::factor_graph::TreeFactorGraph;
use crate::{BornModel, DenseTensor, Error, ModelKind, NodeId, Result, Scalar, TreeNetwork};

pub const MAGIC: &[u8; 8] = b"TTNBORN1";

/// Run metadata stored alongside the tensors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub ordering: Option<OrderingDescriptor>,
    pub seed: u64,
    pub epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    model_type: String,
    n_sites: usize,
    d_max: usize,
    /// `(u, v, dim)` per edge.
    bond_dims: Vec<(usize, usize, usize)>,
    shapes: Vec<Vec<usize>>,
    center: Option<NodeId>,
    ordering: Option<OrderingDescriptor>,
    seed: u64,
    epoch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factor_graph: Option<FactorLayout>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FactorLayout {
    n_vars: usize,
    edges: Vec<(usize, usize)>,
    visible: Vec<usize>,
    /// Tables are stored as natural logarithms of the factor entries.
    encoding: String,
}

#[derive(Clone, Debug)]
pub enum Checkpoint<T> {
    Born(BornModel<T>, RunInfo),
    FactorGraph(TreeFactorGraph, RunInfo),
}

impl<T> Checkpoint<T> {
    pub fn info(&self) -> &RunInfo {
        match self {
            Checkpoint::Born(_, i) | Checkpoint::FactorGraph(_, i) => i,
        }
    }

    pub fn model_type(&self) -> &'static str
    where
        T: Scalar,
    {
        match self {
            Checkpoint::Born(m, _) => m.kind().name(),
            Checkpoint::FactorGraph(..) => "treefg",
        }
    }
}

fn assemble(header: &Header, blocks: &[Vec<f64>]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len() + blocks.iter().map(|b| 8 + 8 * b.len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for b in blocks {
        out.extend_from_slice(&((b.len() * 8) as u64).to_le_bytes());
        for x in b {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

fn folded<T: Scalar>(t: &DenseTensor<T>) -> Result<Vec<f64>> {
    let mut t = t.clone();
    t.fold_scale();
    let v: Vec<f64> = t.data().iter().map(|x| x.as_f64()).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("tensor with non-finite entries cannot be saved".into()));
    }
    Ok(v)
}

pub fn encode_model<T: Scalar>(model: &BornModel<T>, info: &RunInfo) -> Result<Vec<u8>> {
    let header = Header {
        model_type: model.kind().name().into(),
        n_sites: model.n_pixels(),
        d_max: model.d_max(),
        bond_dims: model.bond_dims(),
        shapes: model.tensors().iter().map(|t| t.shape().to_vec()).collect(),
        center: model.center(),
        ordering: info.ordering,
        seed: info.seed,
        epoch: info.epoch,
        factor_graph: None,
    };
    let blocks = model.tensors().iter().map(folded).collect::<Result<Vec<_>>>()?;
    assemble(&header, &blocks)
}

pub fn encode_factor_graph(fg: &TreeFactorGraph, info: &RunInfo) -> Result<Vec<u8>> {
    let header = Header {
        model_type: "treefg".into(),
        n_sites: fg.n_pixels(),
        d_max: 2,
        bond_dims: fg.edges().iter().map(|&(i, j)| (i, j, 2)).collect(),
        shapes: vec![vec![2, 2]; fg.edges().len()],
        center: None,
        ordering: info.ordering,
        seed: info.seed,
        epoch: info.epoch,
        factor_graph: Some(FactorLayout {
            n_vars: fg.n_vars(),
            edges: fg.edges().to_vec(),
            visible: fg.visible().to_vec(),
            encoding: "log".into(),
        }),
    };
    let blocks: Vec<Vec<f64>> = fg.log_tables().iter().map(|t| t.to_vec()).collect();
    assemble(&header, &blocks)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("file truncated in {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("eight bytes")))
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8, "magic")? != MAGIC {
        return Err(Error::Checkpoint("not a TTNBORN1 file".into()));
    }
    let hlen = cur.u64("header length")? as usize;
    let header: Header =
        serde_json::from_slice(cur.take(hlen, "header")?).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let mut blocks = Vec::with_capacity(header.shapes.len());
    for (k, shape) in header.shapes.iter().enumerate() {
        let len = cur.u64("tensor length")? as usize;
        let want = shape.iter().product::<usize>() * 8;
        if len != want {
            return Err(Error::Checkpoint(format!("tensor {k} holds {len} bytes, shape needs {want}")));
        }
        let raw = cur.take(len, "tensor data")?;
        blocks.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
                .collect::<Vec<f64>>(),
        );
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    let info = RunInfo {
        ordering: header.ordering,
        seed: header.seed,
        epoch: header.epoch,
    };
    let kind = match header.model_type.as_str() {
        "ttn" => ModelKind::Ttn,
        "mps" => ModelKind::Mps,
        "treefg" => {
            let layout = header
                .factor_graph
                .ok_or_else(|| Error::Checkpoint("factor graph layout missing".into()))?;
            if layout.encoding != "log" {
                return Err(Error::Checkpoint(format!("unknown table encoding {:?}", layout.encoding)));
            }
            let tables = blocks
                .iter()
                .map(|b| <[f64; 4]>::try_from(b.as_slice()).map_err(|_| Error::Checkpoint("factor table is not 2×2".into())))
                .collect::<Result<Vec<_>>>()?;
            let fg = TreeFactorGraph::new(layout.n_vars, layout.edges, tables, layout.visible)?;
            return Ok(Checkpoint::FactorGraph(fg, info));
        }
        other => return Err(Error::Checkpoint(format!("unknown model type {other:?}"))),
    };
    let legs = match kind {
        ModelKind::Ttn => crate::ttn::legs(header.n_sites),
        ModelKind::Mps => crate::mps::legs(header.n_sites),
    };
    let tensors = header
        .shapes
        .into_iter()
        .zip(blocks)
        .map(|(s, b)| DenseTensor::new(s, b.into_iter().map(T::lit).collect()))
        .collect::<Result<Vec<_>>>()?;
    let mut net = TreeNetwork::new(header.n_sites, legs, tensors)?;
    if let Some(c) = header.center {
        if c >= net.n_nodes() {
            return Err(Error::Checkpoint(format!("center {c} out of range")));
        }
        net.set_center(Some(c));
        if net.canonical_defect().is_some_and(|d| d.as_f64() > 1e-6) {
            return Err(Error::Checkpoint("stored tensors are not in the recorded canonical form".into()));
        }
    }
    let model = BornModel::from_network(kind, net, header.d_max)?;
    if model.bond_dims() != header.bond_dims {
        return Err(Error::Checkpoint("bond dimensions disagree with tensor shapes".into()));
    }
    Ok(Checkpoint::Born(model, info))
}

pub fn save_model<T: Scalar>(path: impl AsRef<Path>, model: &BornModel<T>, info: &RunInfo) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model, info)?).map_err(|e| Error::io(path, e))
}

pub fn save_factor_graph(path: impl AsRef<Path>, fg: &TreeFactorGraph, info: &RunInfo) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_factor_graph(fg, info)?).map_err(|e| Error::io(path, e))
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
