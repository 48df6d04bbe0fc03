//! Binary container for tensors.
//!
//! Layout: the 8-byte magic `SLARHT\0\x01`, a little-endian `u64` header
//! length, a JSON header, then every node matrix in tree order, column-major,
//! as little-endian complex doubles `(re, im)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::HtTensor;
use crate::error::{Result, SlarError};
use crate::scalar::{Scalar, C64};
use crate::tree::{DimensionTree, TreeLayout};

pub const MAGIC: &[u8; 8] = b"SLARHT\0\x01";
const FORMAT: &str = "slar-ht";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    scalar: String,
    shape: Vec<usize>,
    tree: serde_json::Value,
    ranks: Vec<usize>,
    #[serde(default)]
    meta: serde_json::Value,
}

fn scalar_name<T: Scalar>() -> &'static str {
    if T::IS_COMPLEX {
        "complex128"
    } else {
        "float64"
    }
}

pub fn write_ht<T: Scalar, W: Write>(t: &HtTensor<T>, meta: &serde_json::Value, mut w: W) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        scalar: scalar_name::<T>().into(),
        shape: t.shape().to_vec(),
        tree: t.tree().layout().to_json(),
        ranks: t.ranks(),
        meta: meta.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for frame in t.frames() {
        for v in frame.iter() {
            let z = v.to_c64();
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_ht<T: Scalar, R: Read>(mut r: R) -> Result<(HtTensor<T>, serde_json::Value)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SlarError::Format("bad magic bytes".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 30 {
        return Err(SlarError::Format(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(SlarError::Format(format!("unsupported format {} v{}", header.format, header.version)));
    }
    let layout = TreeLayout::from_json(&header.tree)?;
    let tree = Arc::new(DimensionTree::from_layout(&layout));
    if header.ranks.len() != tree.n_nodes() || header.shape.len() != tree.n_modes() {
        return Err(SlarError::Format("ranks or shape inconsistent with the tree".into()));
    }
    let mut frames = Vec::with_capacity(tree.n_nodes());
    let mut buf = [0u8; 16];
    for (id, node) in tree.nodes().iter().enumerate() {
        let rows = match node.children {
            None => header.shape[node.modes.start],
            Some((l, rc)) => header.ranks[l] * header.ranks[rc],
        };
        let cols = header.ranks[id];
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            let v = T::from_c64(C64::new(re, im))
                .ok_or_else(|| SlarError::Format("complex payload cannot be read as a real tensor".into()))?;
            data.push(v);
        }
        frames.push(DMatrix::from_vec(rows, cols, data));
    }
    let t = HtTensor::from_parts(tree, header.shape, frames).map_err(|e| SlarError::Format(e.to_string()))?;
    Ok((t, header.meta))
}

pub fn save<T: Scalar>(path: impl AsRef<Path>, t: &HtTensor<T>, meta: &serde_json::Value) -> Result<()> {
    write_ht(t, meta, BufWriter::new(File::create(path)?))
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<(HtTensor<T>, serde_json::Value)> {
    read_ht(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use crate::tree::TreeStrategy;

    #[test]
    fn bit_exact_round_trip() {
        let mut rng = rng(31);
        let tree = DimensionTree::build(6, TreeStrategy::PairedUnbalanced).unwrap();
        let x: HtTensor<C64> = random_ht(&tree, &[3, 4, 5, 3, 4, 5], 3, &mut rng);
        let meta = serde_json::json!({"time": 1.5});
        let mut bytes = Vec::new();
        write_ht(&x, &meta, &mut bytes).unwrap();
        let (y, m): (HtTensor<C64>, _) = read_ht(bytes.as_slice()).unwrap();
        assert_eq!(m, meta);
        assert_eq!(y.tree(), x.tree());
        for (a, b) in x.frames().iter().zip(y.frames()) {
            assert_eq!(a.shape(), b.shape());
            for (u, v) in a.iter().zip(b.iter()) {
                assert_eq!(u.re.to_bits(), v.re.to_bits());
                assert_eq!(u.im.to_bits(), v.im.to_bits());
            }
        }
    }

    #[test]
    fn real_round_trip_and_rejections() {
        let mut rng = rng(32);
        let x: HtTensor<f64> = random_ht(&balanced(3), &[3, 3, 3], 2, &mut rng);
        let mut bytes = Vec::new();
        write_ht(&x, &serde_json::Value::Null, &mut bytes).unwrap();
        let (y, _): (HtTensor<f64>, _) = read_ht(bytes.as_slice()).unwrap();
        assert_eq!(x.frames(), y.frames());
        assert!(read_ht::<f64, _>(&bytes[1..]).is_err());

        let z: HtTensor<C64> = random_ht(&balanced(2), &[3, 3], 2, &mut rng);
        let mut bytes = Vec::new();
        write_ht(&z, &serde_json::Value::Null, &mut bytes).unwrap();
        assert!(read_ht::<f64, _>(bytes.as_slice()).is_err());
    }
}
