//! Raw tensor payloads with a JSON sidecar header at `<path>.json`:
//! `{"rows", "cols", "dtype": "f32" | "f64", "endianness": "little"}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_atomic, write_json_atomic};
use crate::error::{Error, Result};
use crate::tensor::Tensor2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub endianness: String,
}

pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the payload and its header. `F32` narrows each value.
pub fn save_feature_tensor(path: &Path, t: &Tensor2D, dtype: Dtype) -> Result<()> {
    let mut bytes = Vec::with_capacity(t.len() * dtype.size());
    for &v in t.data() {
        match dtype {
            Dtype::F32 => bytes.extend_from_slice(&(v as f32).to_le_bytes()),
            Dtype::F64 => bytes.extend_from_slice(&v.to_le_bytes()),
        }
    }
    write_atomic(path, &bytes)?;
    let header = TensorHeader {
        rows: t.rows(),
        cols: t.cols(),
        dtype: match dtype {
            Dtype::F32 => "f32".into(),
            Dtype::F64 => "f64".into(),
        },
        endianness: "little".into(),
    };
    write_json_atomic(&header_path(path), &header)
}

/// Reads a tensor, widening `f32` payloads to `f64`.
pub fn load_feature_tensor(path: &Path) -> Result<Tensor2D> {
    let fail = |message: String| Error::TensorFormat { path: path.to_path_buf(), message };
    let hp = header_path(path);
    let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let header: TensorHeader =
        serde_json::from_str(&text).map_err(|e| fail(format!("bad header {}: {e}", hp.display())))?;
    let dtype = match header.dtype.as_str() {
        "f32" => Dtype::F32,
        "f64" => Dtype::F64,
        other => return Err(fail(format!("unsupported dtype '{other}'"))),
    };
    if header.endianness != "little" {
        return Err(fail(format!("unsupported endianness '{}'", header.endianness)));
    }
    let expected = header
        .rows
        .checked_mul(header.cols)
        .and_then(|n| n.checked_mul(dtype.size()))
        .filter(|&n| n <= isize::MAX as usize)
        .ok_or_else(|| fail(format!("header dims {} x {} overflow", header.rows, header.cols)))?;
    let actual = fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    if actual != expected as u64 {
        return Err(fail(format!("payload has {actual} bytes, header implies {expected}")));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected {
        return Err(fail(format!("payload has {} bytes, header implies {expected}", bytes.len())));
    }
    let data: Vec<f64> = match dtype {
        Dtype::F32 => bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect(),
        Dtype::F64 => bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect(),
    };
    Tensor2D::from_vec(header.rows, header.cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_widens_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.f32");
        let t = Tensor2D::from_vec(2, 3, vec![0.1, -2.5, 3.0, 1e-3, 7.25, -0.0]).unwrap();
        save_feature_tensor(&p, &t, Dtype::F32).unwrap();
        let back = load_feature_tensor(&p).unwrap();
        for (a, b) in t.data().iter().zip(back.data()) {
            assert_eq!((*a as f32 as f64).to_bits(), b.to_bits());
        }
        let p64 = dir.path().join("x.f64");
        save_feature_tensor(&p64, &t, Dtype::F64).unwrap();
        assert_eq!(load_feature_tensor(&p64).unwrap(), t);
    }

    #[test]
    fn truncated_payload_and_bad_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.f32");
        save_feature_tensor(&p, &Tensor2D::filled(2, 3, 1.0), Dtype::F32).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_feature_tensor(&p), Err(Error::TensorFormat { .. })));

        let huge = r#"{"rows": 18446744073709551615, "cols": 3, "dtype": "f32", "endianness": "little"}"#;
        fs::write(header_path(&p), huge).unwrap();
        let err = load_feature_tensor(&p).unwrap_err().to_string();
        assert!(err.contains("overflow"), "{err}");

        let f16 = r#"{"rows": 2, "cols": 3, "dtype": "f16", "endianness": "little"}"#;
        fs::write(header_path(&p), f16).unwrap();
        assert!(load_feature_tensor(&p).unwrap_err().to_string().contains("unsupported dtype"));
    }
}
