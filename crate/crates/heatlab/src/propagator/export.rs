//! Binary kernel container: `HKMX`, a little-endian `u32` version, `u64` rows and
//! columns, then the entries as row-major little-endian `f64`. A JSON header with
//! the times, domain and schedule sits next to it.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Domain, KernelMatrix, Scheme};
use crate::error::{Error, Result};

pub const KERNEL_MAGIC: &[u8; 4] = b"HKMX";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHeader {
    pub format: String,
    pub s: f64,
    pub t: f64,
    pub domain: Domain,
    pub schedule: String,
    pub scheme: Scheme,
    pub times: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub step_m_matrix: Option<bool>,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("hkmx"), stem.with_extension("json"))
}

impl KernelMatrix {
    pub fn header(&self) -> KernelHeader {
        KernelHeader {
            format: "HKMX1 row-major f64 little-endian".into(),
            s: self.s,
            t: self.t,
            domain: self.domain.clone(),
            schedule: self.schedule.clone(),
            scheme: self.scheme,
            times: self.times.clone(),
            rows: self.entries.nrows(),
            cols: self.entries.ncols(),
            step_m_matrix: self.step_m_matrix,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (r, c) = self.entries.shape();
        let mut out = Vec::with_capacity(24 + 8 * r * c);
        out.extend_from_slice(KERNEL_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(r as u64).to_le_bytes());
        out.extend_from_slice(&(c as u64).to_le_bytes());
        for i in 0..r {
            for j in 0..c {
                out.extend_from_slice(&self.entries[(i, j)].to_le_bytes());
            }
        }
        out
    }

    /// Writes `<stem>.hkmx` and `<stem>.json`; returns both paths.
    pub fn write(&self, stem: &Path) -> Result<(PathBuf, PathBuf)> {
        let (bin, json) = paths(stem);
        fs::write(&bin, self.to_bytes())?;
        fs::write(&json, serde_json::to_string_pretty(&self.header())?)?;
        Ok((bin, json))
    }
}

fn entries_from_bytes(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let bad = |m: &str| Error::Schema(format!("kernel container: {m}"));
    if bytes.len() < 24 || &bytes[..4] != KERNEL_MAGIC {
        return Err(bad("missing HKMX magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let r = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let c = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    if bytes.len() != 24 + 8 * r * c {
        return Err(bad("length does not match the shape"));
    }
    let vals = bytes[24..].chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()));
    Ok(DMatrix::from_row_iterator(r, c, vals))
}

pub fn read_kernel(stem: &Path) -> Result<KernelMatrix> {
    let (bin, json) = paths(stem);
    let header: KernelHeader = serde_json::from_str(&fs::read_to_string(json)?)?;
    let entries = entries_from_bytes(&fs::read(bin)?)?;
    if entries.shape() != (header.rows, header.cols) {
        return Err(Error::Schema("header shape differs from the container".into()));
    }
    Ok(KernelMatrix {
        s: header.s,
        t: header.t,
        domain: header.domain,
        schedule: header.schedule,
        scheme: header.scheme,
        times: header.times,
        entries,
        step_m_matrix: header.step_m_matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip() {
        let k = KernelMatrix {
            s: 0.0,
            t: 1.0,
            domain: Domain::Global,
            schedule: "x".into(),
            scheme: Scheme::Exact,
            times: vec![0.0, 1.0],
            entries: DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, -0.0]),
            step_m_matrix: None,
        };
        let b = k.to_bytes();
        assert_eq!(&b[..4], b"HKMX");
        assert_eq!(entries_from_bytes(&b).unwrap(), k.entries);
        assert!(entries_from_bytes(&b[..30]).is_err());
    }
}
