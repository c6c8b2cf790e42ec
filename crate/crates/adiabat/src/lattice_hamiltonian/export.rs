use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::operator::{DiscreteHamiltonian, Provenance};
use crate::error::{Error, Result};
use crate::C64;

/// Sidecar describing a raw complex128 matrix dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpSidecar {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub order: String,
    pub endianness: String,
    pub hbar: f64,
    pub s: f64,
    pub domain: String,
    pub provenance: Provenance,
}

/// Write `<stem>.bin` (row-major little-endian complex128) and `<stem>.json`.
pub fn write_dense_dump(h: &DiscreteHamiltonian, stem: &Path) -> Result<()> {
    let m = h.to_dense();
    let side = DumpSidecar {
        rows: m.nrows(),
        cols: m.ncols(),
        dtype: "complex128".into(),
        order: "row-major".into(),
        endianness: "little".into(),
        hbar: h.hbar,
        s: h.s,
        domain: h.domain.clone(),
        provenance: h.provenance,
    };
    let mut bytes = Vec::with_capacity(16 * m.len());
    for z in m.iter() {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    let mut f = fs::File::create(stem.with_extension("bin"))?;
    f.write_all(&bytes)?;
    fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_dense_dump(stem: &Path) -> Result<(Array2<C64>, DumpSidecar)> {
    let side: DumpSidecar = serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
    let bytes = fs::read(stem.with_extension("bin"))?;
    if bytes.len() != 16 * side.rows * side.cols {
        return Err(Error::Shape(format!(
            "dump has {} bytes, sidecar expects {}x{}",
            bytes.len(),
            side.rows,
            side.cols
        )));
    }
    let vals: Vec<C64> = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect();
    let m = Array2::from_shape_vec((side.rows, side.cols), vals).map_err(|e| Error::Shape(e.to_string()))?;
    Ok((m, side))
}
