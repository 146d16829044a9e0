//! Field serialization: a JSON mode list and a little-endian binary layout.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! magic     8 bytes  b"TNFIELD\0"
//! version   u32
//! max_mode  u32
//! count     u64
//! entries   count x (i32 l0, i32 l1, i32 l2, f64 re0, im0, re1, im1, re2, im2)
//! ```

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ModeSet, SpectralField};
use crate::error::{Error, Result};
use crate::lattice::Lattice3;

pub const FIELD_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"TNFIELD\0";

#[derive(Serialize, Deserialize)]
struct FieldJson {
    format: String,
    version: u32,
    max_mode: u32,
    /// `(l, [re0, im0, re1, im1, re2, im2])` for every stored mode.
    modes: Vec<(Lattice3, [f64; 6])>,
}

fn flatten(z: &[Complex64; 3]) -> [f64; 6] {
    [z[0].re, z[0].im, z[1].re, z[1].im, z[2].re, z[2].im]
}

fn unflatten(v: [f64; 6]) -> [Complex64; 3] {
    [
        Complex64::new(v[0], v[1]),
        Complex64::new(v[2], v[3]),
        Complex64::new(v[4], v[5]),
    ]
}

fn assemble(max_mode: u32, entries: Vec<(Lattice3, [f64; 6])>) -> Result<SpectralField> {
    if max_mode == 0 {
        return Err(Error::Format("truncation must be at least 1".into()));
    }
    let modes: Arc<ModeSet> = ModeSet::new(max_mode);
    let mut f = SpectralField::zeros(&modes);
    for (l, v) in entries {
        let i = modes
            .index(l)
            .ok_or_else(|| Error::Format(format!("mode {l:?} outside |l| <= {max_mode}")))?;
        f.coeffs_mut()[i] = unflatten(v);
    }
    Ok(f)
}

pub fn write_json<W: Write>(field: &SpectralField, writer: W) -> Result<()> {
    let doc = FieldJson {
        format: "transport-noise-field".into(),
        version: FIELD_FORMAT_VERSION,
        max_mode: field.max_mode(),
        modes: field
            .modes()
            .modes()
            .iter()
            .zip(field.coeffs())
            .map(|(l, z)| (*l, flatten(z)))
            .collect(),
    };
    serde_json::to_writer(writer, &doc)?;
    Ok(())
}

pub fn read_json<R: Read>(reader: R) -> Result<SpectralField> {
    let doc: FieldJson = serde_json::from_reader(reader)?;
    if doc.version != FIELD_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported field version {}",
            doc.version
        )));
    }
    assemble(doc.max_mode, doc.modes)
}

pub fn write_binary<W: Write>(field: &SpectralField, mut writer: W) -> Result<()> {
    writer.write_all(MAGIC)?;
    writer.write_all(&FIELD_FORMAT_VERSION.to_le_bytes())?;
    writer.write_all(&field.max_mode().to_le_bytes())?;
    writer.write_all(&(field.coeffs().len() as u64).to_le_bytes())?;
    for (l, z) in field.modes().modes().iter().zip(field.coeffs()) {
        for c in l {
            writer.write_all(&c.to_le_bytes())?;
        }
        for x in flatten(z) {
            writer.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut reader: R) -> Result<SpectralField> {
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    reader.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != FIELD_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported field version {version}"
        )));
    }
    reader.read_exact(&mut b4)?;
    let max_mode = u32::from_le_bytes(b4);
    reader.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8);
    let mut entries = Vec::new();
    for _ in 0..count {
        let mut l = [0i32; 3];
        for c in &mut l {
            reader.read_exact(&mut b4)?;
            *c = i32::from_le_bytes(b4);
        }
        let mut v = [0f64; 6];
        for x in &mut v {
            reader.read_exact(&mut b8)?;
            *x = f64::from_le_bytes(b8);
        }
        entries.push((l, v));
    }
    assemble(max_mode, entries)
}
