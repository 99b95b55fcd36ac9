//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! "SVDN" | version: u16 | layer count: u32
//! per layer: role: u8 | rows: u32 | cols: u32 | rows*cols f64 (row-major)
//!            | has_bias: u8 | cols f64 if has_bias
//! ```
//!
//! Roles: 0 backbone, 1 eigenlayer, 2 classifier. Layers are stored in
//! forward order. Round trips are bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Affine, EigenModel};
use crate::error::{Result, SvdnetError};
use crate::linalg::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SVDN";
pub const CHECKPOINT_VERSION: u16 = 1;

const MAX_LAYER_ENTRIES: usize = 1 << 28;

const ROLE_BACKBONE: u8 = 0;
const ROLE_EIGEN: u8 = 1;
const ROLE_CLASSIFIER: u8 = 2;

impl EigenModel {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let count = self.backbone.len() as u32 + 2;
        out.write_all(&count.to_le_bytes())?;
        for layer in &self.backbone {
            write_layer(&mut out, ROLE_BACKBONE, &layer.weight, Some(&layer.bias))?;
        }
        write_layer(&mut out, ROLE_EIGEN, &self.eigenlayer, None)?;
        write_layer(&mut out, ROLE_CLASSIFIER, &self.classifier.weight, Some(&self.classifier.bias))?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(truncated)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(SvdnetError::Format("bad checkpoint magic".into()));
        }
        let version = u16::from_le_bytes(read_array(&mut input)?);
        if version != CHECKPOINT_VERSION {
            return Err(SvdnetError::Format(format!("unsupported checkpoint version {version}")));
        }
        let count = u32::from_le_bytes(read_array(&mut input)?);
        if count < 2 {
            return Err(SvdnetError::Format(format!("checkpoint has {count} layers, need >= 2")));
        }

        let mut backbone = Vec::new();
        let mut eigenlayer = None;
        let mut classifier = None;
        for idx in 0..count {
            let role = read_array::<1>(&mut input)?[0];
            let rows = u32::from_le_bytes(read_array(&mut input)?) as usize;
            let cols = u32::from_le_bytes(read_array(&mut input)?) as usize;
            if rows.saturating_mul(cols) > MAX_LAYER_ENTRIES {
                return Err(SvdnetError::Format(format!("layer {idx}: {rows}x{cols} is too large")));
            }
            let data = read_f64s(&mut input, rows * cols)?;
            let weight = Matrix::new(rows, cols, data)
                .map_err(|e| SvdnetError::Format(format!("layer {idx}: {e}")))?;
            let bias = match read_array::<1>(&mut input)?[0] {
                0 => None,
                1 => Some(read_f64s(&mut input, cols)?),
                other => return Err(SvdnetError::Format(format!("layer {idx}: bad bias flag {other}"))),
            };
            if bias.as_ref().is_some_and(|b| b.iter().any(|v| !v.is_finite())) {
                return Err(SvdnetError::Format(format!("layer {idx}: non-finite bias")));
            }
            let last = idx + 1 == count;
            match (role, bias) {
                (ROLE_BACKBONE, Some(bias)) if eigenlayer.is_none() => {
                    backbone.push(Affine { weight, bias })
                }
                (ROLE_EIGEN, None) if eigenlayer.is_none() && idx + 2 == count => {
                    eigenlayer = Some(weight)
                }
                (ROLE_CLASSIFIER, Some(bias)) if last && eigenlayer.is_some() => {
                    classifier = Some(Affine { weight, bias })
                }
                (role, bias) => {
                    return Err(SvdnetError::Format(format!(
                        "layer {idx}: unexpected role {role} (bias present: {}) at this position",
                        bias.is_some()
                    )))
                }
            }
        }
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(SvdnetError::Format(format!("{} trailing bytes after checkpoint", rest.len())));
        }
        let model = EigenModel {
            backbone,
            eigenlayer: eigenlayer.expect("checked above"),
            classifier: classifier.expect("checked above"),
        };
        model
            .check_shapes()
            .map_err(|e| SvdnetError::Format(format!("checkpoint shapes: {e}")))?;
        Ok(model)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn write_layer<W: Write>(out: &mut W, role: u8, weight: &Matrix, bias: Option<&[f64]>) -> Result<()> {
    out.write_all(&[role])?;
    out.write_all(&(weight.rows() as u32).to_le_bytes())?;
    out.write_all(&(weight.cols() as u32).to_le_bytes())?;
    for v in weight.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    match bias {
        Some(b) => {
            out.write_all(&[1])?;
            for v in b {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        None => out.write_all(&[0])?,
    }
    Ok(())
}

fn read_array<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf)
}

fn read_f64s(input: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    input.read_exact(&mut bytes).map_err(truncated)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn truncated(e: std::io::Error) -> SvdnetError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        SvdnetError::Format("truncated checkpoint".into())
    } else {
        SvdnetError::Io(e)
    }
}
