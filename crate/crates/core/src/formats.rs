//! Binary file formats, all little-endian with a four-byte magic and a u32
//! version so readers can reject foreign files with a useful diagnostic.
//!
//! - frame files (`A4DF`): one fused labeled point cloud per articulation
//!   state; per point `x y z r g b` as f32, semantic u16, pad u16, instance u32
//! - prediction files (`A4DP`): per point semantic u16 + instance u32, in the
//!   point order of the frames they were predicted from
//! - checkpoints (`A4DM`): JSON tensor header followed by f64 tensor data

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::SegmentationResult;
use crate::scenegen::SemanticClass;
use crate::sensing::PointCloudFrame;

pub const FRAME_MAGIC: [u8; 4] = *b"A4DF";
pub const PREDICTION_MAGIC: [u8; 4] = *b"A4DP";
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"A4DM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{what}: bad magic {}, expected {}", String::from_utf8_lossy(.found), String::from_utf8_lossy(.expected))]
    BadMagic {
        expected: [u8; 4],
        found: [u8; 4],
        what: &'static str,
    },
    #[error("unsupported version {found} for {what}, expected {expected}")]
    BadVersion {
        expected: u32,
        found: u32,
        what: &'static str,
    },
    #[error("corrupt {what}: {detail}")]
    Corrupt { what: &'static str, detail: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn write_header(w: &mut impl Write, magic: [u8; 4]) -> Result<(), FormatError> {
    w.write_all(&magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    Ok(())
}

fn read_header(r: &mut impl Read, magic: [u8; 4], what: &'static str) -> Result<(), FormatError> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if found != magic {
        return Err(FormatError::BadMagic {
            expected: magic,
            found,
            what,
        });
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(FormatError::BadVersion {
            expected: FORMAT_VERSION,
            found: version,
            what,
        });
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, FormatError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u16(r: &mut impl Read) -> Result<u16, FormatError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read) -> Result<f32, FormatError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

/// Writes one fused labeled frame. Positions and colors are stored as f32.
pub fn write_frame(path: &Path, frame: &PointCloudFrame) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, FRAME_MAGIC)?;
    w.write_all(&(frame.len() as u32).to_le_bytes())?;
    for i in 0..frame.len() {
        let p = frame.positions[i];
        let c = frame.colors[i];
        for v in [p.x, p.y, p.z, c[0], c[1], c[2]] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        w.write_all(&frame.semantic[i].as_u16().to_le_bytes())?;
        w.write_all(&0u16.to_le_bytes())?;
        w.write_all(&frame.instance[i].to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a frame file back; `state_index` is carried by the caller since the
/// file itself is state-agnostic.
pub fn read_frame(path: &Path, state_index: usize) -> Result<PointCloudFrame, FormatError> {
    let mut r = BufReader::new(File::open(path)?);
    read_header(&mut r, FRAME_MAGIC, "frame file")?;
    let count = read_u32(&mut r)? as usize;
    let mut frame = PointCloudFrame {
        positions: Vec::with_capacity(count),
        colors: Vec::with_capacity(count),
        semantic: Vec::with_capacity(count),
        instance: Vec::with_capacity(count),
        state_index,
    };
    for _ in 0..count {
        let x = read_f32(&mut r)? as f64;
        let y = read_f32(&mut r)? as f64;
        let z = read_f32(&mut r)? as f64;
        let cr = read_f32(&mut r)? as f64;
        let cg = read_f32(&mut r)? as f64;
        let cb = read_f32(&mut r)? as f64;
        let sem = read_u16(&mut r)?;
        let _pad = read_u16(&mut r)?;
        let inst = read_u32(&mut r)?;
        frame.positions.push(Vector3::new(x, y, z));
        frame.colors.push([cr, cg, cb]);
        frame
            .semantic
            .push(SemanticClass::from_u16(sem).ok_or_else(|| FormatError::Corrupt {
                what: "frame file",
                detail: format!("semantic label {sem} out of range"),
            })?);
        frame.instance.push(inst);
    }
    Ok(frame)
}

/// Writes per-point predicted labels in frame point order.
pub fn write_predictions(path: &Path, seg: &SegmentationResult) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, PREDICTION_MAGIC)?;
    w.write_all(&(seg.semantic.len() as u32).to_le_bytes())?;
    for i in 0..seg.semantic.len() {
        w.write_all(&seg.semantic[i].as_u16().to_le_bytes())?;
        w.write_all(&seg.instance[i].to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(
    path: &Path,
    frames: usize,
    points_per_frame: usize,
) -> Result<SegmentationResult, FormatError> {
    let mut r = BufReader::new(File::open(path)?);
    read_header(&mut r, PREDICTION_MAGIC, "prediction file")?;
    let count = read_u32(&mut r)? as usize;
    if count != frames * points_per_frame {
        return Err(FormatError::Corrupt {
            what: "prediction file",
            detail: format!(
                "holds {count} points, expected {frames} x {points_per_frame}"
            ),
        });
    }
    let mut semantic = Vec::with_capacity(count);
    let mut instance = Vec::with_capacity(count);
    for _ in 0..count {
        let sem = read_u16(&mut r)?;
        semantic.push(SemanticClass::from_u16(sem).ok_or_else(|| FormatError::Corrupt {
            what: "prediction file",
            detail: format!("semantic label {sem} out of range"),
        })?);
        instance.push(read_u32(&mut r)?);
    }
    Ok(SegmentationResult {
        semantic,
        instance,
        frames,
        points_per_frame,
    })
}

/// One named f64 tensor of a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    tensors: Vec<TensorMeta>,
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

/// Versioned parameter checkpoint: JSON shape header, then f64 data in
/// header order.
pub fn write_checkpoint(path: &Path, tensors: &[NamedTensor]) -> Result<(), FormatError> {
    for t in tensors {
        let expect: usize = t.shape.iter().product();
        assert_eq!(expect, t.data.len(), "tensor {} shape mismatch", t.name);
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, CHECKPOINT_MAGIC)?;
    let header = CheckpointHeader {
        tensors: tensors
            .iter()
            .map(|t| TensorMeta {
                name: t.name.clone(),
                shape: t.shape.clone(),
            })
            .collect(),
    };
    let header_json = serde_json::to_vec(&header)?;
    w.write_all(&(header_json.len() as u32).to_le_bytes())?;
    w.write_all(&header_json)?;
    for t in tensors {
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<NamedTensor>, FormatError> {
    let mut r = BufReader::new(File::open(path)?);
    read_header(&mut r, CHECKPOINT_MAGIC, "checkpoint")?;
    let header_len = read_u32(&mut r)? as usize;
    let mut header_json = vec![0u8; header_len];
    r.read_exact(&mut header_json)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_json)?;
    let mut out = Vec::with_capacity(header.tensors.len());
    for meta in header.tensors {
        let len: usize = meta.shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        out.push(NamedTensor {
            name: meta.name,
            shape: meta.shape,
            data,
        });
    }
    Ok(out)
}
