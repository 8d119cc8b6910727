//! Binary embedding checkpoints.
//!
//! Layout: magic `CBE1`, then little-endian `n_focus: u64`,
//! `n_context: u64`, `dim: u32`, `bias: u8`, followed by the focus table,
//! the context table (row-major 32-bit floats, little-endian), and the
//! bias vector when present. A checkpoint is also what the angular LSH
//! maps consume as a coarse embedding.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::train::model::{EmbeddingModel, EmbeddingTable};

const MAGIC: &[u8; 4] = b"CBE1";

pub fn write_checkpoint(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(model.focus.len() as u64).to_le_bytes())?;
    w.write_all(&(model.context.len() as u64).to_le_bytes())?;
    w.write_all(&(model.dim() as u32).to_le_bytes())?;
    w.write_all(&[u8::from(model.context_bias.is_some())])?;
    for table in [&model.focus, &model.context] {
        for &x in table.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    if let Some(bias) = &model.context_bias {
        for &x in bias {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<EmbeddingModel> {
    let mut r = BufReader::new(File::open(&path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Data(format!(
            "{}: not a checkpoint file",
            path.as_ref().display()
        )));
    }
    let n_focus = read_u64(&mut r)? as usize;
    let n_context = read_u64(&mut r)? as usize;
    let dim = read_u32(&mut r)? as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;

    let focus = EmbeddingTable::from_data(n_focus, dim, read_f32s(&mut r, n_focus * dim)?)?;
    let context = EmbeddingTable::from_data(n_context, dim, read_f32s(&mut r, n_context * dim)?)?;
    let context_bias = if flag[0] != 0 {
        Some(read_f32s(&mut r, n_context)?)
    } else {
        None
    };
    Ok(EmbeddingModel {
        focus,
        context,
        context_bias,
    })
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, count: usize) -> Result<Vec<f32>> {
    let mut data = vec![0u8; count * 4];
    r.read_exact(&mut data)?;
    Ok(data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
