//! Binary parameter files: magic, version, parameter count, then per
//! parameter its rank, dimensions and little-endian `f64` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::Param;

pub const PARAM_MAGIC: [u8; 4] = *b"DDZP";
pub const PARAM_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ParamFileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a parameter file")]
    BadMagic,
    #[error("unsupported parameter file version {0}")]
    BadVersion(u32),
    #[error("file holds {got} parameters, model has {expected}")]
    CountMismatch { expected: usize, got: usize },
    #[error("parameter {name}: file shape {got:?}, model shape {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Checks magic and version; returns the parameter count.
fn read_header<R: Read>(r: &mut R) -> Result<usize, ParamFileError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != PARAM_MAGIC {
        return Err(ParamFileError::BadMagic);
    }
    let version = get_u32(r)?;
    if version != PARAM_VERSION {
        return Err(ParamFileError::BadVersion(version));
    }
    let count = get_u32(r)? as usize;
    Ok(count)
}

pub fn write_params<W: Write>(w: &mut W, params: &[&Param]) -> Result<(), ParamFileError> {
    w.write_all(&PARAM_MAGIC)?;
    put_u32(w, PARAM_VERSION)?;
    put_u32(w, params.len() as u32)?;
    for p in params {
        put_u32(w, p.value.shape.len() as u32)?;
        for &d in &p.value.shape {
            put_u32(w, d as u32)?;
        }
        for v in &p.value.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads values into `params`, which must match the file's layout exactly.
/// Values are staged, so `params` is untouched on error.
pub fn read_params<R: Read>(r: &mut R, params: &mut [&mut Param]) -> Result<(), ParamFileError> {
    let count = read_header(r)?;
    if count != params.len() {
        return Err(ParamFileError::CountMismatch {
            expected: params.len(),
            got: count,
        });
    }
    let mut staged = Vec::with_capacity(count);
    for p in params.iter() {
        let rank = get_u32(r)? as usize;
        let shape = (0..rank)
            .map(|_| get_u32(r).map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if shape != p.value.shape {
            return Err(ParamFileError::ShapeMismatch {
                name: p.name.clone(),
                expected: p.value.shape.clone(),
                got: shape,
            });
        }
        let mut values = vec![0.0; p.value.len()];
        let mut b = [0u8; 8];
        for v in &mut values {
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        staged.push(values);
    }
    for (p, values) in params.iter_mut().zip(staged) {
        p.value.values = values;
    }
    Ok(())
}

pub fn save_params(path: &Path, params: &[&Param]) -> Result<(), ParamFileError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_params(&mut w, params)?;
    w.flush()?;
    Ok(())
}

/// Shapes of every parameter stored in a file, in order.
pub fn read_shapes<R: Read>(r: &mut R) -> Result<Vec<Vec<usize>>, ParamFileError> {
    let count = read_header(r)?;
    let mut shapes = Vec::with_capacity(count);
    let mut b = [0u8; 8];
    for _ in 0..count {
        let rank = get_u32(r)? as usize;
        let shape = (0..rank)
            .map(|_| get_u32(r).map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        for _ in 0..shape.iter().product::<usize>() {
            r.read_exact(&mut b)?;
        }
        shapes.push(shape);
    }
    Ok(shapes)
}

pub fn load_shapes(path: &Path) -> Result<Vec<Vec<usize>>, ParamFileError> {
    read_shapes(&mut BufReader::new(File::open(path)?))
}

pub fn load_params(path: &Path, params: &mut [&mut Param]) -> Result<(), ParamFileError> {
    let mut r = BufReader::new(File::open(path)?);
    read_params(&mut r, params)
}
