//! Versioned binary checkpoint for network parameters.
//!
//! Layout (all little-endian):
//!   magic  `b"QMLP"`
//!   u32    format version (currently 1)
//!   u32    layer count
//!   per layer: u32 out_dim, u32 in_dim,
//!              out_dim·in_dim f64 weights (row-major), out_dim f64 biases.
//!
//! Values are written as raw f64 bit patterns, so a save/load cycle is
//! bitwise exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Layer, Mlp};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"QMLP";
const VERSION: u32 = 1;

pub fn save(mlp: &Mlp, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(mlp.layers().len() as u32).to_le_bytes())?;
    for layer in mlp.layers() {
        w.write_all(&(layer.out_dim as u32).to_le_bytes())?;
        w.write_all(&(layer.in_dim as u32).to_le_bytes())?;
        for &v in &layer.weights {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
        for &v in &layer.biases {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Mlp> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let n_layers = read_u32(&mut r)? as usize;
    if n_layers == 0 {
        return Err(Error::Checkpoint("no layers".into()));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let out_dim = read_u32(&mut r)? as usize;
        let in_dim = read_u32(&mut r)? as usize;
        if out_dim == 0 || in_dim == 0 {
            return Err(Error::Checkpoint("zero layer dimension".into()));
        }
        let mut weights = vec![0.0; out_dim * in_dim];
        for v in weights.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        let mut biases = vec![0.0; out_dim];
        for v in biases.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        layers.push(Layer {
            in_dim,
            out_dim,
            weights,
            biases,
        });
    }
    Mlp::from_layers(layers)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_bits(u64::from_le_bytes(buf)))
}
