//! Binary model format.
//!
//! ```text
//! magic    8 bytes  "DACCSR\0\0"
//! version  u32
//! config   u64 length + JSON (cascade and feature configuration)
//! L        u64
//! refiners u64 count + regressors
//! mean     vector
//! general  u64 count + regressors
//! subspace u8 flag + (mean, eigvecs, eigvals, coeff_mean, coeff_std)
//! domains  u64 count + (u64 count + regressors) each
//! sha256   32 bytes over everything above
//! ```
//!
//! Integers and floats are little-endian; a matrix is `rows: u64, cols: u64`
//! followed by row-major f64 values, a vector is `len: u64` plus values, and
//! a regressor is its projection matrix followed by its offset vector.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::cascade::{CascadeConfig, DacCsrModel};
use crate::error::{Error, Result};
use crate::io::{atomic_write, read_file};
use crate::regression::WeakRegressor;
use crate::shape::Shape;
use crate::subspace::ShapeSubspace;

pub const MAGIC: &[u8; 8] = b"DACCSR\0\0";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }

    fn f64s<'a>(&mut self, values: impl Iterator<Item = &'a f64>) {
        for v in values {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn vector(&mut self, v: &[f64]) {
        self.u64(v.len());
        self.f64s(v.iter());
    }

    fn matrix(&mut self, m: &DMatrix<f64>) {
        self.u64(m.nrows());
        self.u64(m.ncols());
        for r in 0..m.nrows() {
            self.f64s(m.row(r).iter());
        }
    }

    fn regressors(&mut self, regs: &[WeakRegressor]) {
        self.u64(regs.len());
        for r in regs {
            self.matrix(r.projection());
            self.vector(r.offset().as_slice());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::ModelFormat("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::ModelFormat("length overflows usize".into()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::ModelFormat("length overflow".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn vector(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()?;
        self.f64s(n)
    }

    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let (r, c) = (self.u64()?, self.u64()?);
        let n = r
            .checked_mul(c)
            .ok_or_else(|| Error::ModelFormat("matrix size overflow".into()))?;
        Ok(DMatrix::from_row_slice(r, c, &self.f64s(n)?))
    }

    fn regressors(&mut self) -> Result<Vec<WeakRegressor>> {
        let n = self.u64()?;
        (0..n)
            .map(|_| {
                let a = self.matrix()?;
                let e = DVector::from_vec(self.vector()?);
                WeakRegressor::new(a, e).map_err(|err| Error::ModelFormat(err.to_string()))
            })
            .collect()
    }
}

pub fn encode_model(model: &DacCsrModel) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let config = serde_json::to_vec(model.config())?;
    w.u64(config.len());
    w.0.extend_from_slice(&config);
    w.u64(model.n_landmarks());
    w.regressors(model.bbox_refiners());
    w.vector(model.mean_shape().as_slice());
    w.regressors(model.general());
    match model.subspace() {
        None => w.0.push(0),
        Some(sub) => {
            w.0.push(1);
            w.vector(sub.mean_shape().as_slice());
            w.matrix(sub.eigvecs());
            w.vector(sub.eigvals().as_slice());
            w.vector(sub.coeff_mean().as_slice());
            w.vector(sub.coeff_std().as_slice());
        }
    }
    w.u64(model.domains().len());
    for d in model.domains() {
        w.regressors(d);
    }
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    Ok(w.0)
}

pub fn decode_model(bytes: &[u8]) -> Result<DacCsrModel> {
    if bytes.len() < MAGIC.len() + 4 + DIGEST_LEN {
        return Err(Error::Checksum);
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::ModelFormat("not a model file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checksum);
    }

    let mut r = Reader { bytes: body, pos: 12 };
    let config_len = r.u64()?;
    let config: CascadeConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| Error::ModelFormat(format!("configuration: {e}")))?;
    let n_landmarks = r.u64()?;
    let bbox_refiners = r.regressors()?;
    let mean_shape = Shape::new(r.vector()?).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let general = r.regressors()?;
    let subspace = match r.u8()? {
        0 => None,
        1 => {
            let mean = DVector::from_vec(r.vector()?);
            let eigvecs = r.matrix()?;
            let eigvals = DVector::from_vec(r.vector()?);
            let coeff_mean = DVector::from_vec(r.vector()?);
            let coeff_std = DVector::from_vec(r.vector()?);
            Some(
                ShapeSubspace::from_parts(mean, eigvecs, eigvals, coeff_mean, coeff_std)
                    .map_err(|e| Error::ModelFormat(e.to_string()))?,
            )
        }
        f => return Err(Error::ModelFormat(format!("bad subspace flag {f}"))),
    };
    let n_domains = r.u64()?;
    let domains = (0..n_domains)
        .map(|_| r.regressors())
        .collect::<Result<Vec<_>>>()?;
    if r.pos != body.len() {
        return Err(Error::ModelFormat("trailing bytes after model data".into()));
    }
    DacCsrModel::from_parts(
        config,
        n_landmarks,
        bbox_refiners,
        mean_shape,
        general,
        subspace,
        domains,
    )
}

pub fn save_model(path: &Path, model: &DacCsrModel) -> Result<()> {
    atomic_write(path, &encode_model(model)?)
}

pub fn load_model(path: &Path) -> Result<DacCsrModel> {
    decode_model(&read_file(path)?)
}
