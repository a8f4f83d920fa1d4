//! Binary basis (`PCAB`) and latent (`PLAT`) files.
//!
//! Both start with a magic, a version and the grid header
//! `K u32, m u32, r f32, δ f32`. Version 1 stores arrays as `f32`; version 2
//! is the same layout with `f64` arrays, used for double-precision data so
//! that round trips stay lossless. Everything is little-endian.
//!
//! `PCAB`: header, `N_S u64`, `L u32`, mean (`d`), eigenvalues (`L`),
//! `total_variance f64`, basis (`d·L`, column-major), CRC32 of all preceding
//! bytes.
//!
//! `PLAT`: header, `l_B u32`, entry count `u64`, then per entry
//! `i, j, k u16` and the code (`l_B`), then a `⌈K³/8⌉`-byte fill bitmap over
//! linear voxel indices (LSB first, set bit = interior fill `−δ`).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{LatentShape, PcaBasis};
use crate::blocks::{VoxelGridSpec, VoxelIndex};
use crate::error::{Error, Result};
use crate::num::Real;

const BASIS_MAGIC: &[u8; 4] = b"PCAB";
const LATENT_MAGIC: &[u8; 4] = b"PLAT";

fn version_for<T>() -> u32 {
    if std::mem::size_of::<T>() == 4 {
        1
    } else {
        2
    }
}

fn width_of_version(version: u32) -> Result<usize> {
    match version {
        1 => Ok(4),
        2 => Ok(8),
        v => Err(Error::Format(format!("unsupported version {v}"))),
    }
}

fn put_scalars<T: Real>(buf: &mut Vec<u8>, values: &[T]) {
    if std::mem::size_of::<T>() == 4 {
        for v in values {
            buf.extend_from_slice(&(v.to_f64_lossless() as f32).to_le_bytes());
        }
    } else {
        for v in values {
            buf.extend_from_slice(&v.to_f64_lossless().to_le_bytes());
        }
    }
}

/// Bounds-checked little-endian cursor over an in-memory file.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated file while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn scalars<T: Real>(&mut self, count: usize, width: usize, what: &str) -> Result<Vec<T>> {
        let raw = self.take(count.checked_mul(width).ok_or_else(|| Error::Format(format!("{what} too large")))?, what)?;
        Ok(if width == 4 {
            raw.chunks_exact(4)
                .map(|c| T::cast(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                .collect()
        } else {
            raw.chunks_exact(8)
                .map(|c| T::cast(f64::from_le_bytes(c.try_into().unwrap())))
                .collect()
        })
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn put_header(buf: &mut Vec<u8>, magic: &[u8; 4], version: u32, spec: &VoxelGridSpec, clamp: f32) {
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&version.to_le_bytes());
    buf.extend_from_slice(&(spec.voxels_per_axis() as u32).to_le_bytes());
    buf.extend_from_slice(&(spec.samples_per_axis() as u32).to_le_bytes());
    buf.extend_from_slice(&(spec.voxel_size() as f32).to_le_bytes());
    buf.extend_from_slice(&clamp.to_le_bytes());
}

/// Returns (width, spec, clamp).
fn read_header(c: &mut Cursor<'_>, magic: &[u8; 4]) -> Result<(usize, VoxelGridSpec, f32)> {
    let m = c.take(4, "magic")?;
    if m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(m),
            String::from_utf8_lossy(magic)
        )));
    }
    let width = width_of_version(c.u32("version")?)?;
    let k = c.u32("grid K")? as usize;
    let m = c.u32("grid m")? as usize;
    let r = c.f32("voxel size")?;
    let clamp = c.f32("clamp")?;
    let spec = VoxelGridSpec::new(k, m).map_err(|e| Error::Format(e.to_string()))?;
    if r != spec.voxel_size() as f32 {
        return Err(Error::Format(format!("voxel size {r} inconsistent with K = {k}")));
    }
    if !(clamp > 0.0) {
        return Err(Error::Format(format!("clamp {clamp} must be positive")));
    }
    Ok((width, spec, clamp))
}

pub fn write_basis<T: Real, W: Write>(basis: &PcaBasis<T>, w: &mut W) -> Result<()> {
    let mut buf = Vec::new();
    put_header(&mut buf, BASIS_MAGIC, version_for::<T>(), basis.spec(), basis.clamp());
    buf.extend_from_slice(&basis.sample_count().to_le_bytes());
    buf.extend_from_slice(&(basis.rank() as u32).to_le_bytes());
    put_scalars(&mut buf, basis.mean());
    put_scalars(&mut buf, basis.eigenvalues());
    buf.extend_from_slice(&basis.total_variance().to_le_bytes());
    put_scalars(&mut buf, basis.basis_matrix());
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    w.write_all(&buf).map_err(|e| Error::io("<basis stream>", e))
}

pub fn read_basis<T: Real, R: Read>(r: &mut R) -> Result<PcaBasis<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<basis stream>", e))?;
    let mut c = Cursor::new(&bytes);
    let (width, spec, clamp) = read_header(&mut c, BASIS_MAGIC)?;
    let d = spec.block_dim();
    let sample_count = c.u64("sample count")?;
    let rank = c.u32("rank")? as usize;
    if rank == 0 || rank > d {
        return Err(Error::Format(format!("stored rank {rank} outside 1..={d}")));
    }
    let expected = c.pos + (d + rank + d * rank) * width + 8 + 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "basis file has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let body = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..body]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mean = c.scalars(d, width, "mean")?;
    let eigenvalues = c.scalars(rank, width, "eigenvalues")?;
    let total_variance = c.f64("total variance")?;
    let basis = c.scalars(d * rank, width, "basis matrix")?;
    PcaBasis::from_parts(spec, clamp, sample_count, mean, eigenvalues, total_variance, basis)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn save_basis<T: Real>(basis: &PcaBasis<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_basis(basis, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_basis<T: Real>(path: &Path) -> Result<PcaBasis<T>> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_basis(&mut f)
}

pub fn write_latent<T: Real, W: Write>(latent: &LatentShape<T>, w: &mut W) -> Result<()> {
    let mut buf = Vec::new();
    put_header(&mut buf, LATENT_MAGIC, version_for::<T>(), latent.spec(), latent.clamp());
    buf.extend_from_slice(&(latent.latent_dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(latent.occupied_count() as u64).to_le_bytes());
    for (index, code) in latent.entries() {
        for c in [index.i, index.j, index.k] {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        put_scalars(&mut buf, code);
    }
    let mut bitmap = vec![0u8; latent.spec().voxel_count().div_ceil(8)];
    for (l, &inside) in latent.interior_mask().iter().enumerate() {
        if inside {
            bitmap[l / 8] |= 1 << (l % 8);
        }
    }
    buf.extend_from_slice(&bitmap);
    w.write_all(&buf).map_err(|e| Error::io("<latent stream>", e))
}

pub fn read_latent<T: Real, R: Read>(r: &mut R) -> Result<LatentShape<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<latent stream>", e))?;
    let mut c = Cursor::new(&bytes);
    let (width, spec, clamp) = read_header(&mut c, LATENT_MAGIC)?;
    let l_b = c.u32("latent size")? as usize;
    if l_b == 0 || l_b > spec.block_dim() {
        return Err(Error::Format(format!("latent size {l_b} outside 1..={}", spec.block_dim())));
    }
    let count = c.u64("entry count")? as usize;
    let bitmap_len = spec.voxel_count().div_ceil(8);
    let record = 6 + l_b * width;
    if count > spec.voxel_count() || c.remaining() != count * record + bitmap_len {
        return Err(Error::Format(format!(
            "latent file size does not match {count} entries of length {l_b}"
        )));
    }
    let mut latent = LatentShape::new(spec, clamp, l_b);
    for _ in 0..count {
        let i = c.u16("voxel index")? as usize;
        let j = c.u16("voxel index")? as usize;
        let k = c.u16("voxel index")? as usize;
        let code = c.scalars(l_b, width, "code")?;
        latent
            .insert(VoxelIndex::new(i, j, k), code)
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    let bitmap = c.take(bitmap_len, "fill bitmap")?;
    for idx in spec.voxel_indices() {
        let l = idx.linear(spec.voxels_per_axis());
        if bitmap[l / 8] & (1 << (l % 8)) != 0 {
            latent.set_interior(idx, true);
        }
    }
    Ok(latent)
}

pub fn save_latent<T: Real>(latent: &LatentShape<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_latent(latent, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_latent<T: Real>(path: &Path) -> Result<LatentShape<T>> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_latent(&mut f)
}
