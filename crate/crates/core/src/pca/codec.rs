//! Projection of blocks onto a basis and the inverse map.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::PcaBasis;
use crate::blocks::{harvest_lattice, VoxelBlock, VoxelGridSpec, VoxelIndex, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::num::{MatRef, Real};
use crate::sdf::SdfLattice;

const ENCODE_CHUNK: usize = 256;

/// Per-voxel latent codes for occupied voxels plus a sign fill for the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentShape<T> {
    spec: VoxelGridSpec,
    clamp: f32,
    latent_dim: usize,
    entries: BTreeMap<VoxelIndex, Vec<T>>,
    /// Indexed by linear voxel index; true where the fill is `−δ`.
    interior: Vec<bool>,
}

impl<T: Real> LatentShape<T> {
    /// Empty latent grid: no codes, every voxel filled with `+δ`.
    pub fn new(spec: VoxelGridSpec, clamp: f32, latent_dim: usize) -> Self {
        Self {
            spec,
            clamp,
            latent_dim,
            entries: BTreeMap::new(),
            interior: vec![false; spec.voxel_count()],
        }
    }

    pub fn insert(&mut self, index: VoxelIndex, code: Vec<T>) -> Result<()> {
        let kk = self.spec.voxels_per_axis();
        if code.len() != self.latent_dim {
            return Err(Error::SpecMismatch(format!(
                "code has length {}, latent size is {}",
                code.len(),
                self.latent_dim
            )));
        }
        if [index.i, index.j, index.k].iter().any(|&c| c as usize >= kk) {
            return Err(Error::InvalidArgument(format!("voxel {index:?} outside a {kk}³ grid")));
        }
        if self.entries.insert(index, code).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate code for voxel {index:?}")));
        }
        Ok(())
    }

    pub fn set_interior(&mut self, index: VoxelIndex, interior: bool) {
        let l = index.linear(self.spec.voxels_per_axis());
        self.interior[l] = interior;
    }

    pub fn spec(&self) -> &VoxelGridSpec {
        &self.spec
    }

    pub fn clamp(&self) -> f32 {
        self.clamp
    }

    /// Code length `l_B`.
    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn occupied_count(&self) -> usize {
        self.entries.len()
    }

    pub fn code(&self, index: &VoxelIndex) -> Option<&[T]> {
        self.entries.get(index).map(Vec::as_slice)
    }

    /// Codes in lattice order.
    pub fn entries(&self) -> impl Iterator<Item = (&VoxelIndex, &[T])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn is_interior(&self, index: &VoxelIndex) -> bool {
        self.interior[index.linear(self.spec.voxels_per_axis())]
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    /// Constant value of an unoccupied voxel.
    pub fn fill(&self, index: &VoxelIndex) -> f32 {
        if self.is_interior(index) {
            -self.clamp
        } else {
            self.clamp
        }
    }
}

fn check_latent_dim<T: Real>(basis: &PcaBasis<T>, l_b: usize) -> Result<()> {
    if l_b == 0 || l_b > basis.rank() {
        return Err(Error::InvalidArgument(format!(
            "latent size {l_b} outside 1..={}",
            basis.rank()
        )));
    }
    Ok(())
}

/// Writes `B_lᵀ·(samples − mean)` into `code` (length `l`).
pub fn project<T: Real>(basis: &PcaBasis<T>, samples: &[T], code: &mut [T]) {
    let d = basis.dim();
    let mean = basis.mean();
    for (j, z) in code.iter_mut().enumerate() {
        let col = basis.column(j);
        let mut acc = T::zero();
        for i in 0..d {
            acc += col[i] * (samples[i] - mean[i]);
        }
        *z = acc;
    }
}

/// Codes for many blocks at once: returns a row-major `blocks × l` matrix.
fn project_batch<T: Real>(basis: &PcaBasis<T>, l: usize, rows: &[&[T]]) -> Vec<T> {
    let d = basis.dim();
    let mean = basis.mean();
    let mut centered = Vec::with_capacity(rows.len() * d);
    for r in rows {
        centered.extend(r.iter().zip(mean).map(|(&s, &m)| s - m));
    }
    let mut out = vec![T::zero(); rows.len() * l];
    T::gemm(
        rows.len(),
        d,
        l,
        MatRef::row_major(&centered, d),
        MatRef::col_major(&basis.basis_matrix()[..d * l], d),
        T::zero(),
        &mut out,
    );
    out
}

/// `clamp(mean + B_{len(z)}·z, ±δ)`.
pub fn decode_block<T: Real>(code: &[T], basis: &PcaBasis<T>) -> Result<Vec<T>> {
    if code.len() > basis.rank() {
        return Err(Error::InvalidArgument(format!(
            "code length {} exceeds stored rank {}",
            code.len(),
            basis.rank()
        )));
    }
    let d = basis.dim();
    let delta = T::cast(basis.clamp() as f64);
    let mut out = basis.mean().to_vec();
    for (j, &z) in code.iter().enumerate() {
        for (o, &b) in out.iter_mut().zip(basis.column(j)) {
            *o += b * z;
        }
    }
    debug_assert_eq!(out.len(), d);
    for o in &mut out {
        *o = o.max(-delta).min(delta);
    }
    Ok(out)
}

/// Decodes a row-major `count × l` code matrix into `count × d` clamped
/// samples.
pub fn decode_blocks<T: Real>(codes: &[T], l: usize, basis: &PcaBasis<T>) -> Result<Vec<T>> {
    if l > basis.rank() || (l == 0 && !codes.is_empty()) || codes.len() % l.max(1) != 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot decode {} values as codes of length {l} (rank {})",
            codes.len(),
            basis.rank()
        )));
    }
    let d = basis.dim();
    let count = codes.len() / l.max(1);
    let mut out = Vec::with_capacity(count * d);
    for _ in 0..count {
        out.extend_from_slice(basis.mean());
    }
    T::gemm(
        count,
        l,
        d,
        MatRef::row_major(codes, l),
        MatRef::row_major(&basis.basis_matrix()[..d * l], d),
        T::one(),
        &mut out,
    );
    let delta = T::cast(basis.clamp() as f64);
    for o in &mut out {
        *o = o.max(-delta).min(delta);
    }
    Ok(out)
}

fn check_basis_spec<T: Real>(spec: &VoxelGridSpec, clamp: f32, basis: &PcaBasis<T>) -> Result<()> {
    if spec != basis.spec() {
        return Err(Error::SpecMismatch(format!(
            "grid {spec:?} does not match basis grid {:?}",
            basis.spec()
        )));
    }
    if clamp != basis.clamp() {
        return Err(Error::SpecMismatch(format!(
            "clamp {clamp} does not match basis clamp {}",
            basis.clamp()
        )));
    }
    Ok(())
}

/// Encodes `lattice` with codes of length `l_b` and the default occupancy band.
pub fn encode<T: Real>(lattice: &SdfLattice, basis: &PcaBasis<T>, l_b: usize) -> Result<LatentShape<T>> {
    encode_with_tau(lattice, basis, l_b, DEFAULT_TAU)
}

pub fn encode_with_tau<T: Real>(
    lattice: &SdfLattice,
    basis: &PcaBasis<T>,
    l_b: usize,
    tau: f64,
) -> Result<LatentShape<T>> {
    let spec = *basis.spec();
    if lattice.resolution() != spec.native_resolution() {
        return Err(Error::SpecMismatch(format!(
            "lattice resolution {} does not match basis grid resolution {}",
            lattice.resolution(),
            spec.native_resolution()
        )));
    }
    check_basis_spec(&spec, lattice.clamp(), basis)?;
    check_latent_dim(basis, l_b)?;
    let harvest = harvest_lattice::<T>(lattice, &spec, tau)?;
    encode_blocks(&harvest.blocks, &harvest.interior, basis, l_b)
}

/// Encodes pre-harvested occupied blocks; `interior` flags, per linear
/// voxel index, the unoccupied voxels whose fill is `−δ`.
pub fn encode_blocks<T: Real>(
    blocks: &[VoxelBlock<T>],
    interior: &[bool],
    basis: &PcaBasis<T>,
    l_b: usize,
) -> Result<LatentShape<T>> {
    check_latent_dim(basis, l_b)?;
    let d = basis.dim();
    if interior.len() != basis.spec().voxel_count() {
        return Err(Error::SpecMismatch(format!(
            "interior mask has {} voxels, grid has {}",
            interior.len(),
            basis.spec().voxel_count()
        )));
    }
    if let Some(b) = blocks.iter().find(|b| b.samples.len() != d) {
        return Err(Error::SpecMismatch(format!(
            "block {:?} has {} samples, basis expects {d}",
            b.index,
            b.samples.len()
        )));
    }
    let codes: Vec<Vec<T>> = blocks
        .par_chunks(ENCODE_CHUNK)
        .map(|chunk| {
            let rows: Vec<&[T]> = chunk.iter().map(|b| b.samples.as_slice()).collect();
            project_batch(basis, l_b, &rows)
        })
        .collect();
    let mut latent = LatentShape::new(*basis.spec(), basis.clamp(), l_b);
    for (chunk, flat) in blocks.chunks(ENCODE_CHUNK).zip(codes) {
        for (b, code) in chunk.iter().zip(flat.chunks_exact(l_b)) {
            latent.insert(b.index, code.to_vec())?;
        }
    }
    let kk = basis.spec().voxels_per_axis();
    for (l, _) in interior.iter().enumerate().filter(|(_, &inside)| inside) {
        let index = VoxelIndex::from_linear(l, kk);
        if latent.code(&index).is_none() {
            latent.set_interior(index, true);
        }
    }
    Ok(latent)
}
