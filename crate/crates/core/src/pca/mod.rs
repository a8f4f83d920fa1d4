//! Principal-component bases over voxel sample blocks, latent encoding and
//! decoding, and their binary file formats.

mod codec;
mod eigen;
mod fit;
mod io;

pub use codec::{decode_block, decode_blocks, encode, encode_blocks, encode_with_tau, project, LatentShape};
pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use fit::{accumulate_streaming, fit_basis, fit_basis_from_blocks, fit_basis_streaming, BasisAccumulator, FIT_SHARD_SIZE};
pub use io::{load_basis, load_latent, read_basis, read_latent, save_basis, save_latent, write_basis, write_latent};

use crate::blocks::VoxelGridSpec;
use crate::error::{Error, Result};
use crate::num::{MatRef, Real};

/// Mean, orthonormal columns and spectrum fitted over occupied blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis<T> {
    spec: VoxelGridSpec,
    clamp: f32,
    sample_count: u64,
    mean: Vec<T>,
    eigenvalues: Vec<T>,
    total_variance: f64,
    /// Column-major `d × L`.
    basis: Vec<T>,
}

impl<T: Real> PcaBasis<T> {
    /// Assembles a basis from raw arrays, checking their shapes.
    pub fn from_parts(
        spec: VoxelGridSpec,
        clamp: f32,
        sample_count: u64,
        mean: Vec<T>,
        eigenvalues: Vec<T>,
        total_variance: f64,
        basis: Vec<T>,
    ) -> Result<Self> {
        let d = spec.block_dim();
        let rank = eigenvalues.len();
        if mean.len() != d {
            return Err(Error::SpecMismatch(format!("mean has length {}, grid expects {d}", mean.len())));
        }
        if rank == 0 || rank > d {
            return Err(Error::SpecMismatch(format!("stored rank {rank} outside 1..={d}")));
        }
        if basis.len() != d * rank {
            return Err(Error::SpecMismatch(format!(
                "basis has {} entries, expected {d}×{rank}",
                basis.len()
            )));
        }
        if !(clamp > 0.0) {
            return Err(Error::SpecMismatch(format!("clamp {clamp} must be positive")));
        }
        Ok(Self {
            spec,
            clamp,
            sample_count,
            mean,
            eigenvalues,
            total_variance,
            basis,
        })
    }

    pub fn spec(&self) -> &VoxelGridSpec {
        &self.spec
    }

    pub fn clamp(&self) -> f32 {
        self.clamp
    }

    /// Number of training blocks, `N_S`.
    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    /// Block dimension `d`.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Stored rank `L`.
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Column-major `d × L` basis matrix.
    pub fn basis_matrix(&self) -> &[T] {
        &self.basis
    }

    pub fn column(&self, j: usize) -> &[T] {
        let d = self.dim();
        &self.basis[j * d..(j + 1) * d]
    }

    /// Training data had no variance; the columns are then an arbitrary
    /// orthonormal frame and explained variance is reported as 1.
    pub fn is_zero_variance(&self) -> bool {
        self.total_variance == 0.0
    }

    /// Share of total variance captured by the leading `l` components.
    pub fn explained_variance(&self, l: usize) -> Result<f64> {
        if l == 0 || l > self.rank() {
            return Err(Error::InvalidArgument(format!(
                "explained variance needs 1 <= l <= {}, got {l}",
                self.rank()
            )));
        }
        if self.is_zero_variance() {
            return Ok(1.0);
        }
        let head: f64 = self.eigenvalues[..l].iter().map(|v| v.to_f64_lossless()).sum();
        Ok((head / self.total_variance).clamp(0.0, 1.0))
    }

    /// `max |BᵀB − I|` over all entries.
    pub fn orthonormality_error(&self) -> f64 {
        let d = self.dim();
        let l = self.rank();
        let b: Vec<f64> = self.basis.iter().map(|v| v.to_f64_lossless()).collect();
        let mut g = vec![0.0f64; l * l];
        // Bᵀ (l×d) is B viewed row-major with row stride d.
        f64::gemm(l, d, l, MatRef::row_major(&b, d), MatRef::col_major(&b, d), 0.0, &mut g);
        let mut worst = 0.0f64;
        for i in 0..l {
            for j in 0..l {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[i * l + j] - want).abs());
            }
        }
        worst
    }

    /// Decoder parameter count for codes of length `l`: `d·(l+1)`.
    pub fn parameter_count(&self, l: usize) -> usize {
        self.dim() * (l + 1)
    }

    /// Copy keeping only the leading `l` components.
    pub fn truncated(&self, l: usize) -> Result<Self> {
        if l == 0 || l > self.rank() {
            return Err(Error::InvalidArgument(format!("cannot truncate rank {} to {l}", self.rank())));
        }
        let mut out = self.clone();
        out.eigenvalues.truncate(l);
        out.basis.truncate(l * self.dim());
        Ok(out)
    }

    pub fn cast<U: Real>(&self) -> PcaBasis<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::cast(x.to_f64_lossless())).collect();
        PcaBasis {
            spec: self.spec,
            clamp: self.clamp,
            sample_count: self.sample_count,
            mean: conv(&self.mean),
            eigenvalues: conv(&self.eigenvalues),
            total_variance: self.total_variance,
            basis: conv(&self.basis),
        }
    }
}
