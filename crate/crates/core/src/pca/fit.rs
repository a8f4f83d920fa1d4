//! Streaming covariance accumulation and basis extraction.

use log::{debug, warn};
use rayon::prelude::*;

use super::eigen::symmetric_eigen;
use super::PcaBasis;
use crate::blocks::{partition, VoxelBlock, VoxelGridSpec};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::sdf::SdfLattice;

/// Shapes per covariance shard; shards are merged in index order, so the
/// result does not depend on the thread count.
pub const FIT_SHARD_SIZE: usize = 8;

const CHUNK_ROWS: usize = 512;
const RANK_TOLERANCE: f64 = 1e-12;
const ZERO_VARIANCE_TOLERANCE: f64 = 1e-10;

/// Running first and second moments of block sample vectors, in `f64`.
#[derive(Debug, Clone)]
pub struct BasisAccumulator {
    spec: VoxelGridSpec,
    clamp: f32,
    count: u64,
    sum: Vec<f64>,
    /// Row-major `d × d` sum of outer products.
    gram: Vec<f64>,
    pending: Vec<f64>,
}

impl BasisAccumulator {
    pub fn new(spec: VoxelGridSpec, clamp: f32) -> Self {
        let d = spec.block_dim();
        Self {
            spec,
            clamp,
            count: 0,
            sum: vec![0.0; d],
            gram: vec![0.0; d * d],
            pending: Vec::with_capacity(CHUNK_ROWS * d),
        }
    }

    pub fn spec(&self) -> &VoxelGridSpec {
        &self.spec
    }

    pub fn clamp(&self) -> f32 {
        self.clamp
    }

    pub fn sample_count(&self) -> u64 {
        self.count
    }

    pub fn push<T: Real>(&mut self, samples: &[T]) -> Result<()> {
        let d = self.spec.block_dim();
        if samples.len() != d {
            return Err(Error::SpecMismatch(format!(
                "block has {} samples, grid expects {d}",
                samples.len()
            )));
        }
        for (acc, s) in self.sum.iter_mut().zip(samples) {
            *acc += s.to_f64_lossless();
        }
        self.pending.extend(samples.iter().map(|s| s.to_f64_lossless()));
        self.count += 1;
        if self.pending.len() == CHUNK_ROWS * d {
            self.flush();
        }
        Ok(())
    }

    /// Adds the occupied blocks of `blocks` in their given order.
    pub fn push_blocks<T: Real>(&mut self, blocks: &[VoxelBlock<T>]) -> Result<()> {
        for b in blocks.iter().filter(|b| b.occupied) {
            self.push(&b.samples)?;
        }
        Ok(())
    }

    /// Partitions `lattice` and adds its occupied blocks.
    pub fn push_lattice(&mut self, lattice: &SdfLattice, tau: f64) -> Result<()> {
        let blocks = partition::<f32>(lattice, &self.spec, tau)?;
        self.push_blocks(&blocks)
    }

    fn flush(&mut self) {
        let d = self.spec.block_dim();
        let rows = self.pending.len() / d;
        if rows > 0 {
            f64::gram_accumulate(&self.pending, rows, d, &mut self.gram);
            self.pending.clear();
        }
    }

    /// Folds `other` into `self`. Merge order is part of the numerical
    /// result; callers that need reproducibility merge in a fixed order.
    pub fn merge(&mut self, mut other: BasisAccumulator) -> Result<()> {
        if other.spec != self.spec || other.clamp != self.clamp {
            return Err(Error::SpecMismatch("cannot merge accumulators with different grids or clamps".into()));
        }
        self.flush();
        other.flush();
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.gram.iter_mut().zip(&other.gram) {
            *a += b;
        }
        self.count += other.count;
        Ok(())
    }

    /// Sample mean and covariance (denominator `N − 1`), covariance row-major.
    pub fn moments(&mut self) -> (Vec<f64>, Vec<f64>) {
        self.flush();
        let d = self.spec.block_dim();
        let n = self.count.max(1) as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let denom = (self.count.max(2) - 1) as f64;
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let g = 0.5 * (self.gram[i * d + j] + self.gram[j * d + i]);
                let c = (g - n * mean[i] * mean[j]) / denom;
                cov[i * d + j] = c;
                cov[j * d + i] = c;
            }
        }
        (mean, cov)
    }

    /// Extracts a basis of at most `rank` components.
    pub fn finish<T: Real>(mut self, rank: usize) -> Result<PcaBasis<T>> {
        let d = self.spec.block_dim();
        if rank == 0 {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        if self.count < rank as u64 || self.count == 0 {
            return Err(Error::InsufficientSamples {
                available: self.count,
                requested: rank,
            });
        }
        let (mean, mut cov) = self.moments();
        let energy = (0..d).map(|i| self.gram[i * d + i]).sum::<f64>() / self.count as f64;
        let mut total_variance: f64 = (0..d).map(|i| cov[i * d + i]).sum();
        let zero_variance = total_variance <= ZERO_VARIANCE_TOLERANCE * energy;
        if zero_variance {
            warn!("training blocks have zero variance; explained variance will read 1.0");
            cov.iter_mut().for_each(|c| *c = 0.0);
            total_variance = 0.0;
        }

        debug!("eigendecomposition of {d}×{d} covariance over {} blocks", self.count);
        let eig = symmetric_eigen(&cov, d)?;
        let lead = eig.values[0];
        let stored = if zero_variance {
            rank.min(d)
        } else {
            let numerical = eig.values.iter().filter(|&&v| v > RANK_TOLERANCE * lead).count();
            let stored = rank.min(d).min(numerical);
            if stored < rank {
                warn!(
                    "RankDeficient: requested rank {rank} exceeds numerical rank {numerical} (d = {d}); storing {stored}"
                );
            }
            stored
        };

        let mut basis = Vec::with_capacity(d * stored);
        for j in 0..stored {
            let col = &eig.vectors[j * d..(j + 1) * d];
            let mut pivot = 0;
            for (i, v) in col.iter().enumerate() {
                if v.abs() > col[pivot].abs() {
                    pivot = i;
                }
            }
            let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
            basis.extend(col.iter().map(|&v| T::cast(sign * v)));
        }
        let eigenvalues = eig.values[..stored].iter().map(|&v| T::cast(v.max(0.0))).collect();
        PcaBasis::from_parts(
            self.spec,
            self.clamp,
            self.count,
            mean.into_iter().map(T::cast).collect(),
            eigenvalues,
            total_variance,
            basis,
        )
    }
}

/// Fits a basis over the occupied blocks of every lattice in `corpus`.
pub fn fit_basis<T: Real>(
    corpus: &[SdfLattice],
    spec: &VoxelGridSpec,
    rank: usize,
    tau: f64,
) -> Result<PcaBasis<T>> {
    let first = corpus
        .first()
        .ok_or_else(|| Error::InvalidArgument("training corpus is empty".into()))?;
    let clamp = first.clamp();
    if let Some(bad) = corpus.iter().find(|l| l.clamp() != clamp) {
        return Err(Error::SpecMismatch(format!(
            "corpus mixes clamps {clamp} and {}",
            bad.clamp()
        )));
    }
    fit_basis_streaming(corpus.len(), spec, clamp, rank, |i| {
        partition::<f32>(&corpus[i], spec, tau).map(|blocks| blocks.into_iter().filter(|b| b.occupied).collect())
    })
}

/// Fits a basis over shapes produced on demand by `shape_blocks(i)` for
/// `i in 0..count`. Shapes are grouped into fixed shards of
/// [`FIT_SHARD_SIZE`]; shards run in parallel and merge in index order.
pub fn fit_basis_streaming<T, F>(
    count: usize,
    spec: &VoxelGridSpec,
    clamp: f32,
    rank: usize,
    shape_blocks: F,
) -> Result<PcaBasis<T>>
where
    T: Real,
    F: Fn(usize) -> Result<Vec<VoxelBlock<f32>>> + Sync,
{
    accumulate_streaming(count, spec, clamp, shape_blocks)?.finish(rank)
}

/// Moments over shapes produced on demand, sharded like [`fit_basis_streaming`].
pub fn accumulate_streaming<F>(
    count: usize,
    spec: &VoxelGridSpec,
    clamp: f32,
    shape_blocks: F,
) -> Result<BasisAccumulator>
where
    F: Fn(usize) -> Result<Vec<VoxelBlock<f32>>> + Sync,
{
    if count == 0 {
        return Err(Error::InvalidArgument("training corpus is empty".into()));
    }
    let shards: Vec<(usize, usize)> = (0..count)
        .step_by(FIT_SHARD_SIZE)
        .map(|s| (s, (s + FIT_SHARD_SIZE).min(count)))
        .collect();
    let partials: Vec<Result<BasisAccumulator>> = shards
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = BasisAccumulator::new(*spec, clamp);
            for i in lo..hi {
                acc.push_blocks(&shape_blocks(i)?)?;
            }
            acc.flush();
            Ok(acc)
        })
        .collect();
    let mut total = BasisAccumulator::new(*spec, clamp);
    for p in partials {
        total.merge(p?)?;
    }
    Ok(total)
}

/// Fits a basis over an unordered block collection. Blocks are put into a
/// canonical order first, so any permutation of the input yields the same
/// bits.
pub fn fit_basis_from_blocks<T: Real>(
    blocks: &[VoxelBlock<T>],
    spec: &VoxelGridSpec,
    clamp: f32,
    rank: usize,
) -> Result<PcaBasis<T>> {
    let mut occupied: Vec<&VoxelBlock<T>> = blocks.iter().filter(|b| b.occupied).collect();
    occupied.sort_by(|a, b| {
        a.samples
            .iter()
            .zip(&b.samples)
            .map(|(x, y)| x.to_f64_lossless().total_cmp(&y.to_f64_lossless()))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut acc = BasisAccumulator::new(*spec, clamp);
    for b in occupied {
        acc.push(&b.samples)?;
    }
    acc.finish(rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::VoxelIndex;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block(samples: Vec<f64>) -> VoxelBlock<f64> {
        VoxelBlock {
            index: VoxelIndex::new(0, 0, 0),
            samples,
            occupied: true,
        }
    }

    fn tiny_spec() -> VoxelGridSpec {
        VoxelGridSpec::new(1, 2).unwrap()
    }

    /// Blocks with a spread spectrum so eigenvectors are well separated.
    fn synthetic_blocks(n: usize, seed: u64) -> Vec<VoxelBlock<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scales = [3.0, 2.2, 1.6, 1.1, 0.8, 0.5, 0.3, 0.15];
        (0..n)
            .map(|_| {
                let s = (0..8)
                    .map(|i| 0.1 * i as f64 + scales[i] * rng.gen_range(-1.0..1.0) + 0.2 * rng.gen_range(-1.0..1.0))
                    .collect();
                block(s)
            })
            .collect()
    }

    #[test]
    fn identical_blocks_have_zero_variance() {
        let v: Vec<f64> = (0..8).map(|i| 0.01 * i as f64 - 0.03).collect();
        let blocks = vec![block(v.clone()); 20];
        let b = fit_basis_from_blocks(&blocks, &tiny_spec(), 0.1, 3).unwrap();
        assert!(b.is_zero_variance());
        assert_eq!(b.rank(), 3);
        assert!(b.eigenvalues().iter().all(|&l| l == 0.0));
        for (m, want) in b.mean().iter().zip(&v) {
            assert!((m - want).abs() < 1e-15);
        }
        assert_eq!(b.explained_variance(1).unwrap(), 1.0);
        assert!(b.orthonormality_error() < 1e-12);
    }

    #[test]
    fn two_point_closed_form() {
        let a: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let bvec: Vec<f64> = (0..8).map(|i| (i as f64 * 1.3).cos()).collect();
        let n = 10;
        let mut blocks = Vec::new();
        for _ in 0..n / 2 {
            blocks.push(block(a.clone()));
            blocks.push(block(bvec.clone()));
        }
        let basis = fit_basis_from_blocks(&blocks, &tiny_spec(), 1.0, 1).unwrap();
        let diff: Vec<f64> = a.iter().zip(&bvec).map(|(x, y)| x - y).collect();
        let norm2: f64 = diff.iter().map(|v| v * v).sum();
        let want = norm2 / 4.0 * n as f64 / (n as f64 - 1.0);
        assert!((basis.eigenvalues()[0] - want).abs() < 1e-12 * want);
        let dot: f64 = basis.column(0).iter().zip(&diff).map(|(c, v)| c * v).sum();
        assert!((dot.abs() - norm2.sqrt()).abs() < 1e-10);
        assert!((basis.explained_variance(1).unwrap() - 1.0).abs() < 1e-12);
        for (m, (x, y)) in basis.mean().iter().zip(a.iter().zip(&bvec)) {
            assert!((m - 0.5 * (x + y)).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_dense_svd_oracle() {
        let blocks = synthetic_blocks(50, 3);
        let basis = fit_basis_from_blocks(&blocks, &tiny_spec(), 1.0, 8).unwrap();
        let n = blocks.len();
        let mean: Vec<f64> = (0..8).map(|i| blocks.iter().map(|b| b.samples[i]).sum::<f64>() / n as f64).collect();
        let centered = DMatrix::from_fn(n, 8, |r, c| blocks[r].samples[c] - mean[c]);
        let svd = centered.svd(false, true);
        let vt = svd.v_t.unwrap();
        let mut order: Vec<usize> = (0..8).collect();
        order.sort_by(|&x, &y| svd.singular_values[y].partial_cmp(&svd.singular_values[x]).unwrap());
        for (j, &o) in order.iter().enumerate() {
            let sigma = svd.singular_values[o];
            let lambda = sigma * sigma / (n as f64 - 1.0);
            assert!((basis.eigenvalues()[j] - lambda).abs() < 1e-10);
            let col = basis.column(j);
            let sign = if col.iter().zip(vt.row(o).iter()).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            for i in 0..8 {
                assert!((col[i] - sign * vt[(o, i)]).abs() < 1e-8);
            }
        }
        assert!(basis.orthonormality_error() < 1e-12);
        let total: f64 = basis.eigenvalues().iter().sum();
        assert!((total - basis.total_variance()).abs() < 1e-9 * total);
    }

    #[test]
    fn sign_convention_and_order() {
        let basis = fit_basis_from_blocks(&synthetic_blocks(200, 9), &tiny_spec(), 1.0, 8).unwrap();
        for j in 0..basis.rank() {
            let col = basis.column(j);
            let big = col.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
        for w in basis.eigenvalues().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn permutation_gives_identical_bits() {
        let blocks = synthetic_blocks(300, 5);
        let a = fit_basis_from_blocks(&blocks, &tiny_spec(), 1.0, 6).unwrap();
        let mut shuffled = blocks.clone();
        shuffled.reverse();
        shuffled.swap(3, 100);
        let b = fit_basis_from_blocks(&shuffled, &tiny_spec(), 1.0, 6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn insufficient_samples_and_rank_truncation() {
        let blocks = synthetic_blocks(5, 1);
        assert!(matches!(
            fit_basis_from_blocks(&blocks, &tiny_spec(), 1.0, 6),
            Err(Error::InsufficientSamples { available: 5, requested: 6 })
        ));
        // Five points span at most four centered directions.
        let b = fit_basis_from_blocks(&blocks, &tiny_spec(), 1.0, 5).unwrap();
        assert_eq!(b.rank(), 4);
        assert!(fit_basis_from_blocks(&blocks, &tiny_spec(), 1.0, 0).is_err());
    }

    #[test]
    fn streaming_merge_matches_single_pass() {
        let blocks = synthetic_blocks(1200, 4);
        let mut single = BasisAccumulator::new(tiny_spec(), 1.0);
        single.push_blocks(&blocks).unwrap();
        let (m1, c1) = single.moments();
        let mut left = BasisAccumulator::new(tiny_spec(), 1.0);
        let mut right = BasisAccumulator::new(tiny_spec(), 1.0);
        left.push_blocks(&blocks[..700]).unwrap();
        right.push_blocks(&blocks[700..]).unwrap();
        left.merge(right).unwrap();
        let (m2, c2) = left.moments();
        for (a, b) in m1.iter().zip(&m2).chain(c1.iter().zip(&c2)) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(left.merge(BasisAccumulator::new(tiny_spec(), 0.5)).is_err());
    }

    #[test]
    fn full_rank_explains_everything() {
        let basis = fit_basis_from_blocks(&synthetic_blocks(100, 2), &tiny_spec(), 1.0, 8).unwrap();
        assert_eq!(basis.rank(), 8);
        assert!(basis.explained_variance(8).unwrap() >= 0.999999);
        let mut prev = 0.0;
        for l in 1..=8 {
            let f = basis.explained_variance(l).unwrap();
            assert!(f >= prev);
            prev = f;
        }
        assert!(basis.explained_variance(9).is_err());
    }
}
