//! Voxel-grid partition of an SDF lattice into per-voxel sample blocks.
//!
//! Voxel `(i, j, k)` owns the `m³` lattice nodes starting at global node
//! `(i·(m−1), j·(m−1), k·(m−1))`; neighbours share their boundary layer.
//! A block is occupied when its samples change sign or come within `τ·r` of
//! the surface.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::num::Real;
use crate::sdf::{clamp_value, node_coord, SdfField, SdfLattice};

/// Near-surface occupancy band, in voxel widths.
pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoxelGridSpec {
    voxels_per_axis: usize,
    samples_per_axis: usize,
}

impl Default for VoxelGridSpec {
    fn default() -> Self {
        Self {
            voxels_per_axis: 32,
            samples_per_axis: 9,
        }
    }
}

impl VoxelGridSpec {
    pub fn new(voxels_per_axis: usize, samples_per_axis: usize) -> Result<Self> {
        if voxels_per_axis < 1 || samples_per_axis < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs K >= 1 and m >= 2, got K={voxels_per_axis}, m={samples_per_axis}"
            )));
        }
        if voxels_per_axis > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("K={voxels_per_axis} too large")));
        }
        Ok(Self {
            voxels_per_axis,
            samples_per_axis,
        })
    }

    /// K
    pub fn voxels_per_axis(&self) -> usize {
        self.voxels_per_axis
    }

    /// m
    pub fn samples_per_axis(&self) -> usize {
        self.samples_per_axis
    }

    /// r = 1/K
    pub fn voxel_size(&self) -> f64 {
        1.0 / self.voxels_per_axis as f64
    }

    /// d = m³
    pub fn block_dim(&self) -> usize {
        self.samples_per_axis.pow(3)
    }

    /// n = K·(m−1)+1
    pub fn native_resolution(&self) -> usize {
        self.voxels_per_axis * (self.samples_per_axis - 1) + 1
    }

    pub fn voxel_count(&self) -> usize {
        self.voxels_per_axis.pow(3)
    }

    /// Default clamp of two voxel widths.
    pub fn default_clamp(&self) -> f64 {
        2.0 * self.voxel_size()
    }

    /// All voxel indices in lattice (x-fastest) order.
    pub fn voxel_indices(&self) -> impl Iterator<Item = VoxelIndex> {
        let kk = self.voxels_per_axis;
        (0..kk.pow(3)).map(move |l| VoxelIndex::from_linear(l, kk))
    }
}

/// Voxel coordinates; ordered x-fastest like the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoxelIndex {
    pub i: u16,
    pub j: u16,
    pub k: u16,
}

impl VoxelIndex {
    pub fn new(i: usize, j: usize, k: usize) -> Self {
        Self {
            i: i as u16,
            j: j as u16,
            k: k as u16,
        }
    }

    pub fn from_linear(l: usize, voxels_per_axis: usize) -> Self {
        let kk = voxels_per_axis;
        Self::new(l % kk, (l / kk) % kk, l / (kk * kk))
    }

    pub fn linear(&self, voxels_per_axis: usize) -> usize {
        let kk = voxels_per_axis;
        self.i as usize + kk * (self.j as usize + kk * self.k as usize)
    }

    /// Global lattice node of this voxel's local sample `0`.
    pub fn origin_node(&self, spec: &VoxelGridSpec) -> [usize; 3] {
        let s = spec.samples_per_axis - 1;
        [self.i as usize * s, self.j as usize * s, self.k as usize * s]
    }
}

impl Ord for VoxelIndex {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.k, self.j, self.i).cmp(&(o.k, o.j, o.i))
    }
}

impl PartialOrd for VoxelIndex {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelBlock<T> {
    pub index: VoxelIndex,
    /// `m³` samples, x-fastest in local coordinates.
    pub samples: Vec<T>,
    pub occupied: bool,
}

impl<T: Real> VoxelBlock<T> {
    pub fn mean(&self) -> f64 {
        self.samples.iter().map(|s| s.to_f64_lossless()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Sign change inside the block, or a sample within `tau·voxel_size` of zero.
pub fn is_occupied<T: Real>(samples: &[T], voxel_size: f64, tau: f64) -> bool {
    let band = tau * voxel_size;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut near = f64::INFINITY;
    for s in samples {
        let v = s.to_f64_lossless();
        lo = lo.min(v);
        hi = hi.max(v);
        near = near.min(v.abs());
    }
    (lo <= 0.0 && 0.0 <= hi) || near <= band
}

/// Copies the `m³` sub-lattice of `index` out of `lattice`.
pub fn block_samples<T: Real>(lattice: &SdfLattice, spec: &VoxelGridSpec, index: VoxelIndex) -> Vec<T> {
    let m = spec.samples_per_axis;
    let [i0, j0, k0] = index.origin_node(spec);
    let mut out = Vec::with_capacity(m * m * m);
    for c in 0..m {
        for b in 0..m {
            let row = lattice.index(i0, j0 + b, k0 + c);
            out.extend(lattice.values()[row..row + m].iter().map(|&v| T::cast(v as f64)));
        }
    }
    out
}

fn check_resolution(lattice: &SdfLattice, spec: &VoxelGridSpec) -> Result<()> {
    if lattice.resolution() != spec.native_resolution() {
        return Err(Error::ResolutionMismatch {
            expected: spec.native_resolution(),
            found: lattice.resolution(),
        });
    }
    Ok(())
}

/// Splits the lattice into all `K³` blocks, flagging occupancy with band `tau`.
pub fn partition<T: Real>(lattice: &SdfLattice, spec: &VoxelGridSpec, tau: f64) -> Result<Vec<VoxelBlock<T>>> {
    check_resolution(lattice, spec)?;
    let r = spec.voxel_size();
    let indices: Vec<VoxelIndex> = spec.voxel_indices().collect();
    Ok(indices
        .into_par_iter()
        .map(|index| {
            let samples = block_samples(lattice, spec, index);
            let occupied = is_occupied(&samples, r, tau);
            VoxelBlock {
                index,
                samples,
                occupied,
            }
        })
        .collect())
}

/// Keeps occupied blocks, preserving lattice order.
pub fn occupied_blocks<T>(blocks: Vec<VoxelBlock<T>>) -> Vec<VoxelBlock<T>> {
    blocks.into_iter().filter(|b| b.occupied).collect()
}

/// Occupied blocks of one shape plus the sign of every unoccupied voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct Harvest<T> {
    /// Occupied blocks in lattice order.
    pub blocks: Vec<VoxelBlock<T>>,
    /// Per linear voxel index: unoccupied with negative (interior) fill.
    pub interior: Vec<bool>,
}

impl<T: Real> Harvest<T> {
    pub fn cast<U: Real>(&self) -> Harvest<U> {
        Harvest {
            blocks: self
                .blocks
                .iter()
                .map(|b| VoxelBlock {
                    index: b.index,
                    samples: b.samples.iter().map(|s| U::cast(s.to_f64_lossless())).collect(),
                    occupied: b.occupied,
                })
                .collect(),
            interior: self.interior.clone(),
        }
    }
}

enum Cell<T> {
    Occupied(Vec<T>),
    Interior,
    Exterior,
}

fn collect_harvest<T>(spec: &VoxelGridSpec, cells: Vec<(VoxelIndex, Cell<T>)>) -> Harvest<T> {
    let mut blocks = Vec::new();
    let mut interior = vec![false; spec.voxel_count()];
    for (index, cell) in cells {
        match cell {
            Cell::Occupied(samples) => blocks.push(VoxelBlock {
                index,
                samples,
                occupied: true,
            }),
            Cell::Interior => interior[index.linear(spec.voxels_per_axis())] = true,
            Cell::Exterior => {}
        }
    }
    Harvest { blocks, interior }
}

fn classify<T: Real>(samples: Vec<T>, r: f64, tau: f64) -> Cell<T> {
    if is_occupied(&samples, r, tau) {
        Cell::Occupied(samples)
    } else if samples.iter().map(|s| s.to_f64_lossless()).sum::<f64>() > 0.0 {
        Cell::Exterior
    } else {
        Cell::Interior
    }
}

/// Harvests a materialized lattice.
pub fn harvest_lattice<T: Real>(lattice: &SdfLattice, spec: &VoxelGridSpec, tau: f64) -> Result<Harvest<T>> {
    check_resolution(lattice, spec)?;
    let r = spec.voxel_size();
    let indices: Vec<VoxelIndex> = spec.voxel_indices().collect();
    let cells = indices
        .into_par_iter()
        .map(|index| (index, classify(block_samples(lattice, spec, index), r, tau)))
        .collect();
    Ok(collect_harvest(spec, cells))
}

/// Harvests a 1-Lipschitz field without materializing the lattice.
///
/// A voxel whose center value exceeds `half_diagonal + tau·r` in magnitude
/// cannot change sign or come within the band, so it is classified from
/// the center sign alone. The result equals `harvest_lattice` on
/// `SdfLattice::from_field(field, n, clamp)`.
pub fn harvest<T: Real, F: SdfField + ?Sized>(field: &F, spec: &VoxelGridSpec, clamp: f64, tau: f64) -> Harvest<T> {
    let n = spec.native_resolution();
    let m = spec.samples_per_axis;
    let r = spec.voxel_size();
    let cull = 3f64.sqrt() * 0.5 * r + tau * r;
    let can_cull = clamp > tau * r;
    let indices: Vec<VoxelIndex> = spec.voxel_indices().collect();
    let cells = indices
        .into_par_iter()
        .map(|index| {
            let [i0, j0, k0] = index.origin_node(spec);
            if can_cull {
                let lo = Vec3::new(node_coord(i0, n), node_coord(j0, n), node_coord(k0, n));
                let center = field.signed_distance(lo + Vec3::splat(0.5 * r));
                if center.abs() > cull * (1.0 + 1e-9) {
                    return (index, if center > 0.0 { Cell::Exterior } else { Cell::Interior });
                }
            }
            let mut samples = Vec::with_capacity(m * m * m);
            for c in 0..m {
                let z = node_coord(k0 + c, n);
                for b in 0..m {
                    let y = node_coord(j0 + b, n);
                    for a in 0..m {
                        let p = Vec3::new(node_coord(i0 + a, n), y, z);
                        samples.push(T::cast(clamp_value(field.signed_distance(p), clamp) as f64));
                    }
                }
            }
            (index, classify(samples, r, tau))
        })
        .collect();
    collect_harvest(spec, cells)
}

/// Occupied blocks of a 1-Lipschitz field; see [`harvest`].
pub fn harvest_occupied<T: Real, F: SdfField + ?Sized>(
    field: &F,
    spec: &VoxelGridSpec,
    clamp: f64,
    tau: f64,
) -> Vec<VoxelBlock<T>> {
    harvest(field, spec, clamp, tau).blocks
}

/// Writes block samples back into a lattice; later blocks overwrite shared
/// boundary nodes (they hold identical copies for a partition).
pub fn reassemble<T: Real>(blocks: &[VoxelBlock<T>], spec: &VoxelGridSpec, clamp: f32) -> Result<SdfLattice> {
    let n = spec.native_resolution();
    let m = spec.samples_per_axis;
    let mut values = vec![clamp; n * n * n];
    for block in blocks {
        if block.samples.len() != spec.block_dim() {
            return Err(Error::SpecMismatch(format!(
                "block has {} samples, grid expects {}",
                block.samples.len(),
                spec.block_dim()
            )));
        }
        let [i0, j0, k0] = block.index.origin_node(spec);
        for c in 0..m {
            for b in 0..m {
                let row = i0 + n * (j0 + b + n * (k0 + c));
                let src = &block.samples[(c * m + b) * m..(c * m + b + 1) * m];
                for (dst, s) in values[row..row + m].iter_mut().zip(src) {
                    *dst = s.to_f64_lossless() as f32;
                }
            }
        }
    }
    SdfLattice::from_values(n, clamp, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::{analytic_sdf_lattice, AnalyticShape};

    /// Independent occupancy scan straight off the lattice.
    fn brute_force_occupied(lattice: &SdfLattice, kk: usize, m: usize, tau: f64) -> Vec<usize> {
        let r = 1.0 / kk as f64;
        let mut out = Vec::new();
        for k in 0..kk {
            for j in 0..kk {
                for i in 0..kk {
                    let (mut neg, mut pos, mut near) = (false, false, false);
                    for z in k * (m - 1)..=(k + 1) * (m - 1) {
                        for y in j * (m - 1)..=(j + 1) * (m - 1) {
                            for x in i * (m - 1)..=(i + 1) * (m - 1) {
                                let v = lattice.get(x, y, z) as f64;
                                neg |= v <= 0.0;
                                pos |= v >= 0.0;
                                near |= v.abs() <= tau * r;
                            }
                        }
                    }
                    if (neg && pos) || near {
                        out.push(i + kk * (j + kk * k));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn default_spec_dimensions() {
        let s = VoxelGridSpec::default();
        assert_eq!(s.block_dim(), 729);
        assert_eq!(s.native_resolution(), 257);
        assert_eq!(s.voxel_size(), 1.0 / 32.0);
        assert!(VoxelGridSpec::new(0, 9).is_err());
        assert!(VoxelGridSpec::new(4, 1).is_err());
    }

    #[test]
    fn single_block_is_whole_lattice() {
        let shape = AnalyticShape::sphere([0.0; 3], 0.3);
        let lat = analytic_sdf_lattice(&shape, 7, 0.5).unwrap();
        let spec = VoxelGridSpec::new(1, 7).unwrap();
        let blocks = partition::<f32>(&lat, &spec, DEFAULT_TAU).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].samples, lat.values());
    }

    #[test]
    fn shared_corner_indexing() {
        let values: Vec<f32> = (0..27).map(|v| v as f32 / 100.0).collect();
        let lat = SdfLattice::from_values(3, 1.0, values).unwrap();
        let spec = VoxelGridSpec::new(2, 2).unwrap();
        let blocks = partition::<f64>(&lat, &spec, DEFAULT_TAU).unwrap();
        let global = lat.get(1, 1, 1) as f64;
        assert_eq!(blocks[0].samples[7], global);
        let last = blocks.iter().find(|b| b.index == VoxelIndex::new(1, 1, 1)).unwrap();
        assert_eq!(last.samples[0], global);
    }

    #[test]
    fn resolution_mismatch() {
        let lat = SdfLattice::uniform(5, 0.1, 0.1).unwrap();
        assert!(matches!(
            partition::<f32>(&lat, &VoxelGridSpec::default(), DEFAULT_TAU),
            Err(Error::ResolutionMismatch { expected: 257, found: 5 })
        ));
    }

    #[test]
    fn sphere_occupancy_matches_brute_force_scan() {
        let spec = VoxelGridSpec::default();
        let shape = AnalyticShape::sphere([0.0; 3], 0.4);
        let lat = analytic_sdf_lattice(&shape, 257, spec.default_clamp()).unwrap();
        let occ = occupied_blocks(partition::<f32>(&lat, &spec, DEFAULT_TAU).unwrap());
        let oracle = brute_force_occupied(&lat, 32, 9, DEFAULT_TAU);
        let got: Vec<usize> = occ.iter().map(|b| b.index.linear(32)).collect();
        assert_eq!(got, oracle);

        // Every occupied voxel cube lies within tau·r of the sphere shell.
        let r = spec.voxel_size();
        for b in &occ {
            let lo = Vec3::new(b.index.i as f64, b.index.j as f64, b.index.k as f64) * r - Vec3::splat(0.5);
            let hi = lo + Vec3::splat(r);
            let closest = Vec3::zero().max(lo).min(hi);
            let dmin = closest.norm();
            let far = Vec3::new(
                lo.x.abs().max(hi.x.abs()),
                lo.y.abs().max(hi.y.abs()),
                lo.z.abs().max(hi.z.abs()),
            );
            let dmax = far.norm();
            assert!(dmin - DEFAULT_TAU * r <= 0.4 + 1e-7 && 0.4 <= dmax + DEFAULT_TAU * r + 1e-7);
        }

        // The fast harvest agrees bit for bit, fill signs included.
        let fast = harvest::<f32, _>(&shape, &spec, spec.default_clamp(), DEFAULT_TAU);
        assert_eq!(fast.blocks, occ);
        assert_eq!(fast, harvest_lattice::<f32>(&lat, &spec, DEFAULT_TAU).unwrap());
        assert!(fast.interior[VoxelIndex::new(16, 16, 16).linear(32)]);
        assert!(!fast.interior[0]);
    }

    #[test]
    fn empty_and_solid_lattices_have_no_occupied_blocks() {
        let spec = VoxelGridSpec::new(2, 3).unwrap();
        let outside = SdfLattice::uniform(5, 0.5, 0.5).unwrap();
        let inside = SdfLattice::uniform(5, 0.5, -0.5).unwrap();
        for lat in [outside, inside] {
            assert!(occupied_blocks(partition::<f64>(&lat, &spec, DEFAULT_TAU).unwrap()).is_empty());
        }
    }

    #[test]
    fn occupancy_invariant_under_sign_flip() {
        let spec = VoxelGridSpec::new(8, 5).unwrap();
        let shape = AnalyticShape::torus([0.0; 3], 0.25, 0.1);
        let lat = analytic_sdf_lattice(&shape, spec.native_resolution(), spec.default_clamp()).unwrap();
        let flipped = SdfLattice::from_values(
            lat.resolution(),
            lat.clamp(),
            lat.values().iter().map(|v| -v).collect(),
        )
        .unwrap();
        let a: Vec<bool> = partition::<f64>(&lat, &spec, DEFAULT_TAU).unwrap().iter().map(|b| b.occupied).collect();
        let b: Vec<bool> = partition::<f64>(&flipped, &spec, DEFAULT_TAU).unwrap().iter().map(|b| b.occupied).collect();
        assert_eq!(a, b);
        assert!(a.iter().any(|&o| o));
    }

    #[test]
    fn occupied_count_scales_with_surface() {
        let shape = AnalyticShape::sphere([0.0; 3], 0.4);
        let count = |kk: usize| {
            let spec = VoxelGridSpec::new(kk, 9).unwrap();
            harvest_occupied::<f32, _>(&shape, &spec, spec.default_clamp(), DEFAULT_TAU).len() as f64
        };
        let ratio = count(32) / count(16);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn partition_then_reassemble_is_lossless() {
        let spec = VoxelGridSpec::new(4, 5).unwrap();
        let shape = AnalyticShape::cuboid([0.02, 0.0, -0.03], [0.2, 0.25, 0.15]);
        let lat = analytic_sdf_lattice(&shape, spec.native_resolution(), 0.3).unwrap();
        let blocks = partition::<f32>(&lat, &spec, DEFAULT_TAU).unwrap();
        let back = reassemble(&blocks, &spec, lat.clamp()).unwrap();
        assert_eq!(back.values(), lat.values());
    }
}
