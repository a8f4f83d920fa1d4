//! Lattice reassembly from latent codes, trilinear resampling and surface
//! extraction.

mod mc;
mod tables;

pub use mc::marching_cubes;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{VoxelBlock, VoxelGridSpec, VoxelIndex};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::num::Real;
use crate::pca::{decode_blocks, LatentShape, PcaBasis};
use crate::sdf::SdfLattice;

const DECODE_CHUNK: usize = 512;

/// How nodes shared by several occupied blocks are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    #[default]
    Average,
    /// The first block in lattice order wins.
    FirstWriter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub target_resolution: usize,
    pub boundary_policy: BoundaryPolicy,
    pub iso_level: f64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            target_resolution: 257,
            boundary_policy: BoundaryPolicy::Average,
            iso_level: 0.0,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "target resolution {} < 2",
                self.target_resolution
            )));
        }
        Ok(())
    }
}

/// Decodes every occupied voxel and stitches a native-resolution lattice,
/// averaging shared boundary nodes.
pub fn assemble_lattice<T: Real>(latent: &LatentShape<T>, basis: &PcaBasis<T>) -> Result<SdfLattice> {
    assemble_lattice_with(latent, basis, BoundaryPolicy::Average)
}

pub fn assemble_lattice_with<T: Real>(
    latent: &LatentShape<T>,
    basis: &PcaBasis<T>,
    policy: BoundaryPolicy,
) -> Result<SdfLattice> {
    if latent.spec() != basis.spec() || latent.clamp() != basis.clamp() {
        return Err(Error::SpecMismatch(format!(
            "latent grid {:?} (clamp {}) does not match basis grid {:?} (clamp {})",
            latent.spec(),
            latent.clamp(),
            basis.spec(),
            basis.clamp()
        )));
    }
    let l = latent.latent_dim();
    if l > basis.rank() {
        return Err(Error::SpecMismatch(format!(
            "latent size {l} exceeds basis rank {}",
            basis.rank()
        )));
    }
    let entries: Vec<(&VoxelIndex, &[T])> = latent.entries().collect();
    let decoded: Vec<Vec<T>> = entries
        .par_chunks(DECODE_CHUNK)
        .map(|chunk| {
            let mut codes = Vec::with_capacity(chunk.len() * l);
            for (_, c) in chunk {
                codes.extend_from_slice(c);
            }
            decode_blocks(&codes, l, basis)
        })
        .collect::<Result<_>>()?;
    let d = basis.dim();
    let samples = entries
        .iter()
        .map(|(i, _)| **i)
        .zip(decoded.iter().flat_map(|chunk| chunk.chunks_exact(d)));
    Ok(stitch(latent.spec(), latent.clamp(), latent.interior_mask(), samples, policy))
}

/// Builds a lattice from exact occupied blocks plus an interior mask; with
/// blocks from a partition this reproduces the source lattice inside every
/// occupied voxel.
pub fn assemble_from_blocks<T: Real>(
    blocks: &[VoxelBlock<T>],
    interior: &[bool],
    spec: &VoxelGridSpec,
    clamp: f32,
) -> Result<SdfLattice> {
    if interior.len() != spec.voxel_count() {
        return Err(Error::SpecMismatch(format!(
            "interior mask has {} voxels, grid has {}",
            interior.len(),
            spec.voxel_count()
        )));
    }
    if let Some(b) = blocks.iter().find(|b| b.samples.len() != spec.block_dim()) {
        return Err(Error::SpecMismatch(format!("block {:?} has the wrong sample count", b.index)));
    }
    let mut sorted: Vec<&VoxelBlock<T>> = blocks.iter().filter(|b| b.occupied).collect();
    sorted.sort_by_key(|b| b.index);
    let samples = sorted.iter().map(|b| (b.index, b.samples.as_slice()));
    Ok(stitch(spec, clamp, interior, samples, BoundaryPolicy::FirstWriter))
}

fn stitch<'a, T: Real, I>(
    spec: &VoxelGridSpec,
    clamp: f32,
    interior: &[bool],
    blocks: I,
    policy: BoundaryPolicy,
) -> SdfLattice
where
    I: Iterator<Item = (VoxelIndex, &'a [T])>,
{
    let n = spec.native_resolution();
    let m = spec.samples_per_axis();
    let mut values = vec![clamp; n * n * n];
    for idx in spec.voxel_indices() {
        if interior[idx.linear(spec.voxels_per_axis())] {
            let [i0, j0, k0] = idx.origin_node(spec);
            for c in 0..m {
                for b in 0..m {
                    let row = i0 + n * (j0 + b + n * (k0 + c));
                    values[row..row + m].fill(-clamp);
                }
            }
        }
    }
    let mut hits = vec![0u8; n * n * n];
    for (idx, samples) in blocks {
        let [i0, j0, k0] = idx.origin_node(spec);
        for c in 0..m {
            for b in 0..m {
                let row = i0 + n * (j0 + b + n * (k0 + c));
                let src = &samples[(c * m + b) * m..(c * m + b + 1) * m];
                for (a, s) in src.iter().enumerate() {
                    let g = row + a;
                    let v = s.to_f64_lossless() as f32;
                    match (hits[g], policy) {
                        (0, _) => values[g] = v,
                        (_, BoundaryPolicy::Average) => values[g] += v,
                        (_, BoundaryPolicy::FirstWriter) => continue,
                    }
                    hits[g] += 1;
                }
            }
        }
    }
    if policy == BoundaryPolicy::Average {
        for (v, &h) in values.iter_mut().zip(&hits) {
            if h > 1 {
                *v = (*v / h as f32).clamp(-clamp, clamp);
            }
        }
    }
    SdfLattice::from_parts_unchecked(n, clamp, values)
}

/// Trilinear resampling onto a `target³` lattice over the same domain.
/// Source positions are computed with exact integer ratios, so target nodes
/// that coincide with source nodes copy their values.
pub fn resample(lattice: &SdfLattice, target: usize) -> Result<SdfLattice> {
    if target < 2 {
        return Err(Error::InvalidArgument(format!("target resolution {target} < 2")));
    }
    let n = lattice.resolution();
    if target == n {
        return Ok(lattice.clone());
    }
    let axis: Vec<(usize, f64)> = (0..target)
        .map(|t| {
            let num = t * (n - 1);
            let den = target - 1;
            let (mut i, mut f) = (num / den, (num % den) as f64 / den as f64);
            if i == n - 1 {
                i = n - 2;
                f = 1.0;
            }
            (i, f)
        })
        .collect();
    let src = lattice.values();
    let clamp = lattice.clamp();
    let mut values = vec![0f32; target * target * target];
    values
        .par_chunks_mut(target * target)
        .enumerate()
        .for_each(|(tz, slab)| {
            let (k, fz) = axis[tz];
            for ty in 0..target {
                let (j, fy) = axis[ty];
                for tx in 0..target {
                    let (i, fx) = axis[tx];
                    let at = |di: usize, dj: usize, dk: usize| src[(i + di) + n * ((j + dj) + n * (k + dk))] as f64;
                    let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + (b - a) * t };
                    let c00 = lerp(at(0, 0, 0), at(1, 0, 0), fx);
                    let c10 = lerp(at(0, 1, 0), at(1, 1, 0), fx);
                    let c01 = lerp(at(0, 0, 1), at(1, 0, 1), fx);
                    let c11 = lerp(at(0, 1, 1), at(1, 1, 1), fx);
                    let c0 = lerp(c00, c10, fy);
                    let c1 = lerp(c01, c11, fy);
                    slab[tx + target * ty] = (lerp(c0, c1, fz) as f32).clamp(-clamp, clamp);
                }
            }
        });
    Ok(SdfLattice::from_parts_unchecked(target, clamp, values))
}

/// Latent → lattice → optional resample → marching cubes.
pub fn reconstruct<T: Real>(
    latent: &LatentShape<T>,
    basis: &PcaBasis<T>,
    config: &ReconstructionConfig,
) -> Result<(SdfLattice, TriangleMesh<f64>)> {
    config.validate()?;
    let lattice = assemble_lattice_with(latent, basis, config.boundary_policy)?;
    let lattice = resample(&lattice, config.target_resolution)?;
    let mesh = marching_cubes(&lattice, config.iso_level)?;
    Ok((lattice, mesh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{partition, DEFAULT_TAU};
    use crate::pca::{encode, fit_basis_from_blocks};
    use crate::sdf::{analytic_sdf_lattice, node_coord, AnalyticShape, SdfField};
    use crate::geom::Vec3;

    struct Linear;
    impl SdfField for Linear {
        fn signed_distance(&self, p: Vec3<f64>) -> f64 {
            0.3 * p.x - 0.2 * p.y + 0.1 * p.z + 0.01
        }
    }

    #[test]
    fn resample_identity_and_linear_fields() {
        let lat = SdfLattice::from_field(&Linear, 9, 1.0).unwrap();
        assert_eq!(resample(&lat, 9).unwrap(), lat);
        for target in [2, 5, 13, 30] {
            let r = resample(&lat, target).unwrap();
            for k in 0..target {
                for j in 0..target {
                    for i in 0..target {
                        let want = Linear.signed_distance(r.position(i, j, k));
                        assert!((r.get(i, j, k) as f64 - want).abs() < 1e-6);
                    }
                }
            }
        }
        assert!(resample(&lat, 1).is_err());
    }

    #[test]
    fn resample_sphere_zero_crossing() {
        let shape = AnalyticShape::sphere([0.0; 3], 0.4);
        let lat = analytic_sdf_lattice(&shape, 257, 0.0625).unwrap();
        let r = resample(&lat, 128).unwrap();
        let h = 1.0 / 127.0;
        let mid = 64; // node coordinate 0.5/127 ≈ 0.004, on the +x side of center lines
        let row: Vec<f32> = (0..128).map(|i| r.get(i, mid, mid)).collect();
        let cross = (64..127).find(|&i| row[i] <= 0.0 && row[i + 1] > 0.0).unwrap();
        let x0 = node_coord(cross, 128);
        let t = row[cross] as f64 / (row[cross] as f64 - row[cross + 1] as f64);
        let x = x0 + t * h;
        let yz = node_coord(mid, 128);
        let radius = (x * x + 2.0 * yz * yz).sqrt();
        assert!((radius - 0.4).abs() < h * 3f64.sqrt());
    }

    fn sphere_basis(l: usize) -> (SdfLattice, PcaBasis<f64>, VoxelGridSpec) {
        let spec = VoxelGridSpec::new(8, 5).unwrap();
        let mut train = Vec::new();
        for i in 0..12 {
            let t = i as f64;
            let c = [0.03 * (t * 1.7).sin(), 0.03 * (t * 2.3).cos(), 0.02 * (t * 0.9).sin()];
            let shape = match i % 3 {
                0 => AnalyticShape::sphere(c, 0.2 + 0.015 * t),
                1 => AnalyticShape::cuboid(c, [0.2 + 0.01 * t, 0.3 - 0.01 * t, 0.25]),
                _ => AnalyticShape::torus(c, 0.25 + 0.005 * t, 0.08 + 0.004 * t),
            };
            let lat = analytic_sdf_lattice(&shape, spec.native_resolution(), spec.default_clamp()).unwrap();
            train.extend(partition::<f64>(&lat, &spec, DEFAULT_TAU).unwrap());
        }
        let basis = fit_basis_from_blocks(&train, &spec, (spec.default_clamp()) as f32, l).unwrap();
        let shape = AnalyticShape::sphere([0.0; 3], 0.3);
        let lat = analytic_sdf_lattice(&shape, spec.native_resolution(), spec.default_clamp()).unwrap();
        (lat, basis, spec)
    }

    #[test]
    fn full_rank_round_trip_reproduces_lattice() {
        let (lat, basis, spec) = sphere_basis(125);
        assert_eq!(basis.rank(), 125);
        let latent = encode(&lat, &basis, 125).unwrap();
        let back = assemble_lattice(&latent, &basis).unwrap();
        let m = spec.samples_per_axis();
        let mut worst = 0.0f32;
        for (idx, _) in latent.entries() {
            let [i0, j0, k0] = idx.origin_node(&spec);
            for c in 0..m {
                for b in 0..m {
                    for a in 0..m {
                        let (x, y, z) = (i0 + a, j0 + b, k0 + c);
                        worst = worst.max((lat.get(x, y, z) - back.get(x, y, z)).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-4, "max error {worst}");
        assert_eq!(back.resolution(), spec.native_resolution());
    }

    #[test]
    fn truncated_round_trip_is_within_block_error_bound() {
        let (lat, basis, spec) = sphere_basis(10);
        let latent = encode(&lat, &basis, 10).unwrap();
        let back = assemble_lattice(&latent, &basis).unwrap();
        let blocks = partition::<f64>(&lat, &spec, DEFAULT_TAU).unwrap();
        let mut bound = 0.0f64;
        for b in blocks.iter().filter(|b| b.occupied) {
            let code = latent.code(&b.index).unwrap();
            let dec = crate::pca::decode_block(code, &basis).unwrap();
            for (x, y) in dec.iter().zip(&b.samples) {
                bound = bound.max((x - y).abs());
            }
        }
        let m = spec.samples_per_axis();
        for b in blocks.iter().filter(|b| b.occupied) {
            let [i0, j0, k0] = b.index.origin_node(&spec);
            for c in 0..m {
                for bb in 0..m {
                    for a in 0..m {
                        let err = (back.get(i0 + a, j0 + bb, k0 + c) - lat.get(i0 + a, j0 + bb, k0 + c)).abs() as f64;
                        assert!(err <= bound + 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn empty_latent_gives_uniform_fill() {
        let (_, basis, spec) = sphere_basis(4);
        let latent = LatentShape::new(spec, basis.clamp(), 4);
        let lat = assemble_lattice(&latent, &basis).unwrap();
        assert!(lat.values().iter().all(|&v| v == basis.clamp()));
        assert!(marching_cubes(&lat, 0.0).unwrap().is_empty());
    }

    #[test]
    fn average_is_order_independent_and_first_writer_differs_only_on_seams() {
        let (lat, basis, _) = sphere_basis(6);
        let latent = encode(&lat, &basis, 6).unwrap();
        let mut reversed = LatentShape::new(*latent.spec(), latent.clamp(), 6);
        let entries: Vec<_> = latent.entries().map(|(i, c)| (*i, c.to_vec())).collect();
        for (i, c) in entries.into_iter().rev() {
            reversed.insert(i, c).unwrap();
        }
        for (l, &inside) in latent.interior_mask().iter().enumerate() {
            reversed.set_interior(VoxelIndex::from_linear(l, latent.spec().voxels_per_axis()), inside);
        }
        let a = assemble_lattice(&latent, &basis).unwrap();
        let b = assemble_lattice(&reversed, &basis).unwrap();
        assert_eq!(a, b);
        let f = assemble_lattice_with(&latent, &basis, BoundaryPolicy::FirstWriter).unwrap();
        assert_ne!(a, f);
    }

    #[test]
    fn exact_blocks_reassemble_to_source_inside_occupied_voxels() {
        let spec = VoxelGridSpec::new(8, 5).unwrap();
        let shape = AnalyticShape::torus([0.0; 3], 0.25, 0.1);
        let lat = analytic_sdf_lattice(&shape, spec.native_resolution(), spec.default_clamp()).unwrap();
        let blocks = partition::<f32>(&lat, &spec, DEFAULT_TAU).unwrap();
        let interior: Vec<bool> = blocks.iter().map(|b| !b.occupied && b.samples[0] < 0.0).collect();
        let back = assemble_from_blocks(&blocks, &interior, &spec, lat.clamp()).unwrap();
        assert_eq!(marching_cubes(&back, 0.0).unwrap(), marching_cubes(&lat, 0.0).unwrap());
    }
}
