use rstar::{PointDistance, RTree};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::num::Real;
use crate::recon::resample;
use crate::sdf::SdfLattice;

pub const DEFAULT_CHAMFER_POINTS: usize = 30_000;
pub const DEFAULT_CHAMFER_SEED: u64 = 0x5eed;
/// Chamfer values are multiplied by this factor when reported.
pub const CHAMFER_REPORT_SCALE: f64 = 1e3;
pub const DEFAULT_IOU_RESOLUTION: usize = 128;

const QUERY_CHUNK: usize = 1024;

/// A point sample of a surface with a nearest-neighbour index over it.
pub struct SurfaceSample {
    points: Vec<[f64; 3]>,
    tree: RTree<[f64; 3]>,
}

impl std::fmt::Debug for SurfaceSample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SurfaceSample").field("points", &self.points.len()).finish()
    }
}

impl SurfaceSample {
    pub fn from_points(points: &[Vec3<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateMesh("empty point sample".into()));
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
            return Err(Error::DegenerateMesh("non-finite sample point".into()));
        }
        let points: Vec<[f64; 3]> = points.iter().map(|p| p.to_array()).collect();
        let tree = RTree::bulk_load(points.clone());
        Ok(Self { points, tree })
    }

    /// Samples `n` area-uniform points from `mesh` with a fixed seed.
    pub fn from_mesh<T: Real>(mesh: &TriangleMesh<T>, n: usize, seed: u64) -> Result<Self> {
        let points = mesh.sample_surface_points(n, seed).map_err(|e| match e {
            Error::EmptyMesh => Error::DegenerateMesh("mesh has no triangles to sample".into()),
            other => other,
        })?;
        Self::from_points(&points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn nearest_squared(&self, q: &[f64; 3]) -> f64 {
        self.tree
            .nearest_neighbor(q)
            .map_or(f64::INFINITY, |p| p.distance_2(q))
    }

    /// Mean over `queries` of the squared distance to the nearest point of
    /// this sample. Chunk sums are combined in a fixed order.
    pub fn mean_nearest_squared(&self, queries: &[[f64; 3]]) -> f64 {
        let partial: Vec<f64> = queries
            .par_chunks(QUERY_CHUNK)
            .map(|chunk| chunk.iter().map(|q| self.nearest_squared(q)).sum())
            .collect();
        partial.iter().sum::<f64>() / queries.len() as f64
    }
}

/// Symmetric Chamfer-L2 between two samples: the sum of both directional
/// mean squared nearest distances.
pub fn chamfer_samples(a: &SurfaceSample, b: &SurfaceSample) -> f64 {
    b.mean_nearest_squared(&a.points) + a.mean_nearest_squared(&b.points)
}

/// Chamfer-L2 between two meshes, each sampled with `n` points from the same
/// seed. The value is unscaled.
pub fn chamfer_l2<A: Real, B: Real>(a: &TriangleMesh<A>, b: &TriangleMesh<B>, n: usize, seed: u64) -> Result<f64> {
    let sa = SurfaceSample::from_mesh(a, n, seed)?;
    let sb = SurfaceSample::from_mesh(b, n, seed)?;
    Ok(chamfer_samples(&sa, &sb))
}

/// Intersection over union of the `value ≤ 0` node sets of two lattices of
/// equal resolution; 1 when both sets are empty.
pub fn voxel_iou(a: &SdfLattice, b: &SdfLattice) -> Result<f64> {
    if a.resolution() != b.resolution() {
        return Err(Error::ResolutionMismatch {
            expected: a.resolution(),
            found: b.resolution(),
        });
    }
    let (inter, union) = a
        .values()
        .par_iter()
        .zip(b.values().par_iter())
        .map(|(&x, &y)| {
            let (ia, ib) = (x <= 0.0, y <= 0.0);
            ((ia && ib) as u64, (ia || ib) as u64)
        })
        .reduce(|| (0, 0), |p, q| (p.0 + q.0, p.1 + q.1));
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// [`voxel_iou`] after resampling both lattices to `resolution³`.
pub fn voxel_iou_at(a: &SdfLattice, b: &SdfLattice, resolution: usize) -> Result<f64> {
    voxel_iou(&resample(a, resolution)?, &resample(b, resolution)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::{analytic_sdf_lattice, AnalyticShape};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Mesh64 = TriangleMesh<f64>;

    fn brute_chamfer(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
        let d2 = |p: &[f64; 3], q: &[f64; 3]| (0..3).map(|i| (p[i] - q[i]).powi(2)).sum::<f64>();
        let dir = |x: &[[f64; 3]], y: &[[f64; 3]]| {
            x.iter()
                .map(|p| y.iter().map(|q| d2(p, q)).fold(f64::INFINITY, f64::min))
                .sum::<f64>()
                / x.len() as f64
        };
        dir(a, b) + dir(b, a)
    }

    #[test]
    fn index_matches_brute_force_including_planar_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let planar: Vec<Vec3<f64>> = (0..700)
            .map(|i| Vec3::new((i % 30) as f64 * 0.01, (i / 30) as f64 * 0.01, 0.0))
            .collect();
        let cloud: Vec<Vec3<f64>> = (0..500)
            .map(|_| Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
            .collect();
        let a = SurfaceSample::from_points(&planar).unwrap();
        let b = SurfaceSample::from_points(&cloud).unwrap();
        let fast = chamfer_samples(&a, &b);
        let slow = brute_chamfer(a.points(), b.points());
        assert!((fast - slow).abs() <= 1e-12 * slow.max(1.0), "{fast} vs {slow}");
        assert_eq!(chamfer_samples(&a, &b), chamfer_samples(&b, &a));
        assert_eq!(chamfer_samples(&a, &a), 0.0);
    }

    #[test]
    fn identical_spheres_converge_to_zero() {
        let sphere = Mesh64::icosphere(Vec3::zero(), 0.4, 5);
        let values: Vec<f64> = [1_000, 10_000, 30_000]
            .iter()
            .map(|&n| {
                let a = SurfaceSample::from_mesh(&sphere, n, 1).unwrap();
                let b = SurfaceSample::from_mesh(&sphere, n, 2).unwrap();
                chamfer_samples(&a, &b)
            })
            .collect();
        assert!(values[0] > values[1] && values[1] > values[2], "{values:?}");
        assert!(values[2] < 1e-4);
        assert_eq!(chamfer_l2(&sphere, &sphere, 5000, 9).unwrap(), 0.0);
    }

    #[test]
    fn concentric_spheres() {
        let a = Mesh64::icosphere(Vec3::zero(), 0.3, 5);
        let b = Mesh64::icosphere(Vec3::zero(), 0.4, 5);
        let c = chamfer_l2(&a, &b, 30_000, 4).unwrap();
        assert!((c - 0.02).abs() < 0.001, "{c}");
        assert_eq!(c, chamfer_l2(&b, &a, 30_000, 4).unwrap());
    }

    #[test]
    fn empty_mesh_is_degenerate() {
        let a = Mesh64::icosphere(Vec3::zero(), 0.3, 1);
        assert!(matches!(chamfer_l2(&a, &Mesh64::empty(), 10, 0), Err(Error::DegenerateMesh(_))));
    }

    #[test]
    fn iou_examples() {
        let big = analytic_sdf_lattice(&AnalyticShape::sphere([0.0; 3], 0.4), 128, 0.1).unwrap();
        let small = analytic_sdf_lattice(&AnalyticShape::sphere([0.0; 3], 0.32), 128, 0.1).unwrap();
        assert_eq!(voxel_iou(&big, &big).unwrap(), 1.0);
        let iou = voxel_iou(&big, &small).unwrap();
        assert!((iou / 0.512 - 1.0).abs() < 0.02, "{iou}");
        assert_eq!(iou, voxel_iou(&small, &big).unwrap());

        let left = analytic_sdf_lattice(&AnalyticShape::sphere([-0.25, 0.0, 0.0], 0.1), 64, 0.1).unwrap();
        let right = analytic_sdf_lattice(&AnalyticShape::sphere([0.25, 0.0, 0.0], 0.1), 64, 0.1).unwrap();
        assert_eq!(voxel_iou(&left, &right).unwrap(), 0.0);

        let empty = SdfLattice::uniform(16, 0.1, 0.1).unwrap();
        assert_eq!(voxel_iou(&empty, &empty).unwrap(), 1.0);
        assert!(matches!(voxel_iou(&empty, &left), Err(Error::ResolutionMismatch { .. })));
        let at = voxel_iou_at(&left, &big, 128).unwrap();
        assert!((0.0..=1.0).contains(&at));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn iou_bounded_and_symmetric(seed in any::<u64>(), ra in 0.05f64..0.44, rb in 0.05f64..0.28, dx in -0.2f64..0.2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ca = [rng.gen_range(-0.05..0.05), 0.0, 0.0];
            let a = analytic_sdf_lattice(&AnalyticShape::sphere(ca, ra), 24, 0.2).unwrap();
            let b = analytic_sdf_lattice(&AnalyticShape::sphere([dx, 0.0, 0.0], rb), 24, 0.2).unwrap();
            let ab = voxel_iou(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, voxel_iou(&b, &a).unwrap());
            prop_assert_eq!(voxel_iou(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn chamfer_non_negative_and_symmetric(seed in any::<u64>(), n in 1usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cloud = |k: usize| -> Vec<Vec3<f64>> {
                (0..k).map(|_| Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))).collect()
            };
            let a = SurfaceSample::from_points(&cloud(n)).unwrap();
            let b = SurfaceSample::from_points(&cloud(n + 3)).unwrap();
            let c = chamfer_samples(&a, &b);
            prop_assert!(c >= 0.0);
            prop_assert_eq!(c, chamfer_samples(&b, &a));
            let slow = brute_chamfer(a.points(), b.points());
            prop_assert!((c - slow).abs() <= 1e-12 * slow.max(1.0), "{} vs {}", c, slow);
        }
    }
}
