//! Mesh → clamped SDF lattice.
//!
//! Unsigned distances come from the BVH with a cutoff at the clamp, after
//! culling 4³-cell tiles whose center is provably farther than the clamp.
//! Signs come from the generalized winding number. Two adjacent nodes whose
//! (lower-bound) distances sum to more than their spacing cannot have the
//! surface between them, so they are merged with a union-find and the
//! winding number is evaluated only at a few members of each component; a
//! component whose members disagree (possible on open meshes) falls back to
//! per-node evaluation.

use rayon::prelude::*;

use super::{clamp_value, node_coord, Bvh, SdfLattice};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::num::Real;

const TILE: usize = 4;
const COMPONENT_PROBES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignMode {
    /// Winding number at a few nodes per far-field component.
    #[default]
    Propagated,
    /// Winding number at every node.
    PerNode,
}

pub fn compute_sdf_lattice<T: Real>(mesh: &TriangleMesh<T>, resolution: usize, clamp: f64) -> Result<SdfLattice> {
    compute_sdf_lattice_with(mesh, resolution, clamp, SignMode::default())
}

pub fn compute_sdf_lattice_with<T: Real>(
    mesh: &TriangleMesh<T>,
    resolution: usize,
    clamp: f64,
    mode: SignMode,
) -> Result<SdfLattice> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!("lattice resolution {resolution} < 2")));
    }
    if !(clamp > 0.0) {
        return Err(Error::InvalidArgument(format!("clamp {clamp} must be > 0")));
    }
    if !(mesh.surface_area() > 0.0) {
        return Err(Error::DegenerateMesh("every triangle has zero area".into()));
    }
    let n = resolution;
    let bvh = Bvh::new(mesh);
    let dist = unsigned_distances(&bvh, n, clamp);
    let inside = match mode {
        SignMode::PerNode => (0..n * n * n)
            .into_par_iter()
            .map(|idx| bvh.winding_number(node_position(idx, n)) > 0.5)
            .collect(),
        SignMode::Propagated => propagated_signs(&bvh, &dist, n),
    };
    let values = dist
        .iter()
        .zip(&inside)
        .map(|(&d, &ins)| clamp_value(if ins { -d } else { d }, clamp))
        .collect();
    Ok(SdfLattice::from_parts_unchecked(n, clamp as f32, values))
}

#[inline]
fn node_position(idx: usize, n: usize) -> Vec3<f64> {
    let i = idx % n;
    let j = (idx / n) % n;
    let k = idx / (n * n);
    Vec3::new(node_coord(i, n), node_coord(j, n), node_coord(k, n))
}

/// Distances capped at `clamp`, computed slab-by-slab of tiles.
fn unsigned_distances(bvh: &Bvh, n: usize, clamp: f64) -> Vec<f64> {
    let mut dist = vec![clamp; n * n * n];
    let tiles = n.div_ceil(TILE);
    let clamp2 = clamp * clamp;
    dist.par_chunks_mut(n * n * TILE)
        .enumerate()
        .for_each(|(tk, slab)| {
            let k0 = tk * TILE;
            let k1 = (k0 + TILE).min(n);
            for tj in 0..tiles {
                let j0 = tj * TILE;
                let j1 = (j0 + TILE).min(n);
                for ti in 0..tiles {
                    let i0 = ti * TILE;
                    let i1 = (i0 + TILE).min(n);
                    let lo = Vec3::new(node_coord(i0, n), node_coord(j0, n), node_coord(k0, n));
                    let hi = Vec3::new(node_coord(i1 - 1, n), node_coord(j1 - 1, n), node_coord(k1 - 1, n));
                    let center = (lo + hi) * 0.5;
                    let half_diag = (hi - lo).norm() * 0.5;
                    let reach = clamp + half_diag;
                    let dc2 = bvh.closest_distance_squared(center, reach * reach);
                    if dc2 >= reach * reach {
                        continue;
                    }
                    for k in k0..k1 {
                        let z = node_coord(k, n);
                        for j in j0..j1 {
                            let y = node_coord(j, n);
                            for i in i0..i1 {
                                let p = Vec3::new(node_coord(i, n), y, z);
                                let d2 = bvh.closest_distance_squared(p, clamp2);
                                slab[(k - k0) * n * n + j * n + i] = d2.sqrt().min(clamp);
                            }
                        }
                    }
                }
            }
        });
    dist
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index becomes the root so roots are order-independent.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

fn propagated_signs(bvh: &Bvh, dist: &[f64], n: usize) -> Vec<bool> {
    let h = 1.0 / (n - 1) as f64;
    let threshold = h * (1.0 + 1e-9);
    let total = n * n * n;
    let mut uf = UnionFind::new(total);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let a = i + n * (j + n * k);
                let da = dist[a];
                if i + 1 < n && da + dist[a + 1] > threshold {
                    uf.union(a as u32, (a + 1) as u32);
                }
                if j + 1 < n && da + dist[a + n] > threshold {
                    uf.union(a as u32, (a + n) as u32);
                }
                if k + 1 < n && da + dist[a + n * n] > threshold {
                    uf.union(a as u32, (a + n * n) as u32);
                }
            }
        }
    }
    let roots: Vec<u32> = (0..total as u32).map(|x| uf.find(x)).collect();
    drop(uf);

    // Group node indices by root (counting sort keeps members in index order).
    let mut counts = vec![0u32; total];
    for &r in &roots {
        counts[r as usize] += 1;
    }
    let mut starts = vec![0u32; total + 1];
    for r in 0..total {
        starts[r + 1] = starts[r] + counts[r];
    }
    let mut cursor = starts.clone();
    let mut members = vec![0u32; total];
    for (x, &r) in roots.iter().enumerate() {
        members[cursor[r as usize] as usize] = x as u32;
        cursor[r as usize] += 1;
    }
    drop(cursor);
    drop(roots);

    let groups: Vec<(u32, u32)> = (0..total)
        .filter(|&r| counts[r] > 0)
        .map(|r| (starts[r], starts[r + 1]))
        .collect();
    let resolved: Vec<std::result::Result<bool, Vec<bool>>> = groups
        .par_iter()
        .map(|&(s, e)| {
            let group = &members[s as usize..e as usize];
            let probes = group.len().min(COMPONENT_PROBES);
            let mut votes = (0..probes).map(|q| {
                let node = group[q * group.len() / probes] as usize;
                bvh.winding_number(node_position(node, n)) > 0.5
            });
            let first = votes.next().expect("non-empty group");
            if votes.all(|v| v == first) {
                Ok(first)
            } else {
                Err(group
                    .iter()
                    .map(|&x| bvh.winding_number(node_position(x as usize, n)) > 0.5)
                    .collect())
            }
        })
        .collect();

    let mut inside = vec![false; total];
    for (&(s, e), res) in groups.iter().zip(resolved) {
        let group = &members[s as usize..e as usize];
        match res {
            Ok(sign) => group.iter().for_each(|&x| inside[x as usize] = sign),
            Err(per_node) => group
                .iter()
                .zip(per_node)
                .for_each(|(&x, sign)| inside[x as usize] = sign),
        }
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::{analytic_sdf_lattice, AnalyticShape};
    use crate::Mesh;

    #[test]
    fn box_mesh_node_above_face() {
        let mesh = Mesh::cuboid(Vec3::zero(), Vec3::splat(0.25));
        // n = 11 puts a node at z = 0.3.
        let lat = compute_sdf_lattice(&mesh, 11, 0.1).unwrap();
        assert!((node_coord(8, 11) - 0.3).abs() < 1e-15);
        assert!((lat.get(5, 5, 8) as f64 - 0.05).abs() < 1e-7);
        assert!((lat.get(5, 5, 5) as f64 + 0.1).abs() < 1e-7);
        let box_oracle = AnalyticShape::cuboid([0.0; 3], [0.25; 3]);
        let exact = analytic_sdf_lattice(&box_oracle, 11, 0.1).unwrap();
        for (a, b) in lat.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn propagated_signs_match_per_node() {
        let mesh = Mesh::icosphere(Vec3::new(0.02, -0.03, 0.01), 0.37, 3);
        let a = compute_sdf_lattice_with(&mesh, 41, 0.08, SignMode::Propagated).unwrap();
        let b = compute_sdf_lattice_with(&mesh, 41, 0.08, SignMode::PerNode).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn open_mesh_falls_back_to_per_node() {
        let full = Mesh::icosphere(Vec3::zero(), 0.4, 3);
        let open = Mesh::new(full.vertices().to_vec(), full.triangles()[6..].to_vec()).unwrap();
        let a = compute_sdf_lattice_with(&open, 33, 0.1, SignMode::Propagated).unwrap();
        let b = compute_sdf_lattice_with(&open, 33, 0.1, SignMode::PerNode).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(a.get(16, 16, 16) < 0.0);
    }

    #[test]
    fn sphere_center_and_corner() {
        let mesh = Mesh::icosphere(Vec3::zero(), 0.4, 4);
        let lat = compute_sdf_lattice(&mesh, 33, 0.2).unwrap();
        assert_eq!(lat.get(16, 16, 16), -0.2);
        assert_eq!(lat.get(32, 32, 32), 0.2);
    }

    #[test]
    fn degenerate_meshes_are_rejected() {
        let v = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.2, 0.0, 0.0)];
        let flat = Mesh::new(v, vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            compute_sdf_lattice(&flat, 5, 0.1),
            Err(Error::DegenerateMesh(_))
        ));
        assert!(matches!(
            compute_sdf_lattice(&Mesh::empty(), 5, 0.1),
            Err(Error::EmptyMesh)
        ));
    }
}
