//! Marching cubes over an `SdfLattice`.
//!
//! Vertices are shared between cells through a key on the lattice edge they
//! sit on, so a closed level set yields a closed mesh. Triangles are wound
//! so that normals point towards values above the iso level (outward for a
//! signed distance field).

use std::collections::HashMap;

use rayon::prelude::*;

use super::tables::{CORNERS, EDGES, TRI_TABLE};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::sdf::{node_coord, SdfLattice};

/// Lattice edge id: `3·(linear index of lower node) + axis`.
type EdgeKey = u64;

pub fn marching_cubes(lattice: &SdfLattice, iso: f64) -> Result<TriangleMesh<f64>> {
    let delta = lattice.clamp() as f64;
    if !(iso > -delta && iso < delta) {
        return Err(Error::InvalidArgument(format!(
            "iso level {iso} must lie strictly inside (-{delta}, {delta})"
        )));
    }
    let n = lattice.resolution();
    let values = lattice.values();
    let iso32 = iso as f32;

    let slabs: Vec<Vec<[EdgeKey; 3]>> = (0..n - 1)
        .into_par_iter()
        .map(|k| slab_triangles(values, n, k, iso32))
        .collect();

    let mut ids: HashMap<EdgeKey, u32> = HashMap::new();
    let mut keys: Vec<EdgeKey> = Vec::new();
    let mut triangles = Vec::with_capacity(slabs.iter().map(Vec::len).sum());
    for tri in slabs.iter().flatten() {
        let mut t = [0u32; 3];
        for (slot, key) in t.iter_mut().zip(tri) {
            *slot = *ids.entry(*key).or_insert_with(|| {
                keys.push(*key);
                (keys.len() - 1) as u32
            });
        }
        triangles.push(t);
    }
    if triangles.is_empty() {
        log::debug!("marching cubes found no crossing of level {iso}");
        return Ok(TriangleMesh::empty());
    }
    let vertices = keys.par_iter().map(|&key| edge_vertex(values, n, key, iso)).collect();
    TriangleMesh::new(vertices, triangles)
}

fn slab_triangles(values: &[f32], n: usize, k: usize, iso: f32) -> Vec<[EdgeKey; 3]> {
    let mut out = Vec::new();
    let stride = [1, n, n * n];
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let base = i + n * (j + n * k);
            let mut case = 0usize;
            for (c, off) in CORNERS.iter().enumerate() {
                let v = values[base + off[0] * stride[0] + off[1] * stride[1] + off[2] * stride[2]];
                if v < iso {
                    case |= 1 << c;
                }
            }
            if case == 0 || case == 255 {
                continue;
            }
            let row = &TRI_TABLE[case];
            for t in row.chunks_exact(3).take_while(|t| t[0] >= 0) {
                let key = |e: i8| {
                    let [a, b] = EDGES[e as usize];
                    let (ca, cb) = (CORNERS[a], CORNERS[b]);
                    let axis = (0..3).find(|&x| ca[x] != cb[x]).unwrap();
                    let lo = if ca[axis] < cb[axis] { ca } else { cb };
                    let node = base + lo[0] * stride[0] + lo[1] * stride[1] + lo[2] * stride[2];
                    (node * 3 + axis) as EdgeKey
                };
                // The table winds towards the low side; swap to face outward.
                out.push([key(t[0]), key(t[2]), key(t[1])]);
            }
        }
    }
    out
}

fn edge_vertex(values: &[f32], n: usize, key: EdgeKey, iso: f64) -> Vec3<f64> {
    let node = (key / 3) as usize;
    let axis = (key % 3) as usize;
    let step = [1, n, n * n][axis];
    let (v0, v1) = (values[node] as f64, values[node + step] as f64);
    let t = ((iso - v0) / (v1 - v0)).clamp(0.0, 1.0);
    let idx = [node % n, (node / n) % n, node / (n * n)];
    let mut p = [0.0; 3];
    for a in 0..3 {
        p[a] = node_coord(idx[a], n);
    }
    let h = 1.0 / (n - 1) as f64;
    p[axis] += t * h;
    Vec3::from_array(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::{analytic_sdf_lattice, AnalyticShape, SdfField};

    #[test]
    fn table_triangles_use_exactly_the_crossing_edges() {
        for case in 0..256usize {
            let below = |c: usize| case & (1 << c) != 0;
            let crossing: Vec<usize> = (0..12).filter(|&e| below(EDGES[e][0]) != below(EDGES[e][1])).collect();
            let mut used: Vec<usize> = TRI_TABLE[case]
                .iter()
                .take_while(|&&e| e >= 0)
                .map(|&e| e as usize)
                .collect();
            assert_eq!(used.len() % 3, 0);
            used.sort_unstable();
            used.dedup();
            assert_eq!(used, crossing, "case {case}");
        }
    }

    #[test]
    fn uniform_lattice_has_no_surface() {
        let lat = SdfLattice::uniform(9, 0.1, 0.1).unwrap();
        assert!(marching_cubes(&lat, 0.0).unwrap().is_empty());
        assert!(marching_cubes(&lat, 0.2).is_err());
    }

    #[test]
    fn sphere_vertices_near_radius_and_closed_outward() {
        let n = 129;
        let lat = analytic_sdf_lattice(&AnalyticShape::sphere([0.0; 3], 0.4), n, 0.1).unwrap();
        let mesh = marching_cubes(&lat, 0.0).unwrap();
        let h = 1.0 / (n - 1) as f64;
        for v in mesh.vertices() {
            let r = v.norm();
            assert!((r - 0.4).abs() <= h * 3f64.sqrt(), "radius {r}");
            assert!(v.max_element() <= 0.5 && v.min_element() >= -0.5);
        }
        let vol = mesh.signed_volume();
        let want = 4.0 / 3.0 * std::f64::consts::PI * 0.4f64.powi(3);
        assert!((vol - want).abs() < 0.01 * want, "volume {vol}");

        // Every directed edge appears once and its reverse once.
        let mut directed = HashMap::new();
        for t in mesh.triangles() {
            for e in 0..3 {
                *directed.entry((t[e], t[(e + 1) % 3])).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            assert_eq!(count, 1);
            assert_eq!(directed.get(&(b, a)), Some(&1));
        }
    }

    struct Plane;
    impl SdfField for Plane {
        fn signed_distance(&self, p: Vec3<f64>) -> f64 {
            p.z - 0.1
        }
    }

    #[test]
    fn plane_vertices_are_exact() {
        let lat = SdfLattice::from_field(&Plane, 17, 0.5).unwrap();
        let mesh = marching_cubes(&lat, 0.0).unwrap();
        assert!(!mesh.is_empty());
        for v in mesh.vertices() {
            assert!((v.z - 0.1).abs() < 1e-6);
        }
        // Outward means towards +z here.
        for t in 0..mesh.triangles().len() {
            let [a, b, c] = mesh.triangle(t);
            assert!((b - a).cross(c - a).z > 0.0);
        }
    }

    #[test]
    fn output_is_deterministic() {
        let lat = analytic_sdf_lattice(&AnalyticShape::torus([0.0; 3], 0.3, 0.1), 65, 0.1).unwrap();
        assert_eq!(marching_cubes(&lat, 0.0).unwrap(), marching_cubes(&lat, 0.0).unwrap());
    }
}
