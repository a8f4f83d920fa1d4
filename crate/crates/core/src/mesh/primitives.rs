//! Closed reference meshes with outward (counter-clockwise) winding.

use std::collections::HashMap;

use super::TriangleMesh;
use crate::geom::Vec3;
use crate::num::Real;

impl<T: Real> TriangleMesh<T> {
    /// Subdivided icosahedron: `20·4^subdivisions` triangles, every vertex on
    /// the sphere.
    pub fn icosphere(center: Vec3<f64>, radius: f64, subdivisions: u32) -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let v = [
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ];
        let f = [
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        let verts = v.iter().map(|p| Vec3::from_array(*p)).collect();
        subdivided_sphere(verts, f.to_vec(), center, radius, subdivisions)
    }

    /// Subdivided octahedron: `8·4^subdivisions` triangles, with the six
    /// axis-extreme points as vertices.
    pub fn octasphere(center: Vec3<f64>, radius: f64, subdivisions: u32) -> Self {
        let v = [
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        let f = [
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        let verts = v.iter().map(|p| Vec3::from_array(*p)).collect();
        subdivided_sphere(verts, f.to_vec(), center, radius, subdivisions)
    }

    /// Axis-aligned box with 8 vertices and 12 triangles.
    pub fn cuboid(center: Vec3<f64>, half: Vec3<f64>) -> Self {
        let corner = |i: usize| {
            let s = |bit: usize| if i & bit != 0 { 1.0 } else { -1.0 };
            center + Vec3::new(s(1) * half.x, s(2) * half.y, s(4) * half.z)
        };
        let vertices = (0..8).map(|i| corner(i).cast()).collect();
        // Corner bits: 1 = +x, 2 = +y, 4 = +z.
        let triangles = vec![
            [0, 2, 3],
            [0, 3, 1], // -z
            [4, 5, 7],
            [4, 7, 6], // +z
            [0, 1, 5],
            [0, 5, 4], // -y
            [2, 6, 7],
            [2, 7, 3], // +y
            [0, 4, 6],
            [0, 6, 2], // -x
            [1, 3, 7],
            [1, 7, 5], // +x
        ];
        TriangleMesh {
            vertices,
            triangles,
        }
    }
}

fn subdivided_sphere<T: Real>(
    mut verts: Vec<Vec3<f64>>,
    mut faces: Vec<[u32; 3]>,
    center: Vec3<f64>,
    radius: f64,
    subdivisions: u32,
) -> TriangleMesh<T> {
    for v in verts.iter_mut() {
        *v = *v / v.norm();
    }
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = verts[a as usize] + verts[b as usize];
                verts.push(m / m.norm());
                (verts.len() - 1) as u32
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh {
        vertices: verts.iter().map(|v| (center + *v * radius).cast()).collect(),
        triangles: faces,
    }
}
