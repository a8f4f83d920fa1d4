//! Indexed triangle meshes: normalization into the canonical domain,
//! area-uniform surface sampling and small rigid perturbations.

mod io;
mod primitives;

pub use io::{load_mesh, read_obj, read_ply, save_mesh, write_obj, write_ply, MeshFormat};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{mat_vec, rotation_matrix, Aabb, Vec3};
use crate::num::Real;

/// Half-width of the canonical domain `[-0.5, 0.5]³`.
pub const DOMAIN_HALF: f64 = 0.5;

/// Default normalization margin (fraction of the domain edge on each side).
pub const DEFAULT_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh<T> {
    vertices: Vec<Vec3<T>>,
    triangles: Vec<[u32; 3]>,
}

impl<T: Real> TriangleMesh<T> {
    /// Builds a mesh, rejecting out-of-range or repeated vertex indices.
    pub fn new(vertices: Vec<Vec3<T>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= nv) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} references a vertex beyond {nv}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} repeats a vertex index"
                )));
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle(&self, t: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t).map(Vec3::cast::<f64>);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Signed enclosed volume; positive for closed meshes with outward winding.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t).map(Vec3::cast::<f64>);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }

    pub fn bounding_box(&self) -> Aabb {
        let mut b = Aabb::empty();
        for v in &self.vertices {
            b.grow(v.cast());
        }
        b
    }

    pub fn cast<U: Real>(&self) -> TriangleMesh<U> {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Recenters on the bounding-box center and scales isotropically so the
    /// longest bounding-box edge equals `1 - 2·margin`.
    pub fn normalize(&self, margin: f64) -> Result<Self> {
        if !(0.0..=0.45).contains(&margin) {
            return Err(Error::InvalidArgument(format!(
                "margin {margin} outside [0, 0.45]"
            )));
        }
        if self.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let bbox = self.bounding_box();
        let longest = bbox.extent().max_element();
        if !(longest > 0.0) || !longest.is_finite() {
            return Err(Error::DegenerateMesh(
                "bounding box has zero extent".into(),
            ));
        }
        let center = bbox.center();
        let scale = (1.0 - 2.0 * margin) / longest;
        let vertices = self
            .vertices
            .iter()
            .map(|v| ((v.cast::<f64>() - center) * scale).cast())
            .collect();
        Ok(Self {
            vertices,
            triangles: self.triangles.clone(),
        })
    }

    /// Samples `n` points area-uniformly: a triangle is picked with
    /// probability proportional to its area, then a uniform barycentric point.
    pub fn sample_surface_points(&self, n: usize, seed: u64) -> Result<Vec<Vec3<f64>>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        if self.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            total += self.triangle_area(t);
            cumulative.push(total);
        }
        if !(total > 0.0) {
            return Err(Error::DegenerateMesh("total surface area is zero".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = self.triangles.len() - 1;
        let points = (0..n)
            .map(|_| {
                let u: f64 = rng.gen::<f64>() * total;
                let t = cumulative.partition_point(|&c| c <= u).min(last);
                let r1 = rng.gen::<f64>().sqrt();
                let r2: f64 = rng.gen();
                let [a, b, c] = self.triangle(t).map(Vec3::cast::<f64>);
                a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2)
            })
            .collect();
        Ok(points)
    }

    /// Rotates about the origin, then translates by `p.translation · r`.
    pub fn apply_perturbation(&self, p: &RigidPerturbation, voxel_size: f64) -> Result<Self> {
        let vertices: Vec<Vec3<T>> = self
            .vertices
            .iter()
            .map(|v| p.apply(v.cast(), voxel_size).cast())
            .collect();
        let out = Self {
            vertices,
            triangles: self.triangles.clone(),
        };
        if !out.bounding_box().within_half_extent(DOMAIN_HALF) {
            return Err(Error::OutOfDomain(format!(
                "perturbation {} moves vertices outside the domain",
                p.label()
            )));
        }
        Ok(out)
    }

    /// Merges consecutive vertex/triangle lists of `other` into `self`.
    pub fn append(&mut self, other: &TriangleMesh<T>) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + offset)));
    }
}

/// Rigid motion expressed in voxel units (translation) and degrees (rotation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPerturbation {
    translation: [f64; 3],
    axis: [f64; 3],
    angle_deg: f64,
}

impl RigidPerturbation {
    /// `axis` is normalized; a zero axis is only accepted with a zero angle.
    pub fn new(translation: [f64; 3], axis: [f64; 3], angle_deg: f64) -> Result<Self> {
        let a = Vec3::from_array(axis);
        let len = a.norm();
        let axis = if len > 0.0 {
            (a / len).to_array()
        } else if angle_deg == 0.0 {
            [0.0, 0.0, 1.0]
        } else {
            return Err(Error::InvalidArgument("rotation axis has zero length".into()));
        };
        Ok(Self {
            translation,
            axis,
            angle_deg,
        })
    }

    pub fn identity() -> Self {
        Self {
            translation: [0.0; 3],
            axis: [0.0, 0.0, 1.0],
            angle_deg: 0.0,
        }
    }

    pub fn translation(t: [f64; 3]) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    pub fn rotation(axis: [f64; 3], angle_deg: f64) -> Result<Self> {
        Self::new([0.0; 3], axis, angle_deg)
    }

    pub fn translation_voxels(&self) -> [f64; 3] {
        self.translation
    }

    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle_deg
    }

    pub fn is_identity(&self) -> bool {
        self.angle_deg == 0.0 && self.translation == [0.0; 3]
    }

    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        rotation_matrix(Vec3::from_array(self.axis), self.angle_deg.to_radians())
    }

    pub fn offset(&self, voxel_size: f64) -> Vec3<f64> {
        Vec3::from_array(self.translation) * voxel_size
    }

    #[inline]
    pub fn apply(&self, v: Vec3<f64>, voxel_size: f64) -> Vec3<f64> {
        mat_vec(&self.rotation_matrix(), v) + self.offset(voxel_size)
    }

    /// Short human-readable tag such as `tx+0.05r` or `rz-2deg`.
    pub fn label(&self) -> String {
        if self.is_identity() {
            return "identity".into();
        }
        let mut parts = Vec::new();
        for (name, t) in ["tx", "ty", "tz"].iter().zip(self.translation) {
            if t != 0.0 {
                parts.push(format!("{name}{t:+}r"));
            }
        }
        if self.angle_deg != 0.0 {
            let [x, y, z] = self.axis;
            let axis = match (x, y, z) {
                (a, b, c) if a == 1.0 && b == 0.0 && c == 0.0 => "x".to_string(),
                (a, b, c) if a == 0.0 && b == 1.0 && c == 0.0 => "y".to_string(),
                (a, b, c) if a == 0.0 && b == 0.0 && c == 1.0 => "z".to_string(),
                _ => format!("({x:.3},{y:.3},{z:.3})"),
            };
            parts.push(format!("r{axis}{:+}deg", self.angle_deg));
        }
        parts.join("_")
    }

    /// Translations of ±0.1r and ±0.05r along x and rotations of ±4° and ±2°
    /// about z.
    pub fn standard_set() -> Vec<RigidPerturbation> {
        let mut out: Vec<RigidPerturbation> = [0.1, -0.1, 0.05, -0.05]
            .iter()
            .map(|&t| Self::translation([t, 0.0, 0.0]))
            .collect();
        out.extend(
            [4.0, -4.0, 2.0, -2.0]
                .iter()
                .map(|&a| Self::rotation([0.0, 0.0, 1.0], a).expect("unit axis")),
        );
        out
    }
}
