//! Closed-form signed distance primitives and CSG combinations.

use serde::{Deserialize, Serialize};

use super::{SdfField, SdfLattice};
use crate::error::{Error, Result};
use crate::geom::{mat_transpose, mat_vec, Aabb, Vec3};
use crate::mesh::{RigidPerturbation, DOMAIN_HALF};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticShape {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
    },
    /// Ring of radius `major` in the xy-plane, tube radius `minor`.
    Torus {
        center: [f64; 3],
        major: f64,
        minor: f64,
    },
    /// Points within `radius` of the segment `a`–`b`.
    Capsule {
        a: [f64; 3],
        b: [f64; 3],
        radius: f64,
    },
    Union {
        a: Box<AnalyticShape>,
        b: Box<AnalyticShape>,
    },
    Intersection {
        a: Box<AnalyticShape>,
        b: Box<AnalyticShape>,
    },
    /// `shape` moved by `x ↦ rotation·x + translation`.
    Rigid {
        shape: Box<AnalyticShape>,
        rotation: [[f64; 3]; 3],
        translation: [f64; 3],
    },
}

impl AnalyticShape {
    pub fn sphere(center: [f64; 3], radius: f64) -> Self {
        AnalyticShape::Sphere { center, radius }
    }

    pub fn cuboid(center: [f64; 3], half_extents: [f64; 3]) -> Self {
        AnalyticShape::Box {
            center,
            half_extents,
        }
    }

    pub fn torus(center: [f64; 3], major: f64, minor: f64) -> Self {
        AnalyticShape::Torus {
            center,
            major,
            minor,
        }
    }

    pub fn capsule(a: [f64; 3], b: [f64; 3], radius: f64) -> Self {
        AnalyticShape::Capsule { a, b, radius }
    }

    pub fn union(a: AnalyticShape, b: AnalyticShape) -> Self {
        AnalyticShape::Union {
            a: Box::new(a),
            b: Box::new(b),
        }
    }

    pub fn intersection(a: AnalyticShape, b: AnalyticShape) -> Self {
        AnalyticShape::Intersection {
            a: Box::new(a),
            b: Box::new(b),
        }
    }

    pub fn rigid(shape: AnalyticShape, rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Self {
        AnalyticShape::Rigid {
            shape: Box::new(shape),
            rotation,
            translation,
        }
    }

    /// Applies a perturbation with translation measured in units of `voxel_size`.
    pub fn perturbed(&self, p: &RigidPerturbation, voxel_size: f64) -> Self {
        if p.is_identity() {
            return self.clone();
        }
        Self::rigid(
            self.clone(),
            p.rotation_matrix(),
            p.offset(voxel_size).to_array(),
        )
    }

    pub fn eval(&self, p: Vec3<f64>) -> f64 {
        match self {
            AnalyticShape::Sphere { center, radius } => (p - Vec3::from_array(*center)).norm() - radius,
            AnalyticShape::Box {
                center,
                half_extents,
            } => {
                let q = (p - Vec3::from_array(*center)).abs() - Vec3::from_array(*half_extents);
                q.max(Vec3::zero()).norm() + q.max_element().min(0.0)
            }
            AnalyticShape::Torus {
                center,
                major,
                minor,
            } => {
                let d = p - Vec3::from_array(*center);
                let ring = (d.x * d.x + d.y * d.y).sqrt() - major;
                (ring * ring + d.z * d.z).sqrt() - minor
            }
            AnalyticShape::Capsule { a, b, radius } => {
                let a = Vec3::from_array(*a);
                let ab = Vec3::from_array(*b) - a;
                let ap = p - a;
                let len2 = ab.norm_squared();
                let t = if len2 > 0.0 {
                    (ap.dot(ab) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (ap - ab * t).norm() - radius
            }
            AnalyticShape::Union { a, b } => a.eval(p).min(b.eval(p)),
            AnalyticShape::Intersection { a, b } => a.eval(p).max(b.eval(p)),
            AnalyticShape::Rigid {
                shape,
                rotation,
                translation,
            } => {
                let local = mat_vec(&mat_transpose(rotation), p - Vec3::from_array(*translation));
                shape.eval(local)
            }
        }
    }

    /// True when `eval` is the exact signed distance, false for CSG bounds.
    pub fn exact(&self) -> bool {
        match self {
            AnalyticShape::Union { .. } | AnalyticShape::Intersection { .. } => false,
            AnalyticShape::Rigid { shape, .. } => shape.exact(),
            _ => true,
        }
    }

    pub fn bounds(&self) -> Aabb {
        let boxed = |c: [f64; 3], h: Vec3<f64>| {
            let c = Vec3::from_array(c);
            Aabb {
                min: c - h,
                max: c + h,
            }
        };
        match self {
            AnalyticShape::Sphere { center, radius } => boxed(*center, Vec3::splat(*radius)),
            AnalyticShape::Box {
                center,
                half_extents,
            } => boxed(*center, Vec3::from_array(*half_extents)),
            AnalyticShape::Torus {
                center,
                major,
                minor,
            } => boxed(*center, Vec3::new(major + minor, major + minor, *minor)),
            AnalyticShape::Capsule { a, b, radius } => {
                let (a, b) = (Vec3::from_array(*a), Vec3::from_array(*b));
                Aabb {
                    min: a.min(b) - Vec3::splat(*radius),
                    max: a.max(b) + Vec3::splat(*radius),
                }
            }
            AnalyticShape::Union { a, b } => a.bounds().union(&b.bounds()),
            AnalyticShape::Intersection { a, b } => {
                let (a, b) = (a.bounds(), b.bounds());
                Aabb {
                    min: a.min.max(b.min),
                    max: a.max.min(b.max),
                }
            }
            AnalyticShape::Rigid {
                shape,
                rotation,
                translation,
            } => {
                let t = Vec3::from_array(*translation);
                let corners = shape.bounds().corners().map(|c| mat_vec(rotation, c) + t);
                Aabb::from_points(corners.iter())
            }
        }
    }

    /// Checks parameters and that the shape fits inside `[-0.5, 0.5]³`.
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            AnalyticShape::Sphere { radius, .. } => positive(*radius, "sphere radius")?,
            AnalyticShape::Box { half_extents, .. } => {
                for h in half_extents {
                    positive(*h, "box half-extent")?;
                }
            }
            AnalyticShape::Torus { major, minor, .. } => {
                positive(*major, "torus major radius")?;
                positive(*minor, "torus minor radius")?;
            }
            AnalyticShape::Capsule { radius, .. } => positive(*radius, "capsule radius")?,
            AnalyticShape::Union { a, b } | AnalyticShape::Intersection { a, b } => {
                a.validate_params()?;
                b.validate_params()?;
            }
            AnalyticShape::Rigid { shape, .. } => shape.validate_params()?,
        }
        let b = self.bounds();
        if !b.within_half_extent(DOMAIN_HALF) {
            return Err(Error::OutOfDomain(format!(
                "shape bounds [{:?}, {:?}] exceed the unit domain",
                b.min.to_array(),
                b.max.to_array()
            )));
        }
        Ok(())
    }

    fn validate_params(&self) -> Result<()> {
        match self.validate() {
            Err(Error::OutOfDomain(_)) => Ok(()),
            other => other,
        }
    }
}

impl SdfField for AnalyticShape {
    #[inline]
    fn signed_distance(&self, p: Vec3<f64>) -> f64 {
        self.eval(p)
    }

    fn is_exact(&self) -> bool {
        self.exact()
    }
}

/// Samples an analytic shape on an `n³` lattice, clamped to `±clamp`.
pub fn analytic_sdf_lattice(shape: &AnalyticShape, resolution: usize, clamp: f64) -> Result<SdfLattice> {
    shape.validate()?;
    SdfLattice::from_field(shape, resolution, clamp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::node_coord;

    #[test]
    fn sphere_values() {
        let s = AnalyticShape::sphere([0.0; 3], 0.4);
        assert!((s.eval(Vec3::new(0.5, 0.0, 0.0)) - 0.1).abs() < 1e-15);
        let lat = analytic_sdf_lattice(&s, 257, 0.5).unwrap();
        assert!((lat.get(128, 128, 128) as f64 + 0.4).abs() < 1e-7);
        assert!((lat.get(256, 128, 128) as f64 - 0.1).abs() < 1e-7);
        // Corner is clamped.
        let lat = analytic_sdf_lattice(&s, 9, 0.2).unwrap();
        assert_eq!(lat.get(8, 8, 8), 0.2);
    }

    #[test]
    fn torus_on_tube_axis() {
        let t = AnalyticShape::torus([0.0; 3], 0.3, 0.1);
        assert!((t.eval(Vec3::new(0.3, 0.0, 0.0)) + 0.1).abs() < 1e-15);
        assert!((t.eval(Vec3::new(0.0, 0.0, 0.0)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn box_values() {
        let b = AnalyticShape::cuboid([0.0; 3], [0.25; 3]);
        assert!((b.eval(Vec3::new(0.0, 0.0, 0.3)) - 0.05).abs() < 1e-15);
        assert!((b.eval(Vec3::zero()) + 0.25).abs() < 1e-15);
        // Outside a corner the distance is Euclidean.
        let d = b.eval(Vec3::new(0.35, 0.35, 0.25));
        assert!((d - (0.02f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csg_is_flagged_as_bound() {
        let u = AnalyticShape::union(
            AnalyticShape::sphere([-0.1, 0.0, 0.0], 0.2),
            AnalyticShape::sphere([0.1, 0.0, 0.0], 0.2),
        );
        assert!(!u.exact());
        let lat = analytic_sdf_lattice(&u, 5, 0.1).unwrap();
        assert!(lat.is_bound_only());
        let i = AnalyticShape::intersection(
            AnalyticShape::sphere([-0.1, 0.0, 0.0], 0.2),
            AnalyticShape::sphere([0.1, 0.0, 0.0], 0.2),
        );
        assert!(i.eval(Vec3::zero()) < 0.0);
        assert!(i.eval(Vec3::new(-0.25, 0.0, 0.0)) > 0.0);
        assert!(u.eval(Vec3::new(-0.25, 0.0, 0.0)) < 0.0);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let s = AnalyticShape::sphere([0.2, 0.0, 0.0], 0.4);
        assert!(matches!(
            analytic_sdf_lattice(&s, 5, 0.1),
            Err(Error::OutOfDomain(_))
        ));
        assert!(matches!(
            AnalyticShape::sphere([0.0; 3], -0.1).validate(),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn rigid_motion_moves_the_zero_set() {
        let s = AnalyticShape::sphere([0.1, 0.0, 0.0], 0.2);
        let p = RigidPerturbation::new([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 90.0).unwrap();
        let moved = s.perturbed(&p, 0.05);
        // Center rotates to (0, 0.1, 0) then shifts by 0.05 in x.
        assert!((moved.eval(Vec3::new(0.05, 0.1, 0.0)) + 0.2).abs() < 1e-12);
        let b = moved.bounds();
        assert!((b.center() - Vec3::new(0.05, 0.1, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn lattice_is_one_lipschitz_along_axes() {
        let shapes = [
            AnalyticShape::sphere([0.03, -0.02, 0.01], 0.33),
            AnalyticShape::torus([0.0; 3], 0.25, 0.08),
            AnalyticShape::cuboid([0.0; 3], [0.2, 0.3, 0.1]),
        ];
        for s in &shapes {
            let lat = analytic_sdf_lattice(s, 33, 0.5).unwrap();
            let n = 33;
            let h = lat.spacing();
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n - 1 {
                        let a = lat.get(i, j, k) as f64;
                        let b = lat.get(i + 1, j, k) as f64;
                        assert!((a - b).abs() <= h + 1e-6, "{} {} at {i},{j},{k}", a, b);
                    }
                }
            }
            assert_eq!(node_coord(32, n), 0.5);
        }
    }

    #[test]
    fn serde_round_trip() {
        let u = AnalyticShape::union(
            AnalyticShape::capsule([0.0; 3], [0.1, 0.0, 0.0], 0.05),
            AnalyticShape::torus([0.0; 3], 0.2, 0.05),
        );
        let json = serde_json::to_string(&u).unwrap();
        assert!(json.contains("\"kind\":\"union\""));
        let back: AnalyticShape = serde_json::from_str(&json).unwrap();
        assert_eq!(back, u);
    }
}
