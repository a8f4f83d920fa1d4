//! Clamped signed-distance lattices over the canonical domain.

mod analytic;
mod bvh;
mod mesh_sdf;

pub use analytic::{analytic_sdf_lattice, AnalyticShape};
pub use bvh::{point_triangle_distance_squared, triangle_solid_angle, Bvh};
pub use mesh_sdf::{compute_sdf_lattice, compute_sdf_lattice_with, SignMode};

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Vec3;

const PSDF_MAGIC: &[u8; 4] = b"PSDF";
const PSDF_VERSION: u32 = 1;

/// Coordinate of lattice node `i` along one axis for an `n`-node lattice
/// spanning `[-0.5, 0.5]` inclusive.
#[inline]
pub fn node_coord(i: usize, n: usize) -> f64 {
    -0.5 + i as f64 / (n - 1) as f64
}

/// Anything that can report a signed distance at a point.
pub trait SdfField: Sync {
    fn signed_distance(&self, p: Vec3<f64>) -> f64;

    /// False for fields that only bound the true distance (CSG composites).
    fn is_exact(&self) -> bool {
        true
    }
}

/// Dense `n³` lattice of clamped signed distances, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfLattice {
    resolution: usize,
    clamp: f32,
    values: Vec<f32>,
    /// Set when values come from a distance bound rather than an exact SDF.
    bound_only: bool,
}

impl SdfLattice {
    pub fn from_values(resolution: usize, clamp: f32, values: Vec<f32>) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "lattice resolution {resolution} < 2"
            )));
        }
        if !(clamp > 0.0) || !clamp.is_finite() {
            return Err(Error::InvalidArgument(format!("clamp {clamp} must be > 0")));
        }
        if values.len() != resolution.pow(3) {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                resolution.pow(3),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= clamp)) {
            return Err(Error::InvalidArgument(format!(
                "value {v} outside [-{clamp}, {clamp}]"
            )));
        }
        Ok(Self {
            resolution,
            clamp,
            values,
            bound_only: false,
        })
    }

    pub fn uniform(resolution: usize, clamp: f32, value: f32) -> Result<Self> {
        Self::from_values(resolution, clamp, vec![value; resolution.pow(3)])
    }

    /// Samples `field` at every node and clamps to `[-clamp, clamp]`.
    pub fn from_field<F: SdfField + ?Sized>(field: &F, resolution: usize, clamp: f64) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "lattice resolution {resolution} < 2"
            )));
        }
        if !(clamp > 0.0) {
            return Err(Error::InvalidArgument(format!("clamp {clamp} must be > 0")));
        }
        let n = resolution;
        let mut values = vec![0f32; n * n * n];
        values.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
            let z = node_coord(k, n);
            for j in 0..n {
                let y = node_coord(j, n);
                for i in 0..n {
                    let d = field.signed_distance(Vec3::new(node_coord(i, n), y, z));
                    slab[j * n + i] = clamp_value(d, clamp);
                }
            }
        });
        Ok(Self {
            resolution: n,
            clamp: clamp as f32,
            values,
            bound_only: !field.is_exact(),
        })
    }

    pub(crate) fn from_parts_unchecked(resolution: usize, clamp: f32, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), resolution.pow(3));
        Self {
            resolution,
            clamp,
            values,
            bound_only: false,
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn clamp(&self) -> f32 {
        self.clamp
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn is_bound_only(&self) -> bool {
        self.bound_only
    }

    /// Node spacing `1 / (n - 1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.resolution - 1) as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution * (j + self.resolution * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize, k: usize) -> Vec3<f64> {
        let n = self.resolution;
        Vec3::new(node_coord(i, n), node_coord(j, n), node_coord(k, n))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(PSDF_MAGIC)?;
        w.write_all(&PSDF_VERSION.to_le_bytes())?;
        w.write_all(&(self.resolution as u32).to_le_bytes())?;
        w.write_all(&self.clamp.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut head = [0u8; 16];
        read_exact(r, &mut head, "PSDF header")?;
        if &head[0..4] != PSDF_MAGIC {
            return Err(Error::Format("bad PSDF magic".into()));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != PSDF_VERSION {
            return Err(Error::Format(format!("unsupported PSDF version {version}")));
        }
        let n = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let clamp = f32::from_le_bytes(head[12..16].try_into().unwrap());
        if !(2..=4096).contains(&n) {
            return Err(Error::Format(format!("implausible PSDF resolution {n}")));
        }
        let mut raw = vec![0u8; n * n * n * 4];
        read_exact(r, &mut raw, "PSDF values")?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_values(n, clamp, values).map_err(|e| Error::Format(e.to_string()))
    }
}

#[inline]
pub(crate) fn clamp_value(d: f64, clamp: f64) -> f32 {
    d.clamp(-clamp, clamp) as f32
}

pub(crate) fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated file while reading {what}"))
        } else {
            Error::io("<stream>", e)
        }
    })
}
