//! Local PCA shape bases over voxel-partitioned signed distance fields.
//!
//! A shape is normalized into `[-0.5, 0.5]³`, sampled as a clamped SDF
//! lattice, and cut into a `K³` grid of voxel blocks. Blocks near the surface
//! are projected onto an orthonormal basis fitted over a training corpus; the
//! projections are the shape's latent codes. Decoding multiplies the codes
//! back through the basis, stitches the blocks into a lattice and extracts a
//! surface with marching cubes.

pub mod blocks;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod geom;
pub mod mesh;
pub mod num;
pub mod pca;
pub mod recon;
pub mod sdf;

pub use blocks::{harvest, harvest_lattice, occupied_blocks, partition, Harvest, VoxelBlock, VoxelGridSpec, VoxelIndex, DEFAULT_TAU};
pub use error::{Error, Result};
pub use geom::Vec3;
pub use mesh::{RigidPerturbation, TriangleMesh};
pub use num::Real;
pub use pca::{LatentShape, PcaBasis};
pub use sdf::{AnalyticShape, SdfLattice};

pub type Mesh = TriangleMesh<f64>;
pub type Mesh32 = TriangleMesh<f32>;
pub type Basis = PcaBasis<f64>;
pub type Basis32 = PcaBasis<f32>;
pub type Latent = LatentShape<f64>;
pub type Latent32 = LatentShape<f32>;
pub type Block = VoxelBlock<f64>;
