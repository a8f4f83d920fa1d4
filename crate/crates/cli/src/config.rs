use std::path::{Path, PathBuf};

use pcasdf::eval::{EvalSettings, DEFAULT_CHAMFER_POINTS, DEFAULT_CHAMFER_SEED, DEFAULT_IOU_RESOLUTION};
use pcasdf::recon::{BoundaryPolicy, ReconstructionConfig};
use pcasdf::{Error, Result, VoxelGridSpec, DEFAULT_TAU};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub voxels_per_axis: usize,
    pub samples_per_axis: usize,
    /// Optional consistency check; must equal `1 / voxels_per_axis`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub voxel_size: Option<f64>,
    /// Clamp distance in units of the voxel size.
    pub clamp_voxels: f64,
    pub tau: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            voxels_per_axis: 32,
            samples_per_axis: 9,
            voxel_size: None,
            clamp_voxels: 2.0,
            tau: DEFAULT_TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Corpus spec or manifest JSON; the built-in procedural corpus when absent.
    pub spec: Option<PathBuf>,
    /// Directory of OBJ/PLY meshes, one subdirectory per category.
    pub mesh_dir: Option<PathBuf>,
    pub count_per_category: usize,
    pub seed: u64,
    pub test_per_category: usize,
    pub margin: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            spec: None,
            mesh_dir: None,
            count_per_category: 30,
            seed: 2024,
            test_per_category: 6,
            margin: pcasdf::mesh::DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub chamfer_points: usize,
    pub chamfer_seed: u64,
    pub iou_resolution: usize,
    pub target_resolution: Option<usize>,
    pub boundary_policy: BoundaryPolicy,
    pub iso_level: f64,
    pub bench_repeats: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            chamfer_points: DEFAULT_CHAMFER_POINTS,
            chamfer_seed: DEFAULT_CHAMFER_SEED,
            iou_resolution: DEFAULT_IOU_RESOLUTION,
            target_resolution: None,
            boundary_policy: BoundaryPolicy::Average,
            iso_level: 0.0,
            bench_repeats: 7,
        }
    }
}

/// Every knob of a run. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    /// Stored basis rank; the block dimension when absent.
    pub rank: Option<usize>,
    pub latent_size: usize,
    pub latent_sizes: Vec<usize>,
    pub unseen_latent_size: usize,
    pub variance_voxels: Vec<usize>,
    pub variance_latent_sizes: Vec<usize>,
    pub corpus: CorpusConfig,
    pub eval: EvalConfig,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            rank: None,
            latent_size: 64,
            latent_sizes: vec![8, 16, 32, 64, 125],
            unseen_latent_size: 125,
            variance_voxels: vec![16, 32, 64],
            variance_latent_sizes: vec![1, 2, 4, 8, 16, 32, 64, 125, 256, 512, 729],
            corpus: CorpusConfig::default(),
            eval: EvalConfig::default(),
            output_dir: PathBuf::from("out"),
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })
    }

    pub fn spec(&self) -> Result<VoxelGridSpec> {
        VoxelGridSpec::new(self.grid.voxels_per_axis, self.grid.samples_per_axis)
    }

    pub fn clamp_for(&self, spec: &VoxelGridSpec) -> f32 {
        (self.grid.clamp_voxels * spec.voxel_size()) as f32
    }

    pub fn clamp(&self) -> Result<f32> {
        Ok(self.clamp_for(&self.spec()?))
    }

    pub fn rank(&self) -> Result<usize> {
        Ok(self.rank.unwrap_or(self.spec()?.block_dim()))
    }

    pub fn settings(&self) -> Result<EvalSettings> {
        let spec = self.spec()?;
        Ok(EvalSettings {
            tau: self.grid.tau,
            chamfer_points: self.eval.chamfer_points,
            chamfer_seed: self.eval.chamfer_seed,
            iou_resolution: self.eval.iou_resolution,
            reconstruction: ReconstructionConfig {
                target_resolution: self.eval.target_resolution.unwrap_or(spec.native_resolution()),
                boundary_policy: self.eval.boundary_policy,
                iso_level: self.eval.iso_level,
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if let Some(r) = self.grid.voxel_size {
            if (r - spec.voxel_size()).abs() > 1e-12 {
                return bad(format!(
                    "voxel_size {r} is inconsistent with {} voxels per axis (expected {})",
                    spec.voxels_per_axis(),
                    spec.voxel_size()
                ));
            }
        }
        if !(self.grid.tau >= 0.0) {
            return bad(format!("tau {} must be >= 0", self.grid.tau));
        }
        if !(self.grid.clamp_voxels > 0.0) {
            return bad(format!("clamp_voxels {} must be > 0", self.grid.clamp_voxels));
        }
        if self.rank == Some(0) {
            return bad("rank must be >= 1".into());
        }
        let lists = [&self.latent_sizes, &self.variance_latent_sizes];
        if self.latent_size == 0 || self.unseen_latent_size == 0 || lists.iter().any(|l| l.contains(&0)) {
            return bad("latent sizes must be >= 1".into());
        }
        if self.variance_voxels.contains(&0) {
            return bad("variance_voxels entries must be >= 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        if self.eval.chamfer_points == 0 || self.eval.iou_resolution < 2 || self.eval.bench_repeats < 3 {
            return bad("chamfer_points >= 1, iou_resolution >= 2 and bench_repeats >= 3 are required".into());
        }
        self.settings()?.reconstruction.validate()?;
        for p in [&self.corpus.spec, &self.corpus.mesh_dir].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Io {
                    path: p.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "configured path does not exist"),
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
        assert_eq!(c.clamp().unwrap(), 0.0625);
        assert_eq!(c.rank().unwrap(), 729);
        assert_eq!(c.settings().unwrap().reconstruction.target_resolution, 257);
    }

    #[test]
    fn partial_json_and_inconsistent_voxel_size() {
        let c: RunConfig = serde_json::from_str(r#"{"grid": {"voxels_per_axis": 16, "voxel_size": 0.0625}}"#).unwrap();
        c.validate().unwrap();
        assert_eq!(c.grid.samples_per_axis, 9);
        let c: RunConfig = serde_json::from_str(r#"{"grid": {"voxel_size": 0.1}}"#).unwrap();
        assert!(matches!(c.validate(), Err(Error::InvalidArgument(_))));
        assert!(serde_json::from_str::<RunConfig>(r#"{"gird": {}}"#).is_err());
    }
}
