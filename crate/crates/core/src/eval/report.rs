use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{CHAMFER_REPORT_SCALE, DEFAULT_CHAMFER_POINTS, DEFAULT_CHAMFER_SEED};
use super::pipeline::{AggregateRow, DecodeTiming, PerturbationRow, ShapeMetrics, UnseenRow, VarianceRow};
use crate::blocks::VoxelGridSpec;
use crate::error::{Error, Result};
use crate::pca::PcaBasis;
use crate::num::Real;

/// Latent values stored for a whole shape: `K³ · l_B`.
pub fn representation_parameters(spec: &VoxelGridSpec, l_b: usize) -> u64 {
    spec.voxel_count() as u64 * l_b as u64
}

/// Mean plus `l` basis columns: `d · (l + 1)`.
pub fn basis_parameters(spec: &VoxelGridSpec, l: usize) -> u64 {
    spec.block_dim() as u64 * (l as u64 + 1)
}

pub fn round_to(value: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (value * s).round() / s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table5Row {
    pub l_b: usize,
    pub mean_chamfer_x1e3: Option<f64>,
    pub decoder_parameters: u64,
    pub decoder_parameters_m: f64,
    pub representation_parameters: u64,
    pub representation_parameters_k: u64,
}

/// Parameter-accounting rows, joined with mean Chamfer where a matching
/// aggregate row exists.
pub fn table5_rows(spec: &VoxelGridSpec, l_values: &[usize], aggregates: &[AggregateRow]) -> Vec<Table5Row> {
    l_values
        .iter()
        .map(|&l| {
            let dec = basis_parameters(spec, l);
            let rep = representation_parameters(spec, l);
            Table5Row {
                l_b: l,
                mean_chamfer_x1e3: aggregates.iter().find(|a| a.l_b == l).map(|a| a.mean_chamfer_x1e3),
                decoder_parameters: dec,
                decoder_parameters_m: round_to(dec as f64 / 1e6, 2),
                representation_parameters: rep,
                representation_parameters_k: (rep as f64 / 1e3).round() as u64,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChamferProtocol {
    pub points: usize,
    pub seed: u64,
    pub scale: f64,
    pub definition: String,
}

impl ChamferProtocol {
    pub fn new(points: usize, seed: u64) -> Self {
        Self {
            points,
            seed,
            scale: CHAMFER_REPORT_SCALE,
            definition: "mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2 over area-uniform samples of both surfaces \
                         drawn with the same seed; reported values are multiplied by scale"
                .into(),
        }
    }
}

impl Default for ChamferProtocol {
    fn default() -> Self {
        Self::new(DEFAULT_CHAMFER_POINTS, DEFAULT_CHAMFER_SEED)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub voxels_per_axis: usize,
    pub samples_per_axis: usize,
    pub clamp: f32,
    pub dim: usize,
    pub rank: usize,
    pub sample_count: u64,
    pub total_variance: f64,
    pub orthonormality_error: f64,
    pub basis_parameters: u64,
    pub spectrum_head: Vec<f64>,
}

impl FitSummary {
    pub fn from_basis<T: Real>(basis: &PcaBasis<T>, head: usize) -> Self {
        Self {
            voxels_per_axis: basis.spec().voxels_per_axis(),
            samples_per_axis: basis.spec().samples_per_axis(),
            clamp: basis.clamp(),
            dim: basis.dim(),
            rank: basis.rank(),
            sample_count: basis.sample_count(),
            total_variance: basis.total_variance(),
            orthonormality_error: basis.orthonormality_error(),
            basis_parameters: basis.parameter_count(basis.rank()) as u64,
            spectrum_head: basis.eigenvalues().iter().take(head).map(|v| v.to_f64_lossless()).collect(),
        }
    }
}

/// Every deterministic output of an evaluation run. Timing lives in
/// [`TimingReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalReport {
    pub config: serde_json::Value,
    pub chamfer: ChamferProtocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shapes: Vec<ShapeMetrics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aggregate: Vec<AggregateRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table5: Vec<Table5Row>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explained_variance: Vec<VarianceRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub perturbation: Vec<PerturbationRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unseen: Vec<UnseenRow>,
}

fn to_sorted_json<S: Serialize>(value: &S) -> Result<String> {
    // `serde_json::Value` objects are ordered maps, so a round trip through
    // `Value` sorts every key.
    let v = serde_json::to_value(value).map_err(|e| Error::Format(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl EvalReport {
    pub fn new(config: serde_json::Value, chamfer: ChamferProtocol) -> Self {
        Self {
            config,
            chamfer,
            ..Default::default()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_sorted_json(self)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    /// Writes one `<stem>_<table>.csv` per non-empty table into `dir` and
    /// returns the paths written.
    pub fn write_csv_tables(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut table = |name: &str, f: &dyn Fn(&Path) -> Result<()>, empty: bool| -> Result<()> {
            if !empty {
                let p = dir.join(format!("{stem}_{name}.csv"));
                f(&p)?;
                written.push(p);
            }
            Ok(())
        };
        table("shapes", &|p| write_csv(p, &self.shapes), self.shapes.is_empty())?;
        table("aggregate", &|p| write_csv(p, &self.aggregate), self.aggregate.is_empty())?;
        table("table5", &|p| write_csv(p, &self.table5), self.table5.is_empty())?;
        table(
            "explained_variance",
            &|p| write_csv(p, &self.explained_variance),
            self.explained_variance.is_empty(),
        )?;
        table("perturbation", &|p| write_csv(p, &self.perturbation), self.perturbation.is_empty())?;
        table("unseen", &|p| write_csv(p, &self.unseen), self.unseen.is_empty())?;
        Ok(written)
    }
}

/// Wall-clock measurements, kept apart from the reproducible report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TimingReport {
    pub threads: usize,
    pub decode: Vec<DecodeTiming>,
    #[serde(default)]
    pub stages: Vec<(String, f64)>,
}

impl TimingReport {
    pub fn to_json(&self) -> Result<String> {
        to_sorted_json(self)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accounting_at_default_grid() {
        let spec = VoxelGridSpec::default();
        let rows = table5_rows(&spec, &[32, 64, 125], &[]);
        let rep: Vec<u64> = rows.iter().map(|r| r.representation_parameters).collect();
        assert_eq!(rep, vec![32 * 32 * 32 * 32, 32 * 32 * 32 * 64, 32 * 32 * 32 * 125]);
        let k: Vec<u64> = rows.iter().map(|r| r.representation_parameters_k).collect();
        assert_eq!(k, vec![1049, 2097, 4096]);
        let m: Vec<f64> = rows.iter().map(|r| r.decoder_parameters_m).collect();
        assert_eq!(m, vec![0.02, 0.05, 0.09]);
        assert_eq!(rows[2].decoder_parameters, 729 * 126);
        assert!(rows.iter().all(|r| r.mean_chamfer_x1e3.is_none()));
    }

    #[test]
    fn report_json_is_key_sorted_and_round_trips() {
        let mut report = EvalReport::new(serde_json::json!({"zeta": 1, "alpha": [2, 3]}), ChamferProtocol::default());
        report.aggregate.push(AggregateRow {
            l_b: 8,
            shapes: 2,
            mean_chamfer_x1e3: 0.125,
            mean_iou: 0.9,
        });
        let text = report.to_json().unwrap();
        assert!(text.find("\"aggregate\"").unwrap() < text.find("\"chamfer\"").unwrap());
        assert!(text.find("\"alpha\"").unwrap() < text.find("\"zeta\"").unwrap());
        assert!(!text.contains("\"shapes\": ["));
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.to_json().unwrap(), text);

        let dir = tempfile::tempdir().unwrap();
        let files = report.write_csv_tables(dir.path(), "run").unwrap();
        assert_eq!(files.len(), 1);
        let csv = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(csv, "l_b,shapes,mean_chamfer_x1e3,mean_iou\n8,2,0.125,0.9\n");
    }
}
