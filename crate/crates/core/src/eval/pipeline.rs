use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{
    chamfer_samples, voxel_iou_at, SurfaceSample, CHAMFER_REPORT_SCALE, DEFAULT_CHAMFER_POINTS, DEFAULT_CHAMFER_SEED,
    DEFAULT_IOU_RESOLUTION,
};
use crate::blocks::{harvest, harvest_lattice, Harvest, VoxelGridSpec, DEFAULT_TAU};
use crate::corpus::CorpusShape;
use crate::error::{Error, Result};
use crate::mesh::{RigidPerturbation, TriangleMesh, DOMAIN_HALF};
use crate::num::Real;
use crate::pca::{encode_blocks, BasisAccumulator, LatentShape, PcaBasis};
use crate::recon::{assemble_from_blocks, assemble_lattice, marching_cubes, reconstruct, ReconstructionConfig};
use crate::sdf::{compute_sdf_lattice, AnalyticShape, SdfLattice};

/// Where a shape's signed distance comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSource {
    Analytic(AnalyticShape),
    Mesh(TriangleMesh<f64>),
}

impl ShapeSource {
    pub fn perturbed(&self, p: &RigidPerturbation, voxel_size: f64) -> Result<Self> {
        if p.is_identity() {
            return Ok(self.clone());
        }
        match self {
            ShapeSource::Mesh(m) => Ok(ShapeSource::Mesh(m.apply_perturbation(p, voxel_size)?)),
            ShapeSource::Analytic(s) => {
                let moved = s.perturbed(p, voxel_size);
                if !moved.bounds().within_half_extent(DOMAIN_HALF) {
                    return Err(Error::OutOfDomain(format!("perturbation {} leaves the domain", p.label())));
                }
                Ok(ShapeSource::Analytic(moved))
            }
        }
    }

    /// Occupied blocks plus interior mask, and the lattice they were cut
    /// from when one had to be computed.
    fn harvest_with_lattice<T: Real>(
        &self,
        spec: &VoxelGridSpec,
        clamp: f64,
        tau: f64,
    ) -> Result<(Harvest<T>, Option<SdfLattice>)> {
        match self {
            ShapeSource::Analytic(s) => {
                s.validate()?;
                Ok((harvest(s, spec, clamp, tau), None))
            }
            ShapeSource::Mesh(m) => {
                let lattice = compute_sdf_lattice(m, spec.native_resolution(), clamp)?;
                Ok((harvest_lattice(&lattice, spec, tau)?, Some(lattice)))
            }
        }
    }

    pub fn harvest<T: Real>(&self, spec: &VoxelGridSpec, clamp: f64, tau: f64) -> Result<Harvest<T>> {
        Ok(self.harvest_with_lattice(spec, clamp, tau)?.0)
    }
}

/// A named shape under evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalShape {
    pub name: String,
    pub category: String,
    pub source: ShapeSource,
}

impl EvalShape {
    pub fn from_corpus(shape: &CorpusShape) -> Self {
        Self {
            name: format!("{}-{:04}", shape.category, shape.id),
            category: shape.category.clone(),
            source: ShapeSource::Analytic(shape.shape.clone()),
        }
    }

    pub fn from_mesh(name: impl Into<String>, mesh: TriangleMesh<f64>) -> Self {
        Self {
            name: name.into(),
            category: String::new(),
            source: ShapeSource::Mesh(mesh),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub tau: f64,
    pub chamfer_points: usize,
    pub chamfer_seed: u64,
    pub iou_resolution: usize,
    pub reconstruction: ReconstructionConfig,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            chamfer_points: DEFAULT_CHAMFER_POINTS,
            chamfer_seed: DEFAULT_CHAMFER_SEED,
            iou_resolution: DEFAULT_IOU_RESOLUTION,
            reconstruction: ReconstructionConfig::default(),
        }
    }
}

/// A shape harvested on a basis grid together with its reference surface.
///
/// The reference lattice is the exact SDF inside every occupied voxel and
/// `±δ` elsewhere, which is also the best any latent code can represent.
/// For analytic shapes the reference surface is its marching-cubes mesh; for
/// mesh inputs it is the input mesh itself.
pub struct PreparedShape {
    pub name: String,
    pub category: String,
    harvest: Harvest<f64>,
    truth: SdfLattice,
    reference: SurfaceSample,
}

impl PreparedShape {
    pub fn new(shape: &EvalShape, spec: &VoxelGridSpec, clamp: f32, settings: &EvalSettings) -> Result<Self> {
        let (harvest, lattice) = shape.source.harvest_with_lattice::<f64>(spec, clamp as f64, settings.tau)?;
        let truth = match lattice {
            Some(l) => l,
            None => assemble_from_blocks(&harvest.blocks, &harvest.interior, spec, clamp)?,
        };
        let reference = match &shape.source {
            ShapeSource::Mesh(m) => SurfaceSample::from_mesh(m, settings.chamfer_points, settings.chamfer_seed)?,
            ShapeSource::Analytic(_) => SurfaceSample::from_mesh(
                &marching_cubes(&truth, settings.reconstruction.iso_level)?,
                settings.chamfer_points,
                settings.chamfer_seed,
            )?,
        };
        Ok(Self {
            name: shape.name.clone(),
            category: shape.category.clone(),
            harvest,
            truth,
            reference,
        })
    }

    pub fn for_basis(shape: &EvalShape, basis: &PcaBasis<f64>, settings: &EvalSettings) -> Result<Self> {
        Self::new(shape, basis.spec(), basis.clamp(), settings)
    }

    pub fn occupied_count(&self) -> usize {
        self.harvest.blocks.len()
    }

    pub fn truth(&self) -> &SdfLattice {
        &self.truth
    }

    pub fn reference(&self) -> &SurfaceSample {
        &self.reference
    }

    pub fn encode(&self, basis: &PcaBasis<f64>, l_b: usize) -> Result<LatentShape<f64>> {
        encode_blocks(&self.harvest.blocks, &self.harvest.interior, basis, l_b)
    }

    /// Encode, reconstruct and compare against the reference.
    pub fn evaluate(&self, basis: &PcaBasis<f64>, l_b: usize, settings: &EvalSettings) -> Result<ShapeMetrics> {
        Ok(self.evaluate_with_mesh(basis, l_b, settings)?.0)
    }

    pub fn evaluate_with_mesh(
        &self,
        basis: &PcaBasis<f64>,
        l_b: usize,
        settings: &EvalSettings,
    ) -> Result<(ShapeMetrics, TriangleMesh<f64>)> {
        let latent = self.encode(basis, l_b)?;
        let (lattice, mesh) = reconstruct(&latent, basis, &settings.reconstruction)?;
        let sample = SurfaceSample::from_mesh(&mesh, settings.chamfer_points, settings.chamfer_seed)?;
        let chamfer = chamfer_samples(&sample, &self.reference);
        let iou = voxel_iou_at(&lattice, &self.truth, settings.iou_resolution)?;
        let metrics = ShapeMetrics {
            shape: self.name.clone(),
            category: self.category.clone(),
            l_b,
            chamfer,
            chamfer_x1e3: chamfer * CHAMFER_REPORT_SCALE,
            iou,
            occupied_blocks: self.occupied_count(),
        };
        Ok((metrics, mesh))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeMetrics {
    pub shape: String,
    pub category: String,
    pub l_b: usize,
    /// Unscaled Chamfer-L2.
    pub chamfer: f64,
    pub chamfer_x1e3: f64,
    pub iou: f64,
    pub occupied_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub l_b: usize,
    pub shapes: usize,
    pub mean_chamfer_x1e3: f64,
    pub mean_iou: f64,
}

/// Means per `l_b`, in ascending `l_b` order.
pub fn aggregate(rows: &[ShapeMetrics]) -> Vec<AggregateRow> {
    let mut ls: Vec<usize> = rows.iter().map(|r| r.l_b).collect();
    ls.sort_unstable();
    ls.dedup();
    ls.into_iter()
        .map(|l| {
            let sel: Vec<&ShapeMetrics> = rows.iter().filter(|r| r.l_b == l).collect();
            let n = sel.len() as f64;
            AggregateRow {
                l_b: l,
                shapes: sel.len(),
                mean_chamfer_x1e3: sel.iter().map(|r| r.chamfer_x1e3).sum::<f64>() / n,
                mean_iou: sel.iter().map(|r| r.iou).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Evaluates every shape at every `l_b`. Shapes are prepared one at a time so
/// only a single reference lattice is alive.
pub fn latent_size_sweep(
    shapes: &[EvalShape],
    basis: &PcaBasis<f64>,
    l_values: &[usize],
    settings: &EvalSettings,
) -> Result<Vec<ShapeMetrics>> {
    let mut out = Vec::with_capacity(shapes.len() * l_values.len());
    for shape in shapes {
        let prepared = PreparedShape::for_basis(shape, basis, settings)?;
        for &l in l_values {
            out.push(prepared.evaluate(basis, l, settings)?);
        }
    }
    Ok(out)
}

/// One accumulator over the occupied blocks of `shapes`.
pub fn accumulate_shapes(
    shapes: &[EvalShape],
    spec: &VoxelGridSpec,
    clamp: f32,
    tau: f64,
) -> Result<BasisAccumulator> {
    crate::pca::accumulate_streaming(shapes.len(), spec, clamp, |i| {
        shapes[i].source.harvest::<f32>(spec, clamp as f64, tau).map(|h| h.blocks)
    })
}

/// Fits a basis of at most `rank` columns over the occupied blocks of `shapes`.
pub fn fit_shapes<T: Real>(
    shapes: &[EvalShape],
    spec: &VoxelGridSpec,
    clamp: f32,
    rank: usize,
    tau: f64,
) -> Result<PcaBasis<T>> {
    accumulate_shapes(shapes, spec, clamp, tau)?.finish(rank)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub voxels_per_axis: usize,
    pub samples_per_axis: usize,
    pub voxel_size: f64,
    pub l: usize,
    pub fraction: f64,
}

/// Fits one full-rank basis per grid, each clamped at `clamp_voxels · r`, and
/// reports the explained variance fraction at each `l` (values above the
/// fitted rank read the full rank).
pub fn explained_variance_sweep(
    shapes: &[EvalShape],
    specs: &[VoxelGridSpec],
    l_values: &[usize],
    clamp_voxels: f64,
    tau: f64,
) -> Result<Vec<VarianceRow>> {
    let mut rows = Vec::new();
    for spec in specs {
        let clamp = (clamp_voxels * spec.voxel_size()) as f32;
        let basis: PcaBasis<f64> = fit_shapes(shapes, spec, clamp, spec.block_dim(), tau)?;
        for &l in l_values {
            if l == 0 {
                return Err(Error::InvalidArgument("explained variance needs l >= 1".into()));
            }
            rows.push(VarianceRow {
                voxels_per_axis: spec.voxels_per_axis(),
                samples_per_axis: spec.samples_per_axis(),
                voxel_size: spec.voxel_size(),
                l,
                fraction: basis.explained_variance(l.min(basis.rank()))?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    pub shape: String,
    pub perturbation: String,
    pub l_b: usize,
    pub chamfer: f64,
    pub chamfer_x1e3: f64,
}

/// Runs the full pipeline on each perturbed copy of `shape` and compares it
/// against the perturbed reference. The first row is always the identity.
pub fn perturbation_sweep(
    shape: &EvalShape,
    basis: &PcaBasis<f64>,
    l_b: usize,
    perturbations: &[RigidPerturbation],
    settings: &EvalSettings,
) -> Result<Vec<PerturbationRow>> {
    let r = basis.spec().voxel_size();
    let mut cases = vec![RigidPerturbation::identity()];
    cases.extend(perturbations.iter().filter(|p| !p.is_identity()).copied());
    let mut rows = Vec::with_capacity(cases.len());
    for p in cases {
        let moved = EvalShape {
            source: shape.source.perturbed(&p, r)?,
            ..shape.clone()
        };
        let m = PreparedShape::for_basis(&moved, basis, settings)?.evaluate(basis, l_b, settings)?;
        rows.push(PerturbationRow {
            shape: shape.name.clone(),
            perturbation: p.label(),
            l_b,
            chamfer: m.chamfer,
            chamfer_x1e3: m.chamfer_x1e3,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnseenRow {
    pub held_out: String,
    pub l_b: usize,
    pub shapes: usize,
    /// Mean Chamfer on the held-out test shapes with a basis that saw every category.
    pub seen_mean_x1e3: f64,
    /// Same shapes, basis fitted without the held-out category.
    pub unseen_mean_x1e3: f64,
    pub ratio: f64,
}

/// Category names in order of first appearance.
pub fn categories_of(shapes: &[EvalShape]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in shapes {
        if !out.contains(&s.category) {
            out.push(s.category.clone());
        }
    }
    out
}

/// Per category, the last `test_per_category` shapes go to the test side.
pub fn split_shapes(shapes: &[EvalShape], test_per_category: usize) -> (Vec<EvalShape>, Vec<EvalShape>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in categories_of(shapes) {
        let members: Vec<&EvalShape> = shapes.iter().filter(|s| s.category == c).collect();
        let cut = members.len().saturating_sub(test_per_category);
        train.extend(members[..cut].iter().map(|s| (*s).clone()));
        test.extend(members[cut..].iter().map(|s| (*s).clone()));
    }
    (train, test)
}

/// Leave-one-category-out evaluation. Training shapes of each category are
/// accumulated once; the all-category basis and each held-out basis are
/// merged from those accumulators in category order. Every category of
/// `train` is held out in turn and scored on its `test` shapes.
pub fn unseen_category_sweep(
    train: &[EvalShape],
    test: &[EvalShape],
    spec: &VoxelGridSpec,
    clamp: f32,
    rank: usize,
    l_b: usize,
    settings: &EvalSettings,
) -> Result<Vec<UnseenRow>> {
    let categories = categories_of(train);
    if categories.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "holding out a category needs at least two training categories, found {}",
            categories.len()
        )));
    }
    let mut accumulators = Vec::with_capacity(categories.len());
    for c in &categories {
        let shapes: Vec<EvalShape> = train.iter().filter(|s| &s.category == c).cloned().collect();
        accumulators.push(accumulate_shapes(&shapes, spec, clamp, settings.tau)?);
    }
    let merged = |skip: Option<usize>| -> Result<PcaBasis<f64>> {
        let mut total = BasisAccumulator::new(*spec, clamp);
        for (i, acc) in accumulators.iter().enumerate() {
            if Some(i) != skip {
                total.merge(acc.clone())?;
            }
        }
        total.finish(rank)
    };
    let seen = merged(None)?;
    let mut rows = Vec::with_capacity(categories.len());
    for (i, c) in categories.iter().enumerate() {
        let shapes: Vec<&EvalShape> = test.iter().filter(|s| &s.category == c).collect();
        if shapes.is_empty() {
            return Err(Error::UnknownCategory(format!("{c} has no test shapes")));
        }
        let unseen = merged(Some(i))?;
        let (mut seen_sum, mut unseen_sum) = (0.0, 0.0);
        for shape in &shapes {
            let prepared = PreparedShape::new(shape, spec, clamp, settings)?;
            seen_sum += prepared.evaluate(&seen, l_b, settings)?.chamfer_x1e3;
            unseen_sum += prepared.evaluate(&unseen, l_b, settings)?.chamfer_x1e3;
        }
        let n = shapes.len() as f64;
        let (s, u) = (seen_sum / n, unseen_sum / n);
        rows.push(UnseenRow {
            held_out: c.clone(),
            l_b,
            shapes: shapes.len(),
            seen_mean_x1e3: s,
            unseen_mean_x1e3: u,
            ratio: if s > 0.0 { u / s } else { f64::INFINITY },
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeTiming {
    pub latent_dim: usize,
    pub occupied_blocks: usize,
    pub occupancy_fraction: f64,
    pub resolution: usize,
    pub repeats: usize,
    pub threads: usize,
    pub median_seconds: f64,
    pub mean_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
}

/// Times `assemble_lattice` (decode plus stitch at native resolution).
pub fn bench_decode<T: Real>(latent: &LatentShape<T>, basis: &PcaBasis<T>, repeats: usize) -> Result<DecodeTiming> {
    if repeats < 3 {
        return Err(Error::InvalidArgument(format!("bench needs at least 3 repeats, got {repeats}")));
    }
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let lattice = assemble_lattice(latent, basis)?;
        let elapsed = start.elapsed().as_secs_f64();
        drop(lattice);
        times.push(elapsed.max(f64::MIN_POSITIVE));
    }
    let mean = times.iter().sum::<f64>() / repeats as f64;
    times.sort_by(f64::total_cmp);
    let median = if repeats % 2 == 1 {
        times[repeats / 2]
    } else {
        0.5 * (times[repeats / 2 - 1] + times[repeats / 2])
    };
    let spec = latent.spec();
    Ok(DecodeTiming {
        latent_dim: latent.latent_dim(),
        occupied_blocks: latent.occupied_count(),
        occupancy_fraction: latent.occupied_count() as f64 / spec.voxel_count() as f64,
        resolution: spec.native_resolution(),
        repeats,
        threads: rayon::current_num_threads(),
        median_seconds: median,
        mean_seconds: mean,
        min_seconds: times[0],
        max_seconds: times[repeats - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, CorpusSpec};
    use crate::geom::Vec3;

    fn small_settings() -> EvalSettings {
        EvalSettings {
            chamfer_points: 4000,
            iou_resolution: 32,
            reconstruction: ReconstructionConfig {
                target_resolution: 65,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn small_corpus() -> (Vec<EvalShape>, VoxelGridSpec) {
        let corpus = generate_corpus(&CorpusSpec::standard(3, 4)).unwrap();
        let shapes = corpus.shapes.iter().map(EvalShape::from_corpus).collect();
        (shapes, VoxelGridSpec::new(16, 5).unwrap())
    }

    #[test]
    fn sweep_is_monotone_and_full_rank_matches_reference() {
        let (shapes, spec) = small_corpus();
        let clamp = spec.default_clamp() as f32;
        let basis: PcaBasis<f64> = fit_shapes(&shapes, &spec, clamp, spec.block_dim(), DEFAULT_TAU).unwrap();
        assert_eq!(basis.rank(), spec.block_dim());
        let settings = small_settings();
        let rows = latent_size_sweep(&shapes[..4], &basis, &[2, 8, 125], &settings).unwrap();
        let agg = aggregate(&rows);
        assert_eq!(agg.iter().map(|a| a.l_b).collect::<Vec<_>>(), vec![2, 8, 125]);
        assert!(agg[0].mean_chamfer_x1e3 >= agg[2].mean_chamfer_x1e3);
        for r in &rows {
            assert!(r.chamfer >= 0.0 && (0.0..=1.0).contains(&r.iou));
            assert_eq!(r.chamfer_x1e3, r.chamfer * 1e3);
        }
        let full = rows.iter().filter(|r| r.l_b == 125);
        for r in full {
            assert!(r.iou > 0.99, "{r:?}");
        }
    }

    #[test]
    fn identity_perturbation_matches_plain_evaluation() {
        let (shapes, spec) = small_corpus();
        let clamp = spec.default_clamp() as f32;
        let basis: PcaBasis<f64> = fit_shapes(&shapes, &spec, clamp, 24, DEFAULT_TAU).unwrap();
        let settings = small_settings();
        let sphere = &shapes[0];
        let rows = perturbation_sweep(sphere, &basis, 16, &RigidPerturbation::standard_set(), &settings).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0].perturbation, "identity");
        let plain = PreparedShape::for_basis(sphere, &basis, &settings).unwrap().evaluate(&basis, 16, &settings).unwrap();
        assert_eq!(rows[0].chamfer, plain.chamfer);

        let edge = EvalShape {
            source: ShapeSource::Analytic(AnalyticShape::sphere([0.4, 0.0, 0.0], 0.0999)),
            ..sphere.clone()
        };
        let far = RigidPerturbation::translation([1.0, 0.0, 0.0]);
        assert!(matches!(
            perturbation_sweep(&edge, &basis, 4, &[far], &settings),
            Err(Error::OutOfDomain(_))
        ));
    }

    #[test]
    fn variance_sweep_rows() {
        let (shapes, _) = small_corpus();
        let specs = [VoxelGridSpec::new(8, 4).unwrap(), VoxelGridSpec::new(16, 4).unwrap()];
        let rows = explained_variance_sweep(&shapes[..6], &specs, &[1, 4, 16, 64, 100], 2.0, DEFAULT_TAU).unwrap();
        assert_eq!(rows.len(), 10);
        for pair in rows.chunks(5) {
            for w in pair.windows(2) {
                assert!(w[1].fraction >= w[0].fraction);
            }
            assert!(pair[4].fraction >= 0.999999);
        }
    }

    #[test]
    fn mesh_source_uses_input_as_reference() {
        let spec = VoxelGridSpec::new(8, 5).unwrap();
        let clamp = spec.default_clamp() as f32;
        let mesh = TriangleMesh::<f64>::icosphere(Vec3::zero(), 0.3, 4);
        let shape = EvalShape::from_mesh("ball", mesh);
        let basis: PcaBasis<f64> = fit_shapes(std::slice::from_ref(&shape), &spec, clamp, spec.block_dim(), DEFAULT_TAU).unwrap();
        let settings = small_settings();
        let m = PreparedShape::for_basis(&shape, &basis, &settings).unwrap().evaluate(&basis, basis.rank(), &settings).unwrap();
        assert!(m.chamfer < 5e-4, "{m:?}");
    }

    #[test]
    fn split_and_unseen_rows() {
        let corpus = generate_corpus(&CorpusSpec::standard(3, 4)).unwrap();
        let shapes: Vec<EvalShape> = corpus.shapes.iter().map(EvalShape::from_corpus).collect();
        let (train, test) = split_shapes(&shapes, 1);
        assert_eq!((train.len(), test.len()), (10, 5));
        assert_eq!(categories_of(&test), categories_of(&shapes));
        let spec = VoxelGridSpec::new(8, 5).unwrap();
        let rows = unseen_category_sweep(&train, &test, &spec, spec.default_clamp() as f32, 16, 8, &small_settings()).unwrap();
        assert_eq!(rows.len(), 5);
        for r in &rows {
            assert_eq!(r.shapes, 1);
            assert!(r.seen_mean_x1e3 > 0.0 && r.unseen_mean_x1e3 > 0.0);
        }
        let one: Vec<EvalShape> = train.iter().filter(|s| s.category == "torus").cloned().collect();
        assert!(matches!(
            unseen_category_sweep(&one, &test, &spec, 0.25, 4, 4, &small_settings()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn bench_reports_ordered_statistics() {
        let (shapes, spec) = small_corpus();
        let clamp = spec.default_clamp() as f32;
        let basis: PcaBasis<f64> = fit_shapes(&shapes[..3], &spec, clamp, 8, DEFAULT_TAU).unwrap();
        let latent = PreparedShape::for_basis(&shapes[0], &basis, &small_settings()).unwrap().encode(&basis, 8).unwrap();
        let t = bench_decode(&latent, &basis, 5).unwrap();
        assert!(t.min_seconds > 0.0 && t.min_seconds <= t.median_seconds && t.median_seconds <= t.max_seconds);
        assert!(t.min_seconds <= t.mean_seconds && t.mean_seconds <= t.max_seconds);
        assert!(t.occupancy_fraction > 0.0 && t.occupancy_fraction < 1.0);
        assert!(bench_decode(&latent, &basis, 2).is_err());
    }
}
