use std::path::{Path, PathBuf};

use log::info;
use pcasdf::eval::{
    aggregate, bench_decode, explained_variance_sweep, fit_shapes, latent_size_sweep, perturbation_sweep,
    split_shapes, table5_rows, unseen_category_sweep, ChamferProtocol, DecodeTiming, EvalReport, EvalShape,
    FitSummary, PreparedShape, TimingReport, VarianceRow,
};
use pcasdf::mesh::{save_mesh, MeshFormat};
use pcasdf::pca::{encode_with_tau, load_latent, save_basis, save_latent};
use pcasdf::recon::reconstruct;
use pcasdf::sdf::compute_sdf_lattice;
use pcasdf::{Basis, Error, Latent, Result, RigidPerturbation, VoxelGridSpec};

use crate::config::RunConfig;
use crate::inputs::{corpus_shapes, load_checked_basis, load_input_mesh, procedural_corpus};

const SPECTRUM_HEAD: usize = 16;

pub struct Run {
    pub config: RunConfig,
    pub written: Vec<PathBuf>,
}

impl Run {
    pub fn new(config: RunConfig) -> Result<Self> {
        let dir = &config.output_dir;
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        Ok(Self {
            config,
            written: Vec::new(),
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn report(&self) -> EvalReport {
        EvalReport::new(
            self.config.to_json(),
            ChamferProtocol::new(self.config.eval.chamfer_points, self.config.eval.chamfer_seed),
        )
    }

    fn write_report(&mut self, report: &EvalReport, stem: &str) -> Result<()> {
        let json = self.out(&format!("{stem}.json"));
        report.write_json(&json)?;
        self.written.push(json);
        let csv = report.write_csv_tables(&self.config.output_dir, stem)?;
        self.written.extend(csv);
        Ok(())
    }

    fn write_timing(&mut self, timing: &TimingReport, stem: &str) -> Result<()> {
        let path = self.out(&format!("{stem}.json"));
        timing.write_json(&path)?;
        self.written.push(path);
        Ok(())
    }

    fn margin(&self, no_normalize: bool) -> Option<f64> {
        (!no_normalize).then_some(self.config.corpus.margin)
    }

    /// A basis from `path`, or one fitted on the training split (saved as `<stem>.pcab`).
    fn basis_or_fit(&mut self, path: Option<&Path>, train: &[EvalShape], stem: &str) -> Result<Basis> {
        if let Some(p) = path {
            return load_checked_basis(p);
        }
        let spec = self.config.spec()?;
        info!("fitting basis on {} training shapes", train.len());
        let basis = fit_shapes(train, &spec, self.config.clamp()?, self.config.rank()?, self.config.grid.tau)?;
        let out = self.out(&format!("{stem}.pcab"));
        save_basis(&basis, &out)?;
        self.written.push(out);
        Ok(basis)
    }

    fn split(&self) -> Result<(Vec<EvalShape>, Vec<EvalShape>)> {
        let shapes = corpus_shapes(&self.config)?;
        Ok(split_shapes(&shapes, self.config.corpus.test_per_category))
    }

    pub fn gen_corpus(&mut self) -> Result<()> {
        if self.config.corpus.mesh_dir.is_some() {
            return Err(Error::InvalidArgument("gen-corpus builds procedural corpora; drop --mesh-dir".into()));
        }
        let corpus = procedural_corpus(&self.config)?;
        let path = self.out("corpus.json");
        corpus.save_manifest(&path)?;
        println!("{} shapes in {} categories", corpus.shapes.len(), corpus.categories().len());
        self.written.push(path);
        Ok(())
    }

    pub fn fit(&mut self, train_only: bool, output: Option<PathBuf>) -> Result<()> {
        let shapes = if train_only { self.split()?.0 } else { corpus_shapes(&self.config)? };
        let spec = self.config.spec()?;
        let basis: Basis = fit_shapes(&shapes, &spec, self.config.clamp()?, self.config.rank()?, self.config.grid.tau)?;
        let path = output.unwrap_or_else(|| self.out("basis.pcab"));
        save_basis(&basis, &path)?;
        self.written.push(path);
        let mut report = self.report();
        report.fit = Some(FitSummary::from_basis(&basis, SPECTRUM_HEAD));
        for &l in &self.config.variance_latent_sizes {
            report.explained_variance.push(VarianceRow {
                voxels_per_axis: spec.voxels_per_axis(),
                samples_per_axis: spec.samples_per_axis(),
                voxel_size: spec.voxel_size(),
                l,
                fraction: basis.explained_variance(l.min(basis.rank()))?,
            });
        }
        println!(
            "fitted rank {} over {} blocks from {} shapes; max |BtB - I| = {:.2e}",
            basis.rank(),
            basis.sample_count(),
            shapes.len(),
            basis.orthonormality_error()
        );
        self.write_report(&report, "fit_report")
    }

    pub fn encode(&mut self, basis: &Path, input: &Path, lb: Option<usize>, output: Option<PathBuf>, no_normalize: bool) -> Result<()> {
        let basis = load_checked_basis(basis)?;
        let mesh = load_input_mesh(input, self.margin(no_normalize))?;
        let spec = *basis.spec();
        let lattice = compute_sdf_lattice(&mesh, spec.native_resolution(), basis.clamp() as f64)?;
        let l = lb.unwrap_or(self.config.latent_size);
        let latent: Latent = encode_with_tau(&lattice, &basis, l, self.config.grid.tau)?;
        let path = output.unwrap_or_else(|| self.out(&format!("{}.plat", stem(input))));
        save_latent(&latent, &path)?;
        println!("{} occupied voxels encoded with l_B = {l}", latent.occupied_count());
        self.written.push(path);
        Ok(())
    }

    pub fn decode(
        &mut self,
        basis: &Path,
        latent: &Path,
        output: Option<PathBuf>,
        lattice_out: Option<PathBuf>,
    ) -> Result<()> {
        let basis = load_checked_basis(basis)?;
        let latent: Latent = load_latent(latent)?;
        let settings = self.config.settings()?;
        let (lattice, mesh) = reconstruct(&latent, &basis, &settings.reconstruction)?;
        let path = output.unwrap_or_else(|| self.out("decoded.obj"));
        save_mesh(&mesh, &path, mesh_format(&path)?)?;
        self.written.push(path);
        if let Some(p) = lattice_out {
            lattice.save(&p)?;
            self.written.push(p);
        }
        println!("{} triangles at resolution {}", mesh.triangles().len(), lattice.resolution());
        Ok(())
    }

    pub fn reconstruct(&mut self, basis: &Path, input: &Path, lbs: &[usize], no_normalize: bool) -> Result<()> {
        let basis = load_checked_basis(basis)?;
        let settings = self.config.settings()?;
        let name = stem(input);
        let shape = EvalShape::from_mesh(name.clone(), load_input_mesh(input, self.margin(no_normalize))?);
        let prepared = PreparedShape::for_basis(&shape, &basis, &settings)?;
        let lbs = if lbs.is_empty() { vec![self.config.latent_size] } else { lbs.to_vec() };
        let mut report = self.report();
        for l in lbs {
            let (metrics, mesh) = prepared.evaluate_with_mesh(&basis, l, &settings)?;
            let path = self.out(&format!("{name}_l{l}.obj"));
            save_mesh(&mesh, &path, MeshFormat::Obj)?;
            self.written.push(path);
            println!("l_B = {l}: Chamfer x1e3 = {:.6}, IoU = {:.4}", metrics.chamfer_x1e3, metrics.iou);
            report.shapes.push(metrics);
        }
        report.aggregate = aggregate(&report.shapes);
        self.write_report(&report, "reconstruct_report")
    }

    fn busiest(&self, shapes: &[EvalShape], basis: &Basis) -> Result<PreparedShape> {
        let settings = self.config.settings()?;
        let mut best: Option<PreparedShape> = None;
        for s in shapes {
            let p = PreparedShape::for_basis(s, basis, &settings)?;
            if best.as_ref().is_none_or(|b| p.occupied_count() > b.occupied_count()) {
                best = Some(p);
            }
        }
        best.ok_or_else(|| Error::InvalidArgument("no shapes to benchmark".into()))
    }

    fn time_decodes(&self, prepared: &PreparedShape, basis: &Basis, lbs: &[usize]) -> Result<Vec<DecodeTiming>> {
        lbs.iter()
            .map(|&l| bench_decode(&prepared.encode(basis, l)?, basis, self.config.eval.bench_repeats))
            .collect()
    }

    pub fn eval_table5(&mut self, basis: Option<&Path>) -> Result<()> {
        let (train, test) = self.split()?;
        let basis = self.basis_or_fit(basis, &train, "table5_basis")?;
        let settings = self.config.settings()?;
        let lbs = self.config.latent_sizes.clone();
        let spec: VoxelGridSpec = *basis.spec();
        let mut report = self.report();
        report.fit = Some(FitSummary::from_basis(&basis, SPECTRUM_HEAD));
        report.shapes = latent_size_sweep(&test, &basis, &lbs, &settings)?;
        report.aggregate = aggregate(&report.shapes);
        report.table5 = table5_rows(&spec, &lbs, &report.aggregate);
        let timing = TimingReport {
            threads: rayon::current_num_threads(),
            decode: self.time_decodes(&self.busiest(&test, &basis)?, &basis, &lbs)?,
            stages: Vec::new(),
        };
        println!("{:>6} {:>14} {:>12} {:>14} {:>12}", "l_B", "Chamfer x1e3", "Decoder (M)", "Represent (K)", "Time (s)");
        for (row, t) in report.table5.iter().zip(&timing.decode) {
            println!(
                "{:>6} {:>14.6} {:>12.2} {:>14} {:>12.4}",
                row.l_b,
                row.mean_chamfer_x1e3.unwrap_or(f64::NAN),
                row.decoder_parameters_m,
                row.representation_parameters_k,
                t.median_seconds
            );
        }
        self.write_report(&report, "table5_report")?;
        self.write_timing(&timing, "table5_timing")
    }

    pub fn eval_variance(&mut self) -> Result<()> {
        let shapes = corpus_shapes(&self.config)?;
        let m = self.config.grid.samples_per_axis;
        let specs: Vec<VoxelGridSpec> = self
            .config
            .variance_voxels
            .iter()
            .map(|&k| VoxelGridSpec::new(k, m))
            .collect::<Result<_>>()?;
        let mut report = self.report();
        report.explained_variance = explained_variance_sweep(
            &shapes,
            &specs,
            &self.config.variance_latent_sizes,
            self.config.grid.clamp_voxels,
            self.config.grid.tau,
        )?;
        for row in &report.explained_variance {
            println!("K = {:>3}, l = {:>4}: {:.6}", row.voxels_per_axis, row.l, row.fraction);
        }
        self.write_report(&report, "variance_report")
    }

    pub fn eval_perturb(&mut self, basis: Option<&Path>, input: Option<&Path>, lb: Option<usize>, limit: Option<usize>, no_normalize: bool) -> Result<()> {
        let (train, test) = self.split()?;
        let basis = self.basis_or_fit(basis, &train, "perturb_basis")?;
        let shapes = match input {
            Some(p) => vec![EvalShape::from_mesh(stem(p), load_input_mesh(p, self.margin(no_normalize))?)],
            None => test.into_iter().take(limit.unwrap_or(usize::MAX)).collect(),
        };
        let l = lb.unwrap_or(self.config.latent_size);
        let settings = self.config.settings()?;
        let cases = RigidPerturbation::standard_set();
        let mut report = self.report();
        for s in &shapes {
            let rows = perturbation_sweep(s, &basis, l, &cases, &settings)?;
            for r in &rows {
                println!("{} {}: Chamfer x1e3 = {:.6}", r.shape, r.perturbation, r.chamfer_x1e3);
            }
            report.perturbation.extend(rows);
        }
        self.write_report(&report, "perturb_report")
    }

    pub fn eval_unseen(&mut self, lb: Option<usize>) -> Result<()> {
        let (train, test) = self.split()?;
        let spec = self.config.spec()?;
        let l = lb.unwrap_or(self.config.unseen_latent_size);
        let mut report = self.report();
        report.unseen = unseen_category_sweep(
            &train,
            &test,
            &spec,
            self.config.clamp()?,
            self.config.rank()?,
            l,
            &self.config.settings()?,
        )?;
        for r in &report.unseen {
            println!(
                "{}: seen {:.6}, unseen {:.6}, ratio {:.3}",
                r.held_out, r.seen_mean_x1e3, r.unseen_mean_x1e3, r.ratio
            );
        }
        self.write_report(&report, "unseen_report")
    }

    pub fn bench(&mut self, basis: Option<&Path>, input: Option<&Path>, lbs: &[usize], no_normalize: bool) -> Result<()> {
        let (train, test) = if basis.is_some() && input.is_some() {
            (Vec::new(), Vec::new())
        } else {
            self.split()?
        };
        let basis = self.basis_or_fit(basis, &train, "bench_basis")?;
        let settings = self.config.settings()?;
        let prepared = match input {
            Some(p) => PreparedShape::for_basis(
                &EvalShape::from_mesh(stem(p), load_input_mesh(p, self.margin(no_normalize))?),
                &basis,
                &settings,
            )?,
            None => self.busiest(&test, &basis)?,
        };
        let lbs = if lbs.is_empty() { self.config.latent_sizes.clone() } else { lbs.to_vec() };
        let timing = TimingReport {
            threads: rayon::current_num_threads(),
            decode: self.time_decodes(&prepared, &basis, &lbs)?,
            stages: Vec::new(),
        };
        for t in &timing.decode {
            println!(
                "l_B = {:>4}: median {:.4}s over {} repeats ({} occupied voxels, {} threads)",
                t.latent_dim, t.median_seconds, t.repeats, t.occupied_blocks, t.threads
            );
        }
        self.write_timing(&timing, "bench_timing")
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("shape").to_string()
}

fn mesh_format(path: &Path) -> Result<MeshFormat> {
    MeshFormat::from_path(path)
        .ok_or_else(|| Error::InvalidArgument(format!("{}: output must end in .obj or .ply", path.display())))
}
