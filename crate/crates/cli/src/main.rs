mod commands;
mod config;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcasdf::{Error, Result};

use crate::commands::Run;
use crate::config::RunConfig;

const FORMATS: &str = r#"File formats (all binary formats are little-endian):
  PCAB  basis: magic "PCAB", version (1 = f32, 2 = f64 arrays), grid header
        (K u32, m u32, r f32, clamp f32), sample count u64, rank L u32, mean,
        eigenvalues, total variance f64, column-major d x L basis, CRC-32
  PLAT  latent shape: magic "PLAT", version, grid header, l_B u32, entry count
        u64, per entry (i, j, k u16 and the code), interior fill bitmap, CRC-32
  PSDF  SDF lattice: magic "PSDF", version u32, resolution n u32, clamp f32,
        n^3 f32 values with x fastest
  OBJ / PLY  triangle meshes (OBJ text, ASCII PLY)

Inputs are normalized into the unit cube with the configured margin unless
--no-normalize is given. Errors are printed on stderr as
{"error": {"kind": ..., "message": ...}} with exit status 1."#;

#[derive(Parser)]
#[command(name = "pcasdf", version, about = "Block-wise PCA compression of signed distance fields", after_long_help = FORMATS)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Voxels per axis K.
    #[arg(long, global = true)]
    voxels: Option<usize>,
    /// Samples per block axis m.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Clamp distance in voxel sizes.
    #[arg(long, global = true)]
    clamp_voxels: Option<f64>,
    /// Occupancy threshold in voxel sizes.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Stored basis rank.
    #[arg(long, global = true)]
    rank: Option<usize>,
    /// Corpus spec or manifest JSON.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Directory of meshes, one subdirectory per category.
    #[arg(long, global = true)]
    mesh_dir: Option<PathBuf>,
    /// Shapes per procedural category.
    #[arg(long, global = true)]
    count: Option<usize>,
    /// Corpus seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Held-out shapes per category.
    #[arg(long, global = true)]
    test_per_category: Option<usize>,
    /// Surface points per mesh for Chamfer distance.
    #[arg(long, global = true)]
    chamfer_points: Option<usize>,
    #[arg(long, global = true)]
    chamfer_seed: Option<u64>,
    /// Reconstruction lattice resolution (defaults to the native one).
    #[arg(long, global = true)]
    resolution: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the procedural corpus manifest.
    GenCorpus,
    /// Fit a PCA basis on the corpus.
    Fit {
        /// Fit on the training split only.
        #[arg(long)]
        train_only: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Encode a mesh into a latent shape.
    Encode {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lb: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        no_normalize: bool,
    },
    /// Decode a latent shape into a mesh.
    Decode {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        latent: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the decoded SDF lattice.
        #[arg(long)]
        lattice: Option<PathBuf>,
    },
    /// Encode and decode a mesh at several latent sizes and score each result.
    Reconstruct {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        lb: Vec<usize>,
        #[arg(long)]
        no_normalize: bool,
    },
    /// Reconstruction error and parameter counts across latent sizes.
    EvalTable5 {
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Explained variance across grid resolutions.
    EvalVariance,
    /// Reconstruction error under small rigid perturbations.
    EvalPerturb {
        #[arg(long)]
        basis: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        lb: Option<usize>,
        /// Evaluate at most this many test shapes.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        no_normalize: bool,
    },
    /// Leave-one-category-out generalization.
    EvalUnseen {
        #[arg(long)]
        lb: Option<usize>,
    },
    /// Time decoding across latent sizes.
    Bench {
        #[arg(long)]
        basis: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        lb: Vec<usize>,
        #[arg(long)]
        no_normalize: bool,
    },
}

fn resolve(g: &GlobalArgs) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($src:expr => $dst:expr) => {
            if let Some(v) = $src.clone() {
                $dst = v;
            }
        };
    }
    set!(g.out => c.output_dir);
    set!(g.voxels => c.grid.voxels_per_axis);
    set!(g.samples => c.grid.samples_per_axis);
    set!(g.clamp_voxels => c.grid.clamp_voxels);
    set!(g.tau => c.grid.tau);
    set!(g.count => c.corpus.count_per_category);
    set!(g.seed => c.corpus.seed);
    set!(g.test_per_category => c.corpus.test_per_category);
    set!(g.chamfer_points => c.eval.chamfer_points);
    set!(g.chamfer_seed => c.eval.chamfer_seed);
    c.rank = g.rank.or(c.rank);
    c.threads = g.threads.or(c.threads);
    c.corpus.spec = g.corpus.clone().or(c.corpus.spec);
    c.corpus.mesh_dir = g.mesh_dir.clone().or(c.corpus.mesh_dir);
    c.eval.target_resolution = g.resolution.or(c.eval.target_resolution);
    if g.voxels.is_some() {
        c.grid.voxel_size = None;
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let config = resolve(&cli.global)?;
    if let Some(n) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let mut run = Run::new(config)?;
    match cli.command {
        Command::GenCorpus => run.gen_corpus()?,
        Command::Fit { train_only, output } => run.fit(train_only, output)?,
        Command::Encode { basis, input, lb, output, no_normalize } => {
            run.encode(&basis, &input, lb, output, no_normalize)?
        }
        Command::Decode { basis, latent, output, lattice } => run.decode(&basis, &latent, output, lattice)?,
        Command::Reconstruct { basis, input, lb, no_normalize } => run.reconstruct(&basis, &input, &lb, no_normalize)?,
        Command::EvalTable5 { basis } => run.eval_table5(basis.as_deref())?,
        Command::EvalVariance => run.eval_variance()?,
        Command::EvalPerturb { basis, input, lb, limit, no_normalize } => {
            run.eval_perturb(basis.as_deref(), input.as_deref(), lb, limit, no_normalize)?
        }
        Command::EvalUnseen { lb } => run.eval_unseen(lb)?,
        Command::Bench { basis, input, lb, no_normalize } => {
            run.bench(basis.as_deref(), input.as_deref(), &lb, no_normalize)?
        }
    }
    Ok(run.written)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(written) => {
            for p in written {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
