use std::path::{Path, PathBuf};

use log::info;
use pcasdf::corpus::{generate_corpus, Corpus, CorpusSpec};
use pcasdf::eval::EvalShape;
use pcasdf::mesh::{load_mesh, MeshFormat};
use pcasdf::pca::load_basis;
use pcasdf::{Basis, Error, Mesh, Result};

use crate::config::RunConfig;

const ORTHONORMALITY_TOLERANCE: f64 = 1e-6;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

/// The procedural corpus named by the config: a manifest, a spec file, or
/// the built-in standard corpus.
pub fn procedural_corpus(config: &RunConfig) -> Result<Corpus> {
    match &config.corpus.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
                line: e.line(),
                message: format!("{}: {e}", path.display()),
            })?;
            if value.get("shapes").is_some() {
                Corpus::load_manifest(path)
            } else {
                let spec: CorpusSpec = serde_json::from_value(value).map_err(|e| Error::Parse {
                    line: 0,
                    message: format!("{}: {e}", path.display()),
                })?;
                generate_corpus(&spec)
            }
        }
        None => generate_corpus(&CorpusSpec::standard(config.corpus.count_per_category, config.corpus.seed)),
    }
}

pub fn load_input_mesh(path: &Path, margin: Option<f64>) -> Result<Mesh> {
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| Error::InvalidArgument(format!("{}: expected a .obj or .ply file", path.display())))?;
    let mesh: Mesh = load_mesh(path, format)?;
    match margin {
        Some(m) => mesh.normalize(m),
        None => Ok(mesh),
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| io_err(dir, e)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

fn mesh_files(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_file() && MeshFormat::from_path(p).is_some())
        .collect())
}

/// Meshes under `dir`; each subdirectory is a category, loose files form a
/// category named after `dir`.
pub fn mesh_corpus(dir: &Path, margin: f64) -> Result<Vec<EvalShape>> {
    let mut groups: Vec<(String, Vec<PathBuf>)> = Vec::new();
    let loose = mesh_files(dir)?;
    if !loose.is_empty() {
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("meshes").to_string();
        groups.push((name, loose));
    }
    for sub in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        let files = mesh_files(&sub)?;
        if !files.is_empty() {
            let name = sub.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            groups.push((name, files));
        }
    }
    if groups.is_empty() {
        return Err(Error::InvalidArgument(format!("{} contains no .obj or .ply meshes", dir.display())));
    }
    let mut shapes = Vec::new();
    for (category, files) in groups {
        for f in files {
            let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
            let mut shape = EvalShape::from_mesh(format!("{category}/{stem}"), load_input_mesh(&f, Some(margin))?);
            shape.category = category.clone();
            shapes.push(shape);
        }
    }
    info!("loaded {} meshes from {}", shapes.len(), dir.display());
    Ok(shapes)
}

/// Every shape of the configured corpus in category order.
pub fn corpus_shapes(config: &RunConfig) -> Result<Vec<EvalShape>> {
    match &config.corpus.mesh_dir {
        Some(dir) => mesh_corpus(dir, config.corpus.margin),
        None => Ok(procedural_corpus(config)?.shapes.iter().map(EvalShape::from_corpus).collect()),
    }
}

/// Loads a basis and re-checks its orthonormality.
pub fn load_checked_basis(path: &Path) -> Result<Basis> {
    let basis: Basis = load_basis(path)?;
    let err = basis.orthonormality_error();
    if !(err < ORTHONORMALITY_TOLERANCE) {
        return Err(Error::Format(format!(
            "{}: basis columns are not orthonormal (max |BtB - I| = {err:.3e})",
            path.display()
        )));
    }
    Ok(basis)
}
