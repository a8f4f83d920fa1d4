//! Procedural shape corpus standing in for a categorized mesh dataset.
//!
//! Each category draws shapes from one analytic family. Shape `i` of the
//! corpus owns ChaCha8 stream `i` under the corpus seed, so any shape can be
//! regenerated independently and the corpus is reproducible bit for bit.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{rotation_matrix, Vec3};
use crate::mesh::{DEFAULT_MARGIN, DOMAIN_HALF};
use crate::sdf::AnalyticShape;

const MAX_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Sphere,
    Box,
    Torus,
    CapsuleUnion,
    BoxUnion,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Sphere, Family::Box, Family::Torus, Family::CapsuleUnion, Family::BoxUnion];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Sphere => "sphere",
            Family::Box => "box",
            Family::Torus => "torus",
            Family::CapsuleUnion => "capsule-union",
            Family::BoxUnion => "box-union",
        }
    }

    /// Ranges used by the default corpus.
    pub fn default_ranges(&self) -> ParamRanges {
        let (size, thickness, jitter) = match self {
            Family::Sphere => ([0.22, 0.42], [0.0, 0.0], 0.03),
            Family::Box => ([0.12, 0.26], [0.0, 0.0], 0.03),
            Family::Torus => ([0.16, 0.27], [0.05, 0.1], 0.03),
            Family::CapsuleUnion => ([0.12, 0.28], [0.05, 0.1], 0.12),
            Family::BoxUnion => ([0.08, 0.2], [0.0, 0.0], 0.14),
        };
        ParamRanges {
            size,
            thickness,
            jitter,
        }
    }
}

/// Generator parameter ranges. `size` is the radius (sphere), half-extent
/// (box, box-union parts), ring radius (torus) or segment half-length
/// (capsules); `thickness` is the tube or capsule radius; `jitter` bounds
/// each center coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub size: [f64; 2],
    pub thickness: [f64; 2],
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: String,
    pub family: Family,
    pub count: usize,
    pub params: ParamRanges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub categories: Vec<CategorySpec>,
    pub seed: u64,
    /// Shapes must fit in `[-0.5 + margin, 0.5 − margin]³`.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

impl CorpusSpec {
    /// Five categories, one per family, `count` shapes each.
    pub fn standard(count: usize, seed: u64) -> Self {
        Self {
            categories: Family::ALL
                .iter()
                .map(|f| CategorySpec {
                    name: f.name().to_string(),
                    family: *f,
                    count,
                    params: f.default_ranges(),
                })
                .collect(),
            seed,
            margin: DEFAULT_MARGIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::InvalidSpec("corpus has no categories".into()));
        }
        if !(0.0..0.45).contains(&self.margin) {
            return Err(Error::InvalidSpec(format!("margin {} outside [0, 0.45)", self.margin)));
        }
        let mut names = BTreeSet::new();
        for c in &self.categories {
            if !names.insert(c.name.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate category {:?}", c.name)));
            }
            if c.count == 0 {
                return Err(Error::InvalidSpec(format!("category {:?} has count 0", c.name)));
            }
            let p = &c.params;
            let ordered = |r: [f64; 2]| r[0] <= r[1] && r[0].is_finite() && r[1].is_finite();
            if !ordered(p.size) || p.size[0] <= 0.0 {
                return Err(Error::InvalidSpec(format!("category {:?}: bad size range {:?}", c.name, p.size)));
            }
            let needs_thickness = matches!(c.family, Family::Torus | Family::CapsuleUnion);
            if needs_thickness && (!ordered(p.thickness) || p.thickness[0] <= 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "category {:?}: bad thickness range {:?}",
                    c.name, p.thickness
                )));
            }
            if !(p.jitter >= 0.0) {
                return Err(Error::InvalidSpec(format!("category {:?}: negative jitter", c.name)));
            }
        }
        Ok(())
    }
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self::standard(30, 2024)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusShape {
    pub id: usize,
    pub category: String,
    pub family: Family,
    pub shape: AnalyticShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub shapes: Vec<CorpusShape>,
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

fn jittered(rng: &mut ChaCha8Rng, jitter: f64) -> [f64; 3] {
    if jitter == 0.0 {
        return [0.0; 3];
    }
    [0, 1, 2].map(|_| rng.gen_range(-jitter..=jitter))
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let axis = random_direction(rng);
    rotation_matrix(axis, rng.gen_range(0.0..std::f64::consts::PI))
}

fn draw(family: Family, p: &ParamRanges, rng: &mut ChaCha8Rng) -> AnalyticShape {
    match family {
        Family::Sphere => AnalyticShape::sphere(jittered(rng, p.jitter), uniform(rng, p.size)),
        Family::Box => {
            let half = [0, 1, 2].map(|_| uniform(rng, p.size));
            let rot = random_rotation(rng);
            AnalyticShape::rigid(AnalyticShape::cuboid([0.0; 3], half), rot, jittered(rng, p.jitter))
        }
        Family::Torus => {
            let major = uniform(rng, p.size);
            let minor = uniform(rng, p.thickness).min(0.9 * major);
            let rot = random_rotation(rng);
            AnalyticShape::rigid(AnalyticShape::torus([0.0; 3], major, minor), rot, jittered(rng, p.jitter))
        }
        Family::CapsuleUnion => {
            let parts = rng.gen_range(2..=3);
            let mut shape: Option<AnalyticShape> = None;
            for _ in 0..parts {
                let c = Vec3::from_array(jittered(rng, p.jitter));
                let half = uniform(rng, p.size);
                let dir = random_direction(rng) * half;
                let cap = AnalyticShape::capsule((c - dir).to_array(), (c + dir).to_array(), uniform(rng, p.thickness));
                shape = Some(match shape {
                    None => cap,
                    Some(s) => AnalyticShape::union(s, cap),
                });
            }
            shape.expect("at least two parts")
        }
        Family::BoxUnion => {
            let part = |rng: &mut ChaCha8Rng| {
                let half = [0, 1, 2].map(|_| uniform(rng, p.size));
                let rot = random_rotation(rng);
                AnalyticShape::rigid(AnalyticShape::cuboid([0.0; 3], half), rot, jittered(rng, p.jitter))
            };
            let a = part(rng);
            let b = part(rng);
            AnalyticShape::union(a, b)
        }
    }
}

/// Generates every shape of `spec`, rejecting draws that leave the margin.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let limit = DOMAIN_HALF - spec.margin;
    let mut shapes = Vec::new();
    for cat in &spec.categories {
        for _ in 0..cat.count {
            let id = shapes.len();
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(id as u64);
            let shape = (0..MAX_ATTEMPTS)
                .map(|_| draw(cat.family, &cat.params, &mut rng))
                .find(|s| s.validate().is_ok() && s.bounds().within_half_extent(limit))
                .ok_or_else(|| {
                    Error::InvalidSpec(format!(
                        "category {:?}: parameter ranges do not fit inside the margin",
                        cat.name
                    ))
                })?;
            shapes.push(CorpusShape {
                id,
                category: cat.name.clone(),
                family: cat.family,
                shape,
            });
        }
    }
    Ok(Corpus {
        spec: spec.clone(),
        shapes,
    })
}

impl Corpus {
    /// Category names in spec order.
    pub fn categories(&self) -> Vec<&str> {
        self.spec.categories.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn category(&self, name: &str) -> Result<Vec<&CorpusShape>> {
        if !self.spec.categories.iter().any(|c| c.name == name) {
            return Err(Error::UnknownCategory(name.to_string()));
        }
        Ok(self.shapes.iter().filter(|s| s.category == name).collect())
    }

    /// Holds out one category: returns (shapes of other categories, shapes of `held_out`).
    pub fn unseen_split(&self, held_out: &str) -> Result<(Vec<&CorpusShape>, Vec<&CorpusShape>)> {
        let test = self.category(held_out)?;
        let train = self.shapes.iter().filter(|s| s.category != held_out).collect();
        Ok((train, test))
    }

    /// Per category, the last `test_per_category` shapes form the test set.
    pub fn train_test_split(&self, test_per_category: usize) -> (Vec<&CorpusShape>, Vec<&CorpusShape>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for cat in &self.spec.categories {
            let members: Vec<&CorpusShape> = self.shapes.iter().filter(|s| s.category == cat.name).collect();
            let cut = members.len().saturating_sub(test_per_category);
            train.extend_from_slice(&members[..cut]);
            test.extend_from_slice(&members[cut..]);
        }
        (train, test)
    }

    /// Default split: the last fifth of every category is held for testing.
    pub fn default_split(&self) -> (Vec<&CorpusShape>, Vec<&CorpusShape>) {
        let per = self.spec.categories.iter().map(|c| c.count).min().unwrap_or(0);
        self.train_test_split((per / 5).max(1))
    }

    pub fn save_manifest(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let value = serde_json::to_value(self).map_err(|e| Error::Format(e.to_string()))?;
        serde_json::to_writer_pretty(&mut w, &value).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a manifest and checks it against a fresh regeneration.
    pub fn load_manifest(path: &Path) -> Result<Corpus> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let corpus: Corpus =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
        let fresh = generate_corpus(&corpus.spec)?;
        if fresh != corpus {
            return Err(Error::Format(format!(
                "manifest {} does not match the shapes its spec generates",
                path.display()
            )));
        }
        Ok(corpus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{harvest_occupied, VoxelGridSpec, DEFAULT_TAU};

    fn one_category(family: Family, count: usize, size: [f64; 2]) -> CorpusSpec {
        CorpusSpec {
            categories: vec![CategorySpec {
                name: family.name().into(),
                family,
                count,
                params: ParamRanges {
                    size,
                    ..family.default_ranges()
                },
            }],
            seed: 7,
            margin: DEFAULT_MARGIN,
        }
    }

    #[test]
    fn sphere_radii_in_range_and_reproducible() {
        let spec = one_category(Family::Sphere, 3, [0.3, 0.4]);
        let a = generate_corpus(&spec).unwrap();
        assert_eq!(a.shapes.len(), 3);
        for s in &a.shapes {
            match &s.shape {
                AnalyticShape::Sphere { radius, .. } => assert!((0.3..0.4).contains(radius)),
                other => panic!("unexpected {other:?}"),
            }
        }
        assert_eq!(generate_corpus(&spec).unwrap(), a);
        let other_seed = CorpusSpec { seed: 8, ..spec };
        assert_ne!(generate_corpus(&other_seed).unwrap().shapes, a.shapes);
    }

    #[test]
    fn category_tags_and_splits() {
        let corpus = generate_corpus(&CorpusSpec::standard(5, 1)).unwrap();
        assert_eq!(corpus.shapes.len(), 25);
        for s in &corpus.shapes {
            assert_eq!(s.category, s.family.name());
            assert!(s.shape.bounds().within_half_extent(0.45));
        }
        let mut seen = BTreeSet::new();
        for held in corpus.categories() {
            let (train, test) = corpus.unseen_split(held).unwrap();
            assert!(test.iter().all(|s| s.category == held));
            assert_eq!(
                train.iter().map(|s| s.category.as_str()).collect::<BTreeSet<_>>().len(),
                4
            );
            let mut ids: Vec<usize> = train.iter().chain(&test).map(|s| s.id).collect();
            ids.sort_unstable();
            assert_eq!(ids, (0..25).collect::<Vec<_>>());
            assert!(seen.insert(held));
        }
        assert_eq!(seen.len(), 5);
        assert!(matches!(corpus.unseen_split("chair"), Err(Error::UnknownCategory(_))));

        let (train, test) = corpus.default_split();
        assert_eq!((train.len(), test.len()), (20, 5));
        assert!(test.iter().all(|s| s.id % 5 == 4));
    }

    #[test]
    fn capsule_union_matches_membership_oracle() {
        let corpus = generate_corpus(&one_category(Family::CapsuleUnion, 4, [0.12, 0.28])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for s in &corpus.shapes {
            let mut caps = Vec::new();
            fn collect(s: &AnalyticShape, out: &mut Vec<(Vec3<f64>, Vec3<f64>, f64)>) {
                match s {
                    AnalyticShape::Capsule { a, b, radius } => {
                        out.push((Vec3::from_array(*a), Vec3::from_array(*b), *radius))
                    }
                    AnalyticShape::Union { a, b } => {
                        collect(a, out);
                        collect(b, out);
                    }
                    other => panic!("unexpected {other:?}"),
                }
            }
            collect(&s.shape, &mut caps);
            assert!((2..=3).contains(&caps.len()));
            for _ in 0..1000 {
                let p = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                let inside = caps.iter().any(|(a, b, r)| {
                    let ab = *b - *a;
                    let t = ((p - *a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
                    (p - (*a + ab * t)).norm() <= *r
                });
                assert_eq!(s.shape.eval(p) <= 0.0, inside);
            }
        }
    }

    #[test]
    fn every_shape_has_occupied_blocks() {
        let corpus = generate_corpus(&CorpusSpec::standard(3, 11)).unwrap();
        let spec = VoxelGridSpec::default();
        for s in &corpus.shapes {
            let blocks = harvest_occupied::<f32, _>(&s.shape, &spec, spec.default_clamp(), DEFAULT_TAU);
            assert!(!blocks.is_empty(), "shape {}", s.id);
        }
    }

    #[test]
    fn invalid_specs() {
        let mut spec = CorpusSpec::standard(2, 0);
        spec.categories[1].count = 0;
        assert!(matches!(generate_corpus(&spec), Err(Error::InvalidSpec(_))));
        let spec = one_category(Family::Sphere, 2, [0.6, 0.7]);
        assert!(matches!(generate_corpus(&spec), Err(Error::InvalidSpec(_))));
        let mut spec = CorpusSpec::standard(2, 0);
        spec.categories[1].name = "sphere".into();
        assert!(generate_corpus(&spec).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.json");
        let corpus = generate_corpus(&CorpusSpec::standard(2, 5)).unwrap();
        corpus.save_manifest(&path).unwrap();
        assert_eq!(Corpus::load_manifest(&path).unwrap(), corpus);
    }
}
