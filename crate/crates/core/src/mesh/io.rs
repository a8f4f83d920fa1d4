//! Wavefront OBJ and ASCII PLY readers/writers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyAscii,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::PlyAscii),
            _ => None,
        }
    }
}

pub fn load_mesh<T: Real>(path: &Path, format: MeshFormat) -> Result<TriangleMesh<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mesh = match format {
        MeshFormat::Obj => read_obj(reader),
        MeshFormat::PlyAscii => read_ply(reader),
    };
    mesh.map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn save_mesh<T: Real>(mesh: &TriangleMesh<T>, path: &Path, format: MeshFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        MeshFormat::Obj => write_obj(mesh, &mut w),
        MeshFormat::PlyAscii => write_ply(mesh, &mut w),
    }
    .and_then(|_| w.flush())
    .map_err(|e| Error::io(path, e))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(tok: Option<&str>, line: usize, what: &str) -> Result<f64> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse::<f64>()
        .map_err(|_| parse_err(line, format!("invalid {what} {tok:?}")))
}

/// Keeps a face unless it repeats a vertex; such faces are dropped.
fn push_face(tris: &mut Vec<[u32; 3]>, face: [u32; 3], line: usize) {
    if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
        warn!("line {line}: dropping degenerate face {face:?}");
    } else {
        tris.push(face);
    }
}

fn finish<T: Real>(verts: Vec<Vec3<f64>>, tris: Vec<[u32; 3]>) -> Result<TriangleMesh<T>> {
    if tris.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(TriangleMesh {
        vertices: verts.into_iter().map(|v| v.cast()).collect(),
        triangles: tris,
    })
}

/// Reads `v` and `f` records; normals, texture coordinates, groups and
/// materials are ignored. Faces must be triangles.
pub fn read_obj<T: Real, R: BufRead>(reader: R) -> Result<TriangleMesh<T>> {
    let mut verts = Vec::new();
    let mut faces: Vec<(usize, [i64; 3])> = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let ln = ln + 1;
        let line = line.map_err(|e| Error::io("<obj stream>", e))?;
        let line = line.split('#').next().unwrap_or("");
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), ln, "x coordinate")?;
                let y = parse_f64(toks.next(), ln, "y coordinate")?;
                let z = parse_f64(toks.next(), ln, "z coordinate")?;
                verts.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let refs: Vec<&str> = toks.collect();
                if refs.len() != 3 {
                    return Err(parse_err(
                        ln,
                        format!("face has {} vertices; only triangles are supported", refs.len()),
                    ));
                }
                let mut idx = [0i64; 3];
                for (slot, r) in idx.iter_mut().zip(&refs) {
                    let head = r.split('/').next().unwrap_or("");
                    *slot = head
                        .parse::<i64>()
                        .map_err(|_| parse_err(ln, format!("invalid vertex reference {r:?}")))?;
                }
                faces.push((ln, idx));
            }
            _ => {}
        }
    }
    let nv = verts.len() as i64;
    let mut tris = Vec::with_capacity(faces.len());
    for (ln, idx) in faces {
        let mut face = [0u32; 3];
        for (slot, &i) in face.iter_mut().zip(&idx) {
            // 1-based, negative values count back from the last vertex.
            let resolved = if i > 0 { i - 1 } else { nv + i };
            if i == 0 || resolved < 0 || resolved >= nv {
                return Err(parse_err(
                    ln,
                    format!("vertex index {i} out of range (have {nv} vertices)"),
                ));
            }
            *slot = resolved as u32;
        }
        push_face(&mut tris, face, ln);
    }
    finish(verts, tris)
}

struct PlyElement {
    name: String,
    count: usize,
    /// Scalar property names, or the list property marker.
    props: Vec<PlyProp>,
}

enum PlyProp {
    Scalar(String),
    List(String),
}

pub fn read_ply<T: Real, R: BufRead>(reader: R) -> Result<TriangleMesh<T>> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let next_line = |lines: &mut dyn Iterator<Item = (usize, std::io::Result<String>)>| {
        lines
            .next()
            .map(|(i, l)| l.map(|s| (i, s)).map_err(|e| Error::io("<ply stream>", e)))
    };

    match next_line(&mut lines) {
        Some(Ok((_, l))) if l.trim() == "ply" => {}
        Some(Ok((ln, _))) => return Err(parse_err(ln, "missing 'ply' magic")),
        Some(Err(e)) => return Err(e),
        None => return Err(parse_err(1, "empty file")),
    }

    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let (ln, line) = match next_line(&mut lines) {
            Some(r) => r?,
            None => return Err(parse_err(0, "unterminated header")),
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(parse_err(ln, format!("unsupported PLY format {other:?}")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_err(ln, format!("invalid element count {count:?}")))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", _, _, name] => elements
                .last_mut()
                .ok_or_else(|| parse_err(ln, "property before element"))?
                .props
                .push(PlyProp::List(name.to_string())),
            ["property", _, name] => elements
                .last_mut()
                .ok_or_else(|| parse_err(ln, "property before element"))?
                .props
                .push(PlyProp::Scalar(name.to_string())),
            ["end_header"] => break,
            _ => return Err(parse_err(ln, format!("unrecognized header line {line:?}"))),
        }
    }

    let mut verts = Vec::new();
    let mut tris = Vec::new();
    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                let pos = |n: &str| {
                    el.props
                        .iter()
                        .position(|p| matches!(p, PlyProp::Scalar(s) if s == n))
                };
                let (ix, iy, iz) = match (pos("x"), pos("y"), pos("z")) {
                    (Some(x), Some(y), Some(z)) => (x, y, z),
                    _ => return Err(parse_err(0, "vertex element lacks x/y/z")),
                };
                if el.props.iter().any(|p| matches!(p, PlyProp::List(_))) {
                    return Err(parse_err(0, "list property on vertex element"));
                }
                for _ in 0..el.count {
                    let (ln, line) = next_line(&mut lines)
                        .ok_or_else(|| parse_err(0, "unexpected end of vertex data"))??;
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    if toks.len() < el.props.len() {
                        return Err(parse_err(ln, "vertex line has too few values"));
                    }
                    verts.push(Vec3::new(
                        parse_f64(Some(toks[ix]), ln, "x")?,
                        parse_f64(Some(toks[iy]), ln, "y")?,
                        parse_f64(Some(toks[iz]), ln, "z")?,
                    ));
                }
            }
            "face" => {
                let list_ok = matches!(
                    el.props.as_slice(),
                    [PlyProp::List(n)] if n == "vertex_indices" || n == "vertex_index"
                );
                if !list_ok {
                    return Err(parse_err(0, "face element must hold one vertex index list"));
                }
                for _ in 0..el.count {
                    let (ln, line) = next_line(&mut lines)
                        .ok_or_else(|| parse_err(0, "unexpected end of face data"))??;
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    let n: usize = toks
                        .first()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(ln, "missing face vertex count"))?;
                    if n != 3 {
                        return Err(parse_err(
                            ln,
                            format!("face has {n} vertices; only triangles are supported"),
                        ));
                    }
                    if toks.len() != 4 {
                        return Err(parse_err(ln, "face line has wrong number of indices"));
                    }
                    let mut face = [0u32; 3];
                    for (slot, t) in face.iter_mut().zip(&toks[1..]) {
                        *slot = t
                            .parse()
                            .map_err(|_| parse_err(ln, format!("invalid index {t:?}")))?;
                    }
                    push_face(&mut tris, face, ln);
                }
            }
            _ => {
                for _ in 0..el.count {
                    next_line(&mut lines)
                        .ok_or_else(|| parse_err(0, format!("unexpected end of {}", el.name)))??;
                }
            }
        }
    }
    let nv = verts.len();
    if let Some(bad) = tris.iter().flatten().find(|&&i| i as usize >= nv) {
        return Err(parse_err(0, format!("face index {bad} out of range (have {nv} vertices)")));
    }
    finish(verts, tris)
}

/// Formats with nine significant digits, trimming trailing zeros.
fn fmt_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..=9).contains(&exp) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_obj<T: Real, W: Write>(mesh: &TriangleMesh<T>, w: &mut W) -> std::io::Result<()> {
    for v in mesh.vertices() {
        let v = v.cast::<f64>();
        writeln!(w, "v {} {} {}", fmt_sig9(v.x), fmt_sig9(v.y), fmt_sig9(v.z))?;
    }
    for t in mesh.triangles() {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn write_ply<T: Real, W: Write>(mesh: &TriangleMesh<T>, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertices().len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "element face {}", mesh.triangles().len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for v in mesh.vertices() {
        let v = v.cast::<f64>();
        writeln!(w, "{} {} {}", fmt_sig9(v.x), fmt_sig9(v.y), fmt_sig9(v.z))?;
    }
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Mesh;

    const CUBE_PLY: &str = "ply
format ascii 1.0
comment hand-written unit cube
element vertex 8
property float x
property float y
property float z
element face 12
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
0 1 0
1 1 0
0 0 1
1 0 1
0 1 1
1 1 1
3 0 2 3
3 0 3 1
3 4 5 7
3 4 7 6
3 0 1 5
3 0 5 4
3 2 6 7
3 2 7 3
3 0 4 6
3 0 6 2
3 1 3 7
3 1 7 5
";

    #[test]
    fn minimal_obj_triangle() {
        let src = "# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nf 1/1/1 2/1/1 3/1/1\n";
        let m: Mesh = read_obj(src.as_bytes()).unwrap();
        assert_eq!(m.vertices().len(), 3);
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_negative_indices_resolve() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n";
        let m: Mesh = read_obj(src.as_bytes()).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_out_of_range_index_reports_line() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n";
        match read_obj::<f64, _>(src.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn obj_malformed_vertex() {
        let src = "v 0 zero 0\n";
        assert!(matches!(
            read_obj::<f64, _>(src.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn obj_quads_are_rejected() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert!(matches!(
            read_obj::<f64, _>(src.as_bytes()),
            Err(Error::Parse { line: 5, .. })
        ));
    }

    #[test]
    fn obj_without_faces_is_empty() {
        assert!(matches!(
            read_obj::<f64, _>("v 0 0 0\n".as_bytes()),
            Err(Error::EmptyMesh)
        ));
    }

    #[test]
    fn ply_cube_counts() {
        let m: Mesh = read_ply(CUBE_PLY.as_bytes()).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.triangles().len(), 12);
        assert!((m.signed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ply_binary_is_rejected() {
        let src = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(matches!(
            read_ply::<f64, _>(src.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn ply_bad_index() {
        let src = CUBE_PLY.replace("3 1 7 5", "3 1 7 9");
        assert!(matches!(
            read_ply::<f64, _>(src.as_bytes()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn writers_round_trip_to_nine_digits() {
        let m: Mesh = Mesh::icosphere(Vec3::new(0.1, -0.2, 0.05), 0.3, 1);
        let mut obj = Vec::new();
        write_obj(&m, &mut obj).unwrap();
        let back: Mesh = read_obj(obj.as_slice()).unwrap();
        let mut ply = Vec::new();
        write_ply(&m, &mut ply).unwrap();
        let back_ply: Mesh = read_ply(ply.as_slice()).unwrap();
        for other in [&back, &back_ply] {
            assert_eq!(other.triangles(), m.triangles());
            for (a, b) in m.vertices().iter().zip(other.vertices()) {
                assert!((*a - *b).abs().max_element() < 1e-9);
            }
        }
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(0.5), "0.5");
        assert_eq!(fmt_sig9(-0.123456789123), "-0.123456789");
        assert_eq!(fmt_sig9(12.5), "12.5");
        assert_eq!(fmt_sig9(1.0e-7), "1.00000000e-7");
    }
}
