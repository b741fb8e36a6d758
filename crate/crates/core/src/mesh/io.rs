//! ASCII OFF and OBJ readers and an OFF writer. Polygonal faces are
//! fan-triangulated.

use super::{MeshError, TriMesh};
use nalgebra::Point3;
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

/// Parse a mesh from a byte stream in the given format.
pub fn load_mesh<R: BufRead>(reader: R, format: MeshFormat) -> Result<TriMesh, MeshError> {
    match format {
        MeshFormat::Off => load_off(reader),
        MeshFormat::Obj => load_obj(reader),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

/// Lines of an OFF/OBJ body with comments stripped, keeping 1-based line
/// numbers for diagnostics.
fn content_lines<R: BufRead>(reader: R) -> Result<Vec<(usize, String)>, MeshError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = match line.find('#') {
            Some(p) => &line[..p],
            None => &line[..],
        };
        let text = text.trim();
        if !text.is_empty() {
            out.push((i + 1, text.to_string()));
        }
    }
    Ok(out)
}

fn load_off<R: BufRead>(reader: R) -> Result<TriMesh, MeshError> {
    let lines = content_lines(reader)?;
    let mut it = lines.into_iter();

    let (ln, header) = it.next().ok_or_else(|| parse_err(0, "empty OFF stream"))?;
    // Some writers put the counts on the header line ("OFF 8 6 12").
    let mut counts_tokens: Vec<String> = Vec::new();
    if let Some(rest) = header.strip_prefix("OFF") {
        let rest = rest.trim();
        if !rest.is_empty() {
            counts_tokens = rest.split_whitespace().map(String::from).collect();
        }
    } else {
        return Err(parse_err(ln, "missing OFF header"));
    }
    if counts_tokens.is_empty() {
        let (ln, counts) = it.next().ok_or_else(|| parse_err(ln, "missing count line"))?;
        counts_tokens = counts.split_whitespace().map(String::from).collect();
        if counts_tokens.len() < 2 {
            return Err(parse_err(ln, "count line needs n_vertices n_faces"));
        }
    }
    let nv: usize = counts_tokens[0]
        .parse()
        .map_err(|_| parse_err(ln, "bad vertex count"))?;
    let nf: usize = counts_tokens[1]
        .parse()
        .map_err(|_| parse_err(ln, "bad face count"))?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, text) = it
            .next()
            .ok_or_else(|| parse_err(0, "unexpected end of vertex list"))?;
        let mut f = text.split_whitespace().map(|t| t.parse::<f64>());
        let mut coord = [0.0; 3];
        for c in &mut coord {
            *c = f
                .next()
                .ok_or_else(|| parse_err(ln, "vertex needs 3 coordinates"))?
                .map_err(|_| parse_err(ln, "bad vertex coordinate"))?;
        }
        vertices.push(Point3::new(coord[0], coord[1], coord[2]));
    }

    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, text) = it
            .next()
            .ok_or_else(|| parse_err(0, "unexpected end of face list"))?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let k: usize = tokens[0].parse().map_err(|_| parse_err(ln, "bad face size"))?;
        if k < 3 || tokens.len() < k + 1 {
            return Err(parse_err(ln, "face with fewer than 3 indices"));
        }
        let idx: Result<Vec<usize>, _> = tokens[1..=k].iter().map(|t| t.parse()).collect();
        let idx = idx.map_err(|_| parse_err(ln, "bad face index"))?;
        fan_triangulate(&idx, &mut triangles);
    }

    TriMesh::new(vertices, triangles)
}

fn load_obj<R: BufRead>(reader: R) -> Result<TriMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (ln, text) in content_lines(reader)? {
        let mut tokens = text.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coord = [0.0; 3];
                for c in &mut coord {
                    *c = tokens
                        .next()
                        .ok_or_else(|| parse_err(ln, "v needs 3 coordinates"))?
                        .parse()
                        .map_err(|_| parse_err(ln, "bad vertex coordinate"))?;
                }
                vertices.push(Point3::new(coord[0], coord[1], coord[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in tokens {
                    // "i", "i/t", "i//n", "i/t/n"; 1-based, negatives count
                    // from the end.
                    let first = tok.split('/').next().unwrap_or("");
                    let raw: i64 = first
                        .parse()
                        .map_err(|_| parse_err(ln, "bad face index"))?;
                    let i = if raw > 0 {
                        raw as usize - 1
                    } else if raw < 0 {
                        let back = (-raw) as usize;
                        vertices
                            .len()
                            .checked_sub(back)
                            .ok_or_else(|| parse_err(ln, "negative index out of range"))?
                    } else {
                        return Err(parse_err(ln, "face index 0 is invalid"));
                    };
                    idx.push(i);
                }
                if idx.len() < 3 {
                    return Err(parse_err(ln, "face with fewer than 3 indices"));
                }
                fan_triangulate(&idx, &mut triangles);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, triangles)
}

fn fan_triangulate(polygon: &[usize], out: &mut Vec<[usize; 3]>) {
    for i in 1..polygon.len() - 1 {
        out.push([polygon[0], polygon[i], polygon[i + 1]]);
    }
}

/// Write the mesh as ASCII OFF. Output is deterministic for a given mesh.
pub fn write_off<W: Write>(mesh: &TriMesh, mut writer: W) -> Result<(), MeshError> {
    writeln!(writer, "OFF")?;
    writeln!(writer, "{} {} 0", mesh.n_vertices(), mesh.n_triangles())?;
    for v in mesh.vertices() {
        writeln!(writer, "{:.17} {:.17} {:.17}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        writeln!(writer, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}
