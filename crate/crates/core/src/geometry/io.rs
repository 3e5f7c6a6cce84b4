use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{BoundaryTag, Point2, PolyMesh};
use crate::error::{Result, VemError};

/// Writes the plain-text polygonal mesh format:
///
/// ```text
/// polymesh 2 <nv> <nc>
/// x y                 (nv lines)
/// m v1 ... vm         (nc lines, counter-clockwise, 0-based)
/// va vb D|N           (one line per boundary edge)
/// ```
pub fn write_mesh<W: Write>(mesh: &PolyMesh, mut w: W) -> Result<()> {
    writeln!(w, "polymesh 2 {} {}", mesh.num_vertices(), mesh.num_cells())?;
    for p in mesh.vertices() {
        writeln!(w, "{:.17e} {:.17e}", p.x, p.y)?;
    }
    for c in mesh.cells() {
        write!(w, "{}", c.len())?;
        for v in &c.vertices {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    for e in mesh.edges().iter().filter(|e| e.tag.is_boundary()) {
        let t = if e.tag == BoundaryTag::Dirichlet { 'D' } else { 'N' };
        writeln!(w, "{} {} {t}", e.vertices[0], e.vertices[1])?;
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> VemError {
    VemError::MeshParse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

/// Reads the format produced by [`write_mesh`]. Blank lines and lines
/// starting with `#` are ignored.
pub fn read_mesh<R: BufRead>(r: R) -> Result<PolyMesh> {
    let mut lines = Vec::new();
    for (i, l) in r.lines().enumerate() {
        let l = l?;
        let t = l.trim();
        if !t.is_empty() && !t.starts_with('#') {
            lines.push((i + 1, t.to_string()));
        }
    }
    let mut it = lines.into_iter();
    let (ln, header) = it.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("polymesh") {
        return Err(parse_err(ln, "expected `polymesh` header"));
    }
    let dim: usize = field(tok.next(), ln, "dimension")?;
    if dim != 2 {
        return Err(parse_err(ln, format!("dimension {dim} is not supported")));
    }
    let nv: usize = field(tok.next(), ln, "vertex count")?;
    let nc: usize = field(tok.next(), ln, "cell count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = it.next().ok_or_else(|| parse_err(0, "unexpected end of vertices"))?;
        let mut t = l.split_whitespace();
        vertices.push(Point2::new(field(t.next(), ln, "x")?, field(t.next(), ln, "y")?));
    }
    let mut loops = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, l) = it.next().ok_or_else(|| parse_err(0, "unexpected end of cells"))?;
        let mut t = l.split_whitespace();
        let m: usize = field(t.next(), ln, "cell size")?;
        let lp = (0..m)
            .map(|_| field::<usize>(t.next(), ln, "vertex index"))
            .collect::<Result<Vec<_>>>()?;
        if t.next().is_some() {
            return Err(parse_err(ln, "trailing tokens after cell"));
        }
        loops.push(lp);
    }
    let mut tags = HashMap::new();
    for (ln, l) in it {
        let mut t = l.split_whitespace();
        let a: usize = field(t.next(), ln, "edge vertex")?;
        let b: usize = field(t.next(), ln, "edge vertex")?;
        let tag = match t.next() {
            Some("D") => BoundaryTag::Dirichlet,
            Some("N") => BoundaryTag::Neumann,
            other => return Err(parse_err(ln, format!("invalid boundary tag {other:?}"))),
        };
        tags.insert((a.min(b), a.max(b)), tag);
    }
    if vertices.iter().any(|p| !p.is_finite()) {
        return Err(parse_err(0, "non-finite vertex coordinate"));
    }
    PolyMesh::from_loops(vertices, &loops, |a, b, _| {
        tags.get(&(a.min(b), a.max(b)))
            .copied()
            .unwrap_or(BoundaryTag::Interior)
    })
}
