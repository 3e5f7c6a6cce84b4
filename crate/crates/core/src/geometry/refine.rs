use std::collections::HashMap;

use super::{BoundaryTag, Point2, PolyMesh};
use crate::error::{Result, VemError};

/// Convexity test that tolerates straight angles (hanging nodes).
pub(crate) fn is_convex_loop(pts: &[Point2]) -> bool {
    let n = pts.len();
    let scale = super::polygon_diameter(pts);
    let tol = 1e-12 * scale * scale;
    (0..n).all(|i| {
        let a = pts[(i + n - 1) % n];
        let b = pts[i];
        let c = pts[(i + 1) % n];
        (b - a).cross(c - b) >= -tol
    })
}

pub fn is_convex(mesh: &PolyMesh, cell: usize) -> bool {
    is_convex_loop(&mesh.cell_points(cell))
}

/// Splits every marked cell into quadrilaterals by joining its edge
/// midpoints to the vertex average. Unmarked neighbours keep their shape and
/// pick up the new midpoints as extra (hanging) vertices. Boundary tags of
/// split edges carry over to both halves.
pub fn refine_cells(mesh: &PolyMesh, marked: &[usize]) -> Result<PolyMesh> {
    if marked.is_empty() {
        return Err(VemError::EmptyMarking);
    }
    let mut is_marked = vec![false; mesh.num_cells()];
    for &c in marked {
        if c >= mesh.num_cells() {
            return Err(VemError::DofMismatch(format!(
                "marked cell {c} out of range ({} cells)",
                mesh.num_cells()
            )));
        }
        if !is_convex(mesh, c) {
            return Err(VemError::NonConvexCell { cell: c });
        }
        is_marked[c] = true;
    }

    let mut vertices = mesh.vertices().to_vec();
    let mut midpoint: Vec<Option<usize>> = vec![None; mesh.num_edges()];
    let parent_tags = mesh.boundary_tags();
    let mut tags: HashMap<(usize, usize), BoundaryTag> = HashMap::new();

    for (c, cell) in mesh.cells().iter().enumerate() {
        if !is_marked[c] {
            continue;
        }
        for &e in &cell.edges {
            if midpoint[e].is_none() {
                let edge = mesh.edge(e);
                let [a, b] = edge.vertices;
                vertices.push(mesh.vertex(a).midpoint(mesh.vertex(b)));
                let m = vertices.len() - 1;
                midpoint[e] = Some(m);
                if edge.tag.is_boundary() {
                    tags.insert((a.min(m), a.max(m)), edge.tag);
                    tags.insert((b.min(m), b.max(m)), edge.tag);
                }
            }
        }
    }

    let mut loops = Vec::with_capacity(mesh.num_cells() + 3 * marked.len());
    for (c, cell) in mesh.cells().iter().enumerate() {
        let n = cell.len();
        if is_marked[c] {
            let centre = cell
                .vertices
                .iter()
                .fold(Point2::default(), |s, &v| s + mesh.vertex(v))
                * (1.0 / n as f64);
            vertices.push(centre);
            let z = vertices.len() - 1;
            let mids: Vec<usize> = cell.edges.iter().map(|&e| midpoint[e].unwrap()).collect();
            for i in 0..n {
                loops.push(vec![cell.vertices[i], mids[i], z, mids[(i + n - 1) % n]]);
            }
        } else {
            let mut lp = Vec::with_capacity(n);
            for i in 0..n {
                lp.push(cell.vertices[i]);
                if let Some(m) = midpoint[cell.edges[i]] {
                    lp.push(m);
                }
            }
            loops.push(lp);
        }
    }

    PolyMesh::from_loops(vertices, &loops, |a, b, _| {
        let key = (a.min(b), a.max(b));
        tags.get(&key)
            .or_else(|| parent_tags.get(&key))
            .copied()
            .unwrap_or(BoundaryTag::Interior)
    })
}
