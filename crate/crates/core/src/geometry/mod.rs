//! Polygonal meshes: construction, generation, quality checks and
//! midpoint–barycentre refinement.
//!
//! A [`PolyMesh`] is immutable once built. Every edge carries a fixed
//! orientation `a -> b`; its unit normal points to the right of that
//! direction, which is the outward normal of the first cell that uses it.
//! Hanging nodes never appear as such: a cell next to a refined neighbour
//! simply lists the extra vertex in its loop.

mod generate;
mod io;
mod quality;
mod refine;

pub use generate::{
    generate_mesh, generate_voronoi, l_shape_boundary, unit_square_boundary, MeshFamily, VoronoiConfig,
};
pub use io::{read_mesh, write_mesh};
pub use quality::{check_mesh_assumptions, chebyshev_disk, polygon_kernel, CellQuality};
pub use refine::{is_convex, refine_cells};

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn midpoint(self, o: Self) -> Self {
        Self::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Interior,
    Dirichlet,
    Neumann,
}

impl BoundaryTag {
    pub fn is_boundary(self) -> bool {
        self != BoundaryTag::Interior
    }
}

#[derive(Clone, Debug)]
pub struct MeshEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
    /// First cell traverses the edge as `a -> b`; the second (if any) as `b -> a`.
    pub cells: [Option<usize>; 2],
    pub length: f64,
    pub normal: Point2,
    pub tangent: Point2,
}

impl MeshEdge {
    pub fn is_interior(&self) -> bool {
        self.cells[1].is_some()
    }

    /// The cell on the other side of this edge as seen from `cell`.
    pub fn neighbor(&self, cell: usize) -> Option<usize> {
        match self.cells {
            [Some(a), Some(b)] if a == cell => Some(b),
            [Some(a), Some(b)] if b == cell => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PolyCell {
    /// Counter-clockwise vertex loop.
    pub vertices: Vec<usize>,
    /// `edges[i]` joins `vertices[i]` and `vertices[i + 1]`.
    pub edges: Vec<usize>,
    /// Whether local edge `i` runs along the global edge orientation.
    pub aligned: Vec<bool>,
    pub diameter: f64,
    pub area: f64,
    pub centroid: Point2,
}

impl PolyCell {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct PolyMesh {
    vertices: Vec<Point2>,
    edges: Vec<MeshEdge>,
    cells: Vec<PolyCell>,
    vertex_cells: Vec<Vec<usize>>,
}

/// Signed area of a closed loop (positive when counter-clockwise).
pub fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| pts[i].cross(pts[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

/// Area centroid of a simple polygon.
pub fn polygon_centroid(pts: &[Point2]) -> Point2 {
    let n = pts.len();
    // shift for round-off on small cells far from the origin
    let o = pts[0];
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = pts[i] - o;
        let q = pts[(i + 1) % n] - o;
        let w = p.cross(q);
        a += w;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Point2::new(o.x + cx / (3.0 * a), o.y + cy / (3.0 * a))
}

pub fn polygon_diameter(pts: &[Point2]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            d = d.max(p.dist(*q));
        }
    }
    d
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Validates a loop and returns it counter-clockwise.
fn normalize_loop(cell: usize, lp: &[usize], vertices: &[Point2]) -> Result<Vec<usize>> {
    if lp.len() < 3 {
        return Err(VemError::NonSimplePolygon {
            cell,
            reason: "fewer than three vertices",
        });
    }
    let mut seen = lp.to_vec();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(VemError::NonSimplePolygon {
            cell,
            reason: "repeated vertex",
        });
    }
    if lp.iter().any(|&v| v >= vertices.len()) {
        return Err(VemError::NonSimplePolygon {
            cell,
            reason: "vertex index out of range",
        });
    }
    let pts: Vec<Point2> = lp.iter().map(|&v| vertices[v]).collect();
    let n = pts.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return Err(VemError::NonSimplePolygon {
                    cell,
                    reason: "self-intersecting boundary",
                });
            }
        }
    }
    let area = signed_area(&pts);
    let scale = polygon_diameter(&pts);
    if area.abs() <= 1e-14 * scale * scale || !area.is_finite() {
        return Err(VemError::NonSimplePolygon {
            cell,
            reason: "zero area",
        });
    }
    let mut out = lp.to_vec();
    if area < 0.0 {
        out.reverse();
    }
    Ok(out)
}

impl PolyMesh {
    /// Assembles a mesh from counter-clockwise (or clockwise) loops. `tag_of`
    /// is consulted for every boundary edge with its endpoints and midpoint.
    pub(crate) fn from_loops(
        vertices: Vec<Point2>,
        loops: &[Vec<usize>],
        mut tag_of: impl FnMut(usize, usize, Point2) -> BoundaryTag,
    ) -> Result<Self> {
        let mut cells = Vec::with_capacity(loops.len());
        let mut edges: Vec<MeshEdge> = Vec::new();
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut vertex_cells = vec![Vec::new(); vertices.len()];

        for (c, lp) in loops.iter().enumerate() {
            let lp = normalize_loop(c, lp, &vertices)?;
            let n = lp.len();
            let mut cell_edges = Vec::with_capacity(n);
            let mut aligned = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (lp[i], lp[(i + 1) % n]);
                let key = (a.min(b), a.max(b));
                match edge_index.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.cells[1].is_some() || edge.vertices != [b, a] {
                            return Err(VemError::InconsistentSharedEdge { a, b });
                        }
                        edge.cells[1] = Some(c);
                        cell_edges.push(e);
                        aligned.push(false);
                    }
                    None => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let length = pa.dist(pb);
                        let tangent = (pb - pa) * (1.0 / length);
                        edges.push(MeshEdge {
                            vertices: [a, b],
                            tag: BoundaryTag::Interior,
                            cells: [Some(c), None],
                            length,
                            normal: Point2::new(tangent.y, -tangent.x),
                            tangent,
                        });
                        edge_index.insert(key, edges.len() - 1);
                        cell_edges.push(edges.len() - 1);
                        aligned.push(true);
                    }
                }
                vertex_cells[a].push(c);
            }
            let pts: Vec<Point2> = lp.iter().map(|&v| vertices[v]).collect();
            cells.push(PolyCell {
                area: signed_area(&pts),
                centroid: polygon_centroid(&pts),
                diameter: polygon_diameter(&pts),
                vertices: lp,
                edges: cell_edges,
                aligned,
            });
        }

        for edge in edges.iter_mut().filter(|e| e.cells[1].is_none()) {
            let [a, b] = edge.vertices;
            let tag = tag_of(a, b, vertices[a].midpoint(vertices[b]));
            if tag == BoundaryTag::Interior {
                return Err(VemError::UntaggedBoundaryEdge { a, b });
            }
            edge.tag = tag;
        }

        Ok(Self {
            vertices,
            edges,
            cells,
            vertex_cells,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn edges(&self) -> &[MeshEdge] {
        &self.edges
    }

    pub fn cells(&self) -> &[PolyCell] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &PolyCell {
        &self.cells[c]
    }

    pub fn edge(&self, e: usize) -> &MeshEdge {
        &self.edges[e]
    }

    pub fn vertex(&self, v: usize) -> Point2 {
        self.vertices[v]
    }

    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point2> {
        self.cells[c]
            .vertices
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Largest cell diameter.
    pub fn max_diameter(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max)
    }

    /// Same cells, boundary edges re-tagged by `classifier` on their midpoints.
    pub fn retagged(&self, classifier: impl Fn(Point2) -> BoundaryTag) -> Result<Self> {
        let loops: Vec<Vec<usize>> = self.cells.iter().map(|c| c.vertices.clone()).collect();
        Self::from_loops(self.vertices.clone(), &loops, |_, _, m| classifier(m))
    }

    /// Boundary tag lookup for an existing vertex pair; used when re-deriving
    /// meshes whose boundary edges are inherited rather than classified.
    pub(crate) fn boundary_tags(&self) -> HashMap<(usize, usize), BoundaryTag> {
        self.edges
            .iter()
            .filter(|e| e.tag.is_boundary())
            .map(|e| {
                let [a, b] = e.vertices;
                ((a.min(b), a.max(b)), e.tag)
            })
            .collect()
    }
}

/// Builds a mesh from raw vertices and cell loops, tagging each boundary edge
/// by evaluating `boundary_spec` at its midpoint.
pub fn build_mesh(
    vertices: Vec<Point2>,
    cells: &[Vec<usize>],
    boundary_spec: impl Fn(Point2) -> BoundaryTag,
) -> Result<PolyMesh> {
    if let Some(v) = vertices.iter().position(|p| !p.is_finite()) {
        return Err(VemError::NonSimplePolygon {
            cell: v,
            reason: "non-finite vertex coordinate",
        });
    }
    PolyMesh::from_loops(vertices, cells, |_, _, m| boundary_spec(m))
}
