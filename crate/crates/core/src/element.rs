//! Per-cell geometric data shared by both virtual element spaces.

use crate::geometry::{Point2, PolyMesh};
use crate::polybasis::{edge_rule, lagrange_basis};

#[derive(Clone, Debug)]
pub struct EdgeFrame {
    pub a: Point2,
    pub b: Point2,
    pub length: f64,
    /// Outward unit normal of the cell.
    pub normal: Point2,
    /// Counter-clockwise unit tangent of the cell.
    pub tangent: Point2,
    pub global: usize,
    pub aligned: bool,
}

/// A sample on an edge with the Lagrange shape values of the edge nodes.
#[derive(Clone, Debug)]
pub struct EdgeSample {
    pub point: Point2,
    pub weight: f64,
    pub shape: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct CellFrame {
    pub cell: usize,
    pub points: Vec<Point2>,
    pub area: f64,
    pub centroid: Point2,
    pub h: f64,
    pub perimeter: f64,
    pub edges: Vec<EdgeFrame>,
}

impl CellFrame {
    pub fn new(mesh: &PolyMesh, c: usize) -> Self {
        let cell = mesh.cell(c);
        let points = mesh.cell_points(c);
        let n = points.len();
        let edges: Vec<EdgeFrame> = (0..n)
            .map(|i| {
                let (a, b) = (points[i], points[(i + 1) % n]);
                let e = mesh.edge(cell.edges[i]);
                let sgn = if cell.aligned[i] { 1.0 } else { -1.0 };
                EdgeFrame {
                    a,
                    b,
                    length: e.length,
                    normal: e.normal * sgn,
                    tangent: e.tangent * sgn,
                    global: cell.edges[i],
                    aligned: cell.aligned[i],
                }
            })
            .collect();
        Self {
            cell: c,
            perimeter: edges.iter().map(|e| e.length).sum(),
            points,
            area: cell.area,
            centroid: cell.centroid,
            h: cell.diameter,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Gauss samples on local edge `i`, exact to `degree`, carrying the
    /// Lagrange shapes of `nodes` (reference nodes in `[-1, 1]`, running
    /// along the counter-clockwise direction).
    pub fn edge_samples(&self, i: usize, nodes: &[f64], degree: usize) -> Vec<EdgeSample> {
        let e = &self.edges[i];
        let (rule, t) = edge_rule(e.a, e.b, degree);
        rule.points
            .iter()
            .zip(&rule.weights)
            .zip(&t)
            .map(|((&point, &weight), &t)| EdgeSample {
                point,
                weight,
                shape: lagrange_basis(nodes, t),
            })
            .collect()
    }

    /// Physical position of reference parameter `t` on local edge `i`.
    pub fn edge_point(&self, i: usize, t: f64) -> Point2 {
        let e = &self.edges[i];
        e.a + (e.b - e.a) * (0.5 * (t + 1.0))
    }
}
