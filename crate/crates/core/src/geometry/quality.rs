use super::{refine::is_convex_loop, Point2, PolyMesh};

/// Clips a convex polygon to the half-plane `{x : (x - m) . d <= 0}`.
pub(crate) fn clip_halfplane(poly: &[Point2], m: Point2, d: Point2) -> Vec<Point2> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let sp = (p - m).dot(d);
        let sq = (q - m).dot(d);
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// Kernel of a counter-clockwise polygon (the set of points from which the
/// whole polygon is visible), computed by half-plane intersection. Empty if
/// the polygon is not star-shaped.
pub fn polygon_kernel(pts: &[Point2]) -> Vec<Point2> {
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let mut k = vec![lo, Point2::new(hi.x, lo.y), hi, Point2::new(lo.x, hi.y)];
    let n = pts.len();
    for i in 0..n {
        let t = pts[(i + 1) % n] - pts[i];
        k = clip_halfplane(&k, pts[i], Point2::new(t.y, -t.x));
        if k.len() < 3 {
            return Vec::new();
        }
    }
    k
}

/// Largest disk inscribed in a convex counter-clockwise polygon, as
/// `(centre, radius)`. The optimum of this small LP sits where three edge
/// lines are active, so all triples are enumerated.
pub fn chebyshev_disk(pts: &[Point2]) -> Option<(Point2, f64)> {
    let n = pts.len();
    let lines: Vec<(Point2, f64)> = (0..n)
        .filter_map(|i| {
            let t = pts[(i + 1) % n] - pts[i];
            let len = t.norm();
            (len > 0.0).then(|| {
                let nrm = Point2::new(t.y / len, -t.x / len);
                (nrm, nrm.dot(pts[i]))
            })
        })
        .collect();
    let scale = super::polygon_diameter(pts);
    let mut best: Option<(Point2, f64)> = None;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            for k in j + 1..lines.len() {
                let m = nalgebra::Matrix3::new(
                    lines[i].0.x, lines[i].0.y, 1.0, lines[j].0.x, lines[j].0.y, 1.0, lines[k].0.x,
                    lines[k].0.y, 1.0,
                );
                if m.determinant().abs() < 1e-12 {
                    continue;
                }
                let Some(sol) = m.lu().solve(&nalgebra::Vector3::new(lines[i].1, lines[j].1, lines[k].1))
                else {
                    continue;
                };
                let (z, r) = (Point2::new(sol[0], sol[1]), sol[2]);
                if r <= 0.0 {
                    continue;
                }
                let feasible = lines
                    .iter()
                    .all(|(nrm, c)| nrm.dot(z) + r <= c + 1e-10 * scale);
                if feasible && best.is_none_or(|(_, br)| r > br) {
                    best = Some((z, r));
                }
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellQuality {
    pub cell: usize,
    pub diameter: f64,
    /// Radius of the largest disk the cell is star-shaped with respect to.
    pub star_radius: f64,
    pub min_edge: f64,
    pub convex: bool,
    /// Star-shaped w.r.t. a disk of radius >= rho h_E.
    pub m1: bool,
    /// Every edge at least rho h_E long.
    pub m2: bool,
}

impl CellQuality {
    pub fn passes(&self) -> bool {
        self.m1 && self.m2
    }

    /// Largest rho for which this cell satisfies both shape conditions.
    pub fn rho(&self) -> f64 {
        (self.star_radius / self.diameter).min(self.min_edge / self.diameter)
    }
}

/// Reports, cell by cell, the star-shapedness (w.r.t. a disk of radius
/// `rho h_E`) and minimum edge length (`>= rho h_E`) conditions.
pub fn check_mesh_assumptions(mesh: &PolyMesh, rho: f64) -> Vec<CellQuality> {
    (0..mesh.num_cells())
        .map(|c| {
            let pts = mesh.cell_points(c);
            let cell = mesh.cell(c);
            let convex = is_convex_loop(&pts);
            let kernel = if convex { pts.clone() } else { polygon_kernel(&pts) };
            let star_radius = if kernel.len() >= 3 {
                chebyshev_disk(&kernel).map_or(0.0, |(_, r)| r)
            } else {
                0.0
            };
            let min_edge = cell
                .edges
                .iter()
                .map(|&e| mesh.edge(e).length)
                .fold(f64::INFINITY, f64::min);
            CellQuality {
                cell: c,
                diameter: cell.diameter,
                star_radius,
                min_edge,
                convex,
                m1: star_radius >= rho * cell.diameter,
                m2: min_edge >= rho * cell.diameter,
            }
        })
        .collect()
}
