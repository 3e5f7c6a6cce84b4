use std::collections::HashMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::quality::clip_halfplane;
use super::{build_mesh, polygon_centroid, signed_area, BoundaryTag, Point2, PolyMesh};
use crate::error::{Result, VemError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFamily {
    /// n x n quadrilaterals on (0,1)^2.
    Square,
    /// Every square of the n x n grid split by its diagonals into 4 triangles.
    Crossed,
    /// Lloyd-relaxed Voronoi tessellation of (0,1)^2 with n^2 seeds.
    Voronoi,
    /// (-1,1)^2 minus [0,1) x (-1,0], in 3 n^2 squares of side 1/n.
    LShape,
}

impl MeshFamily {
    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::Square => "square",
            MeshFamily::Crossed => "crossed",
            MeshFamily::Voronoi => "voronoi",
            MeshFamily::LShape => "l_shape",
        }
    }

    /// Boundary split used when the family is generated without an explicit
    /// classifier: unit-square families take Dirichlet on {x = 0 or y = 0},
    /// the L-shape takes Neumann on {x = -1 or y = 1}.
    pub fn default_boundary(self) -> fn(Point2) -> BoundaryTag {
        match self {
            MeshFamily::LShape => l_shape_boundary,
            _ => unit_square_boundary,
        }
    }

    pub fn domain_area(self) -> f64 {
        match self {
            MeshFamily::LShape => 3.0,
            _ => 1.0,
        }
    }
}

impl FromStr for MeshFamily {
    type Err = VemError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(MeshFamily::Square),
            "crossed" => Ok(MeshFamily::Crossed),
            "voronoi" => Ok(MeshFamily::Voronoi),
            "l_shape" | "lshape" | "L" => Ok(MeshFamily::LShape),
            other => Err(VemError::UnsupportedFamily(other.to_string())),
        }
    }
}

const BOUNDARY_TOL: f64 = 1e-10;

pub fn unit_square_boundary(p: Point2) -> BoundaryTag {
    if p.x.abs() < BOUNDARY_TOL || p.y.abs() < BOUNDARY_TOL {
        BoundaryTag::Dirichlet
    } else {
        BoundaryTag::Neumann
    }
}

pub fn l_shape_boundary(p: Point2) -> BoundaryTag {
    if (p.x + 1.0).abs() < BOUNDARY_TOL || (p.y - 1.0).abs() < BOUNDARY_TOL {
        BoundaryTag::Neumann
    } else {
        BoundaryTag::Dirichlet
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VoronoiConfig {
    pub seed: u64,
    pub lloyd_iterations: usize,
}

impl Default for VoronoiConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_917,
            lloyd_iterations: 50,
        }
    }
}

/// Generates one of the built-in mesh families at resolution `n`, tagged
/// with the family's default boundary split.
pub fn generate_mesh(family: MeshFamily, n: usize) -> Result<PolyMesh> {
    let n = n.max(1);
    match family {
        MeshFamily::Square => structured(n, false),
        MeshFamily::Crossed => structured(n, true),
        MeshFamily::LShape => l_shape(n),
        MeshFamily::Voronoi => generate_voronoi(n, &VoronoiConfig::default()),
    }
}

fn structured(n: usize, crossed: bool) -> Result<PolyMesh> {
    let h = 1.0 / n as f64;
    let mut vertices: Vec<Point2> = (0..=n)
        .flat_map(|j| (0..=n).map(move |i| Point2::new(i as f64 * h, j as f64 * h)))
        .collect();
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut loops = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let q = [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)];
            if crossed {
                let c = vertices.len();
                vertices.push(Point2::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h));
                for k in 0..4 {
                    loops.push(vec![q[k], q[(k + 1) % 4], c]);
                }
            } else {
                loops.push(q.to_vec());
            }
        }
    }
    build_mesh(vertices, &loops, unit_square_boundary)
}

fn l_shape(n: usize) -> Result<PolyMesh> {
    let h = 1.0 / n as f64;
    let m = 2 * n;
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut loops = Vec::new();
    for j in 0..m {
        for i in 0..m {
            let cx = -1.0 + (i as f64 + 0.5) * h;
            let cy = -1.0 + (j as f64 + 0.5) * h;
            if cx > 0.0 && cy < 0.0 {
                continue;
            }
            let lp = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
                .iter()
                .map(|&(a, b)| {
                    *index.entry((a, b)).or_insert_with(|| {
                        vertices.push(Point2::new(-1.0 + a as f64 * h, -1.0 + b as f64 * h));
                        vertices.len() - 1
                    })
                })
                .collect();
            loops.push(lp);
        }
    }
    build_mesh(vertices, &loops, l_shape_boundary)
}

struct SeedGrid {
    bins: usize,
    buckets: Vec<Vec<usize>>,
}

impl SeedGrid {
    fn new(seeds: &[Point2]) -> Self {
        let bins = ((seeds.len() as f64).sqrt().ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); bins * bins];
        for (k, s) in seeds.iter().enumerate() {
            let (i, j) = Self::bin_of(bins, *s);
            buckets[j * bins + i].push(k);
        }
        Self { bins, buckets }
    }

    fn bin_of(bins: usize, p: Point2) -> (usize, usize) {
        let f = |t: f64| ((t * bins as f64) as isize).clamp(0, bins as isize - 1) as usize;
        (f(p.x), f(p.y))
    }
}

/// Voronoi cells of `seeds` clipped to the unit square.
fn voronoi_cells(seeds: &[Point2]) -> Vec<Vec<Point2>> {
    let grid = SeedGrid::new(seeds);
    let bin = 1.0 / grid.bins as f64;
    seeds
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let mut poly = vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ];
            let (bi, bj) = SeedGrid::bin_of(grid.bins, s);
            for ring in 0..=grid.bins as isize {
                let reach = poly.iter().map(|p| p.dist(s)).fold(0.0, f64::max);
                if (ring - 1).max(0) as f64 * bin > 2.0 * reach {
                    break;
                }
                for dj in -ring..=ring {
                    for di in -ring..=ring {
                        if di.abs() != ring && dj.abs() != ring {
                            continue;
                        }
                        let (i, j) = (bi as isize + di, bj as isize + dj);
                        if i < 0 || j < 0 || i >= grid.bins as isize || j >= grid.bins as isize {
                            continue;
                        }
                        for &o in &grid.buckets[j as usize * grid.bins + i as usize] {
                            if o != k {
                                let t = seeds[o];
                                poly = clip_halfplane(&poly, s.midpoint(t), t - s);
                            }
                        }
                    }
                }
            }
            poly
        })
        .collect()
}

/// Welds points closer than `tol` into a single vertex.
struct Welder {
    tol: f64,
    bins: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Point2>,
}

impl Welder {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            bins: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn insert(&mut self, p: Point2) -> usize {
        let key = ((p.x / self.tol).floor() as i64, (p.y / self.tol).floor() as i64);
        for dj in -1..=1 {
            for di in -1..=1 {
                if let Some(ids) = self.bins.get(&(key.0 + di, key.1 + dj)) {
                    if let Some(&id) = ids.iter().find(|&&id| self.points[id].dist(p) <= self.tol) {
                        return id;
                    }
                }
            }
        }
        self.points.push(p);
        let id = self.points.len() - 1;
        self.bins.entry(key).or_default().push(id);
        id
    }
}

/// Lloyd-relaxed Voronoi mesh of the unit square with `n^2` seeds drawn from
/// a ChaCha8 stream seeded by `cfg.seed`.
pub fn generate_voronoi(n: usize, cfg: &VoronoiConfig) -> Result<PolyMesh> {
    let count = n.max(1) * n.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut seeds: Vec<Point2> = (0..count)
        .map(|_| Point2::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
        .collect();
    for _ in 0..cfg.lloyd_iterations {
        seeds = voronoi_cells(&seeds)
            .iter()
            .zip(&seeds)
            .map(|(poly, &s)| {
                if poly.len() >= 3 && signed_area(poly) > 0.0 {
                    polygon_centroid(poly)
                } else {
                    s
                }
            })
            .collect();
    }
    let cells = voronoi_cells(&seeds);
    let mut welder = Welder::new(1e-6 / n.max(1) as f64);
    let loops: Vec<Vec<usize>> = cells
        .iter()
        .map(|poly| {
            let mut lp: Vec<usize> = poly.iter().map(|&p| welder.insert(p)).collect();
            lp.dedup();
            while lp.len() > 1 && lp.first() == lp.last() {
                lp.pop();
            }
            lp
        })
        .filter(|lp| lp.len() >= 3)
        .collect();
    build_mesh(welder.points, &loops, unit_square_boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_family_counts() {
        let m = generate_mesh(MeshFamily::Square, 2).unwrap();
        assert_eq!(m.num_cells(), 4);
        assert_eq!(m.num_vertices(), 9);
    }

    #[test]
    fn crossed_family_one() {
        let m = generate_mesh(MeshFamily::Crossed, 1).unwrap();
        assert_eq!(m.num_cells(), 4);
        for c in m.cells() {
            assert_eq!(c.len(), 3);
            assert!(c.vertices.iter().any(|&v| m.vertex(v) == Point2::new(0.5, 0.5)));
        }
    }

    #[test]
    fn l_shape_one_is_three_unit_squares() {
        let m = generate_mesh(MeshFamily::LShape, 1).unwrap();
        assert_eq!(m.num_cells(), 3);
        assert!((m.total_area() - 3.0).abs() < 1e-14);
        // the removed quadrant [0,1) x (-1,0] holds no centroid
        for c in m.cells() {
            assert!(!(c.centroid.x > 0.0 && c.centroid.y < 0.0));
        }
        let neumann = m.edges().iter().filter(|e| e.tag == BoundaryTag::Neumann).count();
        assert_eq!(neumann, 4);
    }

    #[test]
    fn voronoi_tiles_unit_square() {
        let m = generate_mesh(MeshFamily::Voronoi, 4).unwrap();
        assert_eq!(m.num_cells(), 16);
        assert!((m.total_area() - 1.0).abs() < 1e-10);
        for e in m.edges() {
            if !e.is_interior() {
                let mid = m.vertex(e.vertices[0]).midpoint(m.vertex(e.vertices[1]));
                let on_boundary = [mid.x, mid.y, 1.0 - mid.x, 1.0 - mid.y]
                    .iter()
                    .any(|t| t.abs() < 1e-9);
                assert!(on_boundary, "dangling edge at {mid:?}");
            }
        }
    }

    #[test]
    fn voronoi_is_deterministic() {
        let a = generate_mesh(MeshFamily::Voronoi, 3).unwrap();
        let b = generate_mesh(MeshFamily::Voronoi, 3).unwrap();
        assert_eq!(a.vertices(), b.vertices());
    }

    #[test]
    fn unknown_family() {
        assert!(matches!(
            "hexagonal".parse::<MeshFamily>(),
            Err(VemError::UnsupportedFamily(_))
        ));
    }
}
