//! Bulk marking and the solve, estimate, mark, refine loop.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::estimator::{
    effectivity, global_estimate, local_indicators, true_error, EstimatorOptions, ExactSolution, GlobalEstimate,
    LocalIndicators, TrueError,
};
use crate::geometry::{refine_cells, Point2, PolyMesh};
use crate::solver::{
    picard_solve, Discretization, ModelParameters, Orders, PicardConfig, PicardTrace, ProblemData, SystemState,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkingConfig {
    pub delta: f64,
}

impl Default for MarkingConfig {
    fn default() -> Self {
        Self { delta: 0.5 }
    }
}

/// Cells in greedy order: descending value, ties broken by ascending id.
fn greedy_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Shortest greedy prefix with `sum >= delta * total`, returned in greedy
/// order. Sums are accumulated in exactly the order used by
/// [`bulk_holds`], so the returned set passes that check bit for bit.
pub fn doerfler_mark_values(values: &[f64], delta: f64) -> Vec<usize> {
    if delta <= 0.0 || values.is_empty() {
        return Vec::new();
    }
    let target = delta.min(1.0) * values.iter().sum::<f64>();
    let mut marked = Vec::new();
    let mut acc = 0.0;
    for c in greedy_order(values) {
        if acc >= target {
            break;
        }
        acc += values[c];
        marked.push(c);
    }
    marked
}

pub fn doerfler_mark(locals: &[LocalIndicators], delta: f64) -> Vec<usize> {
    let v: Vec<f64> = locals.iter().map(|l| l.theta_sq).collect();
    doerfler_mark_values(&v, delta)
}

/// `delta * sum(values) <= sum(values[marked])`, summing `marked` in order.
pub fn bulk_holds(values: &[f64], marked: &[usize], delta: f64) -> bool {
    let total: f64 = values.iter().sum();
    let mut acc = 0.0;
    for &c in marked {
        acc += values[c];
    }
    delta.min(1.0) * total <= acc
}

/// Dropping the last (smallest) marked cell breaks the bulk property, and
/// no unmarked cell carries more than a marked one.
pub fn is_minimal(values: &[f64], marked: &[usize], delta: f64) -> bool {
    if marked.is_empty() {
        return delta <= 0.0 || bulk_holds(values, marked, delta);
    }
    let shorter = &marked[..marked.len() - 1];
    let smallest = marked.iter().map(|&c| values[c]).fold(f64::INFINITY, f64::min);
    let mut is_marked = vec![false; values.len()];
    for &c in marked {
        is_marked[c] = true;
    }
    let dominated = values
        .iter()
        .enumerate()
        .all(|(c, &v)| is_marked[c] || v <= smallest);
    !bulk_holds(values, shorter, delta) && dominated
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementMode {
    Uniform,
    Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub orders: Orders,
    pub mode: RefinementMode,
    pub max_levels: usize,
    pub dof_budget: Option<usize>,
    pub marking: MarkingConfig,
    pub picard: PicardConfig,
    #[serde(default)]
    pub estimator: EstimatorOptions,
}

/// Everything measured on one mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub dofs: usize,
    pub cells: usize,
    pub err: Option<f64>,
    pub true_error: Option<TrueError>,
    pub estimate: GlobalEstimate,
    pub picard: PicardTrace,
    /// Cells marked for the next level, in greedy order.
    pub marked: Vec<usize>,
    pub marked_centroids: Vec<Point2>,
    pub bulk_ok: bool,
    pub minimal_ok: bool,
}

impl LevelRecord {
    pub fn theta(&self) -> f64 {
        self.estimate.theta()
    }

    pub fn eff(&self) -> Option<f64> {
        self.estimate.effectivity
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdaptTrace {
    pub levels: Vec<LevelRecord>,
}

/// Output of one solve and estimate on a fixed mesh.
pub struct LevelSolution {
    pub disc: Discretization,
    pub state: SystemState,
    pub locals: Vec<LocalIndicators>,
    pub record: LevelRecord,
}

#[allow(clippy::too_many_arguments)]
pub fn solve_level(
    mesh: PolyMesh,
    level: usize,
    params: &ModelParameters,
    data: &ProblemData,
    exact: Option<&ExactSolution>,
    orders: Orders,
    picard: &PicardConfig,
    options: EstimatorOptions,
) -> Result<LevelSolution> {
    let disc = Discretization::new(mesh, orders)?;
    let (state, trace) = picard_solve(&disc, params, data, picard)?;
    let locals = local_indicators(&disc, params, data, &state, options)?;
    let mut estimate = global_estimate(&locals, params);
    let te = match exact {
        Some(ex) => Some(true_error(&disc, params, &state, Some(ex))?),
        None => None,
    };
    let err = te.map(|t| t.total());
    if let Some(e) = err {
        estimate.effectivity = effectivity(estimate.theta(), e).ok();
    }
    let record = LevelRecord {
        level,
        dofs: disc.total_dofs(),
        cells: disc.num_cells(),
        err,
        true_error: te,
        estimate,
        picard: trace,
        marked: Vec::new(),
        marked_centroids: Vec::new(),
        bulk_ok: true,
        minimal_ok: true,
    };
    Ok(LevelSolution {
        disc,
        state,
        locals,
        record,
    })
}

/// Solve, estimate, mark, refine. Uniform mode refines every cell. The
/// observer sees each level after marking.
#[allow(clippy::too_many_arguments)]
pub fn adapt_loop(
    initial: PolyMesh,
    params: &ModelParameters,
    data: &ProblemData,
    exact: Option<&ExactSolution>,
    config: &AdaptConfig,
    mut observer: impl FnMut(&LevelSolution) -> Result<()>,
) -> Result<AdaptTrace> {
    let mut trace = AdaptTrace::default();
    let mut mesh = initial;
    for level in 0..config.max_levels.max(1) {
        let mut sol = solve_level(mesh, level, params, data, exact, config.orders, &config.picard, config.estimator)?;
        let last = level + 1 >= config.max_levels.max(1)
            || config.dof_budget.is_some_and(|b| sol.record.dofs >= b);
        let marked = if last {
            Vec::new()
        } else {
            match config.mode {
                RefinementMode::Uniform => (0..sol.disc.num_cells()).collect(),
                RefinementMode::Adaptive => {
                    let m = doerfler_mark(&sol.locals, config.marking.delta);
                    let v: Vec<f64> = sol.locals.iter().map(|l| l.theta_sq).collect();
                    sol.record.bulk_ok = bulk_holds(&v, &m, config.marking.delta);
                    sol.record.minimal_ok = is_minimal(&v, &m, config.marking.delta);
                    m
                }
            }
        };
        sol.record.marked_centroids = marked.iter().map(|&c| sol.disc.mesh.cell(c).centroid).collect();
        sol.record.marked = marked;
        log::info!(
            "level {level}: dofs {} theta {:.4e} err {:?} marked {}",
            sol.record.dofs,
            sol.record.theta(),
            sol.record.err,
            sol.record.marked.len()
        );
        observer(&sol)?;
        let done = sol.record.marked.is_empty();
        let LevelSolution { disc, record, .. } = sol;
        trace.levels.push(record);
        if done {
            break;
        }
        mesh = refine_cells(&disc.mesh, &trace.levels.last().expect("pushed").marked)?;
    }
    if trace.levels.is_empty() {
        return Err(VemError::Config("no levels requested".into()));
    }
    Ok(trace)
}
