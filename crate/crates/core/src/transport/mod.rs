//! Transport of interior measures to the boundary: the closed form through
//! the distance field, an independent exact LP, the maximizing source
//! measure, and transport rays.

pub mod network_simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{inradius, projection_of_node, point_segment_distance, DistanceField, DomainGrid, Point};
use crate::measures::{DiscreteMeasure, MeasureError, Support};
use crate::stencil::{gradient, norm2, ScalarField};
use network_simplex::{solve_transport, SimplexError};

/// Largest dense cost matrix the LP accepts.
pub const MAX_COST_ENTRIES: usize = 1_000_000;
/// Default relative mass below which a node starts no ray.
pub const DEFAULT_RAY_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("source and target masses do not match: {0} vs {1}")]
    InfeasibleMarginals(f64, f64),
    #[error("LP did not converge: {0}")]
    NonConvergence(String),
    #[error("{0} cost entries exceed the cap of {MAX_COST_ENTRIES}; subsample the boundary")]
    TooLarge(usize),
    #[error("no rays")]
    EmptyRaySet,
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl From<SimplexError> for TransportError {
    fn from(e: SimplexError) -> Self {
        match e {
            SimplexError::Unbalanced { supply, demand } => TransportError::InfeasibleMarginals(supply, demand),
            SimplexError::PivotLimit(_) | SimplexError::Infeasible(_) => TransportError::NonConvergence(e.to_string()),
            SimplexError::InvalidInput(m) => TransportError::InvalidInput(m),
        }
    }
}

/// One mass transfer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    /// Index into the source measure (node index for node measures).
    pub source: usize,
    /// Index into the target point list.
    pub target: usize,
    pub mass: f64,
}

/// Dual potentials with their optimality certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// One potential per source entry.
    pub u: Vec<f64>,
    /// One potential per target point (zero for a free target marginal).
    pub v: Vec<f64>,
    /// `max(u_i + v_j - c_ij)`, positive if dual infeasible.
    pub max_dual_violation: f64,
    /// `max |u_i + v_j - c_ij|` over the support.
    pub max_support_slack: f64,
    /// `|cost - dual objective|`.
    pub duality_gap: f64,
}

impl Certificate {
    /// Complementary slackness and strong duality within `rel` of `cost`.
    pub fn passes(&self, cost: f64, rel: f64) -> bool {
        let tol = rel * cost.max(f64::MIN_POSITIVE);
        self.max_dual_violation <= tol && self.max_support_slack <= tol && self.duality_gap <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub entries: Vec<PlanEntry>,
    pub source_marginal: DiscreteMeasure,
    /// Mass received per target point.
    pub target_marginal: Vec<f64>,
    pub targets: Vec<Point>,
    /// `Σ mass · |x_source - y_target|`.
    pub cost: f64,
    pub certificate: Option<Certificate>,
}

/// Transport cost of sending all of `f` to the boundary: each node's mass goes
/// to its nearest boundary sample (first in angular order among exact ties).
pub fn w1_to_boundary(
    f: &DiscreteMeasure,
    d: &DistanceField,
    grid: &DomainGrid,
) -> Result<(f64, TransportPlan), TransportError> {
    if f.support != Support::Nodes {
        return Err(TransportError::InvalidInput("source must live on nodes".into()));
    }
    if !(f.total_mass > 0.0) {
        return Err(MeasureError::DegenerateMeasure.into());
    }
    let nb = grid.boundary_points.len();
    let mut target_marginal = vec![0.0; nb];
    let mut entries = Vec::with_capacity(f.len());
    let mut value = 0.0;
    let mut cost = 0.0;
    for (k, (&node, &w)) in f.nodes.iter().zip(&f.weights).enumerate() {
        if w == 0.0 {
            continue;
        }
        let t = d.nearest[node];
        value += w * d.values[node];
        cost += w * grid.node_point(node).dist(grid.boundary_points[t]);
        target_marginal[t] += w;
        entries.push(PlanEntry { source: k, target: t, mass: w });
    }
    let plan = TransportPlan {
        entries,
        source_marginal: f.clone(),
        target_marginal,
        targets: grid.boundary_points.clone(),
        cost,
        certificate: None,
    };
    Ok((value, plan))
}

/// Exact discrete Kantorovich problem between point masses, with a fixed or
/// free target marginal, solved by network simplex and certified by its
/// dual potentials.
pub fn solve_point_ot(
    sources: &[Point],
    source_weights: &[f64],
    targets: &[Point],
    target_marginal: Option<&[f64]>,
) -> Result<(Vec<PlanEntry>, Vec<f64>, f64, Certificate), TransportError> {
    if sources.len() != source_weights.len() {
        return Err(TransportError::InvalidInput("source points and weights differ in length".into()));
    }
    let entries = sources.len() * targets.len();
    if entries > MAX_COST_ENTRIES {
        return Err(TransportError::TooLarge(entries));
    }
    let n = targets.len();
    let costs: Vec<f64> = sources.iter().flat_map(|x| targets.iter().map(move |y| x.dist(*y))).collect();
    let sol = solve_transport(&costs, source_weights, target_marginal, n)?;
    let mut plan = Vec::new();
    for (i, row) in sol.flows.chunks(n).enumerate() {
        for (j, &m) in row.iter().enumerate() {
            if m > 0.0 {
                plan.push(PlanEntry { source: i, target: j, mass: m });
            }
        }
    }
    let cost: f64 = plan.iter().map(|e| e.mass * costs[e.source * n + e.target]).sum();
    let mut max_dual_violation = f64::NEG_INFINITY;
    for (i, &ui) in sol.u.iter().enumerate() {
        for (j, &vj) in sol.v.iter().enumerate() {
            max_dual_violation = max_dual_violation.max(ui + vj - costs[i * n + j]);
        }
    }
    let max_support_slack =
        plan.iter().map(|e| (sol.u[e.source] + sol.v[e.target] - costs[e.source * n + e.target]).abs()).fold(0.0, f64::max);
    let dual_obj: f64 = sol.u.iter().zip(source_weights).map(|(u, s)| u * s).sum::<f64>()
        + match target_marginal {
            Some(t) => sol.v.iter().zip(t).map(|(v, t)| v * t).sum::<f64>(),
            None => 0.0,
        };
    let cert = Certificate { u: sol.u, v: sol.v, max_dual_violation, max_support_slack, duality_gap: (cost - dual_obj).abs() };
    Ok((plan, sol.target_mass, cost, cert))
}

/// [`solve_point_ot`] for a node measure.
pub fn solve_discrete_ot(
    source: &DiscreteMeasure,
    grid: &DomainGrid,
    targets: &[Point],
    target_marginal: Option<&[f64]>,
) -> Result<TransportPlan, TransportError> {
    if let Some(t) = target_marginal {
        let tt: f64 = t.iter().sum();
        if (tt - source.total_mass).abs() > 1e-9 * tt.max(source.total_mass) {
            return Err(TransportError::InfeasibleMarginals(source.total_mass, tt));
        }
    }
    let pts: Vec<Point> = (0..source.len()).map(|k| source.location(grid, k)).collect();
    let (entries, target_mass, cost, cert) = solve_point_ot(&pts, &source.weights, targets, target_marginal)?;
    Ok(TransportPlan {
        entries,
        source_marginal: source.clone(),
        target_marginal: target_mass,
        targets: targets.to_vec(),
        cost,
        certificate: Some(cert),
    })
}

/// Maximum of the transport-to-boundary cost over probability measures on
/// the interior nodes, with its maximizer: the uniform probability on the
/// nodes where the distance field attains its maximum.
pub fn max_w1_over_sources(grid: &DomainGrid, d: &DistanceField) -> (f64, DiscreteMeasure) {
    let r1 = inradius(d, grid.h).r1;
    let nodes: Vec<usize> = (0..d.values.len()).filter(|&k| d.values[k] == r1).collect();
    let maximizer = DiscreteMeasure::uniform_on(nodes);
    let value = maximizer.nodes.iter().zip(&maximizer.weights).map(|(&k, w)| w * d.values[k]).sum();
    (value, maximizer)
}

/// Segment from a source node to one of its nearest boundary samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub source: usize,
    /// Boundary sample index.
    pub target: usize,
    /// Nodes within `h/2` of the segment, ordered from source to boundary.
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaySet {
    pub rays: Vec<Ray>,
}

/// One ray per (node with `f`-mass at least `mass_threshold · max mass`,
/// tied nearest boundary sample).
pub fn transport_rays(f: &DiscreteMeasure, grid: &DomainGrid, mass_threshold: f64) -> Result<RaySet, TransportError> {
    if f.is_empty() || f.support != Support::Nodes {
        return Err(TransportError::InvalidInput("rays need a nonempty node measure".into()));
    }
    let wmax = f.weights.iter().copied().fold(0.0, f64::max);
    if !(wmax > 0.0) {
        return Err(MeasureError::DegenerateMeasure.into());
    }
    let mut rays = Vec::new();
    for (&node, &w) in f.nodes.iter().zip(&f.weights) {
        if w < mass_threshold * wmax {
            continue;
        }
        for t in projection_of_node(grid, node) {
            rays.push(Ray { source: node, target: t, nodes: rasterize(grid, grid.node_point(node), grid.boundary_points[t]) });
        }
    }
    Ok(RaySet { rays })
}

/// Interior nodes within `h/2` of `[x, y]`, ordered by their position along it.
fn rasterize(grid: &DomainGrid, x: Point, y: Point) -> Vec<usize> {
    let h = grid.h;
    let len = x.dist(y);
    let steps = (len / (h / 2.0)).ceil().max(1.0) as usize;
    let mut found: Vec<(f64, usize)> = Vec::new();
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let q = Point::new(x.x + t * (y.x - x.x), x.y + t * (y.y - x.y));
        let Some(c) = grid.nearest_node(q) else { continue };
        let c = grid.interior_nodes()[c];
        for l in std::iter::once(c).chain(grid.lattice_neighbors(c)).chain(diagonals(grid, c)) {
            let Some(k) = grid.interior_index(l) else { continue };
            let z = grid.node_point(k);
            if point_segment_distance(z, x, y) <= h / 2.0 + 1e-12 * h {
                let along = if len > 0.0 { ((z.x - x.x) * (y.x - x.x) + (z.y - x.y) * (y.y - x.y)) / len } else { 0.0 };
                found.push((along, k));
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut seen = std::collections::HashSet::new();
    found.into_iter().filter(|e| seen.insert(e.1)).map(|e| e.1).collect()
}

fn diagonals(grid: &DomainGrid, l: usize) -> impl Iterator<Item = usize> + '_ {
    let (i, j) = ((l % grid.nx) as isize, (l / grid.nx) as isize);
    [(-1, -1), (1, -1), (-1, 1), (1, 1)].into_iter().filter_map(move |(di, dj)| {
        let (a, b) = (i + di, j + dj);
        (a >= 0 && b >= 0 && (a as usize) < grid.nx && (b as usize) < grid.ny).then(|| b as usize * grid.nx + a as usize)
    })
}

/// `max |u(z) - lambda_inf · |z - y||` over all ray nodes `z`, with `y` the
/// ray's boundary endpoint.
pub fn ray_profile_check(u: &ScalarField, rays: &RaySet, lambda_inf: f64, grid: &DomainGrid) -> Result<f64, TransportError> {
    if rays.rays.is_empty() {
        return Err(TransportError::EmptyRaySet);
    }
    let mut worst: f64 = 0.0;
    for r in &rays.rays {
        let y = grid.boundary_points[r.target];
        for &z in &r.nodes {
            worst = worst.max((u.values()[z] - lambda_inf * grid.node_point(z).dist(y)).abs());
        }
    }
    Ok(worst)
}

/// Largest increase of `u` between consecutive nodes of a ray, walking from
/// source to boundary (zero when `u` decreases along every ray).
pub fn ray_monotonicity_violation(u: &ScalarField, rays: &RaySet) -> f64 {
    rays.rays
        .iter()
        .flat_map(|r| r.nodes.windows(2).map(|w| u.values()[w[1]] - u.values()[w[0]]))
        .fold(0.0, f64::max)
}

/// Discrete Kantorovich check for an eigenfunction used as a transport
/// potential after division by `λ^{1/p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KantorovichCheck {
    /// Largest cell gradient of `u / λ^{1/p}` (zero extension included).
    pub lipschitz: f64,
    /// `⟨f, u⟩ / λ^{1/p}`.
    pub dual_value: f64,
    /// `W₁` of `f` to the boundary.
    pub w1: f64,
    /// `dual_value - w1`; at most discretization error.
    pub excess: f64,
}

pub fn kantorovich_check(u: &ScalarField, lambda_root: f64, f: &DiscreteMeasure, w1: f64, grid: &DomainGrid) -> KantorovichCheck {
    let lipschitz = gradient(grid, u.values()).into_iter().map(norm2).fold(0.0, f64::max) / lambda_root;
    let pairing: f64 = f.nodes.iter().zip(&f.weights).map(|(&k, w)| w * u.values()[k]).sum();
    let dual_value = pairing / lambda_root;
    KantorovichCheck { lipschitz, dual_value, w1, excess: dual_value - w1 }
}
