//! Measures derived from an eigenpair, the primal and dual values of the
//! associated variational problems, and the discrete optimality surrogates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigensolver::{log_energy, residual_l1, EigenPair};
use crate::geometry::{DomainGrid, Point};
use crate::logsum::log_power_sum;
use crate::stencil::{gradient, neg_divergence, neg_divergence_lattice, norm2, Vector2};

/// Cells whose flux magnitude is at or below this carry no direction.
pub const DIRECTION_FLOOR: f64 = 1e-30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("measure has zero total mass")]
    DegenerateMeasure,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// What the indices of a measure refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Interior node indices.
    Nodes,
    /// Cell indices, located at cell centers.
    Cells,
}

/// Nonnegative weights (masses, cell area included) on nodes or cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub support: Support,
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
    pub total_mass: f64,
}

impl DiscreteMeasure {
    pub fn new(support: Support, nodes: Vec<usize>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if nodes.len() != weights.len() {
            return Err(MeasureError::InvalidWeights("nodes and weights differ in length".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(MeasureError::InvalidWeights(format!("weight {w} is negative or not finite")));
        }
        let total_mass = weights.iter().sum();
        Ok(Self { support, nodes, weights, total_mass })
    }

    /// Node measure from one weight per interior node; zero weights are kept.
    pub fn from_node_weights(weights: Vec<f64>) -> Result<Self, MeasureError> {
        Self::new(Support::Nodes, (0..weights.len()).collect(), weights)
    }

    pub fn point_mass(node: usize, mass: f64) -> Self {
        Self { support: Support::Nodes, nodes: vec![node], weights: vec![mass], total_mass: mass }
    }

    /// Uniform probability on the given nodes.
    pub fn uniform_on(nodes: Vec<usize>) -> Self {
        let w = 1.0 / nodes.len() as f64;
        let weights = vec![w; nodes.len()];
        Self { support: Support::Nodes, total_mass: weights.iter().sum(), nodes, weights }
    }

    /// Uniform probability on every interior node of `grid`.
    pub fn uniform(grid: &DomainGrid) -> Self {
        Self::uniform_on((0..grid.interior_count()).collect())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Rescaled to unit total mass.
    pub fn normalized(&self) -> Result<Self, MeasureError> {
        if !(self.total_mass > 0.0) {
            return Err(MeasureError::DegenerateMeasure);
        }
        let weights = self.weights.iter().map(|w| w / self.total_mass).collect();
        Self::new(self.support, self.nodes.clone(), weights)
    }

    pub fn location(&self, grid: &DomainGrid, k: usize) -> Point {
        match self.support {
            Support::Nodes => grid.node_point(self.nodes[k]),
            Support::Cells => grid.cell_center(self.nodes[k]),
        }
    }

    /// Dense per-node weights (node measures only).
    pub fn dense(&self, n: usize) -> Vec<f64> {
        debug_assert_eq!(self.support, Support::Nodes);
        let mut out = vec![0.0; n];
        for (&k, &w) in self.nodes.iter().zip(&self.weights) {
            out[k] += w;
        }
        out
    }
}

/// Mass-weighted vectors on cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorMeasure {
    pub cells: Vec<usize>,
    pub vectors: Vec<Vector2>,
}

impl VectorMeasure {
    pub fn magnitudes(&self) -> DiscreteMeasure {
        let weights: Vec<f64> = self.vectors.iter().map(|v| norm2(*v)).collect();
        DiscreteMeasure { support: Support::Cells, total_mass: weights.iter().sum(), nodes: self.cells.clone(), weights }
    }

    /// Unit directions, `None` where the magnitude is at or below
    /// [`DIRECTION_FLOOR`].
    pub fn directions(&self) -> Vec<Option<Vector2>> {
        self.vectors
            .iter()
            .map(|v| {
                let m = norm2(*v);
                (m > DIRECTION_FLOOR).then(|| [v[0] / m, v[1] / m])
            })
            .collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { cells: self.cells.clone(), vectors: self.vectors.iter().map(|v| [c * v[0], c * v[1]]).collect() }
    }

    /// Dense per-cell vectors.
    fn dense(&self, n: usize) -> Vec<Vector2> {
        let mut out = vec![[0.0, 0.0]; n];
        for (&c, v) in self.cells.iter().zip(&self.vectors) {
            out[c][0] += v[0];
            out[c][1] += v[1];
        }
        out
    }
}

/// Source density, flux and flux-magnitude weight of one eigenpair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedMeasures {
    /// `u^{p-1}` on nodes.
    pub f: DiscreteMeasure,
    /// `|∇u|^{p-2} ∇u / λ` on cells.
    pub sigma: VectorMeasure,
    /// `|∇u|^{p-2} / λ` on cells.
    pub mu: DiscreteMeasure,
}

pub fn derived_measures(pair: &EigenPair, grid: &DomainGrid) -> DerivedMeasures {
    let p = pair.p;
    let a = grid.cell_area;
    let u = pair.u.values();
    let fw: Vec<f64> = u.iter().map(|&v| if v > 0.0 { ((p - 1.0) * v.ln()).exp() * a } else { 0.0 }).collect();
    let grads = gradient(grid, u);
    let mut sig = Vec::with_capacity(grads.len());
    let mut muw = Vec::with_capacity(grads.len());
    for g in &grads {
        let m = norm2(*g);
        // |g|^{p-2}/λ, with 0^0 = 1 at p = 2
        let w = if m == 0.0 {
            if p == 2.0 {
                (-pair.log_lambda).exp()
            } else {
                0.0
            }
        } else {
            ((p - 2.0) * m.ln() - pair.log_lambda).exp()
        };
        muw.push(w * a);
        sig.push([g[0] * w * a, g[1] * w * a]);
    }
    let cells: Vec<usize> = (0..grads.len()).collect();
    DerivedMeasures {
        f: DiscreteMeasure::from_node_weights(fw).expect("eigenfunction is finite"),
        sigma: VectorMeasure { cells: cells.clone(), vectors: sig },
        mu: DiscreteMeasure { support: Support::Cells, total_mass: muw.iter().sum(), nodes: cells, weights: muw },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub p: f64,
    /// `(1/(pλ)) ‖∇u‖_p^p - ⟨f, u⟩`.
    pub primal_value: f64,
    /// `(1/p') λ^{p'-1} ∫ |σ|^{p'}`.
    pub dual_value: f64,
    /// `-1/p'`.
    pub analytic_value: f64,
    pub div_residual: f64,
    /// `⟨f, u⟩`.
    pub pairing: f64,
}

impl DualityReport {
    pub fn primal_gap(&self) -> f64 {
        (self.primal_value - self.analytic_value).abs()
    }

    pub fn dual_gap(&self) -> f64 {
        (self.dual_value + self.analytic_value).abs()
    }

    /// `|primal + dual|`.
    pub fn duality_gap(&self) -> f64 {
        (self.primal_value + self.dual_value).abs()
    }
}

pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

pub fn primal_dual_values(pair: &EigenPair, m: &DerivedMeasures, grid: &DomainGrid) -> DualityReport {
    let p = pair.p;
    let q = conjugate_exponent(p);
    let u = pair.u.values();
    let pairing: f64 = m.f.nodes.iter().zip(&m.f.weights).map(|(&k, w)| w * u[k]).sum();
    let energy_over_lambda = (log_energy(grid, u, p) - pair.log_lambda).exp();
    let primal_value = energy_over_lambda / p - pairing;
    // ∫|σ|^{q} with σ given as cell masses: Σ a (|σ_c|/a)^q
    let a = grid.cell_area;
    let log_int = a.ln() + log_power_sum(m.sigma.vectors.iter().map(|v| norm2(*v) / a), q);
    let dual_value = ((q - 1.0) * pair.log_lambda + log_int).exp() / q;
    DualityReport {
        p,
        primal_value,
        dual_value,
        analytic_value: -1.0 / q,
        div_residual: divergence_residual(&m.sigma, &m.f, grid),
        pairing,
    }
}

/// `Σ_nodes |(-div σ)_k - f_k|`, both sides as masses.
pub fn divergence_residual(sigma: &VectorMeasure, f: &DiscreteMeasure, grid: &DomainGrid) -> f64 {
    let div = neg_divergence(grid, &sigma.dense(grid.cells().len()));
    let fw = f.dense(grid.interior_count());
    div.iter().zip(&fw).map(|(a, b)| (a - b).abs()).sum()
}

/// The PDE residual evaluated through the same algebra as
/// [`divergence_residual`]; the two agree to rounding.
pub fn pde_residual_of(pair: &EigenPair, grid: &DomainGrid) -> f64 {
    residual_l1(grid, pair.u.values(), pair.p, pair.log_lambda)
}

/// Flux leaving the mask, as masses on the exterior lattice nodes adjacent
/// to it. Its total balances the source mass up to the divergence residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeasure {
    pub lattice_nodes: Vec<usize>,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub total_mass: f64,
}

pub fn boundary_measure(sigma: &VectorMeasure, grid: &DomainGrid) -> BoundaryMeasure {
    let div = neg_divergence_lattice(grid, &sigma.dense(grid.cells().len()));
    let mut out = BoundaryMeasure { lattice_nodes: vec![], points: vec![], weights: vec![], total_mass: 0.0 };
    for (l, &v) in div.iter().enumerate() {
        if !grid.interior_mask[l] && v != 0.0 {
            out.lattice_nodes.push(l);
            out.points.push(grid.lattice_point(l));
            out.weights.push(-v);
            out.total_mass -= v;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientConcentrationReport {
    pub p: f64,
    /// μ-weighted mean of `|∇u|`.
    pub mean_gradient: f64,
    /// μ-weighted standard deviation of `|∇u|`.
    pub std_gradient: f64,
    /// μ-weighted mean of `⟨σ/|σ|, ∇u/|∇u|⟩`.
    pub alignment: f64,
    /// μ-weighted RMS of `|∇u| - λ^{1/p}`, relative to `λ^{1/p}`.
    pub relative_deviation: f64,
}

pub fn optimality_surrogate(
    pair: &EigenPair,
    m: &DerivedMeasures,
    grid: &DomainGrid,
) -> Result<GradientConcentrationReport, MeasureError> {
    let grads = gradient(grid, pair.u.values());
    let dirs = m.sigma.directions();
    let root = pair.lambda_root();
    let (mut wsum, mut s1, mut s2, mut dev, mut align) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&c, &w), dir) in m.mu.nodes.iter().zip(&m.mu.weights).zip(&dirs) {
        let Some(xi) = dir else { continue };
        let g = grads[c];
        let mag = norm2(g);
        wsum += w;
        s1 += w * mag;
        s2 += w * mag * mag;
        dev += w * (mag - root) * (mag - root);
        align += w * (xi[0] * g[0] + xi[1] * g[1]) / mag;
    }
    if !(wsum > 0.0) {
        return Err(MeasureError::DegenerateMeasure);
    }
    let mean = s1 / wsum;
    Ok(GradientConcentrationReport {
        p: pair.p,
        mean_gradient: mean,
        std_gradient: (s2 / wsum - mean * mean).max(0.0).sqrt(),
        alignment: align / wsum,
        relative_deviation: (dev / wsum).sqrt() / root,
    })
}
