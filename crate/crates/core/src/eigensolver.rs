//! First eigenpair of the discrete p-Laplacian.
//!
//! The discrete energy is `E_p(u) = Σ_cells |∇u|^p · a` with forward
//! differences and zero extension outside the mask, and `λ_p` is the minimum
//! of `E_p(u) / Σ_nodes |u|^p · a`. The minimizer is found by a projected,
//! damped Newton iteration on the Rayleigh quotient: each step solves
//! `(H + τ M) δ = -r` with `H` the Hessian of the Lagrangian `E - λN`,
//! `M` its diagonal scaling and `τ` adapted per step; the update is clamped
//! at zero, renormalized, and accepted only if the quotient does not grow.
//!
//! Internally the iterate is kept with `sup u = 1`, and every p-th power is
//! scaled by its largest term, so nothing over- or underflows up to
//! `p = 256`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{inradius, DistanceField, DomainGrid};
use crate::logsum::log_power_sum;
use crate::skyline::SkylineMatrix;
use crate::stencil::{gradient, neg_divergence, norm2, ScalarField, Vector2};

pub const P_MIN: f64 = 2.0;
pub const P_MAX: f64 = 256.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("p out of supported range [2,256]: {0}")]
    UnsupportedExponent(f64),
    #[error("field is identically zero")]
    ZeroField,
    #[error("initial field: {0}")]
    InvalidInit(String),
    #[error("solver config: {0}")]
    InvalidConfig(String),
    #[error("p-list must be strictly ascending with first entry >= 2")]
    InvalidPList,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// Armijo backtracking: accept when the log-quotient drops by at least
    /// `c · α · slope`; otherwise multiply `α` by `shrink`.
    Backtracking { c: f64, shrink: f64 },
    /// Always try the step length `step` once.
    Fixed { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedProfile {
    DistanceField,
    Cone,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Residual tolerance for `p <= large_p_threshold`.
    pub grad_tol: f64,
    /// Residual tolerance for `p > large_p_threshold`.
    pub grad_tol_large_p: f64,
    pub large_p_threshold: f64,
    pub step_rule: StepRule,
    pub seed_profile: SeedProfile,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 400,
            grad_tol: 1e-8,
            grad_tol_large_p: 1e-6,
            large_p_threshold: 16.0,
            step_rule: StepRule::Backtracking { c: 1e-4, shrink: 0.5 },
            seed_profile: SeedProfile::DistanceField,
        }
    }
}

impl SolverConfig {
    /// Same tolerance for every exponent.
    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = tol;
        self.grad_tol_large_p = tol;
        self
    }

    pub fn grad_tol_for(&self, p: f64) -> f64 {
        if p <= self.large_p_threshold {
            self.grad_tol
        } else {
            self.grad_tol_large_p
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.into()));
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1");
        }
        if !(self.grad_tol > 0.0 && self.grad_tol_large_p > 0.0) {
            return bad("tolerances must be positive");
        }
        match self.step_rule {
            StepRule::Backtracking { c, shrink } if !(c > 0.0 && c < 1.0 && shrink > 0.0 && shrink < 1.0) => {
                bad("backtracking needs 0 < c < 1 and 0 < shrink < 1")
            }
            StepRule::Fixed { step } if !(step > 0.0) => bad("fixed step must be positive"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxItersExceeded,
    /// No descent step could be found before the residual reached tolerance.
    Stalled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPair {
    pub p: f64,
    pub lambda_p: f64,
    pub log_lambda: f64,
    /// Nonnegative, `‖u‖_p = 1`.
    pub u: ScalarField,
    pub iterations: usize,
    pub residual_norm: f64,
    pub rayleigh_value: f64,
    pub grad_tol: f64,
    pub status: SolveStatus,
    /// Rayleigh quotient at the start and after every accepted step.
    pub history: Vec<f64>,
}

impl EigenPair {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// `λ_p^{1/p}`.
    pub fn lambda_root(&self) -> f64 {
        (self.log_lambda / self.p).exp()
    }
}

pub fn check_exponent(p: f64) -> Result<(), SolverError> {
    if (P_MIN..=P_MAX).contains(&p) {
        Ok(())
    } else {
        Err(SolverError::UnsupportedExponent(p))
    }
}

/// `log Σ_cells a |∇u|^p`.
pub fn log_energy(grid: &DomainGrid, u: &[f64], p: f64) -> f64 {
    let g = gradient(grid, u);
    grid.cell_area.ln() + log_power_sum(g.iter().map(|v| norm2(*v)), p)
}

/// `log Σ_nodes a |u|^p`.
pub fn log_norm_power(grid: &DomainGrid, u: &[f64], p: f64) -> f64 {
    grid.cell_area.ln() + log_power_sum(u.iter().copied(), p)
}

/// `‖∇u‖_p^p / ‖u‖_p^p`, evaluated in the log domain.
pub fn rayleigh_quotient(u: &ScalarField, p: f64, grid: &DomainGrid) -> Result<f64, SolverError> {
    log_rayleigh_quotient(u, p, grid).map(f64::exp)
}

pub fn log_rayleigh_quotient(u: &ScalarField, p: f64, grid: &DomainGrid) -> Result<f64, SolverError> {
    if !(p > 1.0) {
        return Err(SolverError::UnsupportedExponent(p));
    }
    let log_n = log_norm_power(grid, u.values(), p);
    if log_n == f64::NEG_INFINITY {
        return Err(SolverError::ZeroField);
    }
    Ok(log_energy(grid, u.values(), p) - log_n)
}

/// `|∇u|^{p-2} ∇u / λ` per cell, magnitudes formed in the log domain.
pub fn flux_over_lambda(grid: &DomainGrid, u: &[f64], p: f64, log_lambda: f64) -> Vec<Vector2> {
    gradient(grid, u)
        .into_iter()
        .map(|g| {
            let m = norm2(g);
            if m == 0.0 {
                [0.0, 0.0]
            } else {
                let s = ((p - 1.0) * m.ln() - log_lambda).exp() / m;
                [g[0] * s, g[1] * s]
            }
        })
        .collect()
}

/// `u^{p-1}` per node, formed in the log domain.
pub fn source_density(u: &[f64], p: f64) -> Vec<f64> {
    u.iter().map(|&v| if v > 0.0 { ((p - 1.0) * v.ln()).exp() } else { 0.0 }).collect()
}

/// `‖-div(|∇u|^{p-2}∇u) - λ u^{p-1}‖₁ / λ`, cell-area weighted.
pub fn pde_residual(pair: &EigenPair, grid: &DomainGrid) -> f64 {
    residual_l1(grid, pair.u.values(), pair.p, pair.log_lambda)
}

pub(crate) fn residual_l1(grid: &DomainGrid, u: &[f64], p: f64, log_lambda: f64) -> f64 {
    let sigma = flux_over_lambda(grid, u, p, log_lambda);
    let div = neg_divergence(grid, &sigma);
    let f = source_density(u, p);
    grid.cell_area * div.iter().zip(&f).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Initial field for a solve.
pub fn seed_profile(grid: &DomainGrid, d: &DistanceField, profile: SeedProfile) -> ScalarField {
    match profile {
        SeedProfile::Ones => ScalarField(vec![1.0; grid.interior_count()]),
        SeedProfile::DistanceField => {
            let r1 = d.values.iter().copied().fold(0.0, f64::max);
            ScalarField(d.values.iter().map(|v| v / r1).collect())
        }
        SeedProfile::Cone => {
            let ir = inradius(d, grid.h);
            let (apex_node, _) = d
                .values
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
            let apex = grid.node_point(apex_node);
            ScalarField(
                (0..grid.interior_count())
                    .map(|k| (ir.r1 - grid.node_point(k).dist(apex)).max(0.0) + 1e-3 * d.values[k])
                    .collect(),
            )
        }
    }
}

/// Sparsity profile of the stiffness matrix over interior nodes.
fn stiffness_profile(grid: &DomainGrid) -> Vec<usize> {
    let mut first: Vec<usize> = (0..grid.interior_count()).collect();
    for c in grid.cells() {
        let nodes: Vec<usize> = c.nodes().into_iter().flatten().collect();
        let lo = *nodes.iter().min().unwrap();
        for &n in &nodes {
            first[n] = first[n].min(lo);
        }
    }
    first
}

struct State {
    u: Vec<f64>,
    grads: Vec<Vector2>,
    gmax: f64,
    log_r: f64,
    log_n: f64,
    /// `λ / gmax^{p-2}`.
    lambda_scaled: f64,
    /// `(-div(|∇u|^{p-2}∇u) - λ u^{p-1}) / gmax^{p-2}`.
    resid_scaled: Vec<f64>,
    /// L¹ residual of the normalized field, divided by λ.
    residual: f64,
}

fn evaluate(grid: &DomainGrid, u: Vec<f64>, p: f64) -> Option<State> {
    let grads = gradient(grid, &u);
    let gmax = grads.iter().map(|g| norm2(*g)).fold(0.0, f64::max);
    if gmax == 0.0 {
        return None;
    }
    let log_e = grid.cell_area.ln() + log_power_sum(grads.iter().map(|g| norm2(*g)), p);
    let log_n = log_norm_power(grid, &u, p);
    let log_r = log_e - log_n;
    let lambda_scaled = (log_r - (p - 2.0) * gmax.ln()).exp();
    let inv = 1.0 / gmax;
    let flux: Vec<Vector2> = grads
        .iter()
        .map(|g| {
            let w = if p == 2.0 { 1.0 } else { (norm2(*g) * inv).powf(p - 2.0) };
            [w * g[0], w * g[1]]
        })
        .collect();
    let div = neg_divergence(grid, &flux);
    let resid_scaled: Vec<f64> = div
        .iter()
        .zip(&u)
        .map(|(dv, &x)| dv - lambda_scaled * if x > 0.0 { x.powf(p - 1.0) } else { 0.0 })
        .collect();
    // ‖u‖_p^{p-1} = exp((p-1)/p · log N)
    let norm_pow = ((p - 1.0) / p * log_n).exp();
    let residual =
        grid.cell_area * resid_scaled.iter().map(|r| r.abs()).sum::<f64>() / (lambda_scaled * norm_pow);
    Some(State { u, grads, gmax, log_r, log_n, lambda_scaled, resid_scaled, residual })
}

fn log_quotient_of(grid: &DomainGrid, u: &[f64], p: f64) -> f64 {
    log_energy(grid, u, p) - log_norm_power(grid, u, p)
}

struct Newton<'a> {
    grid: &'a DomainGrid,
    p: f64,
    template: SkylineMatrix,
}

impl<'a> Newton<'a> {
    fn new(grid: &'a DomainGrid, p: f64) -> Self {
        Self { grid, p, template: SkylineMatrix::new(stiffness_profile(grid)) }
    }

    /// Scaled Hessian of `E - λN` and the Levenberg scaling diagonal.
    fn assemble(&self, s: &State) -> (SkylineMatrix, Vec<f64>) {
        let p = self.p;
        let h = self.grid.h;
        let mut a = self.template.clone();
        a.clear();
        let inv = 1.0 / s.gmax;
        // d(gx, gy)/d(u0, ux, uy)
        let bx = [-1.0 / h, 1.0 / h, 0.0];
        let by = [-1.0 / h, 0.0, 1.0 / h];
        for (c, g) in self.grid.cells().iter().zip(&s.grads) {
            let m = norm2(*g);
            let k = if p == 2.0 {
                [[1.0, 0.0], [0.0, 1.0]]
            } else if m == 0.0 {
                continue;
            } else {
                let w = (m * inv).powf(p - 2.0);
                let (nx, ny) = (g[0] / m, g[1] / m);
                let t = p - 2.0;
                [[w * (1.0 + t * nx * nx), w * t * nx * ny], [w * t * nx * ny, w * (1.0 + t * ny * ny)]]
            };
            if k[0][0] == 0.0 && k[1][1] == 0.0 {
                continue;
            }
            let nodes = c.nodes();
            for a_slot in 0..3 {
                let Some(i) = nodes[a_slot] else { continue };
                let ka = [k[0][0] * bx[a_slot] + k[0][1] * by[a_slot], k[1][0] * bx[a_slot] + k[1][1] * by[a_slot]];
                for b_slot in 0..=a_slot {
                    let Some(j) = nodes[b_slot] else { continue };
                    let v = ka[0] * bx[b_slot] + ka[1] * by[b_slot];
                    if i == j {
                        a.add(i, i, v);
                    } else {
                        a.add(i, j, v);
                    }
                }
            }
        }
        let mut scale = a.diagonal();
        for (i, &x) in s.u.iter().enumerate() {
            let n_part = s.lambda_scaled * (p - 1.0) * if x > 0.0 { x.powf(p - 2.0) } else { 0.0 };
            a.add(i, i, -n_part);
            scale[i] += n_part;
        }
        let floor = 1e-12 * scale.iter().copied().fold(0.0, f64::max);
        scale.iter_mut().for_each(|v| *v += floor);
        (a, scale)
    }
}

/// Minimizes the discrete Rayleigh quotient from `init`.
pub fn solve_first_eigenpair(
    grid: &DomainGrid,
    p: f64,
    init: &ScalarField,
    cfg: &SolverConfig,
) -> Result<EigenPair, SolverError> {
    check_exponent(p)?;
    cfg.validate()?;
    if init.len() != grid.interior_count() {
        return Err(SolverError::InvalidInit(format!(
            "length {} does not match {} interior nodes",
            init.len(),
            grid.interior_count()
        )));
    }
    if !init.is_finite() {
        return Err(SolverError::InvalidInit("non-finite values".into()));
    }
    if init.values().iter().any(|&v| v < 0.0) {
        return Err(SolverError::InvalidInit("negative values".into()));
    }
    let sup = init.sup();
    if !(sup > 0.0) {
        return Err(SolverError::ZeroField);
    }
    let tol = cfg.grad_tol_for(p);
    let u0: Vec<f64> = init.values().iter().map(|v| v / sup).collect();
    let mut state = evaluate(grid, u0, p).ok_or(SolverError::ZeroField)?;
    let newton = Newton::new(grid, p);
    let mut history = vec![state.log_r.exp()];
    let mut tau = 1e-6;
    let mut iterations = 0;
    let mut status = SolveStatus::MaxItersExceeded;

    while iterations < cfg.max_iters {
        if state.residual <= tol {
            status = SolveStatus::Converged;
            break;
        }
        iterations += 1;
        let (hess, scale) = newton.assemble(&state);
        let mut accepted = None;
        while tau <= 1e12 {
            let mut m = hess.clone();
            for (i, s) in scale.iter().enumerate() {
                m.add(i, i, tau * s);
            }
            let Ok(fac) = m.factor(1e-14) else {
                tau = (tau * 10.0).max(1e-8);
                continue;
            };
            let mut delta: Vec<f64> = state.resid_scaled.iter().map(|r| -r).collect();
            fac.solve_in_place(&mut delta);
            project_tangent(&mut delta, &state.u, p);
            match line_search(grid, p, &state, &delta, cfg.step_rule) {
                Some((next, alpha)) => {
                    accepted = Some((next, alpha));
                    tau = if alpha >= 1.0 { (tau / 4.0).max(1e-12) } else { tau * 2.0 };
                    break;
                }
                None => tau = (tau * 10.0).max(1e-8),
            }
        }
        match accepted {
            Some((next, _)) => {
                state = next;
                history.push(state.log_r.exp());
            }
            None => {
                status = SolveStatus::Stalled;
                break;
            }
        }
    }
    if status != SolveStatus::Converged && state.residual <= tol {
        status = SolveStatus::Converged;
    }

    let log_scale = -state.log_n / p;
    let scale = log_scale.exp();
    let u = ScalarField(state.u.iter().map(|v| v * scale).collect());
    let log_lambda = state.log_r;
    let rayleigh_value = rayleigh_quotient(&u, p, grid)?;
    let residual_norm = residual_l1(grid, u.values(), p, log_lambda);
    Ok(EigenPair {
        p,
        lambda_p: log_lambda.exp(),
        log_lambda,
        u,
        iterations,
        residual_norm,
        rayleigh_value,
        grad_tol: tol,
        status,
        history,
    })
}

/// Removes the component of `delta` along `u` in the metric that keeps
/// `Σ u^{p-1} δ = 0` (the tangent space of the normalization constraint).
fn project_tangent(delta: &mut [f64], u: &[f64], p: f64) {
    let w: Vec<f64> = u.iter().map(|&x| if x > 0.0 { x.powf(p - 1.0) } else { 0.0 }).collect();
    let num: f64 = w.iter().zip(delta.iter()).map(|(a, b)| a * b).sum();
    let den: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
    if den > 0.0 {
        let c = num / den;
        delta.iter_mut().zip(u).for_each(|(d, x)| *d -= c * x);
    }
}

fn line_search(grid: &DomainGrid, p: f64, s: &State, delta: &[f64], rule: StepRule) -> Option<(State, f64)> {
    // d(log R)/dα at α = 0
    let dot: f64 = s.resid_scaled.iter().zip(delta).map(|(r, d)| r * d).sum();
    let slope = p * grid.cell_area * dot / (s.log_n.exp() * s.lambda_scaled);
    if !(slope < 0.0) || !slope.is_finite() {
        return None;
    }
    let (c, shrink, max_trials) = match rule {
        StepRule::Backtracking { c, shrink } => (c, shrink, 40),
        StepRule::Fixed { step: _ } => (0.0, 1.0, 1),
    };
    let mut alpha = match rule {
        StepRule::Fixed { step } => step,
        _ => 1.0,
    };
    for _ in 0..max_trials {
        let mut trial: Vec<f64> = s.u.iter().zip(delta).map(|(u, d)| (u + alpha * d).max(0.0)).collect();
        let sup = trial.iter().copied().fold(0.0, f64::max);
        if sup > 0.0 && sup.is_finite() {
            trial.iter_mut().for_each(|v| *v /= sup);
            let log_r = log_quotient_of(grid, &trial, p);
            let predicted = c * alpha * slope;
            let noise = predicted.abs() < 1e-13 * s.log_r.abs().max(1.0);
            if log_r.is_finite() && (log_r <= s.log_r + predicted || (noise && log_r <= s.log_r + 1e-14 * s.log_r.abs().max(1.0))) {
                let next = evaluate(grid, trial, p)?;
                if !noise || next.residual < s.residual {
                    return Some((next, alpha));
                }
            }
        }
        alpha *= shrink;
    }
    None
}

/// Largest ratio between consecutive exponents in a warm-started chain.
pub const MAX_P_RATIO: f64 = std::f64::consts::SQRT_2;

/// Solves `p_list` in order, warm-starting each solve from the previous
/// converged eigenfunction. Gaps wider than [`MAX_P_RATIO`] are bridged by
/// unreported intermediate solves at geometrically spaced exponents.
pub fn continuation_sweep(
    grid: &DomainGrid,
    d: &DistanceField,
    p_list: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<EigenPair>, SolverError> {
    validate_p_list(p_list)?;
    let mut init = seed_profile(grid, d, cfg.seed_profile);
    let mut out = Vec::with_capacity(p_list.len());
    let mut prev: Option<f64> = None;
    for &p in p_list {
        if let Some(q) = prev {
            for r in bridge_exponents(q, p) {
                let pair = solve_first_eigenpair(grid, r, &init, cfg)?;
                init = pair.u;
            }
        }
        let pair = solve_first_eigenpair(grid, p, &init, cfg)?;
        if pair.converged() {
            init = pair.u.clone();
        }
        out.push(pair);
        prev = Some(p);
    }
    Ok(out)
}

/// Exponents strictly between `from` and `to`, geometrically spaced with
/// ratio at most [`MAX_P_RATIO`].
pub fn bridge_exponents(from: f64, to: f64) -> Vec<f64> {
    let steps = ((to / from).ln() / MAX_P_RATIO.ln() - 1e-9).ceil().max(1.0) as usize;
    let q = (to / from).powf(1.0 / steps as f64);
    (1..steps).map(|k| from * q.powi(k as i32)).collect()
}

pub fn validate_p_list(p_list: &[f64]) -> Result<(), SolverError> {
    if p_list.is_empty() || p_list[0] < P_MIN || p_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SolverError::InvalidPList);
    }
    for &p in p_list {
        check_exponent(p)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, distance_to_boundary, DomainSpec};

    fn square(h: f64) -> DomainGrid {
        build_domain(&DomainSpec::unit_square(), h).unwrap()
    }

    /// Smallest eigenvalue of the 5-point Dirichlet Laplacian on the unit
    /// square with `1/h` cells per side.
    fn five_point_square(h: f64) -> f64 {
        let s = (std::f64::consts::PI * h / 2.0).sin();
        8.0 * s * s / (h * h)
    }

    #[test]
    fn square_p2_matches_five_point_formula() {
        let h = 1.0 / 32.0;
        let g = square(h);
        let d = distance_to_boundary(&g);
        let cfg = SolverConfig::default();
        let pair = solve_first_eigenpair(&g, 2.0, &seed_profile(&g, &d, SeedProfile::Ones), &cfg).unwrap();
        assert!(pair.converged());
        let want = five_point_square(h);
        assert!((pair.lambda_p - want).abs() < 1e-9 * want, "{} vs {}", pair.lambda_p, want);
        let norm: f64 = g.cell_area * pair.u.values().iter().map(|v| v * v).sum::<f64>();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(pair.u.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn quotient_is_homogeneous_and_validated() {
        let g = square(1.0 / 16.0);
        let u = ScalarField((0..g.interior_count()).map(|k| 1.0 + (k as f64 * 0.37).sin()).collect());
        for p in [2.0, 3.5, 40.0] {
            let r = rayleigh_quotient(&u, p, &g).unwrap();
            let r2 = rayleigh_quotient(&u.scaled(1e5), p, &g).unwrap();
            assert!((r - r2).abs() < 1e-12 * r);
        }
        assert!(matches!(rayleigh_quotient(&u, 1.0, &g), Err(SolverError::UnsupportedExponent(_))));
        assert_eq!(rayleigh_quotient(&ScalarField::zeros(g.interior_count()), 2.0, &g), Err(SolverError::ZeroField));
    }

    #[test]
    fn rayleigh_slope_matches_finite_difference() {
        let g = square(1.0 / 16.0);
        let n = g.interior_count();
        for p in [2.0, 5.0, 33.0] {
            let u: Vec<f64> = (0..n).map(|k| 0.5 + 0.4 * (k as f64 * 0.61).cos()).collect();
            let u: Vec<f64> = {
                let m = u.iter().copied().fold(0.0, f64::max);
                u.iter().map(|v| v / m).collect()
            };
            let s = evaluate(&g, u.clone(), p).unwrap();
            let dir: Vec<f64> = (0..n).map(|k| 0.01 * (k as f64 * 1.3).sin()).collect();
            let dot: f64 = s.resid_scaled.iter().zip(&dir).map(|(r, d)| r * d).sum();
            let slope = p * g.cell_area * dot / (s.log_n.exp() * s.lambda_scaled);
            let eps = 1e-6;
            let at = |t: f64| {
                let v: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                log_quotient_of(&g, &v, p)
            };
            let fd = (at(eps) - at(-eps)) / (2.0 * eps);
            assert!((fd - slope).abs() < 1e-6 * slope.abs().max(1.0), "p={p}: {fd} vs {slope}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = square(1.0 / 16.0);
        let n = g.interior_count();
        let cfg = SolverConfig::default();
        let ones = ScalarField(vec![1.0; n]);
        assert_eq!(
            solve_first_eigenpair(&g, 1.5, &ones, &cfg).unwrap_err().to_string(),
            "p out of supported range [2,256]: 1.5"
        );
        assert!(matches!(solve_first_eigenpair(&g, 300.0, &ones, &cfg), Err(SolverError::UnsupportedExponent(_))));
        assert!(matches!(
            solve_first_eigenpair(&g, 4.0, &ScalarField(vec![1.0; n - 1]), &cfg),
            Err(SolverError::InvalidInit(_))
        ));
        assert_eq!(solve_first_eigenpair(&g, 4.0, &ScalarField::zeros(n), &cfg).unwrap_err(), SolverError::ZeroField);
        let bad = SolverConfig { max_iters: 0, ..SolverConfig::default() };
        assert!(matches!(solve_first_eigenpair(&g, 4.0, &ones, &bad), Err(SolverError::InvalidConfig(_))));
        assert_eq!(validate_p_list(&[4.0, 2.0]), Err(SolverError::InvalidPList));
        assert_eq!(validate_p_list(&[1.5, 2.0]), Err(SolverError::InvalidPList));
    }

    #[test]
    fn bridges_are_geometric() {
        assert!(bridge_exponents(2.0, 2.5).is_empty());
        let b = bridge_exponents(16.0, 128.0);
        assert_eq!(b.len(), 5);
        let mut all = vec![16.0];
        all.extend(&b);
        all.push(128.0);
        for w in all.windows(2) {
            assert!(w[1] / w[0] <= MAX_P_RATIO + 1e-12);
        }
    }

    #[test]
    fn sweep_is_monotone_in_root() {
        let g = square(1.0 / 16.0);
        let d = distance_to_boundary(&g);
        let cfg = SolverConfig::default();
        let pairs = continuation_sweep(&g, &d, &[2.0, 4.0, 8.0, 16.0], &cfg).unwrap();
        assert!(pairs.iter().all(|e| e.converged()));
        for w in pairs.windows(2) {
            assert!(w[1].lambda_root() < w[0].lambda_root());
        }
        for e in &pairs {
            assert!(pde_residual(e, &g) <= e.grad_tol * 1.0001);
            assert!(e.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-13)));
        }
    }
}
