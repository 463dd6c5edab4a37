//! The p sweep and its large-p checks, gathered into one verdict.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigensolver::{
    continuation_sweep, log_rayleigh_quotient, pde_residual, validate_p_list, EigenPair, SolveStatus, SolverConfig,
    SolverError,
};
use crate::geometry::{build_domain, distance_to_boundary, inradius, DistanceField, DomainGrid, DomainSpec, GeometryError, Inradius};
use crate::measures::{
    boundary_measure, conjugate_exponent, derived_measures, optimality_surrogate, primal_dual_values, DiscreteMeasure,
};
use crate::stencil::ScalarField;
use crate::transport::{kantorovich_check, ray_profile_check, transport_rays, w1_to_boundary};

pub const VERDICT_SCHEMA_VERSION: &str = "1.0.0";
pub const EXTRAPOLATION_MODEL: &str = "least-squares line in 1/p through the last three converged rows";

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("need at least {needed} converged rows, have {have}")]
    InsufficientRows { needed: usize, have: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub solver: SolverConfig,
    /// Concentration radius around the argmax band, in cells.
    pub concentration_eps_cells: f64,
    /// Relative `f` mass below which a node starts no ray.
    pub ray_threshold: f64,
    /// Slack constant `C` in `λ^{1/p} <= B_p + C h`.
    pub bound_constant: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { solver: SolverConfig::default(), concentration_eps_cells: 3.0, ray_threshold: 1e-3, bound_constant: 2.0 }
    }
}

/// Default exponents: powers of two from 2 to 128.
pub fn default_p_list() -> Vec<f64> {
    (1..=7).map(|k| f64::from(1u32 << k)).collect()
}

/// `((p+1)(p+2)/2)^{1/p} / R₁`: the quotient root of the cone of height
/// `R₁` over an inscribed disk of radius `R₁`.
pub fn cone_bound(p: f64, r1: f64) -> f64 {
    (((p + 1.0) * (p + 2.0) / 2.0).ln() / p).exp() / r1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_tol: f64,
    pub lambda_p: f64,
    pub log_lambda_p: f64,
    pub lambda_root: f64,
    pub pde_residual: f64,
    pub div_residual: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub pairing: f64,
    pub sup_u: f64,
    pub f_mass: f64,
    pub mu_mass: f64,
    pub sigma_mass: f64,
    pub boundary_mass: f64,
    pub concentration_mass_fraction: f64,
    /// `W₁` of the normalized source `f/|f|` to the boundary.
    pub w1_of_fp: f64,
    pub ray_count: usize,
    pub ray_deviation: f64,
    pub uinf_bound_violation: f64,
    /// `|primal + 1/p'|`.
    pub gap_a: f64,
    /// `|primal + λ^{1/p} W₁(f/|f|)|`.
    pub gap_b: f64,
    pub gradient_relative_deviation: f64,
    pub alignment: f64,
    pub lipschitz: f64,
    pub kantorovich_excess: f64,
    /// Quotient root of the discrete cone over the argmax node.
    pub discrete_cone_root: f64,
    pub hausdorff_support_to_argmax: f64,
    pub hausdorff_argmax_u_to_argmax_d: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub shape: String,
    pub spec: DomainSpec,
    pub h: f64,
    pub r1: f64,
    pub interior_nodes: usize,
    pub boundary_points: usize,
    pub concentration_eps: f64,
    pub bound_constant: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn converged_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.converged)
    }

    pub fn row(&self, p: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.p == p)
    }
}

/// Everything a study computes, kept for callers that need the fields.
pub struct Study {
    pub grid: DomainGrid,
    pub distance: DistanceField,
    pub inradius: Inradius,
    pub pairs: Vec<EigenPair>,
    pub result: SweepResult,
}

pub fn run_asymptotic_study(spec: &DomainSpec, h: f64, p_list: &[f64], cfg: &StudyConfig) -> Result<SweepResult, StudyError> {
    Ok(run_study(spec, h, p_list, cfg)?.result)
}

pub fn run_study(spec: &DomainSpec, h: f64, p_list: &[f64], cfg: &StudyConfig) -> Result<Study, StudyError> {
    validate_p_list(p_list)?;
    let grid = build_domain(spec, h)?;
    let distance = distance_to_boundary(&grid);
    let ir = inradius(&distance, h);
    let pairs = continuation_sweep(&grid, &distance, p_list, &cfg.solver)?;
    let eps = cfg.concentration_eps_cells * h;
    let near_argmax = distance_to_set(&grid, &ir.argmax_nodes);
    let rows = pairs.iter().map(|pair| sweep_row(&grid, &distance, &ir, &near_argmax, pair, eps, cfg)).collect();
    let result = SweepResult {
        shape: spec.name().to_string(),
        spec: spec.clone(),
        h,
        r1: ir.r1,
        interior_nodes: grid.interior_count(),
        boundary_points: grid.boundary_points.len(),
        concentration_eps: eps,
        bound_constant: cfg.bound_constant,
        rows,
    };
    Ok(Study { grid, distance, inradius: ir, pairs, result })
}

/// Distance from every interior node to the nearest node of `set`.
pub fn distance_to_set(grid: &DomainGrid, set: &[usize]) -> Vec<f64> {
    let pts: Vec<_> = set.iter().map(|&k| grid.node_point(k)).collect();
    (0..grid.interior_count())
        .map(|k| {
            let x = grid.node_point(k);
            pts.iter().map(|q| q.dist(x)).fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn hausdorff(grid: &DomainGrid, a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let da = distance_to_set(grid, a);
    let db = distance_to_set(grid, b);
    let ab = a.iter().map(|&k| db[k]).fold(0.0, f64::max);
    let ba = b.iter().map(|&k| da[k]).fold(0.0, f64::max);
    ab.max(ba)
}

/// Discrete cone `max(R₁ - |x - x₀|, 0)` around the first argmax node.
pub fn discrete_cone(grid: &DomainGrid, d: &DistanceField, r1: f64) -> ScalarField {
    let apex = (0..d.values.len()).find(|&k| d.values[k] == r1).expect("maximum is attained");
    let x0 = grid.node_point(apex);
    ScalarField((0..grid.interior_count()).map(|k| (r1 - grid.node_point(k).dist(x0)).max(0.0)).collect())
}

fn sweep_row(
    grid: &DomainGrid,
    d: &DistanceField,
    ir: &Inradius,
    near_argmax: &[f64],
    pair: &EigenPair,
    eps: f64,
    cfg: &StudyConfig,
) -> SweepRow {
    let p = pair.p;
    let m = derived_measures(pair, grid);
    let duality = primal_dual_values(pair, &m, grid);
    let u = pair.u.values();
    let sup_u = pair.u.sup();
    let unit = pair.u.scaled(1.0 / sup_u);
    let f = &m.f;
    let conc: f64 = f.nodes.iter().zip(&f.weights).filter(|(&k, _)| near_argmax[k] <= eps).map(|(_, w)| w).sum::<f64>()
        / f.total_mass;
    let mut error = None;
    let w1_raw = w1_to_boundary(f, d, grid).map(|r| r.0);
    let w1_of_fp = match &w1_raw {
        Ok(v) => v / f.total_mass,
        Err(e) => {
            error = Some(e.to_string());
            f64::NAN
        }
    };
    let rays = transport_rays(f, grid, cfg.ray_threshold);
    let (ray_count, ray_deviation) = match &rays {
        Ok(r) => (r.rays.len(), ray_profile_check(&pair.u, r, 1.0 / ir.r1, grid).unwrap_or(f64::NAN)),
        Err(e) => {
            error = Some(e.to_string());
            (0, f64::NAN)
        }
    };
    let uinf_bound_violation = unit.values().iter().zip(&d.values).map(|(v, dv)| v - dv / ir.r1).fold(f64::NEG_INFINITY, f64::max);
    let surrogate = optimality_surrogate(pair, &m, grid);
    let (gradient_relative_deviation, alignment) = match &surrogate {
        Ok(s) => (s.relative_deviation, s.alignment),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let kc = kantorovich_check(&pair.u, pair.lambda_root(), f, w1_raw.unwrap_or(f64::NAN), grid);
    let fmax = f.weights.iter().copied().fold(0.0, f64::max);
    let support: Vec<usize> = f.nodes.iter().zip(&f.weights).filter(|(_, &w)| w >= cfg.ray_threshold * fmax).map(|(&k, _)| k).collect();
    let argmax_u: Vec<usize> = (0..u.len()).filter(|&k| unit.values()[k] >= 1.0 - 2.0 * grid.h / ir.r1).collect();
    let cone = discrete_cone(grid, d, ir.r1);
    let discrete_cone_root = log_rayleigh_quotient(&cone, p, grid).map(|l| (l / p).exp()).unwrap_or(f64::NAN);
    let q = conjugate_exponent(p);
    SweepRow {
        p,
        converged: pair.status == SolveStatus::Converged,
        iterations: pair.iterations,
        grad_tol: pair.grad_tol,
        lambda_p: pair.lambda_p,
        log_lambda_p: pair.log_lambda,
        lambda_root: pair.lambda_root(),
        pde_residual: pde_residual(pair, grid),
        div_residual: duality.div_residual,
        primal_value: duality.primal_value,
        dual_value: duality.dual_value,
        pairing: duality.pairing,
        sup_u,
        f_mass: f.total_mass,
        mu_mass: m.mu.total_mass,
        sigma_mass: m.sigma.magnitudes().total_mass,
        boundary_mass: boundary_measure(&m.sigma, grid).total_mass,
        concentration_mass_fraction: conc,
        w1_of_fp,
        ray_count,
        ray_deviation,
        uinf_bound_violation,
        gap_a: (duality.primal_value + 1.0 / q).abs(),
        gap_b: (duality.primal_value + pair.lambda_root() * w1_of_fp).abs(),
        gradient_relative_deviation,
        alignment,
        lipschitz: kc.lipschitz,
        kantorovich_excess: kc.excess,
        discrete_cone_root,
        hausdorff_support_to_argmax: hausdorff(grid, &support, &ir.argmax_nodes),
        hausdorff_argmax_u_to_argmax_d: hausdorff(grid, &argmax_u, &ir.argmax_nodes),
        error,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaInfinityEstimate {
    pub estimate: f64,
    /// Slope of the fitted line in `1/p`.
    pub slope: f64,
    pub rows_used: Vec<f64>,
    pub model: String,
    /// Every converged row satisfies `λ^{1/p} <= B_p + C h`.
    pub bound_ok: bool,
}

/// Intercept at `1/p = 0` of the least-squares line through
/// `(1/p, λ_p^{1/p})` over the last three converged rows.
pub fn lambda_infinity_estimate(sweep: &SweepResult) -> Result<LambdaInfinityEstimate, StudyError> {
    let rows: Vec<&SweepRow> = sweep.converged_rows().collect();
    if rows.len() < 3 {
        return Err(StudyError::InsufficientRows { needed: 3, have: rows.len() });
    }
    let tail = &rows[rows.len() - 3..];
    let xs: Vec<f64> = tail.iter().map(|r| 1.0 / r.p).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.lambda_root).collect();
    let (slope, intercept) = fit_line(&xs, &ys);
    Ok(LambdaInfinityEstimate {
        estimate: intercept,
        slope,
        rows_used: tail.iter().map(|r| r.p).collect(),
        model: EXTRAPOLATION_MODEL.to_string(),
        bound_ok: bound_violations(sweep).is_empty(),
    })
}

/// Least-squares `(slope, intercept)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Exponents of converged rows exceeding `B_p + C h`.
pub fn bound_violations(sweep: &SweepResult) -> Vec<f64> {
    sweep
        .converged_rows()
        .filter(|r| r.lambda_root > cone_bound(r.p, sweep.r1) + sweep.bound_constant * sweep.h)
        .map(|r| r.p)
        .collect()
}

/// Fraction of each measure's mass within `eps` of `argmax_nodes`.
pub fn concentration_profile(grid: &DomainGrid, fs: &[DiscreteMeasure], argmax_nodes: &[usize], eps: f64) -> Vec<f64> {
    let near = distance_to_set(grid, argmax_nodes);
    fs.iter()
        .map(|f| {
            let inside: f64 = f.nodes.iter().zip(&f.weights).filter(|(&k, _)| near[k] <= eps).map(|(_, w)| w).sum();
            inside / f.total_mass
        })
        .collect()
}

/// `max (u/sup u - d/R₁)` over interior nodes.
pub fn uinf_bound_check(u: &ScalarField, d: &DistanceField, r1: f64) -> f64 {
    let s = u.sup();
    u.values().iter().zip(&d.values).map(|(v, dv)| v / s - dv / r1).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimaGap {
    pub p: f64,
    pub gap_a: f64,
    pub gap_b: f64,
}

pub fn minima_convergence_check(sweep: &SweepResult) -> Result<Vec<MinimaGap>, StudyError> {
    if sweep.rows.len() < 2 {
        return Err(StudyError::InsufficientRows { needed: 2, have: sweep.rows.len() });
    }
    Ok(sweep.rows.iter().map(|r| MinimaGap { p: r.p, gap_a: r.gap_a, gap_b: r.gap_b }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Hard checks decide the exit status; soft ones are reported only.
    pub hard: bool,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub model: String,
    pub rows_used: Vec<f64>,
    pub estimate: f64,
    pub target: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub schema_version: String,
    pub shape: String,
    pub h: f64,
    pub r1: f64,
    pub p_list: Vec<f64>,
    pub extrapolation: Option<Extrapolation>,
    pub checks: Vec<Check>,
    pub all_hard_passed: bool,
}

/// True if the last `k` finite values never decrease (never increase when
/// `increasing` is false), allowing `slack` for rounding.
fn tail_monotone(values: &[f64], k: usize, increasing: bool, slack: f64) -> bool {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < k {
        return false;
    }
    v[v.len() - k..].windows(2).all(|w| if increasing { w[1] >= w[0] - slack } else { w[1] <= w[0] + slack })
}

pub fn verdict(sweep: &SweepResult) -> Verdict {
    let mut checks = Vec::new();
    let mut push = |name: &str, hard: bool, passed: bool, detail: String| {
        checks.push(Check { name: name.into(), hard, passed, detail });
    };
    let rows = &sweep.rows;
    let conv: Vec<&SweepRow> = sweep.converged_rows().collect();
    push(
        "all_converged",
        true,
        conv.len() == rows.len(),
        format!("{} of {} rows converged", conv.len(), rows.len()),
    );

    let viol = bound_violations(sweep);
    push(
        "lemma_bound",
        true,
        viol.is_empty(),
        format!("lambda^(1/p) <= ((p+1)(p+2)/2)^(1/p)/R1 + {}*h; violations at p = {:?}", sweep.bound_constant, viol),
    );
    let cone_viol: Vec<f64> =
        conv.iter().filter(|r| r.lambda_root > r.discrete_cone_root * (1.0 + 1e-9)).map(|r| r.p).collect();
    push(
        "discrete_cone_bound",
        true,
        cone_viol.is_empty(),
        format!("lambda^(1/p) <= discrete cone quotient root; violations at p = {:?}", cone_viol),
    );

    let target = 1.0 / sweep.r1;
    let extrapolation = match lambda_infinity_estimate(sweep) {
        Ok(e) => {
            let rel = (e.estimate - target).abs() / target;
            push("lambda_infinity", true, rel <= 0.05, format!("estimate {:.6} vs 1/R1 = {:.6} (rel. error {:.3e})", e.estimate, target, rel));
            Some(Extrapolation { model: e.model, rows_used: e.rows_used, estimate: e.estimate, target, relative_error: rel })
        }
        Err(e) => {
            push("lambda_infinity", true, false, e.to_string());
            None
        }
    };

    let bad_a: Vec<f64> = conv.iter().filter(|r| !(r.gap_a <= 20.0 * r.grad_tol)).map(|r| r.p).collect();
    push("duality_value", true, bad_a.is_empty(), format!("|primal + 1/p'| <= 20 grad_tol; failures at p = {:?}", bad_a));
    let bad_d: Vec<f64> = conv.iter().filter(|r| !(r.div_residual <= 10.0 * r.grad_tol)).map(|r| r.p).collect();
    push("dual_constraint", true, bad_d.is_empty(), format!("||-div sigma - f||_1 <= 10 grad_tol; failures at p = {:?}", bad_d));
    let bad_dual: Vec<f64> =
        conv.iter().filter(|r| !((r.primal_value + r.dual_value).abs() <= 20.0 * r.grad_tol)).map(|r| r.p).collect();
    push("primal_dual_sum", true, bad_dual.is_empty(), format!("|primal + dual| <= 20 grad_tol; failures at p = {:?}", bad_dual));
    let bad_pair: Vec<f64> = conv.iter().filter(|r| !((r.pairing - 1.0).abs() <= 1e-10)).map(|r| r.p).collect();
    push("pairing", true, bad_pair.is_empty(), format!("<f, u> = 1 within 1e-10; failures at p = {:?}", bad_pair));

    if let Some(last) = rows.last() {
        let lo = sweep.r1 - 5.0 * sweep.h;
        push(
            "w1_final",
            true,
            last.w1_of_fp >= lo && last.w1_of_fp <= sweep.r1 * (1.0 + 1e-12),
            format!("W1(f/|f|) = {:.6} at p = {} in [{:.6}, {:.6}]", last.w1_of_fp, last.p, lo, sweep.r1),
        );
    }
    let w1s: Vec<f64> = rows.iter().map(|r| r.w1_of_fp).collect();
    push("w1_trend", false, tail_monotone(&w1s, 3, true, 1e-12), format!("W1 over the last three rows: {:?}", tail(&w1s)));
    let conc: Vec<f64> = rows.iter().map(|r| r.concentration_mass_fraction).collect();
    push(
        "concentration_trend",
        true,
        tail_monotone(&conc, 3, true, 1e-12),
        format!("mass fraction within {:.4} of the argmax band over the last three rows: {:?}", sweep.concentration_eps, tail(&conc)),
    );
    let uinf: Vec<f64> = rows.iter().map(|r| r.uinf_bound_violation).collect();
    if let Some(last) = rows.last() {
        let cap = sweep.bound_constant * sweep.h;
        push(
            "uinf_bound",
            true,
            last.uinf_bound_violation <= cap,
            format!("max(u/sup u - d/R1) = {:.6} at p = {} vs {}*h = {:.6}", last.uinf_bound_violation, last.p, sweep.bound_constant, cap),
        );
    }
    push("uinf_bound_trend", false, tail_monotone(&uinf, 3, false, 1e-12), format!("max(u/sup u - d/R1) over the last three rows: {:?}", tail(&uinf)));
    if let (Some(r16), Some(last)) = (sweep.row(16.0), rows.last()) {
        if last.p > 16.0 {
            push(
                "ray_deviation",
                true,
                last.ray_deviation < r16.ray_deviation,
                format!("ray profile deviation {:.4} at p = {} vs {:.4} at p = 16", last.ray_deviation, last.p, r16.ray_deviation),
            );
        }
    }
    let gb: Vec<f64> = rows.iter().map(|r| r.gap_b).collect();
    push("duality_limit_trend", false, tail_monotone(&gb, 3, false, 1e-12), format!("|primal + lambda^(1/p) W1| over the last three rows: {:?}", tail(&gb)));
    let gd: Vec<f64> = rows.iter().map(|r| r.gradient_relative_deviation).collect();
    push("gradient_concentration_trend", false, tail_monotone(&gd, 3, false, 1e-12), format!("mu-weighted relative deviation of |grad u| over the last three rows: {:?}", tail(&gd)));
    let hs: Vec<f64> = rows.iter().map(|r| r.hausdorff_support_to_argmax).collect();
    push("support_vs_argmax", false, true, format!("Hausdorff distance from spt f to the argmax band per row: {:?}", hs));

    let all_hard_passed = checks.iter().all(|c| !c.hard || c.passed);
    Verdict {
        schema_version: VERDICT_SCHEMA_VERSION.into(),
        shape: sweep.shape.clone(),
        h: sweep.h,
        r1: sweep.r1,
        p_list: rows.iter().map(|r| r.p).collect(),
        extrapolation,
        checks,
        all_hard_passed,
    }
}

fn tail(v: &[f64]) -> Vec<f64> {
    v[v.len().saturating_sub(3)..].to_vec()
}
