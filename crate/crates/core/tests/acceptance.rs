//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the log. The
//! process fails only when a criterion's outcome differs from the expected
//! one; the single expected failure is listed in `EXPECTED_FAILURES` with
//! its reason.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use inflap::asymptotics::{cone_bound, default_p_list, lambda_infinity_estimate, run_study, Study, StudyConfig};
use inflap::eigensolver::{
    continuation_sweep, log_norm_power, log_rayleigh_quotient, seed_profile, solve_first_eigenpair, SeedProfile,
    SolverConfig,
};
use inflap::geometry::{build_domain, distance_to_boundary, inradius, DomainSpec};
use inflap::measures::{derived_measures, primal_dual_values, DiscreteMeasure, Support};
use inflap::stencil::{cell_inner, gradient, neg_divergence, node_inner, ScalarField, Vector2};
use inflap::transport::{max_w1_over_sources, solve_discrete_ot, w1_to_boundary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail, with the reason.
const EXPECTED_FAILURES: &[(usize, &str)] = &[(
    2,
    "lambda^(1/p) - 1/R1 stays O(1) at small p (about 1.4 on the disk at p = 2) for every h, \
     so no constant C makes it O(h); the bound holds only in the limit p -> infinity",
)];

const LEVELS: [f64; 3] = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

/// Shape with its analytic inradius.
fn shapes() -> [(DomainSpec, f64); 3] {
    [
        (DomainSpec::unit_disk(), 1.0),
        (DomainSpec::unit_square(), 0.5),
        (DomainSpec::standard_l_shape(), 2.0 - 2f64.sqrt()),
    ]
}

/// `studies[shape][level]`.
fn run_studies() -> Vec<Vec<(Study, Duration)>> {
    std::thread::scope(|sc| {
        let handles: Vec<_> = shapes()
            .into_iter()
            .map(|(spec, _)| {
                sc.spawn(move || {
                    LEVELS
                        .iter()
                        .map(|&h| {
                            let t = Instant::now();
                            let s = run_study(&spec, h, &default_p_list(), &StudyConfig::default()).expect("study");
                            (s, t.elapsed())
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("study thread")).collect()
    })
}

fn criterion_1(studies: &[Vec<(Study, Duration)>]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for ((spec, r1), per_level) in shapes().iter().zip(studies) {
        let errs: Vec<f64> = per_level
            .iter()
            .map(|(s, _)| lambda_infinity_estimate(&s.result).map_or(f64::INFINITY, |e| (e.estimate * r1 - 1.0).abs()))
            .collect();
        let slowest = per_level.iter().map(|(_, t)| *t).max().unwrap();
        let ok = errs[2] <= 0.05 && errs.windows(2).all(|w| w[1] < w[0]) && slowest <= Duration::from_secs(600);
        passed &= ok;
        parts.push(format!(
            "{} rel. error {:.2}% -> {:.2}% -> {:.2}% (slowest study {:.1}s)",
            spec.name(),
            100.0 * errs[0],
            100.0 * errs[1],
            100.0 * errs[2],
            slowest.as_secs_f64()
        ));
    }
    Outcome { id: 1, name: "limit of lambda^(1/p) equals 1/R1", passed, detail: parts.join("; ") }
}

fn criterion_2(studies: &[Vec<(Study, Duration)>]) -> Outcome {
    // C calibrated once per shape on the coarsest grid, then applied to the finer ones
    let mut passed = true;
    let mut parts = Vec::new();
    for ((spec, r1), per_level) in shapes().iter().zip(studies) {
        let needed = |s: &Study, bound: &dyn Fn(f64) -> f64| {
            s.result.converged_rows().map(|r| (r.lambda_root - bound(r.p)) / s.result.h).fold(0.0, f64::max)
        };
        let flat = |_: f64| 1.0 / r1;
        let cone = |p: f64| cone_bound(p, *r1);
        let c = needed(&per_level[0].0, &flat);
        let c_cone = needed(&per_level[0].0, &cone);
        let mut violations = Vec::new();
        let mut cone_violations = 0;
        for (s, _) in &per_level[1..] {
            for r in s.result.converged_rows() {
                if r.lambda_root > 1.0 / r1 + c * s.result.h {
                    violations.push(format!("p={} at h=1/{}", r.p, (1.0 / s.result.h).round()));
                }
                if r.lambda_root > cone(r.p) + c_cone * s.result.h {
                    cone_violations += 1;
                }
            }
        }
        let needed_now: Vec<String> = per_level.iter().map(|(s, _)| format!("{:.1}", needed(s, &flat))).collect();
        passed &= violations.is_empty();
        parts.push(format!(
            "{}: C = {:.1}, needed per level [{}], {} violations; finite-p cone form C = {:.2}, {} violations",
            spec.name(),
            c,
            needed_now.join(", "),
            violations.len(),
            c_cone,
            cone_violations
        ));
    }
    Outcome { id: 2, name: "lambda^(1/p) <= 1/R1 + C h", passed, detail: parts.join("; ") }
}

fn criterion_3(studies: &[Vec<(Study, Duration)>]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut passed = true;
    let mut rows = 0;
    for per_level in studies {
        for (s, _) in per_level {
            for r in s.result.converged_rows() {
                rows += 1;
                let gap = (r.primal_value + 1.0 - 1.0 / r.p).abs();
                worst = worst.max(gap / r.grad_tol);
                passed &= gap <= 20.0 * r.grad_tol;
            }
        }
    }
    let mut p10 = Vec::new();
    for (spec, _) in shapes() {
        let g = build_domain(&spec, 1.0 / 32.0).unwrap();
        let d = distance_to_boundary(&g);
        let cfg = SolverConfig::default();
        let pair = continuation_sweep(&g, &d, &[2.0, 4.0, 8.0, 10.0], &cfg).unwrap().pop().unwrap();
        let primal = primal_dual_values(&pair, &derived_measures(&pair, &g), &g).primal_value;
        passed &= pair.converged() && (primal + 0.9).abs() <= cfg.grad_tol_for(10.0);
        p10.push(format!("{} {:.10}", spec.name(), primal));
    }
    Outcome {
        id: 3,
        name: "primal value equals -1/p'",
        passed,
        detail: format!("worst |primal + 1/p'| = {:.2} grad_tol over {rows} rows; p = 10 primal: {}", worst, p10.join(", ")),
    }
}

fn criterion_4(studies: &[Vec<(Study, Duration)>]) -> Outcome {
    let (mut worst_p2, mut worst_rel): (f64, f64) = (0.0, 0.0);
    for per_level in studies {
        for (s, _) in per_level {
            for r in s.result.converged_rows() {
                if r.p == 2.0 {
                    worst_p2 = worst_p2.max(r.div_residual);
                }
                worst_rel = worst_rel.max(r.div_residual / r.grad_tol);
            }
        }
    }
    Outcome {
        id: 4,
        name: "-div sigma = f",
        passed: worst_p2 <= 1e-6 && worst_rel <= 10.0,
        detail: format!("max residual at p = 2: {worst_p2:.2e}; max over all rows: {worst_rel:.3} grad_tol"),
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut passed = true;
    let mut parts = Vec::new();
    for (spec, h) in [
        (DomainSpec::unit_disk(), 1.0 / 15.0),
        (DomainSpec::unit_square(), 1.0 / 24.0),
        (DomainSpec::standard_l_shape(), 1.0 / 12.0),
    ] {
        let g = build_domain(&spec, h).unwrap();
        let d = distance_to_boundary(&g);
        let n = g.interior_count();
        let (mut worst_rel, mut slowest, mut certified) = (0.0f64, Duration::ZERO, 0);
        let trials = 20;
        for _ in 0..trials {
            let take = rng.gen_range(1..=n.min(500));
            let mut nodes: Vec<usize> = (0..n).collect();
            for i in 0..take {
                let j = rng.gen_range(i..n);
                nodes.swap(i, j);
            }
            nodes.truncate(take);
            let weights: Vec<f64> = nodes.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
            let f = DiscreteMeasure::new(Support::Nodes, nodes, weights).unwrap();
            let (value, _) = w1_to_boundary(&f, &d, &g).unwrap();
            let t = Instant::now();
            let plan = solve_discrete_ot(&f, &g, &g.boundary_points, None).unwrap();
            slowest = slowest.max(t.elapsed());
            worst_rel = worst_rel.max((plan.cost - value).abs() / value);
            if plan.certificate.as_ref().is_some_and(|c| c.passes(plan.cost, 1e-9)) {
                certified += 1;
            }
        }
        passed &= worst_rel <= 1e-9 && certified == trials && slowest <= Duration::from_secs(1) && g.boundary_points.len() <= 200;
        parts.push(format!(
            "{}: {trials} measures, {} boundary points, worst rel. difference {worst_rel:.1e}, {certified} certified, slowest LP {:.0} ms",
            spec.name(),
            g.boundary_points.len(),
            slowest.as_secs_f64() * 1e3
        ));
    }
    Outcome { id: 5, name: "closed form equals LP", passed, detail: parts.join("; ") }
}

fn criterion_6() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (spec, _) in shapes() {
        let g = build_domain(&spec, 1.0 / 32.0).unwrap();
        let d = distance_to_boundary(&g);
        let r1 = inradius(&d, g.h).r1;
        let (value, mx) = max_w1_over_sources(&g, &d);
        let (again, _) = w1_to_boundary(&mx, &d, &g).unwrap();
        let on_argmax = mx.nodes.iter().all(|&k| d.values[k] == r1);
        passed &= value == r1 && again == r1 && on_argmax && (mx.total_mass - 1.0).abs() <= 1e-12;
        parts.push(format!("{}: max {value} vs R1 {r1}, {} maximizer nodes on the argmax", spec.name(), mx.nodes.len()));
    }
    // uniform probability on the unit disk: ∫(1 - r) dA / π = 1/3
    let h = 1.0 / 32.0;
    let g = build_domain(&DomainSpec::unit_disk(), h).unwrap();
    let d = distance_to_boundary(&g);
    let (u, _) = w1_to_boundary(&DiscreteMeasure::uniform(&g).normalized().unwrap(), &d, &g).unwrap();
    passed &= (u - 1.0 / 3.0).abs() <= h;
    parts.push(format!("uniform disk {u:.5} vs 1/3 at h = 1/32"));
    Outcome { id: 6, name: "maximal transport cost is R1", passed, detail: parts.join("; ") }
}

fn criterion_7(disk64: &Study) -> Outcome {
    let fr: Vec<f64> = disk64.result.rows.iter().map(|r| r.concentration_mass_fraction).collect();
    let tail = &fr[fr.len() - 3..];
    let last = *fr.last().unwrap();
    Outcome {
        id: 7,
        name: "source concentrates on the argmax",
        passed: last >= 0.99 && tail.windows(2).all(|w| w[1] >= w[0]),
        detail: format!("disk h = 1/64, eps = 3h: fractions over the last three rows {tail:.4?}"),
    }
}

fn criterion_8(disk64: &Study, square64: &Study) -> Outcome {
    let v: Vec<f64> = disk64.result.rows.iter().map(|r| r.uinf_bound_violation).collect();
    let tail = &v[v.len() - 3..];
    // the tail is flat at sqrt(2) h on the disk: the lattice maximizer of u is one diagonal step off-center
    let uinf_ok = *v.last().unwrap() <= 0.05 && tail.windows(2).all(|w| w[1] <= w[0]);
    let ray = |s: &Study| (s.result.row(16.0).unwrap().ray_deviation, s.result.row(128.0).unwrap().ray_deviation);
    let (d16, d128) = ray(disk64);
    let (s16, s128) = ray(square64);
    Outcome {
        id: 8,
        name: "u <= d/R1 and affine profile on rays",
        passed: uinf_ok && d128 < d16 && s128 < s16,
        detail: format!(
            "disk max(u/sup u - d/R1) over the last three rows {tail:.5?}; ray deviation p = 16 -> 128: disk {d16:.4} -> {d128:.4}, square {s16:.4} -> {s128:.4}"
        ),
    }
}

fn criterion_9() -> Outcome {
    let h = 1.0 / 128.0;
    let mut passed = true;
    let mut parts = Vec::new();
    for (spec, oracle, tol) in [(DomainSpec::unit_square(), 2.0 * PI * PI, 0.01), (DomainSpec::unit_disk(), 5.783_185_962_946_784, 0.02)] {
        let t = Instant::now();
        let g = build_domain(&spec, h).unwrap();
        let d = distance_to_boundary(&g);
        let pair = solve_first_eigenpair(&g, 2.0, &seed_profile(&g, &d, SeedProfile::DistanceField), &SolverConfig::default()).unwrap();
        let el = t.elapsed();
        let rel = (pair.lambda_p - oracle).abs() / oracle;
        passed &= pair.converged() && rel <= tol && el <= Duration::from_secs(120);
        parts.push(format!("{}: {:.5} vs {oracle:.5} (rel. {:.3}%, {:.1}s)", spec.name(), pair.lambda_p, 100.0 * rel, el.as_secs_f64()));
    }
    Outcome { id: 9, name: "p = 2 eigenvalues", passed, detail: parts.join("; ") }
}

fn criterion_10(studies: &[Vec<(Study, Duration)>]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut parts = Vec::new();
    // adjointness
    let mut worst_adj: f64 = 0.0;
    for k in 0..100 {
        let g = build_domain(&shapes()[k % 3].0, 1.0 / 16.0).unwrap();
        let u: Vec<f64> = (0..g.interior_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<Vector2> = (0..g.cells().len()).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let lhs = cell_inner(&g, &gradient(&g, &u), &w);
        let rhs = node_inner(&g, &u, &neg_divergence(&g, &w));
        let scale = g.cell_area / g.h * g.cells().len() as f64;
        worst_adj = worst_adj.max((lhs - rhs).abs() / scale);
    }
    parts.push(format!("adjointness: worst error {worst_adj:.1e} relative to the summand scale over 100 fields"));
    // 1-Lipschitz distance field
    let mut lip_bad = 0;
    for (spec, _) in shapes() {
        let g = build_domain(&spec, 1.0 / 32.0).unwrap();
        let d = distance_to_boundary(&g);
        let n = g.interior_count();
        for _ in 0..10_000 {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if (d.values[a] - d.values[b]).abs() > g.node_point(a).dist(g.node_point(b)) + 1e-12 {
                lip_bad += 1;
            }
        }
    }
    parts.push(format!("distance field: {lip_bad} Lipschitz violations in 3 x 10^4 pairs"));
    // scale invariance over 1e-6 .. 1e6
    let g = build_domain(&DomainSpec::standard_l_shape(), 1.0 / 16.0).unwrap();
    let d = distance_to_boundary(&g);
    let u = seed_profile(&g, &d, SeedProfile::DistanceField);
    let mut worst_scale: f64 = 0.0;
    for p in [2.0, 7.5, 64.0, 256.0] {
        let base = log_rayleigh_quotient(&u, p, &g).unwrap();
        for e in -6..=6 {
            let c = 10f64.powi(e);
            let v = ScalarField(u.values().iter().map(|x| c * x).collect());
            worst_scale = worst_scale.max((log_rayleigh_quotient(&v, p, &g).unwrap() - base).abs() / base.abs());
        }
    }
    parts.push(format!("scale invariance: worst relative change {worst_scale:.1e} over c in [1e-6, 1e6]"));
    // normalization of every solved pair
    let mut worst_norm: f64 = 0.0;
    let mut pairs = 0;
    for per_level in studies {
        for (s, _) in per_level {
            for pair in &s.pairs {
                worst_norm = worst_norm.max((log_norm_power(&s.grid, pair.u.values(), pair.p).exp() - 1.0).abs());
                pairs += 1;
            }
        }
    }
    parts.push(format!("normalization: worst |h^2 sum u^p - 1| = {worst_norm:.1e} over {pairs} pairs"));
    Outcome {
        id: 10,
        name: "property suites",
        passed: worst_adj <= 1e-13 && lip_bad == 0 && worst_scale <= 1e-12 && worst_norm <= 1e-10,
        detail: parts.join("; "),
    }
}

fn main() -> ExitCode {
    let t = Instant::now();
    let studies = run_studies();
    let outcomes = vec![
        criterion_1(&studies),
        criterion_2(&studies),
        criterion_3(&studies),
        criterion_4(&studies),
        criterion_5(),
        criterion_6(),
        criterion_7(&studies[0][2].0),
        criterion_8(&studies[0][2].0, &studies[1][2].0),
        criterion_9(),
        criterion_10(&studies),
    ];
    let mut unexpected = 0;
    for o in &outcomes {
        let expected_fail = EXPECTED_FAILURES.iter().find(|(id, _)| *id == o.id);
        println!("criterion {:>2} {} {}: {}", o.id, if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        match (o.passed, expected_fail) {
            (false, Some((_, why))) => println!("             expected failure: {why}"),
            (true, Some(_)) => {
                println!("             listed as an expected failure but passed");
                unexpected += 1;
            }
            (false, None) => unexpected += 1,
            (true, None) => {}
        }
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("acceptance: {passed} of {} criteria passed in {:.1}s", outcomes.len(), t.elapsed().as_secs_f64());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {unexpected} unexpected outcome(s)");
        ExitCode::FAILURE
    }
}
