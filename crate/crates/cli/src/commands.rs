use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use inflap::asymptotics::{run_study, verdict, SweepResult, Verdict};
use inflap::eigensolver::{continuation_sweep, EigenPair};
use inflap::export::{
    heatmap_svg, panel_svg, plan_svg, rays_svg, write_distance_csv, write_eigenfunction_csv, write_json,
    write_plan_csv, write_sweep_csv, EigenSummary, ExportResult,
};
use inflap::geometry::{build_domain, distance_to_boundary, DistanceField, DomainGrid, Point};
use inflap::measures::{derived_measures, DiscreteMeasure};
use inflap::transport::{solve_discrete_ot, transport_rays, w1_to_boundary, TransportError, TransportPlan, MAX_COST_ENTRIES};

use crate::config::{parse_point, Format, RunConfig, Settings};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_NONCONVERGED: u8 = 2;
pub const EXIT_VERDICT: u8 = 3;

/// Relative agreement demanded between the closed form and the LP.
const AGREEMENT_REL: f64 = 1e-9;

/// Creates the output directory and confirms it accepts files.
fn prepare_out(dir: &Path) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))?;
    let probe = dir.join(".inflap_write_test");
    File::create(&probe).map_err(|e| format!("output directory {} is not writable: {e}", dir.display()))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, String> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn emit(dir: &Path, name: &str, f: impl FnOnce(BufWriter<File>) -> ExportResult) -> Result<(), String> {
    f(create(dir, name)?).map_err(|e| format!("cannot write {}: {e}", dir.join(name).display()))
}

fn emit_text(dir: &Path, name: &str, text: &str) -> Result<(), String> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn write_replay_config(cfg: &RunConfig, s: &Settings) -> Result<(), String> {
    if cfg.reproducible {
        let mut text = s.render().lines().filter(|l| !l.starts_with("out ")).collect::<Vec<_>>().join("\n");
        text.push_str(&format!("\nout = {}\n", cfg.out_dir.display()));
        emit_text(&cfg.out_dir, "run_config.txt", &text)?;
    }
    Ok(())
}

fn grid_of(cfg: &RunConfig) -> Result<(DomainGrid, DistanceField), String> {
    let grid = build_domain(&cfg.domain, cfg.h).map_err(|e| e.to_string())?;
    let d = distance_to_boundary(&grid);
    Ok((grid, d))
}

/// Solves at `p`, reaching it by continuation from `p = 2`.
fn eigenpair_at(grid: &DomainGrid, d: &DistanceField, p: f64, cfg: &RunConfig) -> Result<EigenPair, String> {
    let list: Vec<f64> = if p > 2.0 { vec![2.0, p] } else { vec![p] };
    let mut pairs = continuation_sweep(grid, d, &list, &cfg.solver).map_err(|e| e.to_string())?;
    Ok(pairs.pop().expect("nonempty p list"))
}

fn tag(p: f64) -> String {
    format!("{p}").replace('.', "_")
}

pub fn solve(cfg: &RunConfig, s: &Settings) -> Result<u8, String> {
    let p = cfg.p.unwrap_or(2.0);
    prepare_out(&cfg.out_dir)?;
    let (grid, d) = grid_of(cfg)?;
    let pair = eigenpair_at(&grid, &d, p, cfg)?;
    let summary = EigenSummary::new(&grid, &pair);
    let dir = &cfg.out_dir;
    let t = tag(p);
    if cfg.wants(Format::Json) {
        emit(dir, &format!("eigen_p{t}.json"), |w| write_json(w, &summary))?;
    }
    if cfg.wants(Format::Csv) {
        emit(dir, &format!("field_p{t}.csv"), |w| write_eigenfunction_csv(w, &grid, &pair))?;
    }
    if cfg.wants(Format::Svg) {
        emit_text(dir, &format!("field_p{t}.svg"), &heatmap_svg(&grid, pair.u.values()))?;
    }
    write_replay_config(cfg, s)?;
    println!(
        "{} h={} p={}: lambda={:.10e} lambda^(1/p)={:.8} iterations={} residual={:.3e} converged={}",
        summary.shape, summary.h, p, summary.lambda, summary.lambda_root, summary.iterations, summary.residual, summary.converged
    );
    if summary.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("inflap: solver did not converge at p = {p} (residual {:.3e} > {:.1e})", summary.residual, summary.grad_tol);
        Ok(EXIT_NONCONVERGED)
    }
}

fn print_verdict(v: &Verdict) {
    println!("{} h={} R1={:.6}", v.shape, v.h, v.r1);
    if let Some(e) = &v.extrapolation {
        println!("  lambda_inf estimate {:.6} vs 1/R1 {:.6} (rel. error {:.3e})", e.estimate, e.target, e.relative_error);
    }
    for c in &v.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let kind = if c.hard { "hard" } else { "soft" };
        println!("  {status} [{kind}] {}: {}", c.name, c.detail);
    }
    println!("  verdict: {}", if v.all_hard_passed { "pass" } else { "fail" });
}

pub fn study(cfg: &RunConfig, s: &Settings) -> Result<u8, String> {
    prepare_out(&cfg.out_dir)?;
    let st = run_study(&cfg.domain, cfg.h, &cfg.p_list, &cfg.study).map_err(|e| e.to_string())?;
    let v = verdict(&st.result);
    let dir = &cfg.out_dir;
    if cfg.wants(Format::Json) {
        emit(dir, "verdict.json", |w| write_json(w, &v))?;
        emit(dir, "sweep.json", |w| write_json(w, &st.result))?;
    }
    if cfg.wants(Format::Csv) {
        emit(dir, "sweep.csv", |w| write_sweep_csv(w, &st.result))?;
        emit(dir, "distance.csv", |w| write_distance_csv(w, &st.grid, &st.distance))?;
    }
    if cfg.wants(Format::Svg) {
        if let Some(last) = st.pairs.last() {
            let m = derived_measures(last, &st.grid);
            let n = st.grid.interior_count();
            let f = m.f.dense(n);
            let u_title = format!("u, p = {}", last.p);
            let f_title = format!("f, p = {}", last.p);
            let panel = panel_svg(&st.grid, &[("distance", &st.distance.values), (&u_title, last.u.values()), (&f_title, &f)]);
            emit_text(dir, "panel.svg", &panel)?;
            if let Ok(rays) = transport_rays(&m.f, &st.grid, cfg.study.ray_threshold) {
                emit_text(dir, "rays.svg", &rays_svg(&st.grid, last.u.values(), &rays))?;
            }
        }
    }
    write_replay_config(cfg, s)?;
    print_verdict(&v);
    Ok(if v.all_hard_passed { EXIT_OK } else { EXIT_VERDICT })
}

pub fn report(cfg: &RunConfig, input: Option<&Path>) -> Result<u8, String> {
    let dir: PathBuf = input.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.clone());
    let path = dir.join("sweep.json");
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let sweep: SweepResult = serde_json::from_str(&text).map_err(|e| format!("{} is not a sweep: {e}", path.display()))?;
    let v = verdict(&sweep);
    if cfg.wants(Format::Json) {
        prepare_out(&cfg.out_dir)?;
        emit(&cfg.out_dir, "verdict.json", |w| write_json(w, &v))?;
    }
    print_verdict(&v);
    Ok(if v.all_hard_passed { EXIT_OK } else { EXIT_VERDICT })
}

#[derive(Args, Debug, Default)]
#[group(skip)]
#[command(group(ArgGroup::new("source").required(true).args(["from_eigen", "measure", "uniform", "point", "random"])))]
pub struct TransportArgs {
    /// Use the normalized source f = u^(p-1) of the eigenfunction at this exponent.
    #[arg(long)]
    pub from_eigen: Option<f64>,
    /// CSV with columns x,y,weight; points snap to the nearest interior node.
    #[arg(long)]
    pub measure: Option<PathBuf>,
    /// Uniform probability on the interior nodes.
    #[arg(long)]
    pub uniform: bool,
    /// Unit point mass at x,y.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Random probability weights on the interior nodes, drawn from --seed.
    #[arg(long)]
    pub random: bool,
    /// CSV with columns x,y,weight fixing the target marginal; without it the
    /// target is any measure on the sampled boundary.
    #[arg(long)]
    pub targets: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSummary {
    pub shape: String,
    pub h: f64,
    pub source: String,
    /// `free` (any boundary measure) or `fixed` (target marginal given).
    pub mode: String,
    pub source_mass: f64,
    pub source_points: usize,
    pub target_points: usize,
    pub value: f64,
    pub closed_form: Option<f64>,
    pub lp_cost: Option<f64>,
    pub relative_difference: Option<f64>,
    pub agreement: Option<bool>,
    pub certificate_passed: Option<bool>,
    pub lp_skipped: Option<String>,
    pub converged: Option<bool>,
}

fn read_weighted_points(path: &Path) -> Result<Vec<(Point, f64)>, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| format!("{}: {e}", path.display()))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| format!("{}: missing column `{name}`", path.display()))
    };
    let (ix, iy, iw) = (col("x")?, col("y")?, col("weight")?);
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let num = |i: usize| {
            rec.get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| format!("{}: row {} is not numeric", path.display(), n + 1))
        };
        out.push((Point::new(num(ix)?, num(iy)?), num(iw)?));
    }
    Ok(out)
}

fn snap(grid: &DomainGrid, p: Point) -> Result<usize, String> {
    grid.nearest_node(p).ok_or_else(|| format!("point ({}, {}) is not within one cell of an interior node", p.x, p.y))
}

fn source_measure(
    cfg: &RunConfig,
    grid: &DomainGrid,
    d: &DistanceField,
    args: &TransportArgs,
) -> Result<(DiscreteMeasure, String, Option<bool>), String> {
    let n = grid.interior_count();
    if let Some(p) = args.from_eigen {
        let pair = eigenpair_at(grid, d, p, cfg)?;
        let f = derived_measures(&pair, grid).f.normalized().map_err(|e| e.to_string())?;
        return Ok((f, format!("eigen:p={p}"), Some(pair.converged())));
    }
    if let Some(path) = &args.measure {
        let mut w = vec![0.0; n];
        for (x, m) in read_weighted_points(path)? {
            w[snap(grid, x)?] += m;
        }
        let f = DiscreteMeasure::from_node_weights(w).map_err(|e| format!("{}: {e}", path.display()))?;
        return Ok((f, format!("file:{}", path.display()), None));
    }
    if args.uniform {
        return Ok((DiscreteMeasure::uniform(grid), "uniform".into(), None));
    }
    if let Some(pt) = &args.point {
        let x = parse_point(pt).ok_or_else(|| format!("--point expects x,y, got `{pt}`"))?;
        return Ok((DiscreteMeasure::point_mass(snap(grid, x)?, 1.0), format!("point:{},{}", x.x, x.y), None));
    }
    if args.random {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let f = DiscreteMeasure::from_node_weights(w).and_then(|m| m.normalized()).map_err(|e| e.to_string())?;
        return Ok((f, format!("random:seed={}", cfg.seed), None));
    }
    Err("transport needs a source: --from-eigen, --measure, --uniform, --point or --random".into())
}

fn transport_error(e: TransportError) -> String {
    match e {
        TransportError::InfeasibleMarginals(a, b) => format!("InfeasibleMarginals: source mass {a} vs target mass {b}"),
        other => other.to_string(),
    }
}

pub fn transport(cfg: &RunConfig, s: &Settings, args: &TransportArgs) -> Result<u8, String> {
    prepare_out(&cfg.out_dir)?;
    let (grid, d) = grid_of(cfg)?;
    let (f, label, converged) = source_measure(cfg, &grid, &d, args)?;
    let fixed = args.targets.as_deref().map(read_weighted_points).transpose()?;

    let (plan, summary) = match fixed {
        Some(tw) => {
            let targets: Vec<Point> = tw.iter().map(|t| t.0).collect();
            let weights: Vec<f64> = tw.iter().map(|t| t.1).collect();
            let plan = solve_discrete_ot(&f, &grid, &targets, Some(&weights)).map_err(transport_error)?;
            let cert = plan.certificate.as_ref().map(|c| c.passes(plan.cost, AGREEMENT_REL));
            let summary = TransportSummary {
                shape: grid.spec.name().into(),
                h: grid.h,
                source: label,
                mode: "fixed".into(),
                source_mass: f.total_mass,
                source_points: f.weights.iter().filter(|&&w| w > 0.0).count(),
                target_points: targets.len(),
                value: plan.cost,
                closed_form: None,
                lp_cost: Some(plan.cost),
                relative_difference: None,
                agreement: None,
                certificate_passed: cert,
                lp_skipped: None,
                converged,
            };
            (plan, summary)
        }
        None => {
            let (value, closed_plan) = w1_to_boundary(&f, &d, &grid).map_err(transport_error)?;
            let entries = f.len() * grid.boundary_points.len();
            let (lp, skipped) = if entries <= MAX_COST_ENTRIES {
                (Some(solve_discrete_ot(&f, &grid, &grid.boundary_points, None).map_err(transport_error)?), None)
            } else {
                (None, Some(format!("{entries} cost entries exceed the LP cap of {MAX_COST_ENTRIES}")))
            };
            let lp_cost = lp.as_ref().map(|p| p.cost);
            let rel = lp_cost.map(|c| (c - value).abs() / value.abs().max(f64::MIN_POSITIVE));
            let cert = lp.as_ref().and_then(|p| p.certificate.as_ref().map(|c| c.passes(p.cost, AGREEMENT_REL)));
            let agreement = rel.map(|r| r <= AGREEMENT_REL && cert != Some(false));
            let summary = TransportSummary {
                shape: grid.spec.name().into(),
                h: grid.h,
                source: label,
                mode: "free".into(),
                source_mass: f.total_mass,
                source_points: f.weights.iter().filter(|&&w| w > 0.0).count(),
                target_points: grid.boundary_points.len(),
                value,
                closed_form: Some(value),
                lp_cost,
                relative_difference: rel,
                agreement,
                certificate_passed: cert,
                lp_skipped: skipped,
                converged,
            };
            (lp.unwrap_or(closed_plan), summary)
        }
    };

    let dir = &cfg.out_dir;
    if cfg.wants(Format::Json) {
        emit(dir, "transport.json", |w| write_json(w, &summary))?;
    }
    if cfg.wants(Format::Csv) {
        emit(dir, "plan.csv", |w| write_plan_csv(w, &grid, &plan))?;
    }
    if cfg.wants(Format::Svg) {
        emit_text(dir, "plan.svg", &plan_svg(&grid, &plan, 1e-3))?;
    }
    write_replay_config(cfg, s)?;
    print_transport(&summary, &plan);

    if converged == Some(false) {
        eprintln!("inflap: eigen source did not converge");
        return Ok(EXIT_NONCONVERGED);
    }
    if summary.agreement == Some(false) || summary.certificate_passed == Some(false) {
        return Ok(EXIT_VERDICT);
    }
    Ok(EXIT_OK)
}

fn print_transport(s: &TransportSummary, plan: &TransportPlan) {
    println!("{} h={} source={} mode={}: value={:.12} ({} plan entries)", s.shape, s.h, s.source, s.mode, s.value, plan.entries.len());
    match (s.lp_cost, s.relative_difference, &s.lp_skipped) {
        (Some(c), Some(r), _) => println!("  LP cost {c:.12}, relative difference {r:.2e}, agreement {}", if s.agreement == Some(true) { "pass" } else { "fail" }),
        (Some(c), None, _) => println!("  LP cost {c:.12}"),
        (None, _, Some(why)) => println!("  LP check skipped: {why}"),
        _ => {}
    }
    if let Some(c) = s.certificate_passed {
        println!("  complementary slackness certificate: {}", if c { "pass" } else { "fail" });
    }
}
