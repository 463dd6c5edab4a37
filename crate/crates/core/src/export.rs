//! CSV, JSON and SVG output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::asymptotics::SweepResult;
use crate::eigensolver::EigenPair;
use crate::geometry::{DistanceField, DomainGrid};
use crate::measures::{DiscreteMeasure, Support, VectorMeasure};
use crate::transport::{RaySet, TransportPlan};

pub type ExportResult = Result<(), Box<dyn std::error::Error + Send + Sync>>;

/// Writes `x,y,<name>` rows for a per-node field.
pub fn write_node_field_csv<W: Write>(w: W, grid: &DomainGrid, name: &str, values: &[f64]) -> ExportResult {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", name])?;
    for (k, v) in values.iter().enumerate() {
        let x = grid.node_point(k);
        out.write_record([x.x.to_string(), x.y.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_distance_csv<W: Write>(w: W, grid: &DomainGrid, d: &DistanceField) -> ExportResult {
    write_node_field_csv(w, grid, "d", &d.values)
}

pub fn write_eigenfunction_csv<W: Write>(w: W, grid: &DomainGrid, pair: &EigenPair) -> ExportResult {
    write_node_field_csv(w, grid, "u", pair.u.values())
}

/// `x,y,weight` at node or cell-center locations.
pub fn write_measure_csv<W: Write>(w: W, grid: &DomainGrid, m: &DiscreteMeasure) -> ExportResult {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "weight"])?;
    for k in 0..m.len() {
        let x = m.location(grid, k);
        out.write_record([x.x.to_string(), x.y.to_string(), m.weights[k].to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `x,y,vx,vy` at cell centers.
pub fn write_vector_measure_csv<W: Write>(w: W, grid: &DomainGrid, m: &VectorMeasure) -> ExportResult {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "vx", "vy"])?;
    for (&c, v) in m.cells.iter().zip(&m.vectors) {
        let x = grid.cell_center(c);
        out.write_record([x.x.to_string(), x.y.to_string(), v[0].to_string(), v[1].to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `xs,ys,xt,yt,mass` per plan entry.
pub fn write_plan_csv<W: Write>(w: W, grid: &DomainGrid, plan: &TransportPlan) -> ExportResult {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["xs", "ys", "xt", "yt", "mass"])?;
    for e in &plan.entries {
        let x = plan.source_marginal.location(grid, e.source);
        let y = plan.targets[e.target];
        out.write_record([x.x.to_string(), x.y.to_string(), y.x.to_string(), y.y.to_string(), e.mass.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per exponent, columns named after the [`SweepRow`](crate::asymptotics::SweepRow) fields.
pub fn write_sweep_csv<W: Write>(w: W, sweep: &SweepResult) -> ExportResult {
    let mut out = csv::Writer::from_writer(w);
    for r in &sweep.rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub shape: String,
    pub h: f64,
    pub p: f64,
    pub lambda: f64,
    pub log_lambda: f64,
    pub lambda_root: f64,
    pub iterations: usize,
    pub residual: f64,
    pub grad_tol: f64,
    pub converged: bool,
    pub interior_nodes: usize,
}

impl EigenSummary {
    pub fn new(grid: &DomainGrid, pair: &EigenPair) -> Self {
        Self {
            shape: grid.spec.name().into(),
            h: grid.h,
            p: pair.p,
            lambda: pair.lambda_p,
            log_lambda: pair.log_lambda,
            lambda_root: pair.lambda_root(),
            iterations: pair.iterations,
            residual: pair.residual_norm,
            grad_tol: pair.grad_tol,
            converged: pair.converged(),
            interior_nodes: grid.interior_count(),
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> ExportResult {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// Pixel scale of SVG output per unit length.
const SVG_SCALE: f64 = 400.0;

struct Frame {
    x0: f64,
    y1: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn of(grid: &DomainGrid) -> Self {
        let (lo, hi) = grid.spec.bounding_box();
        let pad = grid.h;
        Self { x0: lo.x - pad, y1: hi.y + pad, width: hi.x - lo.x + 2.0 * pad, height: hi.y - lo.y + 2.0 * pad }
    }

    fn px(&self, x: f64) -> f64 {
        (x - self.x0) * SVG_SCALE
    }

    fn py(&self, y: f64) -> f64 {
        (self.y1 - y) * SVG_SCALE
    }
}

fn heatmap_body(grid: &DomainGrid, values: &[f64], frame: &Frame, dx: f64) -> String {
    let vmax = values.iter().copied().fold(0.0, f64::max);
    let side = grid.h * SVG_SCALE;
    let mut s = String::new();
    for (k, v) in values.iter().enumerate() {
        let x = grid.node_point(k);
        let level = if vmax > 0.0 { (v / vmax).clamp(0.0, 1.0) } else { 0.0 };
        let g = (255.0 * (1.0 - level)).round() as u8;
        s.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({g},{g},{g})\"/>\n",
            dx + frame.px(x.x) - side / 2.0,
            frame.py(x.y) - side / 2.0,
            side,
            side
        ));
    }
    s
}

fn boundary_body(grid: &DomainGrid, frame: &Frame, dx: f64) -> String {
    let mut s = String::new();
    for comp in &grid.boundary_components {
        let pts: Vec<String> = grid.boundary_points[comp.clone()]
            .iter()
            .map(|p| format!("{:.2},{:.2}", dx + frame.px(p.x), frame.py(p.y)))
            .collect();
        s.push_str(&format!("<polygon points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n", pts.join(" ")));
    }
    s
}

fn svg_document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.2} {height:.2}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Grayscale heatmap of a per-node field (black = maximum).
pub fn heatmap_svg(grid: &DomainGrid, values: &[f64]) -> String {
    let f = Frame::of(grid);
    let body = heatmap_body(grid, values, &f, 0.0) + &boundary_body(grid, &f, 0.0);
    svg_document(f.width * SVG_SCALE, f.height * SVG_SCALE, &body)
}

/// Heatmap with transport rays drawn on top.
pub fn rays_svg(grid: &DomainGrid, values: &[f64], rays: &RaySet) -> String {
    let f = Frame::of(grid);
    let mut body = heatmap_body(grid, values, &f, 0.0) + &boundary_body(grid, &f, 0.0);
    for r in &rays.rays {
        let x = grid.node_point(r.source);
        let y = grid.boundary_points[r.target];
        body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"red\" stroke-width=\"0.5\"/>\n",
            f.px(x.x),
            f.py(x.y),
            f.px(y.x),
            f.py(y.y)
        ));
    }
    svg_document(f.width * SVG_SCALE, f.height * SVG_SCALE, &body)
}

/// Source weights as a heatmap with one line per plan entry carrying at
/// least `min_fraction` of the largest entry mass.
pub fn plan_svg(grid: &DomainGrid, plan: &TransportPlan, min_fraction: f64) -> String {
    let f = Frame::of(grid);
    let n = grid.interior_count();
    let weights = if plan.source_marginal.support == Support::Nodes {
        plan.source_marginal.dense(n)
    } else {
        vec![0.0; n]
    };
    let mut body = heatmap_body(grid, &weights, &f, 0.0) + &boundary_body(grid, &f, 0.0);
    let top = plan.entries.iter().map(|e| e.mass).fold(0.0, f64::max);
    for e in plan.entries.iter().filter(|e| e.mass >= min_fraction * top) {
        let x = plan.source_marginal.location(grid, e.source);
        let y = plan.targets[e.target];
        body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"blue\" stroke-width=\"0.5\"/>\n",
            f.px(x.x),
            f.py(x.y),
            f.px(y.x),
            f.py(y.y)
        ));
    }
    svg_document(f.width * SVG_SCALE, f.height * SVG_SCALE, &body)
}

/// Side-by-side heatmaps with captions.
pub fn panel_svg(grid: &DomainGrid, panels: &[(&str, &[f64])]) -> String {
    let f = Frame::of(grid);
    let w = f.width * SVG_SCALE;
    let caption = 24.0;
    let mut body = String::new();
    for (i, (title, values)) in panels.iter().enumerate() {
        let dx = i as f64 * w;
        body.push_str(&format!("<g transform=\"translate(0,{caption})\">\n"));
        body.push_str(&heatmap_body(grid, values, &f, dx));
        body.push_str(&boundary_body(grid, &f, dx));
        body.push_str("</g>\n");
        body.push_str(&format!(
            "<text x=\"{:.1}\" y=\"18\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
            dx + 8.0,
            escape(title)
        ));
    }
    svg_document(w * panels.len().max(1) as f64, f.height * SVG_SCALE + caption, &body)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, distance_to_boundary, DomainSpec};

    #[test]
    fn distance_csv_has_header_and_rows() {
        let g = build_domain(&DomainSpec::unit_square(), 0.125).unwrap();
        let d = distance_to_boundary(&g);
        let mut buf = Vec::new();
        write_distance_csv(&mut buf, &g, &d).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,d"));
        assert_eq!(lines.count(), g.interior_count());
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let g = build_domain(&DomainSpec::unit_disk(), 0.125).unwrap();
        let d = distance_to_boundary(&g);
        let s = heatmap_svg(&g, &d.values);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<rect").count(), g.interior_count() + 1);
        let p = panel_svg(&g, &[("d", &d.values), ("a<b", &d.values)]);
        assert!(p.contains("a&lt;b"));
    }
}
