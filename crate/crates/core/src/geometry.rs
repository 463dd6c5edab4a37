//! Planar domains, their lattice discretization, and distance-to-boundary
//! geometry (distance field, inradius, nearest boundary points).

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum number of cells that must span the narrowest feature of a domain.
pub const MIN_CELLS_ACROSS: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate domain: {0}")]
    DegenerateSpec(String),
    #[error("cell size {h} too coarse: narrowest feature {feature} needs h <= {max_h}")]
    FeatureTooFine { h: f64, feature: f64, max_h: f64 },
    #[error("point ({x}, {y}) is not an interior node")]
    NotInterior { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + t * (o.x - self.x), self.y + t * (o.y - self.y))
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.lerp(b, t))
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    fn orient(a: Point, b: Point, c: Point) -> f64 {
        b.sub(a).cross(c.sub(a))
    }
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    // touching or collinear overlap
    point_segment_distance(c, a, b) == 0.0
        || point_segment_distance(d, a, b) == 0.0
        || point_segment_distance(a, c, d) == 0.0
        || point_segment_distance(b, c, d) == 0.0
}

fn segment_segment_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Continuous description of a planar domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DomainSpec {
    Disk { center: Point, radius: f64 },
    Rectangle { corner_min: Point, corner_max: Point },
    /// `[0, outer]²` with the square `[outer - notch, outer]²` removed; the
    /// reentrant corner sits at `(outer - notch, outer - notch)`.
    LShape { outer_side: f64, notch_side: f64 },
    Annulus { center: Point, r_in: f64, r_out: f64 },
    Polygon { vertices: Vec<Point> },
}

impl DomainSpec {
    pub fn unit_disk() -> Self {
        DomainSpec::Disk { center: Point::new(0.0, 0.0), radius: 1.0 }
    }

    pub fn unit_square() -> Self {
        DomainSpec::Rectangle { corner_min: Point::new(0.0, 0.0), corner_max: Point::new(1.0, 1.0) }
    }

    pub fn standard_l_shape() -> Self {
        DomainSpec::LShape { outer_side: 2.0, notch_side: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DomainSpec::Disk { .. } => "disk",
            DomainSpec::Rectangle { .. } => "rectangle",
            DomainSpec::LShape { .. } => "l_shape",
            DomainSpec::Annulus { .. } => "annulus",
            DomainSpec::Polygon { .. } => "polygon",
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::DegenerateSpec(m.to_string()));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            DomainSpec::Disk { center, radius } => {
                if !finite(&[center.x, center.y, *radius]) || *radius <= 0.0 {
                    return bad("disk radius must be positive");
                }
            }
            DomainSpec::Rectangle { corner_min, corner_max } => {
                if !finite(&[corner_min.x, corner_min.y, corner_max.x, corner_max.y])
                    || corner_max.x <= corner_min.x
                    || corner_max.y <= corner_min.y
                {
                    return bad("rectangle must have positive extents");
                }
            }
            DomainSpec::LShape { outer_side, notch_side } => {
                if !finite(&[*outer_side, *notch_side]) || *notch_side <= 0.0 || outer_side <= notch_side {
                    return bad("l_shape needs 0 < notch_side < outer_side");
                }
            }
            DomainSpec::Annulus { center, r_in, r_out } => {
                if !finite(&[center.x, center.y, *r_in, *r_out]) || *r_in <= 0.0 || r_out <= r_in {
                    return bad("annulus needs 0 < r_in < r_out");
                }
            }
            DomainSpec::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return bad("polygon needs at least 3 vertices");
                }
                if !vertices.iter().all(|v| v.x.is_finite() && v.y.is_finite()) {
                    return bad("polygon vertices must be finite");
                }
                if polygon_area(vertices).abs() <= 0.0 {
                    return bad("polygon has zero area");
                }
                let n = vertices.len();
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    if a == b {
                        return bad("polygon has repeated consecutive vertices");
                    }
                    for j in (i + 2)..n {
                        if i == 0 && j == n - 1 {
                            continue;
                        }
                        let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                        if segments_intersect(a, b, c, d) {
                            return bad("polygon is not simple");
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Polygonal boundary, when the shape has one.
    fn polygon(&self) -> Option<Vec<Point>> {
        match self {
            DomainSpec::Rectangle { corner_min: a, corner_max: b } => Some(vec![
                Point::new(a.x, a.y),
                Point::new(b.x, a.y),
                Point::new(b.x, b.y),
                Point::new(a.x, b.y),
            ]),
            DomainSpec::LShape { outer_side: o, notch_side: n } => {
                let c = o - n;
                Some(vec![
                    Point::new(0.0, 0.0),
                    Point::new(*o, 0.0),
                    Point::new(*o, c),
                    Point::new(c, c),
                    Point::new(c, *o),
                    Point::new(0.0, *o),
                ])
            }
            DomainSpec::Polygon { vertices } => Some(vertices.clone()),
            _ => None,
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            DomainSpec::Disk { radius, .. } => PI * radius * radius,
            DomainSpec::Annulus { r_in, r_out, .. } => PI * (r_out * r_out - r_in * r_in),
            _ => polygon_area(&self.polygon().expect("polygonal shape")).abs(),
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            DomainSpec::Disk { radius, .. } => 2.0 * PI * radius,
            DomainSpec::Annulus { r_in, r_out, .. } => 2.0 * PI * (r_in + r_out),
            _ => {
                let v = self.polygon().expect("polygonal shape");
                (0..v.len()).map(|i| v[i].dist(v[(i + 1) % v.len()])).sum()
            }
        }
    }

    /// Width of the thinnest part of the domain.
    pub fn narrowest_feature(&self) -> f64 {
        match self {
            DomainSpec::Disk { radius, .. } => 2.0 * radius,
            DomainSpec::Annulus { r_in, r_out, .. } => r_out - r_in,
            _ => {
                let v = self.polygon().expect("polygonal shape");
                let n = v.len();
                let mut best = f64::INFINITY;
                for i in 0..n {
                    for e in 0..n {
                        // vertex i against edges not incident to it
                        if e == i || (e + 1) % n == i {
                            continue;
                        }
                        best = best.min(point_segment_distance(v[i], v[e], v[(e + 1) % n]));
                    }
                    for j in (i + 2)..n {
                        if i == 0 && j == n - 1 {
                            continue;
                        }
                        best = best.min(segment_segment_distance(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]));
                    }
                }
                best
            }
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            DomainSpec::Disk { center: c, radius: r } | DomainSpec::Annulus { center: c, r_out: r, .. } => {
                (Point::new(c.x - r, c.y - r), Point::new(c.x + r, c.y + r))
            }
            _ => {
                let v = self.polygon().expect("polygonal shape");
                let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for p in v {
                    lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
                    hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
                }
                (lo, hi)
            }
        }
    }

    /// Exact Euclidean distance from `p` to the continuous boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match self {
            DomainSpec::Disk { center, radius } => (p.dist(*center) - radius).abs(),
            DomainSpec::Annulus { center, r_in, r_out } => {
                let r = p.dist(*center);
                (r - r_in).abs().min((r - r_out).abs())
            }
            _ => {
                let v = self.polygon().expect("polygonal shape");
                (0..v.len())
                    .map(|i| point_segment_distance(p, v[i], v[(i + 1) % v.len()]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Open-set membership (points on the boundary are outside).
    pub fn contains(&self, p: Point) -> bool {
        match self {
            DomainSpec::Disk { center, radius } => p.dist(*center) < *radius,
            DomainSpec::Annulus { center, r_in, r_out } => {
                let r = p.dist(*center);
                r > *r_in && r < *r_out
            }
            _ => {
                let v = self.polygon().expect("polygonal shape");
                self.boundary_distance(p) > 0.0 && point_in_polygon(p, &v)
            }
        }
    }

    /// Boundary samples with spacing at most `spacing`, grouped into closed
    /// components; consecutive samples within a component are neighbours
    /// along the boundary (cyclically).
    pub fn sample_boundary(&self, spacing: f64) -> (Vec<Point>, Vec<Range<usize>>) {
        let mut pts = Vec::new();
        let mut comps = Vec::new();
        let circle = |c: Point, r: f64, pts: &mut Vec<Point>| {
            let start = pts.len();
            let n = ((2.0 * PI * r) / spacing).ceil().max(3.0) as usize;
            for k in 0..n {
                let t = 2.0 * PI * k as f64 / n as f64;
                pts.push(Point::new(c.x + r * t.cos(), c.y + r * t.sin()));
            }
            start..pts.len()
        };
        match self {
            DomainSpec::Disk { center, radius } => comps.push(circle(*center, *radius, &mut pts)),
            DomainSpec::Annulus { center, r_in, r_out } => {
                comps.push(circle(*center, *r_out, &mut pts));
                comps.push(circle(*center, *r_in, &mut pts));
            }
            _ => {
                let v = self.polygon().expect("polygonal shape");
                let start = pts.len();
                for i in 0..v.len() {
                    let (a, b) = (v[i], v[(i + 1) % v.len()]);
                    let n = (a.dist(b) / spacing).ceil().max(1.0) as usize;
                    for k in 0..n {
                        pts.push(a.lerp(b, k as f64 / n as f64));
                    }
                }
                comps.push(start..pts.len());
            }
        }
        (pts, comps)
    }
}

fn polygon_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

fn point_in_polygon(p: Point, v: &[Point]) -> bool {
    let mut inside = false;
    let n = v.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

const NONE: u32 = u32::MAX;

/// One forward-difference cell: the lattice node at its lower-left corner and
/// the interior indices of that node and its `+x` / `+y` neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub lattice: usize,
    nodes: [u32; 3],
}

impl Cell {
    /// Interior index of the base node, its `+x` neighbour, and its `+y` neighbour.
    pub fn nodes(&self) -> [Option<usize>; 3] {
        self.nodes.map(|n| (n != NONE).then_some(n as usize))
    }
}

/// Uniform Cartesian lattice masked to a domain, plus boundary samples.
///
/// Lattice node `(i, j)` (0-based within the lattice) sits at
/// `((i0 + i) h, (j0 + j) h)`. Interior nodes carry unknowns and are numbered
/// row by row; every other lattice node carries the Dirichlet value zero.
#[derive(Debug, Clone)]
pub struct DomainGrid {
    pub spec: DomainSpec,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub i0: i64,
    pub j0: i64,
    pub interior_mask: Vec<bool>,
    pub boundary_points: Vec<Point>,
    pub boundary_components: Vec<Range<usize>>,
    pub cell_area: f64,
    interior: Vec<usize>,
    lattice_to_interior: Vec<u32>,
    cells: Vec<Cell>,
}

impl DomainGrid {
    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    /// Lattice index of each interior node.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn lattice_point(&self, lattice: usize) -> Point {
        let (i, j) = (lattice % self.nx, lattice / self.nx);
        Point::new((self.i0 + i as i64) as f64 * self.h, (self.j0 + j as i64) as f64 * self.h)
    }

    pub fn node_point(&self, node: usize) -> Point {
        self.lattice_point(self.interior[node])
    }

    /// Centre of the square whose lower-left corner is the cell's base node.
    pub fn cell_center(&self, cell: usize) -> Point {
        let p = self.lattice_point(self.cells[cell].lattice);
        Point::new(p.x + 0.5 * self.h, p.y + 0.5 * self.h)
    }

    pub fn interior_index(&self, lattice: usize) -> Option<usize> {
        let k = self.lattice_to_interior[lattice];
        (k != NONE).then_some(k as usize)
    }

    /// Interior node located exactly at `p` (to within `1e-9 h`).
    pub fn locate_node(&self, p: Point) -> Option<usize> {
        let fi = p.x / self.h - self.i0 as f64;
        let fj = p.y / self.h - self.j0 as f64;
        let (ri, rj) = (fi.round(), fj.round());
        if (fi - ri).abs() > 1e-9 || (fj - rj).abs() > 1e-9 {
            return None;
        }
        if ri < 0.0 || rj < 0.0 || ri >= self.nx as f64 || rj >= self.ny as f64 {
            return None;
        }
        self.interior_index(rj as usize * self.nx + ri as usize)
    }

    /// Interior node closest to `p`, if any lies within one cell diagonal.
    pub fn nearest_node(&self, p: Point) -> Option<usize> {
        let ci = (p.x / self.h).round() as i64 - self.i0;
        let cj = (p.y / self.h).round() as i64 - self.j0;
        let mut best: Option<(f64, usize)> = None;
        for dj in -1..=1 {
            for di in -1..=1 {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
                    continue;
                }
                if let Some(n) = self.interior_index(j as usize * self.nx + i as usize) {
                    let d = self.node_point(n).dist(p);
                    if d <= self.h * std::f64::consts::SQRT_2 && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, n));
                    }
                }
            }
        }
        best.map(|(_, n)| n)
    }

    /// Lattice neighbours (4-connectivity) of a lattice node.
    pub fn lattice_neighbors(&self, lattice: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = ((lattice % self.nx) as i64, (lattice / self.nx) as i64);
        [(1, 0), (-1, 0), (0, 1), (0, -1)].into_iter().filter_map(move |(di, dj)| {
            let (a, b) = (i + di, j + dj);
            (a >= 0 && b >= 0 && a < self.nx as i64 && b < self.ny as i64).then(|| b as usize * self.nx + a as usize)
        })
    }
}

/// Discretize `spec` on the lattice `hZ²`, requiring at least
/// [`MIN_CELLS_ACROSS`] cells across the narrowest feature.
pub fn build_domain(spec: &DomainSpec, h: f64) -> Result<DomainGrid, GeometryError> {
    build_domain_with_min_cells(spec, h, MIN_CELLS_ACROSS)
}

/// Same as [`build_domain`] with an explicit resolution requirement.
pub fn build_domain_with_min_cells(spec: &DomainSpec, h: f64, min_cells: f64) -> Result<DomainGrid, GeometryError> {
    spec.validate()?;
    let feature = spec.narrowest_feature();
    let max_h = feature / min_cells;
    if !(h > 0.0 && h.is_finite()) || h > max_h * (1.0 + 1e-12) {
        return Err(GeometryError::FeatureTooFine { h, feature, max_h });
    }

    let (lo, hi) = spec.bounding_box();
    let i0 = (lo.x / h).floor() as i64 - 1;
    let j0 = (lo.y / h).floor() as i64 - 1;
    let i1 = (hi.x / h).ceil() as i64 + 1;
    let j1 = (hi.y / h).ceil() as i64 + 1;
    let nx = (i1 - i0 + 1) as usize;
    let ny = (j1 - j0 + 1) as usize;
    if nx.saturating_mul(ny) > u32::MAX as usize / 2 {
        return Err(GeometryError::DegenerateSpec("lattice too large".into()));
    }

    let eps = 1e-9 * h;
    let mut interior_mask = vec![false; nx * ny];
    let mut interior = Vec::new();
    let mut lattice_to_interior = vec![NONE; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let p = Point::new((i0 + i as i64) as f64 * h, (j0 + j as i64) as f64 * h);
            if spec.contains(p) && spec.boundary_distance(p) > eps {
                let l = j * nx + i;
                interior_mask[l] = true;
                lattice_to_interior[l] = interior.len() as u32;
                interior.push(l);
            }
        }
    }
    if interior.is_empty() {
        return Err(GeometryError::DegenerateSpec("no interior nodes".into()));
    }

    let (boundary_points, boundary_components) = spec.sample_boundary(0.5 * h);

    let mut cells = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let l = j * nx + i;
            let nodes = [lattice_to_interior[l], lattice_to_interior[l + 1], lattice_to_interior[l + nx]];
            if nodes.iter().any(|&n| n != NONE) {
                cells.push(Cell { lattice: l, nodes });
            }
        }
    }

    let grid = DomainGrid {
        spec: spec.clone(),
        h,
        nx,
        ny,
        i0,
        j0,
        interior_mask,
        boundary_points,
        boundary_components,
        cell_area: h * h,
        interior,
        lattice_to_interior,
        cells,
    };
    if !mask_is_connected(&grid) {
        return Err(GeometryError::DegenerateSpec("interior mask is not connected".into()));
    }
    Ok(grid)
}

/// Flood fill over 4-neighbours of interior nodes.
pub fn mask_is_connected(grid: &DomainGrid) -> bool {
    let n = grid.interior_count();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(k) = queue.pop_front() {
        for nb in grid.lattice_neighbors(grid.interior[k]) {
            if let Some(m) = grid.interior_index(nb) {
                if !seen[m] {
                    seen[m] = true;
                    count += 1;
                    queue.push_back(m);
                }
            }
        }
    }
    count == n
}

/// Distance from each interior node to the sampled boundary.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub values: Vec<f64>,
    /// Index of a nearest boundary sample; exact ties go to the one with the
    /// smallest polar angle around the node.
    pub nearest: Vec<usize>,
}

fn angle_from(x: Point, y: Point) -> f64 {
    (y.y - x.y).atan2(y.x - x.x)
}

/// Exhaustive nearest-sample search over the boundary.
pub fn distance_to_boundary(grid: &DomainGrid) -> DistanceField {
    let b = &grid.boundary_points;
    let mut values = Vec::with_capacity(grid.interior_count());
    let mut nearest = Vec::with_capacity(grid.interior_count());
    for node in 0..grid.interior_count() {
        let x = grid.node_point(node);
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (k, &y) in b.iter().enumerate() {
            let d = x.dist(y);
            if d < best || (d == best && angle_from(x, y) < angle_from(x, b[arg])) {
                best = d;
                arg = k;
            }
        }
        values.push(best);
        nearest.push(arg);
    }
    DistanceField { values, nearest }
}

#[derive(Debug, Clone)]
pub struct Inradius {
    pub r1: f64,
    /// Nodes with `d >= r1 - 2h`.
    pub argmax_nodes: Vec<usize>,
}

pub fn inradius(d: &DistanceField, h: f64) -> Inradius {
    let r1 = d.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 2.0 * h;
    let argmax_nodes = d.values.iter().enumerate().filter(|(_, &v)| v >= r1 - tol).map(|(k, _)| k).collect();
    Inradius { r1, argmax_nodes }
}

/// Boundary samples that locally minimize the distance to `x` along the
/// boundary and lie within `h/2` of the global minimum, sorted by polar angle
/// around `x`. Plateaus of exactly tied samples are kept whole.
pub fn boundary_projection(grid: &DomainGrid, x: Point) -> Result<Vec<usize>, GeometryError> {
    let node = grid.locate_node(x).ok_or(GeometryError::NotInterior { x: x.x, y: x.y })?;
    Ok(projection_of_node(grid, node))
}

pub fn projection_of_node(grid: &DomainGrid, node: usize) -> Vec<usize> {
    let x = grid.node_point(node);
    let b = &grid.boundary_points;
    let dist: Vec<f64> = b.iter().map(|&y| x.dist(y)).collect();
    let dmin = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let tie_tol = 0.5 * grid.h;
    let flat = 1e-12 * dmin.max(grid.h);
    let mut out = Vec::new();
    for comp in &grid.boundary_components {
        let len = comp.len();
        for k in 0..len {
            let idx = comp.start + k;
            let dk = dist[idx];
            if dk > dmin + tie_tol {
                continue;
            }
            let prev = dist[comp.start + (k + len - 1) % len];
            let next = dist[comp.start + (k + 1) % len];
            if dk <= prev + flat && dk <= next + flat {
                out.push(idx);
            }
        }
    }
    out.sort_by(|&a, &c| angle_from(x, b[a]).total_cmp(&angle_from(x, b[c])).then(a.cmp(&c)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_quarter_lattice() {
        let g = build_domain_with_min_cells(&DomainSpec::unit_square(), 0.25, 2.0).unwrap();
        let mut pts: Vec<(f64, f64)> = (0..g.interior_count()).map(|k| (g.node_point(k).x, g.node_point(k).y)).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = Vec::new();
        for x in [0.25, 0.5, 0.75] {
            for y in [0.25, 0.5, 0.75] {
                want.push((x, y));
            }
        }
        assert_eq!(pts, want);
        // only 4 cells across: rejected by the default requirement
        let g = build_domain(&DomainSpec::unit_square(), 0.25);
        assert!(matches!(g, Err(GeometryError::FeatureTooFine { .. })));
        assert_eq!(build_domain(&DomainSpec::unit_square(), 0.125).unwrap().interior_count(), 49);
    }

    #[test]
    fn coarse_unit_disk_mask() {
        let g = build_domain_with_min_cells(&DomainSpec::unit_disk(), 0.5, 2.0).unwrap();
        let pts: Vec<Point> = (0..g.interior_count()).map(|k| g.node_point(k)).collect();
        // lattice points (i/2, j/2) with |x| < 1: the 3x3 block around the origin
        let want = (-2..=2).flat_map(|i| (-2..=2).map(move |j| (i, j))).filter(|&(i, j)| i * i + j * j < 4).count();
        assert_eq!(want, 9);
        assert_eq!(pts.len(), want);
        assert!(pts.iter().all(|p| p.norm() < 1.0));
    }

    #[test]
    fn rectangle_nodes_strictly_inside() {
        let spec = DomainSpec::Rectangle { corner_min: Point::new(0.0, 0.0), corner_max: Point::new(2.0, 2.0) };
        let g = build_domain(&spec, 0.25).unwrap();
        let pts: Vec<Point> = (0..g.interior_count()).map(|k| g.node_point(k)).collect();
        assert_eq!(pts.len(), 49);
        assert!(pts.iter().all(|p| p.x > 0.0 && p.x < 2.0 && p.y > 0.0 && p.y < 2.0));
    }

    #[test]
    fn disk_mask_is_open_ball() {
        let spec = DomainSpec::Disk { center: Point::new(0.0, 0.0), radius: 4.0 };
        let g = build_domain(&spec, 0.5).unwrap();
        for l in 0..g.nx * g.ny {
            let p = g.lattice_point(l);
            assert_eq!(g.interior_mask[l], p.norm() < 4.0, "{p:?}");
        }
    }

    #[test]
    fn degenerate_specs_rejected() {
        let specs = [
            DomainSpec::Disk { center: Point::new(0.0, 0.0), radius: 0.0 },
            DomainSpec::Annulus { center: Point::new(0.0, 0.0), r_in: 1.0, r_out: 0.5 },
            DomainSpec::LShape { outer_side: 1.0, notch_side: 1.0 },
            DomainSpec::Polygon { vertices: vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)] },
            DomainSpec::Polygon {
                vertices: vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)],
            },
        ];
        for s in specs {
            assert!(matches!(build_domain(&s, 0.01), Err(GeometryError::DegenerateSpec(_))), "{s:?}");
        }
        assert!(matches!(build_domain(&DomainSpec::unit_disk(), 0.0), Err(GeometryError::FeatureTooFine { .. })));
    }

    #[test]
    fn narrowest_features() {
        assert_eq!(DomainSpec::standard_l_shape().narrowest_feature(), 1.0);
        let r = DomainSpec::Rectangle { corner_min: Point::new(0.0, 0.0), corner_max: Point::new(3.0, 0.5) };
        assert_eq!(r.narrowest_feature(), 0.5);
        let tri = DomainSpec::Polygon { vertices: vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(0.0, 1.0)] };
        assert!((tri.narrowest_feature() - 2.0 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn boundary_sampling_spacing_and_location() {
        for spec in [DomainSpec::unit_disk(), DomainSpec::standard_l_shape(), DomainSpec::unit_square()] {
            let h = 0.05;
            let g = build_domain(&spec, h).unwrap();
            assert!(g.boundary_points.len() as f64 >= spec.perimeter() / h);
            for &p in &g.boundary_points {
                assert!(spec.boundary_distance(p) <= 1e-12 * h, "{p:?}");
            }
            for c in &g.boundary_components {
                for k in c.clone() {
                    let next = if k + 1 == c.end { c.start } else { k + 1 };
                    assert!(g.boundary_points[k].dist(g.boundary_points[next]) <= 0.5 * h + 1e-12);
                }
            }
        }
    }

    #[test]
    fn square_projections() {
        let g = build_domain(&DomainSpec::unit_square(), 1.0 / 16.0).unwrap();
        let center = boundary_projection(&g, Point::new(0.5, 0.5)).unwrap();
        let pts: Vec<Point> = center.iter().map(|&k| g.boundary_points[k]).collect();
        assert_eq!(pts.len(), 4);
        // angular order: bottom (-pi/2), right (0), top (pi/2), left (pi)
        let want = [Point::new(0.5, 0.0), Point::new(1.0, 0.5), Point::new(0.5, 1.0), Point::new(0.0, 0.5)];
        for (p, w) in pts.iter().zip(want) {
            assert!(p.dist(w) < 1e-12, "{p:?} vs {w:?}");
        }
        let side = boundary_projection(&g, Point::new(0.25, 0.5)).unwrap();
        assert_eq!(side.len(), 1);
        assert!(g.boundary_points[side[0]].dist(Point::new(0.0, 0.5)) < 1e-12);
        assert!(matches!(
            boundary_projection(&g, Point::new(0.26, 0.5)),
            Err(GeometryError::NotInterior { .. })
        ));
        assert!(boundary_projection(&g, Point::new(1.0, 0.5)).is_err());
    }

    #[test]
    fn disk_projection_radial() {
        let g = build_domain(&DomainSpec::unit_disk(), 1.0 / 16.0).unwrap();
        let pr = boundary_projection(&g, Point::new(0.5, 0.0)).unwrap();
        assert_eq!(pr.len(), 1);
        assert!(g.boundary_points[pr[0]].dist(Point::new(1.0, 0.0)) < 1e-12);
        let all = boundary_projection(&g, Point::new(0.0, 0.0)).unwrap();
        assert_eq!(all.len(), g.boundary_points.len());
    }

    #[test]
    fn distance_nearest_matches_value() {
        let g = build_domain(&DomainSpec::standard_l_shape(), 0.1).unwrap();
        let d = distance_to_boundary(&g);
        for k in 0..g.interior_count() {
            let x = g.node_point(k);
            assert_eq!(x.dist(g.boundary_points[d.nearest[k]]), d.values[k]);
            assert!(d.values[k] > 0.0);
        }
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_domain(&DomainSpec::standard_l_shape(), 0.03).unwrap();
        let b = build_domain(&DomainSpec::standard_l_shape(), 0.03).unwrap();
        assert_eq!(a.interior_mask, b.interior_mask);
        assert_eq!(a.boundary_points, b.boundary_points);
    }
}
