use std::collections::VecDeque;

use inflap::geometry::{
    boundary_projection, build_domain, distance_to_boundary, inradius, projection_of_node, DomainGrid, DomainSpec, Point,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shapes() -> Vec<DomainSpec> {
    vec![
        DomainSpec::unit_disk(),
        DomainSpec::unit_square(),
        DomainSpec::standard_l_shape(),
        DomainSpec::Annulus { center: Point::new(0.0, 0.0), r_in: 0.5, r_out: 1.0 },
    ]
}

fn seg_dist(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((p.x - a.x - t * dx).powi(2) + (p.y - a.y - t * dy).powi(2)).sqrt()
}

/// Exact distance to the boundary of `[0,2]² \ (1,2]²`.
fn l_shape_distance(p: Point) -> f64 {
    let v = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)].map(|(x, y)| Point::new(x, y));
    (0..6).map(|i| seg_dist(p, v[i], v[(i + 1) % 6])).fold(f64::INFINITY, f64::min)
}

#[test]
fn distance_field_is_one_lipschitz_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in shapes() {
        let g = build_domain(&spec, 1.0 / 32.0).unwrap();
        let d = distance_to_boundary(&g);
        let n = g.interior_count();
        for _ in 0..10_000 {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let gap = (d.values[a] - d.values[b]).abs();
            let sep = g.node_point(a).dist(g.node_point(b));
            assert!(gap <= sep + 1e-12, "{}: |d({a}) - d({b})| = {gap} > {sep}", spec.name());
        }
    }
}

#[test]
fn l_shape_mask_is_connected_with_reentrant_corner() {
    let h = 0.01;
    let g = build_domain(&DomainSpec::standard_l_shape(), h).unwrap();
    // flood fill over interior nodes with 4-neighbour steps
    let n = g.interior_count();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(k) = queue.pop_front() {
        let x = g.node_point(k);
        for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            if let Some(m) = g.locate_node(Point::new(x.x + dx, x.y + dy)) {
                if !seen[m] {
                    seen[m] = true;
                    count += 1;
                    queue.push_back(m);
                }
            }
        }
    }
    assert_eq!(count, n);
    // the notch corner (1,1) sits on the boundary; its lower-left neighbour is inside
    assert!(g.locate_node(Point::new(1.0, 1.0)).is_none());
    assert!(g.locate_node(Point::new(1.0 - h, 1.0 - h)).is_some());
    assert!(g.locate_node(Point::new(1.0 + h, 1.0 + h)).is_none());
    assert!(g.locate_node(Point::new(1.5, 0.5)).is_some());
    assert!(g.locate_node(Point::new(0.5, 1.5)).is_some());
}

#[test]
fn distance_examples() {
    let h = 1.0 / 32.0;
    let disk = build_domain(&DomainSpec::unit_disk(), h).unwrap();
    let dd = distance_to_boundary(&disk);
    assert!((dd.values[disk.locate_node(Point::new(0.0, 0.0)).unwrap()] - 1.0).abs() <= h);

    let sq = build_domain(&DomainSpec::unit_square(), h).unwrap();
    let ds = distance_to_boundary(&sq);
    assert!((ds.values[sq.locate_node(Point::new(0.25, 0.5)).unwrap()] - 0.25).abs() <= h);

    let h = 0.05;
    let l = build_domain(&DomainSpec::standard_l_shape(), h).unwrap();
    let dl = distance_to_boundary(&l);
    let at = |x: f64, y: f64| dl.values[l.locate_node(Point::new(x, y)).unwrap()];
    assert!((at(0.5, 0.5) - 0.5).abs() <= h);
    let oracle = l_shape_distance(Point::new(0.9, 0.9));
    assert!((oracle - 2f64.sqrt() * 0.1).abs() < 1e-12);
    assert!((at(0.9, 0.9) - oracle).abs() <= h);
    // every node against the exact distance
    for k in 0..l.interior_count() {
        assert!((dl.values[k] - l_shape_distance(l.node_point(k))).abs() <= h / 2.0);
    }
}

#[test]
fn inradius_examples() {
    let h = 1.0 / 32.0;
    let sq = build_domain(&DomainSpec::unit_square(), h).unwrap();
    let ir = inradius(&distance_to_boundary(&sq), h);
    assert!((ir.r1 - 0.5).abs() <= h);
    assert!(ir.argmax_nodes.iter().all(|&k| sq.node_point(k).dist(Point::new(0.5, 0.5)) <= 3.0 * h));

    let disk = build_domain(&DomainSpec::unit_disk(), h).unwrap();
    let ir = inradius(&distance_to_boundary(&disk), h);
    assert!((ir.r1 - 1.0).abs() <= h);
    assert!(ir.argmax_nodes.iter().all(|&k| disk.node_point(k).norm() <= 3.0 * h));

    // centers on the diagonal (c, c): inscribed radius min(c, √2(1 - c))
    let mut best: f64 = 0.0;
    for i in 0..=200_000 {
        let c = i as f64 / 200_000.0;
        best = best.max(c.min(2f64.sqrt() * (1.0 - c)));
    }
    assert!((best - (2.0 - 2f64.sqrt())).abs() < 1e-5);
    let l = build_domain(&DomainSpec::standard_l_shape(), h).unwrap();
    let ir = inradius(&distance_to_boundary(&l), h);
    assert!((ir.r1 - best).abs() <= h, "{}", ir.r1);
}

#[test]
fn inradius_error_is_first_order() {
    let (c, r) = (Point::new(0.013, -0.007), 0.77);
    let spec = DomainSpec::Disk { center: c, radius: r };
    for n in [8.0, 16.0, 32.0, 64.0] {
        let h = 1.0 / n;
        let g = build_domain(&spec, h).unwrap();
        let ir = inradius(&distance_to_boundary(&g), h);
        assert!(ir.r1 <= r + 1e-12);
        assert!(r - ir.r1 <= h, "h = {h}: {}", r - ir.r1);
    }
}

#[test]
fn projection_examples() {
    let h = 1.0 / 32.0;
    let disk = build_domain(&DomainSpec::unit_disk(), h).unwrap();
    let p = boundary_projection(&disk, Point::new(0.5, 0.0)).unwrap();
    assert_eq!(p.len(), 1);
    assert!(disk.boundary_points[p[0]].dist(Point::new(1.0, 0.0)) < 1e-9);

    let sq = build_domain(&DomainSpec::unit_square(), h).unwrap();
    let p = boundary_projection(&sq, Point::new(0.25, 0.5)).unwrap();
    assert_eq!(p.len(), 1);
    assert!(sq.boundary_points[p[0]].dist(Point::new(0.0, 0.5)) < 1e-9);
}

fn grid_cases() -> Vec<DomainGrid> {
    shapes().iter().map(|s| build_domain(s, 1.0 / 16.0).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projections_realize_the_distance(shape in 0usize..4, pick in 0.0f64..1.0) {
        let grids = grid_cases();
        let g = &grids[shape];
        let d = distance_to_boundary(g);
        let k = ((pick * g.interior_count() as f64) as usize).min(g.interior_count() - 1);
        let x = g.node_point(k);
        let proj = projection_of_node(g, k);
        prop_assert!(!proj.is_empty());
        for y in proj {
            let gap = (x.dist(g.boundary_points[y]) - d.values[k]).abs();
            prop_assert!(gap <= g.h / 2.0, "node {} target {} gap {}", k, y, gap);
        }
    }

    #[test]
    fn build_is_bitwise_repeatable(shape in 0usize..4, n in 16u32..40) {
        let spec = &shapes()[shape];
        let h = 1.0 / f64::from(n);
        let a = build_domain(spec, h).unwrap();
        let b = build_domain(spec, h).unwrap();
        prop_assert_eq!(&a.interior_mask, &b.interior_mask);
        prop_assert_eq!(a.boundary_points.len(), b.boundary_points.len());
        let da = distance_to_boundary(&a);
        let db = distance_to_boundary(&b);
        prop_assert!(da.values.iter().zip(&db.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
