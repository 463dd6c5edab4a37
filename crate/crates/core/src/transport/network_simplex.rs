//! Primal network simplex for dense bipartite transportation problems.
//!
//! Sources carry supplies, targets carry demands or, in the free variant,
//! drain into one sink through zero-cost arcs. An artificial root with
//! big-M arcs gives the starting basis. The tree is kept strongly feasible
//! (every zero-flow tree arc points towards the root) by taking the last
//! blocking arc of the pivot cycle, which rules out cycling.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("supplies ({supply}) and demands ({demand}) do not balance")]
    Unbalanced { supply: f64, demand: f64 },
    #[error("pivot limit {0} reached")]
    PivotLimit(usize),
    #[error("problem is infeasible (artificial flow {0} remains)")]
    Infeasible(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Optimal flow with node potentials.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    /// Row-major `m × n` flows.
    pub flows: Vec<f64>,
    /// Per-target drain into the sink (free variant), else the demands.
    pub target_mass: Vec<f64>,
    pub cost: f64,
    /// Source potentials `u`.
    pub u: Vec<f64>,
    /// Target potentials `v`; identically zero for the free variant.
    pub v: Vec<f64>,
    pub pivots: usize,
}

#[derive(Clone, Copy)]
struct Arc {
    from: usize,
    to: usize,
    cost: f64,
}

struct Network {
    arcs: Vec<Arc>,
    flow: Vec<f64>,
    /// Net supply per node (positive at sources).
    supply: Vec<f64>,
    root: usize,
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    in_tree: Vec<bool>,
    /// The basis arcs, one per non-root node.
    tree: Vec<usize>,
    order: Vec<usize>,
    adj_start: Vec<usize>,
    adj: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl Network {
    fn rebuild(&mut self) {
        let n = self.supply.len();
        // adjacency of the tree in compressed rows
        self.adj_start.iter_mut().for_each(|v| *v = 0);
        for &k in &self.tree {
            self.adj_start[self.arcs[k].from + 1] += 1;
            self.adj_start[self.arcs[k].to + 1] += 1;
        }
        for x in 0..n {
            self.adj_start[x + 1] += self.adj_start[x];
        }
        let mut fill = self.adj_start.clone();
        for &k in &self.tree {
            for x in [self.arcs[k].from, self.arcs[k].to] {
                self.adj[fill[x]] = k;
                fill[x] += 1;
            }
        }
        self.order.clear();
        self.parent.iter_mut().for_each(|p| *p = NONE);
        self.parent[self.root] = self.root;
        self.parent_arc[self.root] = NONE;
        self.depth[self.root] = 0;
        self.potential[self.root] = 0.0;
        self.order.push(self.root);
        let mut head = 0;
        while head < self.order.len() {
            let x = self.order[head];
            head += 1;
            for t in self.adj_start[x]..self.adj_start[x + 1] {
                let k = self.adj[t];
                let a = self.arcs[k];
                let y = if a.from == x { a.to } else { a.from };
                if self.parent[y] != NONE {
                    continue;
                }
                self.parent[y] = x;
                self.parent_arc[y] = k;
                self.depth[y] = self.depth[x] + 1;
                // reduced cost c + π_from - π_to vanishes on tree arcs
                self.potential[y] = if a.from == x { self.potential[x] + a.cost } else { self.potential[x] - a.cost };
                self.order.push(y);
            }
        }
        debug_assert_eq!(self.order.len(), n);
    }

    fn reduced_cost(&self, k: usize) -> f64 {
        let a = self.arcs[k];
        a.cost + self.potential[a.from] - self.potential[a.to]
    }

    /// Returns false if the cycle is unbounded (cannot happen with
    /// nonnegative costs and the big-M start).
    fn pivot(&mut self, enter: usize) -> bool {
        let Arc { from: k, to: l, .. } = self.arcs[enter];
        // paths up to the apex
        let (mut x, mut y) = (k, l);
        let mut up_k = Vec::new();
        let mut up_l = Vec::new();
        while self.depth[x] > self.depth[y] {
            up_k.push(self.parent_arc[x]);
            x = self.parent[x];
        }
        while self.depth[y] > self.depth[x] {
            up_l.push(self.parent_arc[y]);
            y = self.parent[y];
        }
        while x != y {
            up_k.push(self.parent_arc[x]);
            x = self.parent[x];
            up_l.push(self.parent_arc[y]);
            y = self.parent[y];
        }
        // traversal from the apex: down to k, across (k, l), up from l
        let mut cycle: Vec<(usize, bool)> = Vec::with_capacity(up_k.len() + up_l.len() + 1);
        for &a in up_k.iter().rev() {
            // travelled from parent to child
            let child_is_from = self.parent_arc[self.arcs[a].from] == a;
            cycle.push((a, !child_is_from));
        }
        cycle.push((enter, true));
        for &a in &up_l {
            // travelled from child to parent
            let child_is_from = self.parent_arc[self.arcs[a].from] == a;
            cycle.push((a, child_is_from));
        }
        let delta = cycle
            .iter()
            .filter(|(_, fwd)| !fwd)
            .map(|&(a, _)| self.flow[a])
            .fold(f64::INFINITY, f64::min);
        if !delta.is_finite() {
            return false;
        }
        let leave = cycle
            .iter()
            .rev()
            .find(|&&(a, fwd)| !fwd && self.flow[a] <= delta)
            .map(|&(a, _)| a)
            .expect("a blocking arc exists");
        if delta > 0.0 {
            for &(a, fwd) in &cycle {
                if fwd {
                    self.flow[a] += delta;
                } else {
                    self.flow[a] = (self.flow[a] - delta).max(0.0);
                }
            }
        }
        self.flow[leave] = 0.0;
        self.in_tree[leave] = false;
        self.in_tree[enter] = true;
        let slot = self.tree.iter().position(|&t| t == leave).expect("leaving arc is in the tree");
        self.tree[slot] = enter;
        self.rebuild();
        true
    }

    /// Tree flows from the supplies alone (non-tree arcs carry zero).
    fn recompute_flows(&mut self) {
        let mut excess = self.supply.clone();
        self.flow.iter_mut().for_each(|f| *f = 0.0);
        for &x in self.order.iter().rev() {
            if x == self.root {
                continue;
            }
            let k = self.parent_arc[x];
            let a = self.arcs[k];
            let p = self.parent[x];
            // excess[x] leaves x towards its parent
            let f = if a.from == x { excess[x] } else { -excess[x] };
            self.flow[k] = f.max(0.0);
            excess[p] += excess[x];
        }
    }
}

/// Solves `min Σ c_ij γ_ij` with row sums `supply` and, if `demand` is
/// given, column sums `demand`; otherwise columns are free.
pub fn solve_transport(
    costs: &[f64],
    supply: &[f64],
    demand: Option<&[f64]>,
    n_targets: usize,
) -> Result<FlowSolution, SimplexError> {
    let m = supply.len();
    let n = n_targets;
    if costs.len() != m * n {
        return Err(SimplexError::InvalidInput("cost matrix shape".into()));
    }
    if m == 0 || n == 0 {
        return Err(SimplexError::InvalidInput("empty problem".into()));
    }
    if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(SimplexError::InvalidInput("costs must be finite and nonnegative".into()));
    }
    if supply.iter().chain(demand.unwrap_or(&[]).iter()).any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(SimplexError::InvalidInput("masses must be finite and nonnegative".into()));
    }
    let total: f64 = supply.iter().sum();
    if let Some(d) = demand {
        if d.len() != n {
            return Err(SimplexError::InvalidInput("demand length".into()));
        }
        let td: f64 = d.iter().sum();
        if (td - total).abs() > 1e-9 * total.max(td) {
            return Err(SimplexError::Unbalanced { supply: total, demand: td });
        }
    }
    let free = demand.is_none();
    // nodes: sources 0..m, targets m..m+n, [sink], root
    let sink = m + n;
    let root = if free { m + n + 1 } else { m + n };
    let nodes = root + 1;
    let mut net_supply = vec![0.0; nodes];
    net_supply[..m].copy_from_slice(supply);
    match demand {
        Some(d) => {
            // rescale so the balance is exact
            let td: f64 = d.iter().sum();
            let s = if td > 0.0 { total / td } else { 0.0 };
            for j in 0..n {
                net_supply[m + j] = -d[j] * s;
            }
        }
        None => net_supply[sink] = -total,
    }
    let cmax = costs.iter().copied().fold(0.0, f64::max);
    let big_m = 1.0 + (nodes as f64 + 1.0) * cmax.max(1.0);

    let mut arcs = Vec::with_capacity(m * n + n + nodes);
    for i in 0..m {
        for j in 0..n {
            arcs.push(Arc { from: i, to: m + j, cost: costs[i * n + j] });
        }
    }
    if free {
        for j in 0..n {
            arcs.push(Arc { from: m + j, to: sink, cost: 0.0 });
        }
    }
    let first_artificial = arcs.len();
    let mut flow = vec![0.0; arcs.len()];
    let mut in_tree = vec![false; arcs.len()];
    for x in 0..root {
        let s = net_supply[x];
        // supply (or zero) nodes drain towards the root, demand nodes draw from it
        if s >= 0.0 {
            arcs.push(Arc { from: x, to: root, cost: big_m });
            flow.push(s);
        } else {
            arcs.push(Arc { from: root, to: x, cost: big_m });
            flow.push(-s);
        }
        in_tree.push(true);
    }
    let mut net = Network {
        arcs,
        flow,
        supply: net_supply,
        root,
        parent: vec![NONE; nodes],
        parent_arc: vec![NONE; nodes],
        depth: vec![0; nodes],
        potential: vec![0.0; nodes],
        tree: (first_artificial..first_artificial + root).collect(),
        in_tree,
        order: Vec::with_capacity(nodes),
        adj_start: vec![0; nodes + 1],
        adj: vec![0; 2 * root],
    };
    net.rebuild();

    let n_arcs = net.arcs.len();
    let block = ((n_arcs as f64).sqrt().ceil() as usize).max(32);
    let tol = 1e-12 * cmax.max(1e-300);
    let max_pivots = 200 * n_arcs + 10_000;
    let mut pivots = 0;
    let mut next = 0;
    loop {
        // block pricing: most negative reduced cost in the first block that has one
        let mut best = NONE;
        let mut best_rc = -tol;
        let mut scanned = 0;
        while scanned < n_arcs {
            let end = (scanned + block).min(n_arcs);
            for t in scanned..end {
                let k = (next + t) % n_arcs;
                if net.in_tree[k] {
                    continue;
                }
                let rc = net.reduced_cost(k);
                if rc < best_rc {
                    best_rc = rc;
                    best = k;
                }
            }
            scanned = end;
            if best != NONE {
                next = (next + scanned) % n_arcs;
                break;
            }
        }
        if best == NONE {
            break;
        }
        if pivots >= max_pivots {
            return Err(SimplexError::PivotLimit(max_pivots));
        }
        if !net.pivot(best) {
            return Err(SimplexError::InvalidInput("unbounded cycle".into()));
        }
        pivots += 1;
    }

    net.recompute_flows();
    let artificial: f64 = net.flow[first_artificial..].iter().sum();
    if artificial > 1e-9 * total.max(1e-300) {
        return Err(SimplexError::Infeasible(artificial));
    }
    let flows: Vec<f64> = net.flow[..m * n].to_vec();
    let cost = flows.iter().zip(costs).map(|(f, c)| f * c).sum();
    let target_mass = (0..n).map(|j| (0..m).map(|i| flows[i * n + j]).sum()).collect();
    // u_i + v_j <= c_ij from c + π_i - π_j >= 0
    let (u, v) = if free {
        let ps = net.potential[sink];
        ((0..m).map(|i| ps - net.potential[i]).collect(), vec![0.0; n])
    } else {
        ((0..m).map(|i| -net.potential[i]).collect(), (0..n).map(|j| net.potential[m + j]).collect())
    };
    Ok(FlowSolution { flows, target_mass, cost, u, v, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_split() {
        // one source of mass 1, two targets of 1/2 at distance 1
        let s = solve_transport(&[1.0, 1.0], &[1.0], Some(&[0.5, 0.5]), 2).unwrap();
        assert!((s.cost - 1.0).abs() < 1e-15);
        assert_eq!(s.flows, vec![0.5, 0.5]);
    }

    #[test]
    fn free_picks_nearest() {
        let costs = [3.0, 1.0, 2.0, 0.5, 4.0, 0.7];
        let s = solve_transport(&costs, &[2.0, 1.0], None, 3).unwrap();
        assert!((s.cost - (2.0 * 1.0 + 1.0 * 0.5)).abs() < 1e-14);
        assert!((s.u[0] - 1.0).abs() < 1e-14 && (s.u[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn unbalanced_rejected() {
        assert!(matches!(
            solve_transport(&[1.0, 1.0], &[1.0], Some(&[0.5, 0.6]), 2),
            Err(SimplexError::Unbalanced { .. })
        ));
    }

    #[test]
    fn degenerate_instance() {
        // many ties and zero masses
        let m = 6;
        let n = 6;
        let costs: Vec<f64> = (0..m * n).map(|k| (k % 3) as f64).collect();
        let supply = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let demand = [0.0, 2.0, 0.0, 1.0, 1.0, 0.0];
        let s = solve_transport(&costs, &supply, Some(&demand), n).unwrap();
        for i in 0..m {
            let row: f64 = (0..n).map(|j| s.flows[i * n + j]).sum();
            assert!((row - supply[i]).abs() < 1e-14);
            for j in 0..n {
                assert!(s.u[i] + s.v[j] <= costs[i * n + j] + 1e-12);
                if s.flows[i * n + j] > 0.0 {
                    assert!((s.u[i] + s.v[j] - costs[i * n + j]).abs() < 1e-12);
                }
            }
        }
    }
}
