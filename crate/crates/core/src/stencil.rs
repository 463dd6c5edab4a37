//! Forward-difference gradient on the masked lattice and its exact adjoint.
//!
//! The gradient lives on cells (one per lattice node whose stencil touches an
//! interior node); values outside the mask are zero. With the `cell_area`
//! inner product on both sides, `-div` is the matrix transpose of the
//! gradient, so `⟨∇u, w⟩ = ⟨u, -div w⟩` holds to rounding.

use serde::{Deserialize, Serialize};

use crate::geometry::DomainGrid;

/// Node-indexed field on the interior nodes; implicitly zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField(pub Vec<f64>);

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sup(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| c * v).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

pub type Vector2 = [f64; 2];

/// Gradient per cell.
pub fn gradient(grid: &DomainGrid, u: &[f64]) -> Vec<Vector2> {
    let inv_h = 1.0 / grid.h;
    grid.cells()
        .iter()
        .map(|c| {
            let [n0, nx, ny] = c.nodes();
            let at = |n: Option<usize>| n.map_or(0.0, |k| u[k]);
            let u0 = at(n0);
            [(at(nx) - u0) * inv_h, (at(ny) - u0) * inv_h]
        })
        .collect()
}

/// `-div w` on interior nodes (transpose of [`gradient`]).
pub fn neg_divergence(grid: &DomainGrid, w: &[Vector2]) -> Vec<f64> {
    let inv_h = 1.0 / grid.h;
    let mut out = vec![0.0; grid.interior_count()];
    for (c, wc) in grid.cells().iter().zip(w) {
        let [n0, nx, ny] = c.nodes();
        if let Some(k) = n0 {
            out[k] -= (wc[0] + wc[1]) * inv_h;
        }
        if let Some(k) = nx {
            out[k] += wc[0] * inv_h;
        }
        if let Some(k) = ny {
            out[k] += wc[1] * inv_h;
        }
    }
    out
}

/// `-div w` on every lattice node, including the zero-valued nodes just
/// outside the mask where the boundary flux lands.
pub fn neg_divergence_lattice(grid: &DomainGrid, w: &[Vector2]) -> Vec<f64> {
    let inv_h = 1.0 / grid.h;
    let mut out = vec![0.0; grid.nx * grid.ny];
    for (c, wc) in grid.cells().iter().zip(w) {
        let l = c.lattice;
        out[l] -= (wc[0] + wc[1]) * inv_h;
        out[l + 1] += wc[0] * inv_h;
        out[l + grid.nx] += wc[1] * inv_h;
    }
    out
}

/// `Σ_cells a (v·w)`.
pub fn cell_inner(grid: &DomainGrid, v: &[Vector2], w: &[Vector2]) -> f64 {
    grid.cell_area * v.iter().zip(w).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum::<f64>()
}

/// `Σ_nodes a u v`.
pub fn node_inner(grid: &DomainGrid, u: &[f64], v: &[f64]) -> f64 {
    grid.cell_area * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

pub fn norm2(v: Vector2) -> f64 {
    v[0].hypot(v[1])
}
