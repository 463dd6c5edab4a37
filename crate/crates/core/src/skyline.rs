//! Symmetric positive-definite matrices in skyline (variable band) storage
//! with an in-place Cholesky factorization.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("matrix is not positive definite (pivot {row})")]
pub struct NotPositiveDefinite {
    pub row: usize,
}

/// Lower triangle stored row by row; row `i` holds columns `first[i]..=i`.
#[derive(Debug, Clone)]
pub struct SkylineMatrix {
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineMatrix {
    /// `first[i] <= i` is the leftmost stored column of row `i`.
    pub fn new(first: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(first.len() + 1);
        offsets.push(0);
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "profile must be lower triangular");
            offsets.push(offsets[i] + (i - f + 1));
        }
        let data = vec![0.0; *offsets.last().unwrap()];
        Self { first, offsets, data }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn stored(&self) -> usize {
        self.data.len()
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    fn pos(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && j >= self.first[i]);
        self.offsets[i] + (j - self.first[i])
    }

    /// Adds `v` to entry `(i, j)` (either triangle).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let p = self.pos(r, c);
        self.data[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if c < self.first[r] {
            0.0
        } else {
            self.data[self.pos(r, c)]
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[self.offsets[i + 1] - 1]).collect()
    }

    /// `y = A x` for the symmetric matrix.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for i in 0..self.dim() {
            let f = self.first[i];
            let row = &self.data[self.offsets[i]..self.offsets[i + 1]];
            for (k, &a) in row.iter().enumerate() {
                let j = f + k;
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Overwrites the matrix with its Cholesky factor `L` (`A = L Lᵀ`).
    /// A pivot below `rel_pivot_floor` times the original diagonal counts as
    /// a failure.
    pub fn factor(mut self, rel_pivot_floor: f64) -> Result<CholeskyFactor, NotPositiveDefinite> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offsets[i];
            for j in fi..i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let oj = self.offsets[j];
                let li = &self.data[oi + (k0 - fi)..oi + (j - fi)];
                let lj = &self.data[oj + (k0 - fj)..oj + (j - fj)];
                let dot: f64 = li.iter().zip(lj).map(|(a, b)| a * b).sum();
                let djj = self.data[self.offsets[j + 1] - 1];
                let p = oi + (j - fi);
                self.data[p] = (self.data[p] - dot) / djj;
            }
            let pd = oi + (i - fi);
            let orig = self.data[pd];
            let row = &self.data[oi..pd];
            let s = orig - row.iter().map(|v| v * v).sum::<f64>();
            if !(s > rel_pivot_floor * orig.abs()) || !s.is_finite() {
                return Err(NotPositiveDefinite { row: i });
            }
            self.data[pd] = s.sqrt();
        }
        Ok(CholeskyFactor { l: self })
    }
}

#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: SkylineMatrix,
}

impl CholeskyFactor {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let l = &self.l;
        let n = l.dim();
        for i in 0..n {
            let f = l.first[i];
            let row = &l.data[l.offsets[i]..l.offsets[i + 1]];
            let dot: f64 = row[..row.len() - 1].iter().zip(&b[f..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - dot) / row[row.len() - 1];
        }
        for i in (0..n).rev() {
            let f = l.first[i];
            let row = &l.data[l.offsets[i]..l.offsets[i + 1]];
            b[i] /= row[row.len() - 1];
            let xi = b[i];
            for (k, &a) in row[..row.len() - 1].iter().enumerate() {
                b[f + k] -= a * xi;
            }
        }
    }
}
