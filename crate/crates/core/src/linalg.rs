//! Dense Cholesky factorization with row appends.
//!
//! The factor is stored as a packed lower triangle, row by row, so a new
//! training point can be appended without refactoring.

/// Pivot that went non-positive during factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
}

/// Lower-triangular factor `L` with `A = L L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    packed: Vec<f64>,
}

#[inline]
fn row_offset(i: usize) -> usize {
    i * (i + 1) / 2
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Cholesky {
    pub fn empty() -> Self {
        Self {
            n: 0,
            packed: Vec::new(),
        }
    }

    /// Factors a symmetric matrix given by `entry(i, j)` for `j <= i`.
    pub fn factor_with<F>(n: usize, mut entry: F) -> Result<Self, NotPositiveDefinite>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut packed = vec![0.0; row_offset(n)];
        for i in 0..n {
            let oi = row_offset(i);
            for j in 0..=i {
                let oj = row_offset(j);
                let s = entry(i, j) - dot(&packed[oi..oi + j], &packed[oj..oj + j]);
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(NotPositiveDefinite { pivot: i });
                    }
                    packed[oi + i] = s.sqrt();
                } else {
                    packed[oi + j] = s / packed[oj + j];
                }
            }
        }
        Ok(Self { n, packed })
    }

    /// Factors a dense row-major `n x n` symmetric matrix.
    pub fn factor(a: &[f64], n: usize) -> Result<Self, NotPositiveDefinite> {
        assert_eq!(a.len(), n * n);
        Self::factor_with(n, |i, j| a[i * n + j])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let o = row_offset(i);
        &self.packed[o..o + i + 1]
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.packed[row_offset(i) + i]
    }

    /// Appends the row/column of a new variable. `cross[j]` is the covariance
    /// with existing variable `j`, `diag` its variance.
    pub fn append(&mut self, cross: &[f64], diag: f64) -> Result<(), NotPositiveDefinite> {
        assert_eq!(cross.len(), self.n);
        let mut l = cross.to_vec();
        self.solve_lower_in_place(&mut l);
        let s = diag - dot(&l, &l);
        if !(s > 0.0) || !s.is_finite() {
            return Err(NotPositiveDefinite { pivot: self.n });
        }
        self.packed.extend_from_slice(&l);
        self.packed.push(s.sqrt());
        self.n += 1;
        Ok(())
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let o = row_offset(i);
            let s = b[i] - dot(&self.packed[o..o + i], &b[..i]);
            b[i] = s / self.packed[o + i];
        }
    }

    /// Solves `L^T x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in (0..self.n).rev() {
            let o = row_offset(i);
            b[i] /= self.packed[o + i];
            let xi = b[i];
            for (bj, lij) in b[..i].iter_mut().zip(&self.packed[o..o + i]) {
                *bj -= lij * xi;
            }
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.diag(i).ln()).sum::<f64>()
    }
}
