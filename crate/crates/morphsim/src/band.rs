//! Symmetric banded matrices and their Cholesky factorization.
//!
//! On a lexicographically numbered tensor grid the diffusion operator is
//! banded with bandwidth at most one grid row, so a band LL^T factorization
//! is the natural sparse direct solver here: one factorization per operator,
//! O(n * bw) per subsequent solve.

use crate::error::{Error, Result};

/// Symmetric matrix stored as its lower band: row i holds columns
/// [i - bw, i], so entry (i, j) with j <= i lives at `rows[i*(bw+1) + j+bw-i]`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    rows: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> BandMatrix {
        assert!(bw < n.max(1), "bandwidth must be below the dimension");
        BandMatrix { n, bw, rows: vec![0.0; n * (bw + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Entry (i, j) from either triangle; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        if r - c > self.bw {
            0.0
        } else {
            self.rows[self.idx(r, c)]
        }
    }

    /// Adds `v` to the lower-triangle entry (i, j), j <= i.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.rows[k] += v;
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for v in &mut self.rows {
            *v *= c;
        }
    }

    /// Adds a diagonal matrix.
    pub fn add_diag(&mut self, diag: &[f64]) {
        assert_eq!(diag.len(), self.n);
        for (i, &d) in diag.iter().enumerate() {
            let k = self.idx(i, i);
            self.rows[k] += d;
        }
    }

    /// y = A x using the symmetric storage.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let w = self.bw + 1;
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            let row = &self.rows[i * w..(i + 1) * w];
            let mut acc = row[self.bw] * x[i];
            for j in j0..i {
                let v = row[j + self.bw - i];
                acc += v * x[j];
                y[j] += v * x[i];
            }
            y[i] += acc;
        }
        y
    }

    /// Quadratic form x' A x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// LL^T factorization; fails if the matrix is not positive definite.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut l = self.rows.clone();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = l[i * w + (j + bw - i)];
                for k in j0..j {
                    s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::LinearSolve(format!(
                            "matrix is not positive definite (pivot {i} = {s:e})"
                        )));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, rows: l })
    }

    #[cfg(test)]
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }
}

/// Lower-band Cholesky factor L with A = L L^T.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    rows: Vec<f64>,
}

impl BandCholesky {
    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let bw = self.bw;
        let w = bw + 1;
        // forward: L y = b
        for i in 0..self.n {
            let j0 = i.saturating_sub(bw);
            let row = &self.rows[i * w..(i + 1) * w];
            let mut s = x[i];
            for j in j0..i {
                s -= row[j + bw - i] * x[j];
            }
            x[i] = s / row[bw];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let kmax = (i + bw).min(self.n - 1);
            let mut s = x[i];
            // Index loop on purpose: k addresses both x and the band layout.
            #[allow(clippy::needless_range_loop)]
            for k in i + 1..=kmax {
                // L[k, i] sits in row k at offset i + bw - k.
                s -= self.rows[k * w + (i + bw - k)] * x[k];
            }
            x[i] = s / self.rows[i * w + bw];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_poisson_exactly_for_quadratic_rhs() {
        // -u'' = 2 on (0,1), u(0)=u(1)=0 -> u = x(1-x); the 3-point stencil is
        // exact for quadratics.
        let n = 9;
        let h = 1.0 / (n + 1) as f64;
        let mut a = BandMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0 / (h * h));
            if i > 0 {
                a.add(i, i - 1, -1.0 / (h * h));
            }
        }
        let b = vec![2.0; n];
        let x = a.cholesky().unwrap().solve(&b);
        for (i, &xi) in x.iter().enumerate() {
            let t = (i + 1) as f64 * h;
            assert!((xi - t * (1.0 - t)).abs() < 1e-12, "node {i}: {xi}");
        }
    }

    #[test]
    fn random_banded_spd_roundtrip() {
        // Deterministic pseudo-random diagonally dominant band matrix.
        let n = 40;
        let bw = 7;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut a = BandMatrix::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                a.add(i, j, next() - 0.5);
            }
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum();
            a.add(i, i, off + 1.0 + next());
        }
        let xs: Vec<f64> = (0..n).map(|_| next() * 2.0 - 1.0).collect();
        let b = a.mul_vec(&xs);
        let sol = a.cholesky().unwrap().solve(&b);
        for (u, v) in sol.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = BandMatrix::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        a.add(2, 2, 1.0);
        assert!(a.cholesky().is_err());
    }

    #[test]
    fn quadratic_form_matches_dense() {
        let mut a = BandMatrix::zeros(4, 2);
        a.add(0, 0, 4.0);
        a.add(1, 1, 5.0);
        a.add(2, 2, 6.0);
        a.add(3, 3, 7.0);
        a.add(1, 0, -1.0);
        a.add(2, 0, -0.5);
        a.add(3, 2, -2.0);
        let x = [1.0, -2.0, 3.0, 0.5];
        let dense = a.to_dense();
        let mut want = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                want += x[i] * dense[i][j] * x[j];
            }
        }
        assert!((a.quadratic_form(&x) - want).abs() < 1e-12);
    }
}
