//! Minimal dense/banded symmetric positive-definite solvers.
//!
//! The profile minimization and the radial mode systems are small SPD
//! quadratic forms; a Cholesky factorization is all that is needed.

use crate::error::{Error, Result};

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone)]
pub struct DenseSym {
    pub n: usize,
    pub a: Vec<f64>,
}

impl DenseSym {
    pub fn zeros(n: usize) -> Self {
        DenseSym {
            n,
            a: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] += v;
    }

    /// Solves `A x = b` by Cholesky; consumes the matrix storage.
    pub fn cholesky_solve(mut self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        // factor A = L L^T in the lower triangle
        for j in 0..n {
            let mut d = self.at(j, j);
            for k in 0..j {
                d -= self.at(j, k) * self.at(j, k);
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::LinearSolve(format!(
                    "matrix not positive definite at pivot {j} (d = {d:.3e})"
                )));
            }
            let dj = d.sqrt();
            self.a[j * n + j] = dj;
            for i in j + 1..n {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s -= self.at(i, k) * self.at(j, k);
                }
                self.a[i * n + j] = s / dj;
            }
        }
        // forward then backward substitution
        let mut x = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                x[i] = x[i] - self.at(i, k) * x[k];
            }
            x[i] /= self.at(i, i);
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] = x[i] - self.at(k, i) * x[k];
            }
            x[i] /= self.at(i, i);
        }
        Ok(x)
    }
}

/// Symmetric banded SPD matrix with half-bandwidth `bw`:
/// entry (i, j) stored for j in [i, i+bw].
#[derive(Debug, Clone)]
pub struct BandedSym {
    pub n: usize,
    pub bw: usize,
    band: Vec<f64>, // band[i * (bw+1) + (j - i)]
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.bw);
        self.band[lo * (self.bw + 1) + (hi - lo)] += v;
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j >= i && j - i <= self.bw);
        self.band[i * (self.bw + 1) + (j - i)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.band[i * (self.bw + 1) + (j - i)] = v;
    }

    /// Replaces row/column `i` by the identity row, forcing `x[i] = rhs_value`.
    pub fn pin_unknown(&mut self, i: usize, b: &mut [f64], rhs_value: f64) {
        let bw = self.bw;
        for j in i.saturating_sub(bw)..=(i + bw).min(self.n - 1) {
            if j == i {
                continue;
            }
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            // move knowns to the rhs before zeroing
            let v = self.at(lo, hi);
            b[j] -= v * rhs_value;
            self.set(lo, hi, 0.0);
        }
        self.set(i, i, 1.0);
        b[i] = rhs_value;
    }

    /// Solves `A x = b` by banded Cholesky (upper-band storage).
    pub fn cholesky_solve(mut self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let bw = self.bw;
        assert_eq!(b.len(), n);
        // factor A = R^T R with R upper-banded, stored in place
        for i in 0..n {
            let mut d = self.at(i, i);
            let klo = i.saturating_sub(bw);
            for k in klo..i {
                let r = self.at(k, i);
                d -= r * r;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::LinearSolve(format!(
                    "banded matrix not positive definite at pivot {i} (d = {d:.3e})"
                )));
            }
            let di = d.sqrt();
            self.set(i, i, di);
            for j in i + 1..=(i + bw).min(n - 1) {
                let mut s = self.at(i, j);
                let klo = j.saturating_sub(bw).max(i.saturating_sub(bw));
                for k in klo..i {
                    s -= self.at(k, i) * self.at(k, j);
                }
                self.set(i, j, s / di);
            }
        }
        // R^T y = b
        let mut x = b.to_vec();
        for i in 0..n {
            let klo = i.saturating_sub(bw);
            let mut s = x[i];
            for k in klo..i {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
        // R x = y
        for i in (0..n).rev() {
            let jhi = (i + bw).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=jhi {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solves_known_system() {
        let mut m = DenseSym::zeros(3);
        // A = [[4,1,0],[1,3,1],[0,1,2]], b = A * [1,2,3]
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                m.add_at(i, j, a[i][j]);
            }
        }
        let xs = [1.0, 2.0, 3.0];
        let b: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a[i][j] * xs[j]).sum())
            .collect();
        let x = m.cholesky_solve(&b).unwrap();
        for i in 0..3 {
            assert!((x[i] - xs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_rejects_indefinite() {
        let mut m = DenseSym::zeros(2);
        m.add_at(0, 0, 1.0);
        m.add_at(1, 1, -1.0);
        assert!(m.cholesky_solve(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn banded_matches_dense() {
        let n = 40;
        let bw = 3;
        let mut bm = BandedSym::zeros(n, bw);
        let mut dm = DenseSym::zeros(n);
        // diagonally dominant SPD band
        for i in 0..n {
            for j in i..(i + bw + 1).min(n) {
                let v = if i == j {
                    10.0 + i as f64
                } else {
                    1.0 / (1.0 + (i + j) as f64)
                };
                bm.add_at(i, j, v);
                dm.add_at(i, j, v);
                if i != j {
                    dm.add_at(j, i, v);
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let xb = bm.cholesky_solve(&b).unwrap();
        let xd = dm.cholesky_solve(&b).unwrap();
        for i in 0..n {
            assert!((xb[i] - xd[i]).abs() < 1e-11, "row {i}");
        }
    }

    #[test]
    fn pinning_forces_value() {
        let n = 6;
        let mut bm = BandedSym::zeros(n, 2);
        for i in 0..n {
            bm.add_at(i, i, 4.0);
            if i + 1 < n {
                bm.add_at(i, i + 1, 1.0);
            }
        }
        let mut b = vec![1.0; n];
        bm.pin_unknown(2, &mut b, 0.0);
        let x = bm.cholesky_solve(&b).unwrap();
        assert!(x[2].abs() < 1e-14);
    }
}
