//! Banded LU without pivoting.
//!
//! The monotone scheme produces nonsingular M-matrices, for which Gaussian
//! elimination without pivoting is stable and keeps fill inside the band.

use crate::error::{Error, Result};

pub struct Banded {
    n: usize,
    lower: usize,
    upper: usize,
    /// Row `i` holds columns `i − lower ..= i + upper`.
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Banded { n, lower, upper, data: vec![0.0; n * (lower + upper + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && j <= i + self.upper, "({i},{j}) outside band");
        i * (self.lower + self.upper + 1) + (j + self.lower - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// In-place LU, then forward and back substitution.
    pub fn solve(mut self, rhs: &mut [f64]) -> Result<()> {
        let n = self.n;
        let scale = self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for k in 0..n {
            let piv = self.data[self.idx(k, k)];
            if !(piv.abs() > 1e-14 * scale) {
                return Err(Error::numerical(format!("singular pivot {piv:e} at row {k}")));
            }
            let row_end = (k + self.upper).min(n - 1);
            let width = self.lower + self.upper + 1;
            for i in k + 1..=(k + self.lower).min(n - 1) {
                let ik = self.idx(i, k);
                let l = self.data[ik] / piv;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                let (ri, rk) = (i * width + self.lower - i, k * width + self.lower - k);
                for j in k + 1..=row_end {
                    self.data[ri + j] -= l * self.data[rk + j];
                }
            }
        }
        for i in 0..n {
            let mut s = rhs[i];
            for j in i.saturating_sub(self.lower)..i {
                s -= self.data[self.idx(i, j)] * rhs[j];
            }
            rhs[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for j in i + 1..=(i + self.upper).min(n - 1) {
                s -= self.data[self.idx(i, j)] * rhs[j];
            }
            rhs[i] = s / self.data[self.idx(i, i)];
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite linear solve"));
        }
        Ok(())
    }
}
