//! Wide stencils and nonnegative frame fits `A ≈ Σ_k c_k e_k e_kᵀ/|e_k|²`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::symmat::SymMat;

/// Residual allowed in a frame fit, relative to `1 + ‖A‖_F`.
pub const FIT_TOL: f64 = 1e-10;

/// Largest stencil the exhaustive min-norm fit accepts.
const MAX_DIRECTIONS: usize = 16;

/// Integer directions, stored up to sign.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stencil {
    dim: usize,
    directions: Vec<Vec<isize>>,
}

impl Stencil {
    /// Validates: nonzero, pairwise distinct up to sign, and containing every
    /// coordinate axis.
    pub fn new(dim: usize, directions: Vec<Vec<isize>>) -> Result<Self> {
        ensure(dim >= 1, || "stencil dimension must be positive".into())?;
        ensure(directions.len() <= MAX_DIRECTIONS, || {
            format!("at most {MAX_DIRECTIONS} stencil directions are supported")
        })?;
        for (i, e) in directions.iter().enumerate() {
            ensure(e.len() == dim, || format!("direction {e:?} has the wrong dimension"))?;
            ensure(e.iter().any(|&c| c != 0), || "zero stencil direction".into())?;
            for f in &directions[..i] {
                let neg: Vec<isize> = f.iter().map(|c| -c).collect();
                ensure(e != f && *e != neg, || format!("direction {e:?} repeated up to sign"))?;
            }
        }
        for a in 0..dim {
            let has =
                directions.iter().any(|e| e.iter().enumerate().all(|(b, &c)| (c != 0) == (a == b)) && e[a].abs() == 1);
            ensure(has, || format!("stencil lacks coordinate axis {a}"))?;
        }
        Ok(Stencil { dim, directions })
    }

    pub fn axes(dim: usize) -> Self {
        let dirs = (0..dim).map(|a| (0..dim).map(|b| isize::from(a == b)).collect()).collect();
        Stencil { dim, directions: dirs }
    }

    /// Axes, diagonals and knight moves in 2-D (8 directions); axes, face and
    /// body diagonals in 3-D (13); axes and face diagonals otherwise.
    pub fn default_for(dim: usize) -> Self {
        let mut dirs: Vec<Vec<isize>> = Stencil::axes(dim).directions;
        match dim {
            1 => {}
            2 => dirs.extend([vec![1, 1], vec![1, -1], vec![2, 1], vec![2, -1], vec![1, 2], vec![1, -2]]),
            _ => {
                for a in 0..dim {
                    for b in a + 1..dim {
                        for s in [1, -1] {
                            let mut e = vec![0; dim];
                            e[a] = 1;
                            e[b] = s;
                            dirs.push(e);
                        }
                    }
                }
                if dim == 3 {
                    for (s, t) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                        dirs.push(vec![1, s, t]);
                    }
                }
            }
        }
        Stencil { dim, directions: dirs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn directions(&self) -> &[Vec<isize>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// `|e_k|²`.
    pub fn norm2(&self, k: usize) -> f64 {
        self.directions[k].iter().map(|&c| (c * c) as f64).sum()
    }

    /// Largest absolute component.
    pub fn reach(&self) -> isize {
        self.directions.iter().flatten().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// `e_k e_kᵀ/|e_k|²`.
    pub fn frame(&self, k: usize) -> SymMat {
        let e: Vec<f64> = self.directions[k].iter().map(|&c| c as f64).collect();
        SymMat::outer(&e) * (1.0 / self.norm2(k))
    }

    /// Minimum-norm `c ≥ 0` with `Σ c_k e_k e_kᵀ/|e_k|² = A` (up to
    /// [`FIT_TOL`]).
    ///
    /// The optimum is the minimum-norm solution on its own support, so every
    /// support is tried and the smallest feasible norm kept; ties go to the
    /// first support in enumeration order.
    pub fn fit(&self, a: &SymMat) -> Result<FrameFit> {
        ensure(a.dim() == self.dim, || "matrix and stencil dimensions differ".into())?;
        let d = self.dim;
        let rows = d * (d + 1) / 2;
        let pack = |m: &SymMat| {
            let mut v = Vec::with_capacity(rows);
            for i in 0..d {
                for j in i..d {
                    v.push(if i == j { m.get(i, j) } else { std::f64::consts::SQRT_2 * m.get(i, j) });
                }
            }
            v
        };
        let cols: Vec<Vec<f64>> = (0..self.len()).map(|k| pack(&self.frame(k))).collect();
        let b = DVector::from_vec(pack(a));
        let tol = FIT_TOL * (1.0 + a.frobenius_norm());

        let m = self.len();
        let mut best: Option<(f64, Vec<f64>, f64)> = None;
        for mask in 1u32..(1u32 << m) {
            let support: Vec<usize> = (0..m).filter(|&k| mask & (1 << k) != 0).collect();
            let bs = DMatrix::from_fn(rows, support.len(), |r, c| cols[support[c]][r]);
            let Ok(x) = bs.clone().svd(true, true).solve(&b, 1e-13) else { continue };
            if x.iter().any(|&v| v < -1e-12) {
                continue;
            }
            let mut c = vec![0.0; m];
            for (i, &k) in support.iter().enumerate() {
                c[k] = x[i].max(0.0);
            }
            let resid = residual(&cols, &c, &b);
            if resid > tol {
                continue;
            }
            let norm: f64 = c.iter().map(|v| v * v).sum();
            if best.as_ref().is_none_or(|(bn, _, _)| norm < bn * (1.0 - 1e-12)) {
                best = Some((norm, c, resid));
            }
        }
        match best {
            Some((_, coeffs, residual)) => Ok(FrameFit { coeffs, residual }),
            None => Err(Error::invalid(format!(
                "no nonnegative fit of {:?} on a {}-direction stencil; use a wider stencil",
                a.to_rows(),
                m
            ))),
        }
    }
}

fn residual(cols: &[Vec<f64>], c: &[f64], b: &DVector<f64>) -> f64 {
    let mut r2 = 0.0;
    for (i, bi) in b.iter().enumerate() {
        let s: f64 = cols.iter().zip(c).map(|(col, ck)| col[i] * ck).sum();
        r2 += (s - bi).powi(2);
    }
    r2.sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct FrameFit {
    pub coeffs: Vec<f64>,
    pub residual: f64,
}
