//! Small symmetric matrices (dimension ≤ 8), cyclic Jacobi eigen-decomposition
//! and the Pucci extremal operators.
//!
//! Sign convention: operators act as `F(M) = -tr(AM)` for linear `F`, so
//! `P⁺(M) = sup_{λI≤A≤ΛI} -tr(AM) = Λ·Σ_{e<0}|e| − λ·Σ_{e>0} e`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ensure, Error, Result};
use crate::rng::{self, Rng};

pub const MAX_DIM: usize = 8;
const PACKED: usize = MAX_DIM * (MAX_DIM + 1) / 2;

/// Symmetric `d×d` matrix stored as a packed upper triangle.
#[derive(Clone, Copy, PartialEq)]
pub struct SymMat {
    dim: usize,
    data: [f64; PACKED],
}

#[inline]
fn packed_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * d - i - 1) / 2 + j
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range 1..=8");
        SymMat { dim, data: [0.0; PACKED] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0)
    }

    pub fn scalar(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, s);
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds `M[i][j] = f(i, j)` reading only the upper triangle.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from full rows; rejects ragged, non-finite or asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        ensure((1..=MAX_DIM).contains(&d), || format!("matrix dimension {d} not in 1..=8"))?;
        for r in rows {
            ensure(r.len() == d, || "matrix rows must form a square array".into())?;
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("matrix entry".into()));
            }
        }
        let scale = rows.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                ensure((rows[i][j] - rows[j][i]).abs() <= 1e-12 * scale, || {
                    format!("matrix is not symmetric at ({i},{j})")
                })?;
            }
        }
        Ok(Self::from_fn(d, |i, j| 0.5 * (rows[i][j] + rows[j][i])))
    }

    /// `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    /// Entries of the upper triangle i.i.d. uniform on `[-s, s]`.
    pub fn random_uniform(dim: usize, s: f64, rng: &mut Rng) -> Self {
        Self::from_fn(dim, |_, _| rng.random_range(-s..=s))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[packed_index(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[packed_index(self.dim, i, j)] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product `tr(AB)`.
    pub fn inner(&self, other: &SymMat) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.get(i, i) * other.get(i, i);
            for j in i + 1..self.dim {
                s += 2.0 * self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data[..self.len()].iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data[..self.len()].iter().all(|v| v.is_finite())
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.get(i, i) * v[i] * v[i];
            for j in i + 1..self.dim {
                s += 2.0 * self.get(i, j) * v[i] * v[j];
            }
        }
        s
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }

    fn len(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().values
    }

    /// Cyclic Jacobi eigen-decomposition. Eigenvalues ascending; eigenvector
    /// `k` is column `k` of `vectors`.
    pub fn eigen(&self) -> Eigen {
        let d = self.dim;
        let mut a = [[0.0f64; MAX_DIM]; MAX_DIM];
        let mut v = [[0.0f64; MAX_DIM]; MAX_DIM];
        for i in 0..d {
            v[i][i] = 1.0;
            for j in 0..d {
                a[i][j] = self.get(i, j);
            }
        }
        let norm = self.frobenius_norm();
        for _sweep in 0..64 {
            let mut off = 0.0;
            for p in 0..d {
                for q in p + 1..d {
                    off += a[p][q] * a[p][q];
                }
            }
            if off.sqrt() <= 1e-16 * norm || off == 0.0 {
                break;
            }
            for p in 0..d {
                for q in p + 1..d {
                    let apq = a[p][q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut().take(d) {
                        let vkp = row[p];
                        let vkq = row[q];
                        row[p] = c * vkp - s * vkq;
                        row[q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
        Eigen {
            values: order.iter().map(|&k| a[k][k]).collect(),
            vectors: order.iter().map(|&k| (0..d).map(|i| v[i][k]).collect()).collect(),
        }
    }
}

/// Output of [`SymMat::eigen`].
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl Eigen {
    /// `Σ_k e_k v_k v_kᵀ`.
    pub fn reconstruct(&self) -> SymMat {
        let d = self.values.len();
        let mut m = SymMat::zeros(d);
        for (e, v) in self.values.iter().zip(&self.vectors) {
            m = m + SymMat::outer(v) * *e;
        }
        m
    }
}

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl Add for SymMat {
    type Output = SymMat;
    fn add(mut self, rhs: SymMat) -> SymMat {
        debug_assert_eq!(self.dim, rhs.dim);
        for k in 0..self.len() {
            self.data[k] += rhs.data[k];
        }
        self
    }
}

impl Sub for SymMat {
    type Output = SymMat;
    fn sub(mut self, rhs: SymMat) -> SymMat {
        debug_assert_eq!(self.dim, rhs.dim);
        for k in 0..self.len() {
            self.data[k] -= rhs.data[k];
        }
        self
    }
}

impl Mul<f64> for SymMat {
    type Output = SymMat;
    fn mul(mut self, s: f64) -> SymMat {
        for k in 0..self.len() {
            self.data[k] *= s;
        }
        self
    }
}

impl Neg for SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        self * -1.0
    }
}

impl Serialize for SymMat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMat::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Ellipticity constants `0 < λ ≤ Λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEllipticity")]
pub struct Ellipticity {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
}

#[derive(Deserialize)]
struct RawEllipticity {
    lambda: f64,
    #[serde(rename = "Lambda")]
    big_lambda: f64,
}

impl TryFrom<RawEllipticity> for Ellipticity {
    type Error = Error;
    fn try_from(r: RawEllipticity) -> Result<Self> {
        Ellipticity::new(r.lambda, r.big_lambda)
    }
}

impl Ellipticity {
    pub fn new(lambda: f64, big_lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || !big_lambda.is_finite() {
            return Err(Error::NonFinite("ellipticity constants".into()));
        }
        ensure(lambda > 0.0 && lambda <= big_lambda, || {
            format!("ellipticity requires 0 < lambda <= Lambda, got ({lambda}, {big_lambda})")
        })?;
        Ok(Ellipticity { lambda, big_lambda })
    }

    /// Λ/λ.
    pub fn ratio(&self) -> f64 {
        self.big_lambda / self.lambda
    }
}

/// `P⁺(M) = Λ·Σ_{e<0}|e| − λ·Σ_{e>0} e`.
pub fn pucci_plus(m: &SymMat, ell: Ellipticity) -> f64 {
    pucci_from_eigs(&m.eigenvalues(), ell.big_lambda, ell.lambda)
}

/// `P⁻(M) = λ·Σ_{e<0}|e| − Λ·Σ_{e>0} e`.
pub fn pucci_minus(m: &SymMat, ell: Ellipticity) -> f64 {
    pucci_from_eigs(&m.eigenvalues(), ell.lambda, ell.big_lambda)
}

/// `neg_weight·Σ_{e<0}|e| − pos_weight·Σ_{e>0} e`.
pub fn pucci_from_eigs(eigs: &[f64], neg_weight: f64, pos_weight: f64) -> f64 {
    eigs.iter().map(|&e| if e < 0.0 { -neg_weight * e } else { -pos_weight * e }).sum()
}

/// Sampled lower estimate of `P⁺` and upper estimate of `P⁻`, obtained by
/// evaluating `-tr(AM)` over `A = Rᵀ diag(a) R` with random rotations `R` and
/// `a ∈ {λ, Λ}^d`. The optimisation over `a` separates per coordinate, so each
/// rotation costs `O(d³)` rather than `2^d` evaluations.
pub fn pucci_brute(m: &SymMat, ell: Ellipticity, samples: usize, rng: &mut Rng) -> (f64, f64) {
    let d = m.dim();
    let mut best_plus = f64::NEG_INFINITY;
    let mut best_minus = f64::INFINITY;
    for _ in 0..samples {
        let frame = random_rotation(d, rng);
        let (mut plus, mut minus) = (0.0, 0.0);
        for r in &frame {
            let q = m.quad_form(r);
            plus += (-ell.lambda * q).max(-ell.big_lambda * q);
            minus += (-ell.lambda * q).min(-ell.big_lambda * q);
        }
        best_plus = best_plus.max(plus);
        best_minus = best_minus.min(minus);
    }
    (best_plus, best_minus)
}

/// Rows of a uniformly random orthogonal matrix. In 2-D this is an angle in
/// `[0, π)`; otherwise Gram–Schmidt on a Gaussian matrix.
pub fn random_rotation(d: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    if d == 1 {
        return vec![vec![1.0]];
    }
    if d == 2 {
        let t = rng.random_range(0.0..std::f64::consts::PI);
        let (s, c) = t.sin_cos();
        return vec![vec![c, s], vec![-s, c]];
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng::normal(rng)).collect();
        for r in &rows {
            let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= dot * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-8 {
            rows.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    rows
}
