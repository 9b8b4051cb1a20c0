//! Uniformly elliptic operators `F: Sym(d) → ℝ` with `F(0) = 0`, and
//! sampled checks of the structural conditions:
//!
//! * (F1) `P⁻(M − N) ≤ F(M) − F(N) ≤ P⁺(M − N)`;
//! * (F2) `DF` is Lipschitz (only meaningful for smooth operators).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng;
use crate::symmat::{pucci_minus, pucci_plus, Ellipticity, SymMat};

/// Default relative step for finite-difference derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Scales cycled through when sampling matrices for the structural checks.
const SAMPLE_SCALES: [f64; 3] = [0.1, 1.0, 10.0];

/// `{A_{αβ}}` indexed `α < n_inf` (outer inf) and `β < n_sup` (inner sup).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsaacsFamily {
    n_inf: usize,
    n_sup: usize,
    mats: Vec<SymMat>,
}

impl IsaacsFamily {
    /// `rows[α][β] = A_{αβ}`.
    pub fn new(rows: Vec<Vec<SymMat>>) -> Result<Self> {
        ensure(!rows.is_empty() && !rows[0].is_empty(), || "empty Isaacs family".into())?;
        let n_sup = rows[0].len();
        ensure(rows.iter().all(|r| r.len() == n_sup), || "Isaacs family rows must have equal length".into())?;
        let dim = rows[0][0].dim();
        ensure(rows.iter().flatten().all(|a| a.dim() == dim), || {
            "Isaacs family members must share a dimension".into()
        })?;
        Ok(IsaacsFamily { n_inf: rows.len(), n_sup, mats: rows.into_iter().flatten().collect() })
    }

    pub fn n_inf(&self) -> usize {
        self.n_inf
    }

    pub fn n_sup(&self) -> usize {
        self.n_sup
    }

    pub fn dim(&self) -> usize {
        self.mats[0].dim()
    }

    pub fn get(&self, alpha: usize, beta: usize) -> &SymMat {
        &self.mats[alpha * self.n_sup + beta]
    }

    /// Members in `α`-major order.
    pub fn members(&self) -> &[SymMat] {
        &self.mats
    }

    fn max_frobenius_sq(&self) -> f64 {
        self.mats.iter().map(|a| a.inner(a)).fold(0.0, f64::max)
    }
}

/// Closure-backed operator, mainly for experiments and tests.
#[derive(Clone)]
pub struct CustomOperator {
    f: Arc<dyn Fn(&SymMat) -> f64 + Send + Sync>,
    /// Whether finite differences may stand in for the derivative.
    smooth: bool,
}

impl fmt::Debug for CustomOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomOperator").field("smooth", &self.smooth).finish()
    }
}

#[derive(Clone, Debug)]
pub enum OperatorKind {
    /// `F(M) = -tr(AM)`.
    Linear(SymMat),
    PucciPlus,
    PucciMinus,
    /// `min_α max_β -tr(A_{αβ} M)`.
    Isaacs(IsaacsFamily),
    /// Log-mean-exp smoothing of [`OperatorKind::Isaacs`] at temperature `tau`.
    IsaacsSmoothed {
        family: IsaacsFamily,
        tau: f64,
    },
    /// `F̃(N) = F(N + shift)`.
    Translated {
        base: Box<Operator>,
        shift: SymMat,
    },
    Custom(CustomOperator),
}

#[derive(Clone, Debug)]
pub struct Operator {
    name: String,
    dim: usize,
    ell: Ellipticity,
    kind: OperatorKind,
}

fn check_member(a: &SymMat, ell: Ellipticity) -> Result<()> {
    if !a.is_finite() {
        return Err(Error::NonFinite("operator coefficient matrix".into()));
    }
    let eigs = a.eigenvalues();
    let tol = 1e-12 * (1.0 + ell.big_lambda);
    ensure(eigs[0] >= ell.lambda - tol && eigs[eigs.len() - 1] <= ell.big_lambda + tol, || {
        format!(
            "coefficient matrix with spectrum [{:.6}, {:.6}] is not inside [{}, {}]",
            eigs[0],
            eigs[eigs.len() - 1],
            ell.lambda,
            ell.big_lambda
        )
    })
}

impl Operator {
    /// `F(M) = -tr(AM)`, requiring `λI ≤ A ≤ ΛI`.
    pub fn linear(a: SymMat, ell: Ellipticity) -> Result<Self> {
        check_member(&a, ell)?;
        Ok(Operator { name: "linear".into(), dim: a.dim(), ell, kind: OperatorKind::Linear(a) })
    }

    /// `-Δ` in dimension `dim` (λ = Λ = 1).
    pub fn laplacian(dim: usize) -> Self {
        let ell = Ellipticity::new(1.0, 1.0).expect("unit ellipticity");
        Operator { name: "laplacian".into(), dim, ell, kind: OperatorKind::Linear(SymMat::identity(dim)) }
    }

    pub fn pucci_plus(dim: usize, ell: Ellipticity) -> Self {
        Operator { name: "pucci_plus".into(), dim, ell, kind: OperatorKind::PucciPlus }
    }

    pub fn pucci_minus(dim: usize, ell: Ellipticity) -> Self {
        Operator { name: "pucci_minus".into(), dim, ell, kind: OperatorKind::PucciMinus }
    }

    pub fn isaacs_exact(family: IsaacsFamily, ell: Ellipticity) -> Result<Self> {
        for a in family.members() {
            check_member(a, ell)?;
        }
        Ok(Operator { name: "isaacs_exact".into(), dim: family.dim(), ell, kind: OperatorKind::Isaacs(family) })
    }

    pub fn isaacs_smoothed(family: IsaacsFamily, ell: Ellipticity, tau: f64) -> Result<Self> {
        ensure(tau.is_finite() && tau > 0.0, || format!("smoothing temperature must be > 0, got {tau}"))?;
        for a in family.members() {
            check_member(a, ell)?;
        }
        Ok(Operator {
            name: "isaacs_smoothed".into(),
            dim: family.dim(),
            ell,
            kind: OperatorKind::IsaacsSmoothed { family, tau },
        })
    }

    /// `F̃(N) = F(N + shift)`; uniformly elliptic with the same constants,
    /// but `F̃(0) = F(shift)` need not vanish.
    pub fn translate(base: &Operator, shift: SymMat) -> Result<Self> {
        ensure(shift.dim() == base.dim, || "translation matrix has the wrong dimension".into())?;
        if !shift.is_finite() {
            return Err(Error::NonFinite("translation matrix".into()));
        }
        Ok(Operator {
            name: format!("{}_translated", base.name),
            dim: base.dim,
            ell: base.ell,
            kind: OperatorKind::Translated { base: Box::new(base.clone()), shift },
        })
    }

    /// Wraps a closure. The caller vouches for ellipticity with constants `ell`.
    pub fn custom(
        name: &str,
        dim: usize,
        ell: Ellipticity,
        smooth: bool,
        f: impl Fn(&SymMat) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Operator { name: name.into(), dim, ell, kind: OperatorKind::Custom(CustomOperator { f: Arc::new(f), smooth }) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ell(&self) -> Ellipticity {
        self.ell
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn eval(&self, m: &SymMat) -> f64 {
        debug_assert_eq!(m.dim(), self.dim);
        match &self.kind {
            OperatorKind::Linear(a) => -a.inner(m),
            OperatorKind::PucciPlus => pucci_plus(m, self.ell),
            OperatorKind::PucciMinus => pucci_minus(m, self.ell),
            OperatorKind::Isaacs(fam) => (0..fam.n_inf)
                .map(|a| (0..fam.n_sup).map(|b| -fam.get(a, b).inner(m)).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min),
            OperatorKind::IsaacsSmoothed { family, tau } => soft_isaacs(family, *tau, m).0,
            OperatorKind::Translated { base, shift } => base.eval(&(*m + *shift)),
            OperatorKind::Custom(c) => (c.f)(m),
        }
    }

    /// True when `DF` exists everywhere (so (F2) is meaningful).
    pub fn is_smooth(&self) -> bool {
        match &self.kind {
            OperatorKind::Linear(_) | OperatorKind::IsaacsSmoothed { .. } => true,
            OperatorKind::PucciPlus | OperatorKind::PucciMinus | OperatorKind::Isaacs(_) => false,
            OperatorKind::Translated { base, .. } => base.is_smooth(),
            OperatorKind::Custom(c) => c.smooth,
        }
    }

    /// `F(tM) = tF(M)` for `t ≥ 0`.
    pub fn is_positively_homogeneous(&self) -> bool {
        matches!(
            self.kind,
            OperatorKind::Linear(_) | OperatorKind::PucciPlus | OperatorKind::PucciMinus | OperatorKind::Isaacs(_)
        )
    }

    /// Analytic derivative `DF(M)`, identified with a symmetric matrix via the
    /// Frobenius pairing: `F(M + εN) = F(M) + ε·tr(DF(M)·N) + o(ε)`.
    pub fn derivative(&self, m: &SymMat) -> Option<SymMat> {
        match &self.kind {
            OperatorKind::Linear(a) => Some(-*a),
            OperatorKind::IsaacsSmoothed { family, tau } => Some(soft_isaacs(family, *tau, m).1),
            OperatorKind::Translated { base, shift } => base.derivative(&(*m + *shift)),
            _ => None,
        }
    }

    /// Analytic derivative, or central differences with relative `step` for
    /// smooth operators lacking a closed form.
    pub fn derivative_or_fd(&self, m: &SymMat, step: f64) -> Result<SymMat> {
        if let Some(d) = self.derivative(m) {
            return Ok(d);
        }
        if !self.is_smooth() || step <= 0.0 {
            return Err(Error::invalid(format!("derivative unavailable for operator '{}'", self.name)));
        }
        Ok(fd_derivative(self, m, step))
    }

    /// A priori Lipschitz constant of `DF` in the Frobenius norm, if known.
    pub fn df_lipschitz_bound(&self) -> Option<f64> {
        match &self.kind {
            OperatorKind::Linear(_) => Some(0.0),
            OperatorKind::IsaacsSmoothed { family, tau } => Some(2.0 * family.max_frobenius_sq() / tau),
            OperatorKind::Translated { base, .. } => base.df_lipschitz_bound(),
            _ => None,
        }
    }

    /// Linear members `{A_{αβ}}` whose (soft) min-max defines the operator, or
    /// `None` for Pucci and closure-based operators.
    pub fn isaacs_family(&self) -> Option<IsaacsFamily> {
        match &self.kind {
            OperatorKind::Linear(a) => IsaacsFamily::new(vec![vec![*a]]).ok(),
            OperatorKind::Isaacs(f) | OperatorKind::IsaacsSmoothed { family: f, .. } => Some(f.clone()),
            _ => None,
        }
    }

    /// Smoothing temperature of a smoothed Isaacs operator.
    pub fn smoothing(&self) -> Option<f64> {
        match &self.kind {
            OperatorKind::IsaacsSmoothed { tau, .. } => Some(*tau),
            _ => None,
        }
    }
}

/// Value and derivative of the log-mean-exp smoothed Isaacs operator.
///
/// Using means rather than sums keeps `F(0) = 0` and makes a one-member
/// family exactly linear; the gap to the exact operator is at most
/// `τ·ln(n_inf·n_sup)`.
fn soft_isaacs(fam: &IsaacsFamily, tau: f64, m: &SymMat) -> (f64, SymMat) {
    let h: Vec<f64> = fam.mats.iter().map(|a| -a.inner(m)).collect();
    let (value, w) = soft_infsup(&h, fam.n_inf, fam.n_sup, tau);
    let mut d = SymMat::zeros(fam.dim());
    for (a, wa) in fam.mats.iter().zip(w) {
        d = d - *a * wa;
    }
    (value, d)
}

/// Log-mean-exp `min_α max_β` of the row-major table `h` (`n_inf` rows), and
/// its gradient with respect to `h` (nonnegative weights summing to one).
pub(crate) fn soft_infsup(h: &[f64], n_inf: usize, n_sup: usize, tau: f64) -> (f64, Vec<f64>) {
    let mut g = Vec::with_capacity(n_inf);
    let mut w = vec![0.0; h.len()];
    for a in 0..n_inf {
        let row = &h[a * n_sup..(a + 1) * n_sup];
        let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (b, &v) in row.iter().enumerate() {
            let e = ((v - top) / tau).exp();
            w[a * n_sup + b] = e;
            z += e;
        }
        for x in &mut w[a * n_sup..(a + 1) * n_sup] {
            *x /= z;
        }
        g.push(top + tau * (z / n_sup as f64).ln());
    }
    let bottom = g.iter().copied().fold(f64::INFINITY, f64::min);
    let outer: Vec<f64> = g.iter().map(|&v| (-(v - bottom) / tau).exp()).collect();
    let z: f64 = outer.iter().sum();
    for a in 0..n_inf {
        for x in &mut w[a * n_sup..(a + 1) * n_sup] {
            *x *= outer[a] / z;
        }
    }
    (bottom - tau * (z / n_inf as f64).ln(), w)
}

/// Exact `min_α max_β` of the row-major table `h` and the attaining entry.
pub(crate) fn hard_infsup(h: &[f64], n_inf: usize, n_sup: usize) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for a in 0..n_inf {
        let mut top = (f64::NEG_INFINITY, 0);
        for b in 0..n_sup {
            let v = h[a * n_sup + b];
            if v > top.0 {
                top = (v, a * n_sup + b);
            }
        }
        if top.0 < best.0 {
            best = top;
        }
    }
    best
}

/// Central-difference derivative with step `step·(1 + ‖M‖_F)`.
pub fn fd_derivative(op: &Operator, m: &SymMat, step: f64) -> SymMat {
    let d = m.dim();
    let eps = step * (1.0 + m.frobenius_norm());
    let mut out = SymMat::zeros(d);
    for i in 0..d {
        for j in i..d {
            let mut e = SymMat::zeros(d);
            e.set(i, j, eps);
            let diff = op.eval(&(*m + e)) - op.eval(&(*m - e));
            // Off-diagonal perturbations move both (i,j) and (j,i).
            let factor = if i == j { 1.0 } else { 2.0 };
            out.set(i, j, diff / (2.0 * eps * factor));
        }
    }
    out
}

/// Outcome of [`check_f1`].
#[derive(Clone, Debug, Serialize)]
pub struct F1Report {
    pub samples: usize,
    /// `max(0, P⁻(M−N) − ΔF, ΔF − P⁺(M−N))` over the samples.
    pub max_violation: f64,
}

/// Samples pairs `(M, N)` with entries uniform on `[-s, s]`, `s ∈ {0.1, 1, 10}`,
/// and measures the worst violation of (F1).
pub fn check_f1(op: &Operator, samples: usize, seed: u64) -> F1Report {
    let mut rng = rng::stream(seed, 0xF1);
    let d = op.dim();
    let mut worst = 0.0f64;
    for k in 0..samples {
        let s = SAMPLE_SCALES[k % SAMPLE_SCALES.len()];
        let m = SymMat::random_uniform(d, s, &mut rng);
        let n = SymMat::random_uniform(d, s, &mut rng);
        let diff = op.eval(&m) - op.eval(&n);
        let lo = pucci_minus(&(m - n), op.ell());
        let hi = pucci_plus(&(m - n), op.ell());
        worst = worst.max(lo - diff).max(diff - hi);
    }
    F1Report { samples, max_violation: worst }
}

/// Outcome of [`check_f2`].
#[derive(Clone, Debug, Serialize)]
pub struct F2Report {
    /// `(‖M − N‖_F, ‖DF(M) − DF(N)‖_F)` per sample.
    pub moduli: Vec<(f64, f64)>,
    /// Largest observed ratio — the empirical Lipschitz constant of `DF`.
    pub slope: f64,
    pub bound: Option<f64>,
}

/// Samples the modulus of continuity of `DF`.
pub fn check_f2(op: &Operator, samples: usize, seed: u64, step: f64) -> Result<F2Report> {
    if op.derivative(&SymMat::zeros(op.dim())).is_none() && (step <= 0.0 || !op.is_smooth()) {
        return Err(Error::invalid(format!("derivative unavailable for operator '{}'", op.name())));
    }
    let mut rng = rng::stream(seed, 0xF2);
    let d = op.dim();
    let mut moduli = Vec::with_capacity(samples);
    let mut slope = 0.0f64;
    for k in 0..samples {
        let s = SAMPLE_SCALES[k % SAMPLE_SCALES.len()];
        let m = SymMat::random_uniform(d, s, &mut rng);
        let n = SymMat::random_uniform(d, s, &mut rng);
        let dm = op.derivative_or_fd(&m, step)?;
        let dn = op.derivative_or_fd(&n, step)?;
        let x = (m - n).frobenius_norm();
        let y = (dm - dn).frobenius_norm();
        if x > 0.0 {
            slope = slope.max(y / x);
        }
        moduli.push((x, y));
    }
    Ok(F2Report { moduli, slope, bound: op.df_lipschitz_bound() })
}

/// Serializable operator description used by configuration files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Laplacian {
        dim: usize,
    },
    Linear {
        a: SymMat,
        lambda: f64,
        #[serde(rename = "Lambda")]
        big_lambda: f64,
    },
    PucciPlus {
        dim: usize,
        lambda: f64,
        #[serde(rename = "Lambda")]
        big_lambda: f64,
    },
    PucciMinus {
        dim: usize,
        lambda: f64,
        #[serde(rename = "Lambda")]
        big_lambda: f64,
    },
    IsaacsExact {
        family: Vec<Vec<SymMat>>,
        lambda: f64,
        #[serde(rename = "Lambda")]
        big_lambda: f64,
    },
    IsaacsSmoothed {
        family: Vec<Vec<SymMat>>,
        lambda: f64,
        #[serde(rename = "Lambda")]
        big_lambda: f64,
        tau: f64,
    },
}

impl OperatorSpec {
    pub fn build(&self) -> Result<Operator> {
        match self {
            OperatorSpec::Laplacian { dim } => {
                ensure((1..=8).contains(dim), || format!("dimension {dim} not in 1..=8"))?;
                Ok(Operator::laplacian(*dim))
            }
            OperatorSpec::Linear { a, lambda, big_lambda } => {
                Operator::linear(*a, Ellipticity::new(*lambda, *big_lambda)?)
            }
            OperatorSpec::PucciPlus { dim, lambda, big_lambda } => {
                ensure((1..=8).contains(dim), || format!("dimension {dim} not in 1..=8"))?;
                Ok(Operator::pucci_plus(*dim, Ellipticity::new(*lambda, *big_lambda)?))
            }
            OperatorSpec::PucciMinus { dim, lambda, big_lambda } => {
                ensure((1..=8).contains(dim), || format!("dimension {dim} not in 1..=8"))?;
                Ok(Operator::pucci_minus(*dim, Ellipticity::new(*lambda, *big_lambda)?))
            }
            OperatorSpec::IsaacsExact { family, lambda, big_lambda } => {
                Operator::isaacs_exact(IsaacsFamily::new(family.clone())?, Ellipticity::new(*lambda, *big_lambda)?)
            }
            OperatorSpec::IsaacsSmoothed { family, lambda, big_lambda, tau } => Operator::isaacs_smoothed(
                IsaacsFamily::new(family.clone())?,
                Ellipticity::new(*lambda, *big_lambda)?,
                *tau,
            ),
        }
    }
}

/// A fixed 2-member-by-2-member 2-D family used in examples and tests:
/// `A_{αβ}` rotated diagonal matrices with spectra in `[λ, Λ]`.
pub fn sample_family_2d(ell: Ellipticity) -> IsaacsFamily {
    let (l, big) = (ell.lambda, ell.big_lambda);
    let mid = 0.5 * (l + big);
    let rot = |t: f64, a: f64, b: f64| {
        let (s, c) = t.sin_cos();
        SymMat::from_fn(2, |i, j| match (i, j) {
            (0, 0) => a * c * c + b * s * s,
            (1, 1) => a * s * s + b * c * c,
            _ => (a - b) * s * c,
        })
    };
    IsaacsFamily::new(vec![vec![rot(0.0, big, l), rot(0.7, mid, l)], vec![rot(1.9, l, big), rot(2.6, big, mid)]])
        .expect("static family is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ell() -> Ellipticity {
        Ellipticity::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn linear_and_pucci_values() {
        let a = SymMat::from_rows(&[vec![1.5, 0.2], vec![0.2, 1.2]]).unwrap();
        let op = Operator::linear(a, ell()).unwrap();
        let m = SymMat::from_rows(&[vec![1.0, 2.0], vec![2.0, -1.0]]).unwrap();
        assert!((op.eval(&m) - (-(1.5 - 1.2 + 0.8))).abs() < 1e-14);
        assert_eq!(op.derivative(&m), Some(-a));
        assert!(Operator::linear(SymMat::identity(2) * 3.0, ell()).is_err());
    }

    #[test]
    fn smoothed_single_member_is_exactly_linear() {
        let a = SymMat::from_rows(&[vec![1.5, 0.2], vec![0.2, 1.2]]).unwrap();
        let fam = IsaacsFamily::new(vec![vec![a]]).unwrap();
        let op = Operator::isaacs_smoothed(fam, ell(), 0.3).unwrap();
        let lin = Operator::linear(a, ell()).unwrap();
        let mut rng = rng::stream(1, 0);
        for _ in 0..50 {
            let m = SymMat::random_uniform(2, 5.0, &mut rng);
            assert_eq!(op.eval(&m), lin.eval(&m));
        }
    }

    #[test]
    fn smoothed_vanishes_at_zero_and_is_close_to_exact() {
        let fam = sample_family_2d(ell());
        let tau = 0.05;
        let soft = Operator::isaacs_smoothed(fam.clone(), ell(), tau).unwrap();
        let exact = Operator::isaacs_exact(fam, ell()).unwrap();
        assert!(soft.eval(&SymMat::zeros(2)).abs() < 1e-15);
        let gap = tau * 4.0f64.ln();
        let mut rng = rng::stream(2, 0);
        for _ in 0..200 {
            let m = SymMat::random_uniform(2, 3.0, &mut rng);
            assert!((soft.eval(&m) - exact.eval(&m)).abs() <= gap + 1e-12);
        }
    }

    #[test]
    fn analytic_derivative_matches_finite_differences() {
        let soft = Operator::isaacs_smoothed(sample_family_2d(ell()), ell(), 0.2).unwrap();
        let mut rng = rng::stream(3, 0);
        for _ in 0..50 {
            let m = SymMat::random_uniform(2, 1.0, &mut rng);
            let exact = soft.derivative(&m).unwrap();
            let fd = fd_derivative(&soft, &m, 1e-6);
            assert!((exact - fd).frobenius_norm() < 1e-6, "{exact:?} vs {fd:?}");
        }
    }

    #[test]
    fn f1_holds_for_catalog() {
        let fam = sample_family_2d(ell());
        let ops = [
            Operator::laplacian(2),
            Operator::pucci_plus(2, ell()),
            Operator::pucci_minus(3, ell()),
            Operator::isaacs_exact(fam.clone(), ell()).unwrap(),
            Operator::isaacs_smoothed(fam, ell(), 0.1).unwrap(),
        ];
        for op in &ops {
            let r = check_f1(op, 2000, 11);
            assert!(r.max_violation <= 1e-10, "{}: {}", op.name(), r.max_violation);
        }
    }

    #[test]
    fn f2_slope_respects_bound() {
        let soft = Operator::isaacs_smoothed(sample_family_2d(ell()), ell(), 0.1).unwrap();
        let r = check_f2(&soft, 1000, 5, DEFAULT_FD_STEP).unwrap();
        assert!(r.slope <= r.bound.unwrap(), "{} > {:?}", r.slope, r.bound);
        let lin = check_f2(&Operator::laplacian(2), 100, 5, DEFAULT_FD_STEP).unwrap();
        assert_eq!(lin.slope, 0.0);
    }

    #[test]
    fn nonsmooth_operators_have_no_derivative() {
        let exact = Operator::isaacs_exact(sample_family_2d(ell()), ell()).unwrap();
        assert!(check_f2(&exact, 10, 0, DEFAULT_FD_STEP).is_err());
        let smooth = Operator::custom("quad", 2, ell(), true, |m| -1.5 * m.trace());
        let r = check_f2(&smooth, 10, 0, DEFAULT_FD_STEP).unwrap();
        assert!(r.slope < 1e-6);
        assert!(check_f2(&smooth, 10, 0, 0.0).is_err());
    }

    #[test]
    fn translation() {
        let p = Operator::pucci_plus(2, ell());
        let shift = SymMat::diag(&[1.0, -2.0]);
        let t = Operator::translate(&p, shift).unwrap();
        assert_eq!(t.eval(&SymMat::zeros(2)), p.eval(&shift));
        let r = check_f1(&t, 500, 4);
        assert!(r.max_violation <= 1e-10);
    }

    #[test]
    fn spec_parsing() {
        let s: OperatorSpec = serde_json::from_str(r#"{"name":"pucci_plus","dim":2,"lambda":1,"Lambda":2}"#).unwrap();
        assert_eq!(s.build().unwrap().name(), "pucci_plus");
        let bad: OperatorSpec = serde_json::from_str(r#"{"name":"pucci_plus","dim":2,"lambda":2,"Lambda":1}"#).unwrap();
        assert!(bad.build().is_err());
    }

    proptest! {
        #[test]
        fn smoothed_derivative_is_elliptic(entries in proptest::collection::vec(-5.0f64..5.0, 3), tau in 0.01f64..1.0) {
            let e = ell();
            let soft = Operator::isaacs_smoothed(sample_family_2d(e), e, tau).unwrap();
            let m = SymMat::from_rows(&[vec![entries[0], entries[1]], vec![entries[1], entries[2]]]).unwrap();
            let eigs = (-soft.derivative(&m).unwrap()).eigenvalues();
            prop_assert!(eigs[0] >= e.lambda - 1e-12 && eigs[1] <= e.big_lambda + 1e-12);
        }
    }
}
