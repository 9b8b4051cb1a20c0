//! Monotone wide-stencil discretisation of `F(D²u) = 0` with Dirichlet data.
//!
//! Each linear member `−tr(A D²u)` becomes `−Σ_k c_k Δ_{e_k}u` with `c ≥ 0`
//! from a frame fit, and members are combined by the operator's (soft)
//! min–max, which keeps the scheme degenerate elliptic. Pucci operators are
//! represented by a finite family of extremal coefficient matrices.
//!
//! The default iteration is Newton's method on the discrete equations (policy
//! iteration for the min–max), each step a banded direct solve; explicit
//! Euler time stepping is available as a fallback. Updates are whole-grid and
//! simultaneous, so results do not depend on traversal order.

pub mod banded;
pub mod stencil;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::grid::{Grid, GridFn};
use crate::operators::{hard_infsup, soft_infsup, Operator, OperatorKind};
use crate::symmat::{Ellipticity, SymMat};
use banded::Banded;
pub use stencil::{FrameFit, Stencil, FIT_TOL};

pub const CFL_SAFETY: f64 = 0.9;

/// Rotation angles per half-turn for the 2-D Pucci families.
pub const PUCCI_ANGLES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Directional second differences with nonnegative frame fits.
    MonotoneFrames,
    /// Central-difference Hessian plugged into `F`; smooth `F` only, not
    /// monotone.
    FdHessian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Iteration {
    Newton,
    Euler { cfl: f64 },
}

/// `(u(x + eh) − 2u(x) + u(x − eh)) / (|e|h)²`.
pub fn second_diff(u: &GridFn, e: &[isize], k: usize) -> Result<f64> {
    let g = u.grid();
    ensure(e.len() == g.dim(), || "direction has the wrong dimension".into())?;
    let neg: Vec<isize> = e.iter().map(|c| -c).collect();
    let (p, m) = match (g.shift(k, e), g.shift(k, &neg)) {
        (Some(p), Some(m)) => (p, m),
        _ => return Err(Error::invalid(format!("x ± {e:?}h leaves the grid box"))),
    };
    let len2: f64 = e.iter().map(|&c| (c * c) as f64).sum();
    Ok((u.at(p) - 2.0 * u.at(k) + u.at(m)) / (len2 * g.h() * g.h()))
}

/// Coefficient matrices whose sup (P⁺) or inf (P⁻) of `−tr(A M)` is the
/// discrete Pucci operator: `λI`, `ΛI` and rank-one extremal frames.
pub fn pucci_family(dim: usize, ell: Ellipticity, stencil: &Stencil) -> Vec<SymMat> {
    let (l, big) = (ell.lambda, ell.big_lambda);
    let mut out = vec![SymMat::scalar(dim, l), SymMat::scalar(dim, big)];
    if l == big || dim == 1 {
        out.truncate(1);
        return out;
    }
    let dirs: Vec<Vec<f64>> = if dim == 2 {
        (0..PUCCI_ANGLES)
            .map(|j| {
                let t = std::f64::consts::PI * j as f64 / PUCCI_ANGLES as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else {
        stencil
            .directions()
            .iter()
            .map(|e| {
                let n = e.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
                e.iter().map(|&c| c as f64 / n).collect()
            })
            .collect()
    };
    for v in dirs {
        let p = SymMat::outer(&v);
        for cand in [SymMat::scalar(dim, l) + p * (big - l), SymMat::scalar(dim, big) - p * (big - l)] {
            if out.iter().all(|m| (*m - cand).frobenius_norm() > 1e-12) {
                out.push(cand);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
enum Combine {
    InfSup,
    Soft(f64),
}

/// Fitted linear members of a monotone scheme.
#[derive(Clone, Debug)]
struct Members {
    n_inf: usize,
    n_sup: usize,
    combine: Combine,
    /// `weights[j][k] = c_{jk}/(|e_k|h)²`.
    weights: Vec<Vec<f64>>,
    /// Constant terms `−tr(A_j S)` from translations.
    offsets: Vec<f64>,
}

fn family_of(op: &Operator, stencil: &Stencil) -> Result<(Vec<SymMat>, usize, usize, Combine, Vec<f64>)> {
    let zeros = |n: usize| vec![0.0; n];
    Ok(match op.kind() {
        OperatorKind::Linear(a) => (vec![*a], 1, 1, Combine::InfSup, zeros(1)),
        OperatorKind::PucciPlus => {
            let f = pucci_family(op.dim(), op.ell(), stencil);
            let m = f.len();
            (f, 1, m, Combine::InfSup, zeros(m))
        }
        OperatorKind::PucciMinus => {
            let f = pucci_family(op.dim(), op.ell(), stencil);
            let m = f.len();
            (f, m, 1, Combine::InfSup, zeros(m))
        }
        OperatorKind::Isaacs(fam) => {
            (fam.members().to_vec(), fam.n_inf(), fam.n_sup(), Combine::InfSup, zeros(fam.members().len()))
        }
        OperatorKind::IsaacsSmoothed { family, tau } => (
            family.members().to_vec(),
            family.n_inf(),
            family.n_sup(),
            Combine::Soft(*tau),
            zeros(family.members().len()),
        ),
        OperatorKind::Translated { base, shift } => {
            let (mats, ni, ns, comb, mut off) = family_of(base, stencil)?;
            for (b, a) in off.iter_mut().zip(&mats) {
                *b -= a.inner(shift);
            }
            (mats, ni, ns, comb, off)
        }
        OperatorKind::Custom(_) => {
            return Err(Error::invalid(format!(
                "operator '{}' is not a min-max family; the monotone-frames scheme needs one (use fd-hessian for smooth operators)",
                op.name()
            )))
        }
    })
}

/// A Dirichlet problem `F_h[u] = 0` on the unknown nodes, `u = g` on the
/// Dirichlet nodes (in-domain nodes whose stencil leaves the domain).
#[derive(Clone, Debug)]
pub struct DiscreteProblem {
    op: Operator,
    grid: Grid,
    stencil: Stencil,
    scheme: Scheme,
    boundary: GridFn,
    dirichlet: Vec<bool>,
    unknowns: Vec<usize>,
    /// Grid index → unknown position (`u32::MAX` if not an unknown).
    pos: Vec<u32>,
    /// Neighbour grid indices, `offsets.len()` per unknown.
    nbr: Vec<usize>,
    offsets: Vec<Vec<isize>>,
    members: Option<Members>,
    /// Weights of the fitted identity, for the harmonic pre-solve.
    laplace: Vec<f64>,
    /// Frame-fit residuals (monotone scheme).
    pub fit_residual: f64,
    /// Explicit step used by Euler iteration at `cfl = 1`.
    pub tau_max: f64,
}

impl DiscreteProblem {
    pub fn new(op: Operator, boundary: GridFn, stencil: Option<Stencil>, scheme: Scheme) -> Result<Self> {
        let grid = boundary.grid().clone();
        let d = grid.dim();
        ensure(op.dim() == d, || format!("operator dimension {} differs from grid dimension {d}", op.dim()))?;
        let stencil = stencil.unwrap_or_else(|| Stencil::default_for(d));
        ensure(stencil.dim() == d, || "stencil dimension differs from grid dimension".into())?;
        let h2 = grid.h() * grid.h();

        let (offsets, members, fit_residual) = match scheme {
            Scheme::MonotoneFrames => {
                ensure(d <= 3, || "the monotone-frames scheme supports d ≤ 3".into())?;
                let (mats, n_inf, n_sup, combine, offs) = family_of(&op, &stencil)?;
                let mut weights = Vec::with_capacity(mats.len());
                let mut worst: f64 = 0.0;
                for a in &mats {
                    let fit = stencil.fit(a)?;
                    worst = worst.max(fit.residual);
                    weights.push(fit.coeffs.iter().enumerate().map(|(k, c)| c / (stencil.norm2(k) * h2)).collect());
                }
                let mut offsets = Vec::new();
                for e in stencil.directions() {
                    offsets.push(e.clone());
                    offsets.push(e.iter().map(|c| -c).collect());
                }
                (offsets, Some(Members { n_inf, n_sup, combine, weights, offsets: offs }), worst)
            }
            Scheme::FdHessian => {
                ensure(op.is_smooth(), || {
                    format!("the fd-hessian scheme needs a smooth operator; '{}' is not", op.name())
                })?;
                (hessian_offsets(d), None, 0.0)
            }
        };

        let mut dirichlet = vec![false; grid.len()];
        let mut unknowns = Vec::new();
        let mut nbr = Vec::new();
        for k in grid.domain_nodes() {
            let ns: Option<Vec<usize>> = offsets.iter().map(|o| grid.shift_in_domain(k, o)).collect();
            match ns {
                Some(ns) => {
                    unknowns.push(k);
                    nbr.extend(ns);
                }
                None => dirichlet[k] = true,
            }
        }
        ensure(!unknowns.is_empty(), || "grid has no interior unknowns for this stencil".into())?;
        let mut pos = vec![u32::MAX; grid.len()];
        for (i, &k) in unknowns.iter().enumerate() {
            pos[k] = i as u32;
        }

        let laplace = match &members {
            Some(_) => {
                let fit = stencil.fit(&SymMat::identity(d))?;
                fit.coeffs.iter().enumerate().map(|(k, c)| c / (stencil.norm2(k) * h2)).collect()
            }
            None => Vec::new(),
        };
        let tau_max = match &members {
            Some(m) => 1.0 / m.weights.iter().map(|w| 2.0 * w.iter().sum::<f64>()).fold(0.0, f64::max),
            None => h2 / (4.0 * op.ell().big_lambda * d as f64),
        };
        Ok(DiscreteProblem {
            op,
            grid,
            stencil,
            scheme,
            boundary,
            dirichlet,
            unknowns,
            pos,
            nbr,
            offsets,
            members,
            laplace,
            fit_residual,
            tau_max,
        })
    }

    /// Same operator and stencil with new boundary data on the same grid.
    pub fn with_boundary(&self, boundary: GridFn) -> Result<Self> {
        ensure(boundary.grid() == &self.grid, || "boundary data lives on a different grid".into())?;
        Ok(DiscreteProblem { boundary, ..self.clone() })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn boundary(&self) -> &GridFn {
        &self.boundary
    }

    pub fn is_dirichlet(&self, k: usize) -> bool {
        self.dirichlet[k]
    }

    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    /// Frame-fit weights `c_{jk}/(|e_k|h)²` for each member (monotone scheme).
    pub fn member_weights(&self) -> Option<&[Vec<f64>]> {
        self.members.as_ref().map(|m| m.weights.as_slice())
    }

    fn neighbours(&self, i: usize) -> &[usize] {
        let n = self.offsets.len();
        &self.nbr[i * n..(i + 1) * n]
    }

    /// `F_h` at unknown `i` (or the Laplacian residual when `laplace`) and,
    /// if asked, its gradient with respect to the centre (`diag`) and each
    /// neighbour (`off`, aligned with `offsets`).
    fn local(&self, u: &[f64], i: usize, laplace: bool, jac: Option<(&mut f64, &mut [f64])>) -> f64 {
        let nb = self.neighbours(i);
        let c = u[self.unknowns[i]];
        let second = |w: &[f64]| -> f64 {
            w.iter().enumerate().map(|(kk, wk)| wk * (u[nb[2 * kk]] + u[nb[2 * kk + 1]] - 2.0 * c)).sum()
        };
        match (&self.members, laplace) {
            (Some(_), true) => {
                let w = &self.laplace;
                if let Some((diag, off)) = jac {
                    *diag = 2.0 * w.iter().sum::<f64>();
                    for (kk, wk) in w.iter().enumerate() {
                        off[2 * kk] = -wk;
                        off[2 * kk + 1] = -wk;
                    }
                }
                -second(w)
            }
            (Some(mem), false) => {
                let vals: Vec<f64> = mem.weights.iter().zip(&mem.offsets).map(|(w, b)| b - second(w)).collect();
                let (value, omega) = match mem.combine {
                    Combine::InfSup => {
                        let (v, j) = hard_infsup(&vals, mem.n_inf, mem.n_sup);
                        let mut w = vec![0.0; vals.len()];
                        w[j] = 1.0;
                        (v, w)
                    }
                    Combine::Soft(tau) => soft_infsup(&vals, mem.n_inf, mem.n_sup, tau),
                };
                if let Some((diag, off)) = jac {
                    *diag = 0.0;
                    off.iter_mut().for_each(|v| *v = 0.0);
                    for (w, &om) in mem.weights.iter().zip(&omega) {
                        if om == 0.0 {
                            continue;
                        }
                        for (kk, wk) in w.iter().enumerate() {
                            *diag += 2.0 * om * wk;
                            off[2 * kk] -= om * wk;
                            off[2 * kk + 1] -= om * wk;
                        }
                    }
                }
                value
            }
            (None, _) => {
                let hess = self.hessian(u, i);
                let d = self.grid.dim();
                let (value, df) = if laplace {
                    (-hess.trace(), -SymMat::identity(d))
                } else if jac.is_some() {
                    let df = self.op.derivative_or_fd(&hess, 1e-6).expect("smoothness checked at construction");
                    (self.op.eval(&hess), df)
                } else {
                    (self.op.eval(&hess), SymMat::zeros(d))
                };
                if let Some((diag, off)) = jac {
                    hessian_jacobian(&df, self.grid.h(), diag, off);
                }
                value
            }
        }
    }

    fn hessian(&self, u: &[f64], i: usize) -> SymMat {
        let d = self.grid.dim();
        let nb = self.neighbours(i);
        let c = u[self.unknowns[i]];
        let h2 = self.grid.h() * self.grid.h();
        let mut m = SymMat::zeros(d);
        let mut at = 2 * d;
        for a in 0..d {
            m.set(a, a, (u[nb[2 * a]] - 2.0 * c + u[nb[2 * a + 1]]) / h2);
            for b in a + 1..d {
                let (pp, pm, mp, mm) = (u[nb[at]], u[nb[at + 1]], u[nb[at + 2]], u[nb[at + 3]]);
                m.set(a, b, (pp - pm - mp + mm) / (4.0 * h2));
                at += 4;
            }
        }
        m
    }

    /// Dirichlet values on the Dirichlet nodes, `fill` elsewhere.
    fn with_data(&self, fill: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..self.grid.len())
            .map(|k| {
                if self.dirichlet[k] {
                    self.boundary.at(k)
                } else if self.grid.in_domain(k) {
                    fill(k)
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn residual_vec(&self, u: &[f64], laplace: bool) -> Vec<f64> {
        (0..self.unknowns.len()).map(|i| self.local(u, i, laplace, None)).collect()
    }

    /// One Newton step `J δ = −F`; returns `δ` on the unknowns.
    fn newton_direction(&self, u: &[f64], laplace: bool) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.unknowns.len();
        let m = self.offsets.len();
        let (mut lower, mut upper) = (0usize, 0usize);
        for i in 0..n {
            for &k in self.neighbours(i) {
                let p = self.pos[k];
                if p != u32::MAX {
                    let p = p as usize;
                    if p < i {
                        lower = lower.max(i - p);
                    } else {
                        upper = upper.max(p - i);
                    }
                }
            }
        }
        let mut mat = Banded::zeros(n, lower, upper);
        let mut f = vec![0.0; n];
        let mut off = vec![0.0; m];
        for i in 0..n {
            let mut diag = 0.0;
            f[i] = self.local(u, i, laplace, Some((&mut diag, &mut off)));
            mat.add(i, i, diag);
            for (&k, &c) in self.neighbours(i).iter().zip(&off) {
                let p = self.pos[k];
                if p != u32::MAX && c != 0.0 {
                    mat.add(i, p as usize, c);
                }
            }
        }
        let mut rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        mat.solve(&mut rhs)?;
        Ok((rhs, f))
    }

    /// Harmonic extension of the boundary data (one linear solve with
    /// `A = I`).
    pub fn harmonic_extension(&self) -> Result<GridFn> {
        let mut u = self.with_data(|_| 0.0);
        let (delta, _) = self.newton_direction(&u, true)?;
        for (i, &k) in self.unknowns.iter().enumerate() {
            u[k] += delta[i];
        }
        GridFn::from_values(&self.grid, u)
    }
}

fn hessian_offsets(d: usize) -> Vec<Vec<isize>> {
    let unit = |a: usize, s: isize| {
        let mut e = vec![0isize; d];
        e[a] = s;
        e
    };
    let mut out = Vec::new();
    for a in 0..d {
        out.push(unit(a, 1));
        out.push(unit(a, -1));
    }
    for a in 0..d {
        for b in a + 1..d {
            for (s, t) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let mut e = vec![0isize; d];
                e[a] = s;
                e[b] = t;
                out.push(e);
            }
        }
    }
    out
}

/// Gradient of `F(H)` with respect to the stencil values, given `DF`.
fn hessian_jacobian(df: &SymMat, h: f64, diag: &mut f64, off: &mut [f64]) {
    let d = df.dim();
    let h2 = h * h;
    *diag = 0.0;
    off.iter_mut().for_each(|v| *v = 0.0);
    let mut at = 2 * d;
    for a in 0..d {
        let w = df.get(a, a) / h2;
        off[2 * a] += w;
        off[2 * a + 1] += w;
        *diag -= 2.0 * w;
        for b in a + 1..d {
            // Off-diagonal entries count twice in the Frobenius pairing.
            let w = 2.0 * df.get(a, b) / (4.0 * h2);
            off[at] += w;
            off[at + 1] -= w;
            off[at + 2] -= w;
            off[at + 3] += w;
            at += 4;
        }
    }
}

/// `F_h[u]` at every node: the scheme residual on unknowns, 0 elsewhere.
/// Dirichlet values of `u` are used as given.
pub fn discretize(p: &DiscreteProblem, u: &GridFn) -> Result<GridFn> {
    ensure(u.grid() == &p.grid, || "function lives on a different grid".into())?;
    let r = p.residual_vec(u.values(), false);
    let mut out = vec![0.0; p.grid.len()];
    for (i, &k) in p.unknowns.iter().enumerate() {
        out[k] = r[i];
    }
    GridFn::from_values(&p.grid, out)
}

#[derive(Clone, Debug, Serialize)]
pub struct Solution {
    #[serde(skip)]
    pub u: GridFn,
    /// `‖F_h[u]‖_∞` before each iteration and after the last.
    pub history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Iteration actually used for the final steps (`newton`, `euler`).
    pub method: String,
    /// Steps after the first two at which the residual grew.
    pub history_violations: usize,
    pub tau: Option<f64>,
}

impl Solution {
    pub fn residual(&self) -> f64 {
        *self.history.last().unwrap_or(&f64::NAN)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| if x.is_nan() { f64::NAN } else { a.max(x.abs()) })
}

/// Newton iterations with at most this many non-decreasing steps before
/// falling back to explicit Euler.
const NEWTON_STALLS: usize = 5;

/// Solves `F_h[u] = 0` from the harmonic extension of the boundary data.
/// Exceeding `max_iters` returns a solution flagged non-converged; a NaN
/// residual is a divergence error.
pub fn solve_dirichlet(p: &DiscreteProblem, tol: f64, max_iters: usize, iteration: Iteration) -> Result<Solution> {
    ensure(tol > 0.0, || "tolerance must be positive".into())?;
    let mut u = p.harmonic_extension()?.values().to_vec();
    let mut res = sup(&p.residual_vec(&u, false));
    let mut history = vec![res];
    let mut method = match iteration {
        Iteration::Newton => "newton",
        Iteration::Euler { .. } => "euler",
    };
    let mut tau = match iteration {
        Iteration::Euler { cfl } => {
            ensure(cfl > 0.0 && cfl.is_finite(), || format!("cfl must be positive, got {cfl}"))?;
            Some(cfl * p.tau_max)
        }
        Iteration::Newton => None,
    };
    let mut stalls = 0;
    let mut iterations = 0;
    while res > tol && iterations < max_iters {
        iterations += 1;
        if method == "newton" {
            let (delta, _) = p.newton_direction(&u, false)?;
            let mut step = 1.0;
            let mut accepted = None;
            while step >= 1.0 / 16.0 {
                let mut trial = u.clone();
                for (i, &k) in p.unknowns.iter().enumerate() {
                    trial[k] += step * delta[i];
                }
                let r = sup(&p.residual_vec(&trial, false));
                if r < res {
                    accepted = Some((trial, r));
                    break;
                }
                step *= 0.5;
            }
            let (next, r) = match accepted {
                Some(x) => x,
                None => {
                    stalls += 1;
                    let mut trial = u.clone();
                    for (i, &k) in p.unknowns.iter().enumerate() {
                        trial[k] += delta[i];
                    }
                    let r = sup(&p.residual_vec(&trial, false));
                    (trial, r)
                }
            };
            u = next;
            res = r;
            if stalls >= NEWTON_STALLS {
                method = "euler";
                tau = Some(CFL_SAFETY * p.tau_max);
            }
        } else {
            let t = tau.expect("euler step set");
            let f = p.residual_vec(&u, false);
            for (i, &k) in p.unknowns.iter().enumerate() {
                u[k] -= t * f[i];
            }
            res = sup(&p.residual_vec(&u, false));
        }
        if !res.is_finite() {
            return Err(Error::numerical(format!(
                "residual became {res} after {iterations} iterations (divergence; cfl above 1 violates monotonicity)"
            )));
        }
        history.push(res);
    }
    let history_violations = history.windows(2).skip(2).filter(|w| w[1] > w[0]).count();
    Ok(Solution {
        u: GridFn::from_values(&p.grid, u)?,
        converged: res <= tol,
        history,
        iterations,
        method: method.to_string(),
        history_violations,
        tau,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub holds: bool,
    /// `min (u₂ − u₁)` over in-domain nodes.
    pub min_gap: f64,
    pub residuals: (f64, f64),
}

/// Solves with boundary data `g1 ≤ g2` and checks `u₁ ≤ u₂ + 10·tol`.
pub fn comparison_check(
    p: &DiscreteProblem,
    g1: &GridFn,
    g2: &GridFn,
    tol: f64,
    max_iters: usize,
    iteration: Iteration,
) -> Result<ComparisonReport> {
    for k in p.grid.domain_nodes() {
        if p.dirichlet[k] {
            ensure(g1.at(k) <= g2.at(k), || format!("boundary data not ordered at node {:?}", p.grid.coords(k)))?;
        }
    }
    let s1 = solve_dirichlet(&p.with_boundary(g1.clone())?, tol, max_iters, iteration)?;
    let s2 = solve_dirichlet(&p.with_boundary(g2.clone())?, tol, max_iters, iteration)?;
    for s in [&s1, &s2] {
        if !s.converged {
            return Err(Error::NotConverged { iterations: s.iterations, residual: s.residual() });
        }
    }
    let min_gap = p.grid.domain_nodes().into_iter().map(|k| s2.u.at(k) - s1.u.at(k)).fold(f64::INFINITY, f64::min);
    Ok(ComparisonReport { holds: min_gap >= -10.0 * tol, min_gap, residuals: (s1.residual(), s2.residual()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;
    use crate::operators::sample_family_2d;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn ell() -> Ellipticity {
        Ellipticity::new(1.0, 2.0).unwrap()
    }

    fn data(n: usize, f: impl Fn(&[f64]) -> f64) -> GridFn {
        GridFn::sample(&Grid::ball(2, n, 1.0).unwrap(), f).unwrap()
    }

    #[test]
    fn second_differences() {
        let u = data(8, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let c = u.grid().center();
        assert!((second_diff(&u, &[1, 0], c).unwrap() - 1.0).abs() < 1e-12);
        let v = data(8, |x| 0.5 * x[0] * x[0]);
        assert!((second_diff(&v, &[1, 1], c).unwrap() - 0.5).abs() < 1e-12);
        let w = data(8, |x| 3.0 * x[0] - x[1] + 2.0);
        assert!(second_diff(&w, &[2, 1], c).unwrap().abs() < 1e-12);
        assert!(second_diff(&w, &[1, 0], 0).is_err());
    }

    #[test]
    fn harmonic_quadratic_is_exact() {
        let g = data(16, |x| x[0] * x[0] - x[1] * x[1]);
        let p = DiscreteProblem::new(Operator::laplacian(2), g.clone(), None, Scheme::MonotoneFrames).unwrap();
        let s = solve_dirichlet(&p, 1e-10, 20, Iteration::Newton).unwrap();
        assert!(s.converged);
        for k in g.grid().domain_nodes() {
            assert!((s.u.at(k) - g.at(k)).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = data(12, |_| 0.0);
        for op in
            [Operator::pucci_plus(2, ell()), Operator::isaacs_smoothed(sample_family_2d(ell()), ell(), 0.1).unwrap()]
        {
            let p = DiscreteProblem::new(op, g.clone(), None, Scheme::MonotoneFrames).unwrap();
            let s = solve_dirichlet(&p, 1e-10, 50, Iteration::Newton).unwrap();
            assert!(s.converged && s.u.sup_abs() < 1e-12);
        }
    }

    #[test]
    fn quadratics_have_exact_residual() {
        // F(Q) for the sampled quadratic ½xᵀQx, with exact frame fits.
        let q = SymMat::from_rows(&[vec![1.0, 0.3], vec![0.3, -0.5]]).unwrap();
        let u = data(12, |x| 0.5 * q.quad_form(x));
        let op = Operator::isaacs_exact(sample_family_2d(ell()), ell()).unwrap();
        let p = DiscreteProblem::new(op.clone(), u.clone(), None, Scheme::MonotoneFrames).unwrap();
        let r = discretize(&p, &u).unwrap();
        for &k in p.unknowns() {
            assert!((r.at(k) - op.eval(&q)).abs() < 1e-9);
        }
        assert!(p.fit_residual < 1e-10);
    }

    #[test]
    fn euler_agrees_with_newton() {
        let g = data(8, |x| (2.0 * x[0]).sin() + x[1] * x[1]);
        let p = DiscreteProblem::new(Operator::pucci_plus(2, ell()), g, None, Scheme::MonotoneFrames).unwrap();
        let a = solve_dirichlet(&p, 1e-9, 50, Iteration::Newton).unwrap();
        let b = solve_dirichlet(&p, 1e-9, 200_000, Iteration::Euler { cfl: CFL_SAFETY }).unwrap();
        assert!(a.converged && b.converged, "{} {}", a.residual(), b.residual());
        for k in p.unknowns() {
            assert!((a.u.at(*k) - b.u.at(*k)).abs() < 1e-8);
        }
        assert_eq!(b.method, "euler");
        assert!(b.history_violations == 0);
    }

    #[test]
    fn euler_step_too_large_diverges() {
        let g = data(8, |x| x[0].exp() * x[1]);
        let p = DiscreteProblem::new(Operator::pucci_plus(2, ell()), g, None, Scheme::MonotoneFrames).unwrap();
        assert!(solve_dirichlet(&p, 1e-9, 100_000, Iteration::Euler { cfl: 3.0 }).is_err());
        let s = solve_dirichlet(&p, 1e-9, 3, Iteration::Euler { cfl: 0.9 }).unwrap();
        assert!(!s.converged && s.iterations == 3);
    }

    #[test]
    fn fd_hessian_path_for_smooth_operators() {
        let op = Operator::isaacs_smoothed(sample_family_2d(ell()), ell(), 0.2).unwrap();
        let g = data(16, |x| x[0] * x[1] + 0.3 * x[0]);
        let p = DiscreteProblem::new(op.clone(), g.clone(), None, Scheme::FdHessian).unwrap();
        let s = solve_dirichlet(&p, 1e-9, 50, Iteration::Newton).unwrap();
        assert!(s.converged, "{:?}", s.history);
        let mono = DiscreteProblem::new(op, g, None, Scheme::MonotoneFrames).unwrap();
        let t = solve_dirichlet(&mono, 1e-9, 50, Iteration::Newton).unwrap();
        // Different schemes, same continuum problem.
        let c = p.grid().center();
        assert!((s.u.at(c) - t.u.at(c)).abs() < 0.05);
        assert!(
            DiscreteProblem::new(Operator::pucci_plus(2, ell()), data(8, |_| 0.0), None, Scheme::FdHessian).is_err()
        );
    }

    #[test]
    fn constants_shift_solutions() {
        let g1 = data(12, |x| (3.0 * x[0]).cos() * x[1]);
        let g2 = g1.map(|v| v + 1.0);
        let p =
            DiscreteProblem::new(Operator::pucci_minus(2, ell()), g1.clone(), None, Scheme::MonotoneFrames).unwrap();
        let rep = comparison_check(&p, &g1, &g2, 1e-10, 50, Iteration::Newton).unwrap();
        assert!(rep.holds && (rep.min_gap - 1.0).abs() < 1e-8);
        assert!(comparison_check(&p, &g2, &g1, 1e-10, 50, Iteration::Newton).is_err());
    }

    #[test]
    fn affine_data_is_invariant() {
        let g = data(12, |x| x[0] * x[0] * x[1]);
        let ga = data(12, |x| x[0] * x[0] * x[1] + 2.0 * x[0] - x[1] + 0.5);
        let op = Operator::pucci_plus(2, ell());
        let p = DiscreteProblem::new(op, g.clone(), None, Scheme::MonotoneFrames).unwrap();
        let a = solve_dirichlet(&p, 1e-10, 50, Iteration::Newton).unwrap();
        let b = solve_dirichlet(&p.with_boundary(ga).unwrap(), 1e-10, 50, Iteration::Newton).unwrap();
        for k in g.grid().domain_nodes() {
            let x = g.grid().coords(k);
            assert!((b.u.at(k) - a.u.at(k) - (2.0 * x[0] - x[1] + 0.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn custom_operators_need_fd_scheme() {
        let op = Operator::custom("c", 2, ell(), true, |m: &SymMat| -m.trace());
        assert!(DiscreteProblem::new(op, data(8, |_| 0.0), None, Scheme::MonotoneFrames).is_err());
    }

    #[test]
    fn three_dimensional_pucci() {
        let g = GridFn::sample(&Grid::new(3, 6, 1.0, Domain::Ball { radius: 1.0 }).unwrap(), |x| x[0] * x[1] - x[2])
            .unwrap();
        let p = DiscreteProblem::new(Operator::pucci_plus(3, ell()), g, None, Scheme::MonotoneFrames).unwrap();
        let s = solve_dirichlet(&p, 1e-9, 50, Iteration::Newton).unwrap();
        assert!(s.converged);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn discrete_degenerate_ellipticity(seed in 0u64..10_000, which in 0usize..3) {
            let op = match which {
                0 => Operator::pucci_plus(2, ell()),
                1 => Operator::isaacs_exact(sample_family_2d(ell()), ell()).unwrap(),
                _ => Operator::isaacs_smoothed(sample_family_2d(ell()), ell(), 0.05).unwrap(),
            };
            let mut r = rng::stream(seed, 11);
            let grid = Grid::ball(2, 6, 1.0).unwrap();
            let vals: Vec<f64> = (0..grid.len()).map(|_| r.random_range(-1.0..1.0)).collect();
            let u = GridFn::from_values(&grid, vals).unwrap();
            let p = DiscreteProblem::new(op, u.clone(), None, Scheme::MonotoneFrames).unwrap();
            let i = r.random_range(0..p.unknowns().len());
            let base = p.local(u.values(), i, false, None);
            for &k in p.neighbours(i) {
                let mut v = u.values().to_vec();
                v[k] += r.random_range(0.0..1.0);
                prop_assert!(p.local(&v, i, false, None) <= base + 1e-12);
            }
        }
    }
}
