//! Curvature fields from one-sided paraboloid contact.
//!
//! For a grid function `u` on a domain `Ω` and a node `x`:
//!
//! * `Θ̲(x)` is the least `A ≥ 0` for which some slope `p` gives
//!   `u(y) ≥ u(x) + p·(x − y) − ½A|x − y|²` at every domain node `y`;
//! * `Θ̄(x) = Θ̲(−u)(x)` and `Θ = max(Θ̲, Θ̄)`;
//! * `Ψ(x)` is the least `A` for which some `p` and symmetric `M` give
//!   `|u(y) − u(x) + p·(x − y) + (x − y)·M(x − y)| ≤ A|x − y|³/6`.
//!
//! Each is a small LP (unknowns `(p, A)` or `(p, M, A)`) with one or two
//! constraints per domain node, solved exactly by the cutting-plane driver in
//! [`lp`]. Values above the cap are reported as `+∞`.

pub mod lp;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Result};
use crate::grid::{fd_gradient, Grid, GridFn, NodeCloud};
use crate::rng;
use lp::{cutting_plane, RowSource, SLACK};

/// Default cap on curvature values.
pub const DEFAULT_CAP: f64 = 1e6;

/// Seed for the LP shuffles; results do not depend on it beyond rounding.
const LP_SEED: u64 = 0x7e7a;

/// Chebyshev radius of the initial working set around `x`.
const SEED_RADIUS: isize = 2;

/// Constraint rows of the `Θ̲` LP at one node, optionally with `A` fixed.
struct ThetaRows<'a> {
    cloud: &'a NodeCloud,
    x: Vec<f64>,
    ux: f64,
    fixed_a: Option<f64>,
}

impl ThetaRows<'_> {
    fn dim(&self) -> usize {
        self.cloud.dim
    }
}

impl RowSource for ThetaRows<'_> {
    fn n_vars(&self) -> usize {
        self.dim() + usize::from(self.fixed_a.is_none())
    }

    /// `((x − y)/ρ², −½)·(p, A) ≤ (u(y) − u(x))/ρ²`.
    fn row(&self, i: usize, out: &mut [f64]) -> f64 {
        let d = self.dim();
        let mut r2 = 0.0;
        for a in 0..d {
            let dy = self.cloud.coords[a][i] - self.x[a];
            out[a] = -dy;
            r2 += dy * dy;
        }
        for v in &mut out[..d] {
            *v /= r2;
        }
        let rhs = (self.cloud.values[i] - self.ux) / r2;
        match self.fixed_a {
            None => {
                out[d] = -0.5;
                rhs
            }
            Some(a) => rhs + 0.5 * a,
        }
    }

    fn violations(&self, z: &[f64], out: &mut Vec<(f64, usize)>) {
        let d = self.dim();
        let half_a = 0.5 * self.fixed_a.unwrap_or_else(|| z[d]);
        let vals = &self.cloud.values;
        let ux = self.ux;
        if d == 2 {
            let (cx, cy) = (&self.cloud.coords[0], &self.cloud.coords[1]);
            let (x0, x1, p0, p1) = (self.x[0], self.x[1], z[0], z[1]);
            for i in 0..vals.len() {
                let (d0, d1) = (cx[i] - x0, cy[i] - x1);
                let r2 = d0 * d0 + d1 * d1;
                let lin = -(d0 * p0 + d1 * p1);
                let rel = vals[i] - ux;
                let lhs = lin - half_a * r2 - rel;
                if lhs > 0.0 {
                    let mag = lin.abs() + half_a.abs() * r2 + rel.abs();
                    if lhs > SLACK * (r2 + mag) {
                        out.push((lhs / r2, i));
                    }
                }
            }
            return;
        }
        for i in 0..vals.len() {
            let mut r2 = 0.0;
            let mut lin = 0.0;
            for a in 0..d {
                let dy = self.cloud.coords[a][i] - self.x[a];
                r2 += dy * dy;
                lin -= dy * z[a];
            }
            let rel = vals[i] - ux;
            let lhs = lin - half_a * r2 - rel;
            if lhs > 0.0 {
                let mag = lin.abs() + half_a.abs() * r2 + rel.abs();
                if lhs > SLACK * (r2 + mag) {
                    out.push((lhs / r2, i));
                }
            }
        }
    }
}

/// Constraint rows of the `Ψ` LP: rows `2i` (upper) and `2i + 1` (lower) for
/// cloud point `i`. Unknowns are `(p, M packed, A)`.
struct PsiRows<'a> {
    cloud: &'a NodeCloud,
    x: Vec<f64>,
    ux: f64,
    fixed_a: Option<f64>,
}

fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

impl PsiRows<'_> {
    fn dim(&self) -> usize {
        self.cloud.dim
    }
}

impl RowSource for PsiRows<'_> {
    fn n_vars(&self) -> usize {
        let d = self.dim();
        d + packed_len(d) + usize::from(self.fixed_a.is_none())
    }

    fn row(&self, i: usize, out: &mut [f64]) -> f64 {
        let d = self.dim();
        let pt = i / 2;
        let sign = if i.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut delta = [0.0; crate::symmat::MAX_DIM];
        let mut r2 = 0.0;
        for a in 0..d {
            delta[a] = self.cloud.coords[a][pt] - self.x[a];
            r2 += delta[a] * delta[a];
        }
        let w = 6.0 / (r2 * r2.sqrt());
        // sign·s ≤ Aρ³/6 with s = r − p·δ + δᵀMδ.
        for a in 0..d {
            out[a] = -sign * delta[a] * w;
        }
        let mut t = d;
        for a in 0..d {
            for b in a..d {
                let f = if a == b { 1.0 } else { 2.0 };
                out[t] = sign * f * delta[a] * delta[b] * w;
                t += 1;
            }
        }
        let rel = self.cloud.values[pt] - self.ux;
        match self.fixed_a {
            None => {
                out[t] = -1.0;
                -sign * rel * w
            }
            Some(a) => -sign * rel * w + a,
        }
    }

    fn violations(&self, z: &[f64], out: &mut Vec<(f64, usize)>) {
        let d = self.dim();
        let nm = packed_len(d);
        let a_val = self.fixed_a.unwrap_or_else(|| z[d + nm]);
        let vals = &self.cloud.values;
        if d == 2 {
            let (cx, cy) = (&self.cloud.coords[0], &self.cloud.coords[1]);
            let (x0, x1) = (self.x[0], self.x[1]);
            let (p0, p1, m00, m01, m11) = (z[0], z[1], z[2], z[3], z[4]);
            let sixth = a_val / 6.0;
            for i in 0..vals.len() {
                let (d0, d1) = (cx[i] - x0, cy[i] - x1);
                let r2 = d0 * d0 + d1 * d1;
                let r3 = r2 * r2.sqrt();
                let rel = vals[i] - self.ux;
                let lin = d0 * p0 + d1 * p1;
                let quad = m00 * d0 * d0 + 2.0 * m01 * d0 * d1 + m11 * d1 * d1;
                let s = rel - lin + quad;
                let lhs = s.abs() - sixth * r3;
                if lhs > 0.0 {
                    let mag = rel.abs() + lin.abs() + quad.abs() + sixth.abs() * r3;
                    if lhs > SLACK * (r3 + mag) {
                        let idx = if s > 0.0 { 2 * i } else { 2 * i + 1 };
                        out.push((6.0 * lhs / r3, idx));
                    }
                }
            }
            return;
        }
        let mut delta = [0.0; crate::symmat::MAX_DIM];
        for i in 0..vals.len() {
            let mut r2 = 0.0;
            let mut lin = 0.0;
            for a in 0..d {
                delta[a] = self.cloud.coords[a][i] - self.x[a];
                r2 += delta[a] * delta[a];
                lin += delta[a] * z[a];
            }
            if r2 == 0.0 {
                continue;
            }
            let mut quad = 0.0;
            let mut t = d;
            for a in 0..d {
                for b in a..d {
                    let f = if a == b { 1.0 } else { 2.0 };
                    quad += f * z[t] * delta[a] * delta[b];
                    t += 1;
                }
            }
            let r3 = r2 * r2.sqrt();
            let rel = vals[i] - self.ux;
            let s = rel - lin + quad;
            let lhs = s.abs() - a_val / 6.0 * r3;
            if lhs > 0.0 {
                let mag = rel.abs() + lin.abs() + quad.abs() + (a_val / 6.0).abs() * r3;
                if lhs > SLACK * (r3 + mag) {
                    let idx = if s > 0.0 { 2 * i } else { 2 * i + 1 };
                    out.push((6.0 * lhs / r3, idx));
                }
            }
        }
    }
}

/// Shared per-function state for the node LPs.
pub struct ContactProblem {
    grid: Grid,
    cloud: NodeCloud,
    offsets: Vec<Vec<isize>>,
}

impl ContactProblem {
    /// Constraints range over every domain node of `u`.
    pub fn new(u: &GridFn) -> Self {
        ContactProblem {
            grid: u.grid().clone(),
            cloud: NodeCloud::of_domain(u),
            offsets: u.grid().offsets(SEED_RADIUS),
        }
    }

    fn position(&self, k: usize) -> usize {
        let p = self.cloud.position[k];
        assert!(p != u32::MAX, "node {k} is outside the domain");
        p as usize
    }

    fn theta_rows(&self, k: usize, fixed_a: Option<f64>) -> ThetaRows<'_> {
        let p = self.position(k);
        ThetaRows { cloud: &self.cloud, x: self.cloud.point(p), ux: self.cloud.values[p], fixed_a }
    }

    fn psi_rows(&self, k: usize, fixed_a: Option<f64>) -> PsiRows<'_> {
        let p = self.position(k);
        PsiRows { cloud: &self.cloud, x: self.cloud.point(p), ux: self.cloud.values[p], fixed_a }
    }

    fn seeds(&self, k: usize) -> Vec<usize> {
        self.cloud.neighbours(&self.grid, k, &self.offsets)
    }

    /// `Θ̲(x_k)`, or `+∞` above `cap`.
    pub fn theta_lower_at(&self, k: usize, cap: f64) -> f64 {
        let rows = self.theta_rows(k, None);
        let d = self.grid.dim();
        let mut fixed = vec![0.0; d + 2];
        fixed[d] = -1.0; // A ≥ 0
        let mut c = vec![0.0; d + 1];
        c[d] = -1.0;
        let mut rng = rng::stream(LP_SEED, k as u64);
        let z = cutting_plane(&rows, &c, &fixed, &self.seeds(k), &mut rng);
        capped(z.map(|z| z[d]), cap)
    }

    /// Whether some slope certifies `Θ̲(x_k) ≤ a`.
    pub fn theta_lower_feasible(&self, k: usize, a: f64) -> bool {
        let rows = self.theta_rows(k, Some(a));
        let d = self.grid.dim();
        let mut rng = rng::stream(LP_SEED, k as u64);
        cutting_plane(&rows, &vec![0.0; d], &[], &self.seeds(k), &mut rng).is_some()
    }

    /// `Ψ(x_k)`, or `+∞` above `cap`.
    pub fn psi_at(&self, k: usize, cap: f64) -> f64 {
        let rows = self.psi_rows(k, None);
        let n = rows.n_vars();
        let mut fixed = vec![0.0; n + 1];
        fixed[n - 1] = -1.0; // A ≥ 0
        let mut c = vec![0.0; n];
        c[n - 1] = -1.0;
        let init: Vec<usize> = self.seeds(k).into_iter().flat_map(|p| [2 * p, 2 * p + 1]).collect();
        let mut rng = rng::stream(LP_SEED ^ 0x5, k as u64);
        let z = cutting_plane(&rows, &c, &fixed, &init, &mut rng);
        capped(z.map(|z| z[n - 1]), cap)
    }

    /// Whether some `(p, M)` certifies `Ψ(x_k) ≤ a`.
    pub fn psi_feasible(&self, k: usize, a: f64) -> bool {
        let rows = self.psi_rows(k, Some(a));
        let n = rows.n_vars();
        let init: Vec<usize> = self.seeds(k).into_iter().flat_map(|p| [2 * p, 2 * p + 1]).collect();
        let mut rng = rng::stream(LP_SEED ^ 0x5, k as u64);
        cutting_plane(&rows, &vec![0.0; n], &[], &init, &mut rng).is_some()
    }
}

fn capped(value: Option<f64>, cap: f64) -> f64 {
    match value {
        Some(a) if a <= cap => a.max(0.0),
        _ => f64::INFINITY,
    }
}

/// `Θ̲(u, Ω)` at the given nodes (constraints over all domain nodes of `u`).
pub fn theta_lower(u: &GridFn, nodes: &[usize], cap: f64) -> Vec<f64> {
    let prob = ContactProblem::new(u);
    nodes.par_iter().map(|&k| prob.theta_lower_at(k, cap)).collect()
}

/// `Θ̄(u, Ω) = Θ̲(−u, Ω)`.
pub fn theta_upper(u: &GridFn, nodes: &[usize], cap: f64) -> Vec<f64> {
    theta_lower(&u.map(|v| -v), nodes, cap)
}

/// `Θ(u, Ω) = max(Θ̲, Θ̄)`.
pub fn theta(u: &GridFn, nodes: &[usize], cap: f64) -> Vec<f64> {
    let lo = theta_lower(u, nodes, cap);
    let hi = theta_upper(u, nodes, cap);
    lo.into_iter().zip(hi).map(|(a, b)| a.max(b)).collect()
}

/// `Ψ(u, Ω)` at the given nodes.
pub fn psi(u: &GridFn, nodes: &[usize], cap: f64) -> Vec<f64> {
    let prob = ContactProblem::new(u);
    nodes.par_iter().map(|&k| prob.psi_at(k, cap)).collect()
}

/// `sqrt(Σ_i Θ(∂_i u)²)` with discrete partial derivatives: the gradient
/// bound on `Ψ`.
pub fn psi_bound_via_gradient(u: &GridFn, nodes: &[usize], cap: f64) -> Result<Vec<f64>> {
    let grads = fd_gradient(u)?;
    let mut acc = vec![0.0; nodes.len()];
    for g in &grads {
        for (s, t) in acc.iter_mut().zip(theta(g, nodes, cap)) {
            *s += t * t;
        }
    }
    Ok(acc.into_iter().map(f64::sqrt).collect())
}

/// Bisection on `A` with the feasibility LP as oracle; must agree with
/// [`ContactProblem::theta_lower_at`] to within `tol`.
pub fn theta_lower_bisect(prob: &ContactProblem, k: usize, cap: f64, tol: f64) -> f64 {
    bisect(|a| prob.theta_lower_feasible(k, a), cap, tol)
}

/// Bisection counterpart of [`ContactProblem::psi_at`].
pub fn psi_bisect(prob: &ContactProblem, k: usize, cap: f64, tol: f64) -> f64 {
    bisect(|a| prob.psi_feasible(k, a), cap, tol)
}

fn bisect(mut feasible: impl FnMut(f64) -> bool, cap: f64, tol: f64) -> f64 {
    if feasible(0.0) {
        return 0.0;
    }
    if !feasible(cap) {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Curvature fields on the inner nodes `{|x| ≤ inner_radius}`, with
/// constraints over the whole domain.
#[derive(Clone, Debug)]
pub struct CurvatureField {
    grid: Grid,
    pub inner_radius: f64,
    pub cap: f64,
    pub inner: Vec<usize>,
    pub theta_lower: Vec<f64>,
    pub theta_upper: Vec<f64>,
    pub psi: Option<Vec<f64>>,
}

/// Which fields to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FieldSet {
    pub theta_lower: bool,
    pub theta_upper: bool,
    pub psi: bool,
}

impl FieldSet {
    pub const ALL: FieldSet = FieldSet { theta_lower: true, theta_upper: true, psi: true };
    pub const THETA: FieldSet = FieldSet { theta_lower: true, theta_upper: true, psi: false };
    pub const LOWER: FieldSet = FieldSet { theta_lower: true, theta_upper: false, psi: false };
}

pub fn curvature_field(u: &GridFn, inner_radius: f64, cap: f64, which: FieldSet) -> Result<CurvatureField> {
    ensure(inner_radius > 0.0, || "inner radius must be positive".into())?;
    ensure(cap > 0.0, || "cap must be positive".into())?;
    let inner = u.grid().nodes_within(inner_radius);
    ensure(!inner.is_empty(), || "no grid nodes inside the inner region".into())?;
    let nan = || vec![f64::NAN; inner.len()];
    let theta_lower = if which.theta_lower { theta_lower(u, &inner, cap) } else { nan() };
    let theta_upper = if which.theta_upper { theta_upper(u, &inner, cap) } else { nan() };
    let psi = which.psi.then(|| psi(u, &inner, cap));
    Ok(CurvatureField { grid: u.grid().clone(), inner_radius, cap, inner, theta_lower, theta_upper, psi })
}

impl CurvatureField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `max(Θ̲, Θ̄)` (NaN where either half was not computed).
    pub fn theta(&self) -> Vec<f64> {
        self.theta_lower
            .iter()
            .zip(&self.theta_upper)
            .map(|(&a, &b)| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
            .collect()
    }

    /// Columns `i.., x.., theta_lower, theta_upper, theta, psi`; capped values
    /// print as `inf`, fields not computed are left empty.
    pub fn to_csv(&self) -> String {
        let d = self.grid.dim();
        let mut s = String::new();
        for a in 1..=d {
            let _ = write!(s, "i{a},");
        }
        for a in 1..=d {
            let _ = write!(s, "x{a},");
        }
        s.push_str("theta_lower,theta_upper,theta,psi\n");
        let theta = self.theta();
        let cell = |v: f64| if v.is_nan() { String::new() } else { format!("{v:?}") };
        for (j, &k) in self.inner.iter().enumerate() {
            for i in self.grid.indices(k) {
                let _ = write!(s, "{i},");
            }
            for x in self.grid.coords(k) {
                let _ = write!(s, "{x:?},");
            }
            let psi = self.psi.as_ref().map_or(f64::NAN, |p| p[j]);
            let _ = writeln!(
                s,
                "{},{},{},{}",
                cell(self.theta_lower[j]),
                cell(self.theta_upper[j]),
                cell(theta[j]),
                cell(psi)
            );
        }
        s
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        Ok(())
    }
}
