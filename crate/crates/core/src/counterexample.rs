//! The radial bump family showing that the integrability exponent of `Θ̲`
//! cannot exceed `2/(Λ/λ + 1)`.
//!
//! For `α, R > 0`,
//!
//! ```text
//! u(x) = R^{α+2}|x|^{−α} + (α/2)|x|² − (1 + α/2)R²   for 0 < |x| < R,
//! u(x) = 0                                           for |x| ≥ R,
//! ```
//!
//! is `C¹` away from the origin and satisfies `P⁺(D²u) ≥ −2Λα` whenever
//! `α ≤ Λ/λ − 1`. Clamping `(λ/(Λα))·u` at 1 and tiling with period `2R`
//! gives a bounded `v` whose `Θ̲` has `∫ Θ̲^ε` blowing up as `R → 0` for every
//! `ε > 2/(α+2)`.
//!
//! Only the first two coordinates enter; further coordinates are dummy
//! variables.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{tail_fit, TailFit};
use crate::contact::ContactProblem;
use crate::error::{ensure, Error, Result};
use crate::grid::{Domain, Grid, GridFn};
use crate::symmat::{pucci_from_eigs, Ellipticity};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CounterexampleParams {
    pub alpha: f64,
    pub radius: f64,
    pub ell: Ellipticity,
}

impl CounterexampleParams {
    pub fn new(alpha: f64, radius: f64, ell: Ellipticity) -> Result<Self> {
        ensure(alpha.is_finite() && alpha > 0.0, || format!("alpha must be positive, got {alpha}"))?;
        ensure(radius.is_finite() && radius > 0.0, || format!("R must be positive, got {radius}"))?;
        Ok(CounterexampleParams { alpha, radius, ell })
    }

    /// `0 < α ≤ Λ/λ − 1`, the range in which `P⁺(D²u) ≥ −2Λα`.
    pub fn check_admissible(&self) -> Result<()> {
        let top = self.ell.ratio() - 1.0;
        ensure(self.alpha <= top * (1.0 + 1e-12), || {
            format!(
                "the inequality P+(D²u) >= -2·Lambda·alpha requires 0 < alpha <= Lambda/lambda - 1 = {top}, got alpha = {}",
                self.alpha
            )
        })
    }

    /// `κ = λ/(Λα)`, the scaling applied before clamping at 1.
    pub fn kappa(&self) -> f64 {
        self.ell.lambda / (self.ell.big_lambda * self.alpha)
    }

    /// Radial profile `u(r)` for `r > 0`.
    pub fn profile(&self, r: f64) -> f64 {
        let (a, big_r) = (self.alpha, self.radius);
        if r >= big_r {
            return 0.0;
        }
        big_r.powf(a + 2.0) * r.powf(-a) + 0.5 * a * r * r - (1.0 + 0.5 * a) * big_r * big_r
    }

    /// `u'(r)`.
    pub fn profile_slope(&self, r: f64) -> f64 {
        let (a, big_r) = (self.alpha, self.radius);
        if r >= big_r {
            return 0.0;
        }
        -a * big_r.powf(a + 2.0) * r.powf(-a - 1.0) + a * r
    }
}

fn planar_radius(x: &[f64]) -> Result<f64> {
    ensure(x.len() >= 2, || "the bump family needs at least two coordinates".into())?;
    Ok(x[0].hypot(x[1]))
}

/// `u(x)`; the origin is singular.
pub fn counterexample_u(p: &CounterexampleParams, x: &[f64]) -> Result<f64> {
    let r = planar_radius(x)?;
    if r == 0.0 {
        return Err(Error::numerical("u is singular at the origin; exclude that node"));
    }
    Ok(p.profile(r))
}

/// Samples `u` on a grid. The node at the origin (if any) is singular; it is
/// filled with `u(h)` and its index returned so callers can exclude it.
pub fn sample_u(p: &CounterexampleParams, grid: &Grid) -> Result<(GridFn, Option<usize>)> {
    let fill = p.profile(grid.h());
    let mut origin = None;
    let mut values = vec![0.0; grid.len()];
    for (k, v) in values.iter_mut().enumerate() {
        if !grid.in_domain(k) {
            continue;
        }
        let x = grid.coords(k);
        let r = planar_radius(&x)?;
        if r == 0.0 {
            if x.iter().all(|&c| c == 0.0) {
                origin = Some(k);
            }
            *v = fill;
        } else {
            *v = p.profile(r);
        }
    }
    Ok((GridFn::from_values(grid, values)?, origin))
}

/// The two distinct Hessian eigenvalues at `0 < |x| < R`: the tangential
/// `e₋ = −α|x|^{−α−2}(R^{α+2} − |x|^{α+2})` and the radial
/// `e₊ = α|x|^{−α−2}(|x|^{α+2} + (α+1)R^{α+2})`.
pub fn hessian_eigs(p: &CounterexampleParams, x: &[f64]) -> Result<(f64, f64)> {
    let r = planar_radius(x)?;
    ensure(r > 0.0 && r < p.radius, || format!("|x| = {r} must lie in (0, R = {})", p.radius))?;
    Ok(eigs_at(p, r))
}

fn eigs_at(p: &CounterexampleParams, r: f64) -> (f64, f64) {
    let a = p.alpha;
    let ra = p.radius.powf(a + 2.0);
    let rr = r.powf(a + 2.0);
    let s = a * r.powf(-a - 2.0);
    (-s * (ra - rr), s * (rr + (a + 1.0) * ra))
}

/// `P⁺(D²u)` from the closed-form eigenvalues, with `d − 2` dummy zero
/// eigenvalues; 0 outside the bump.
pub fn pucci_plus_exact(p: &CounterexampleParams, r: f64, dim: usize) -> f64 {
    if r >= p.radius {
        return 0.0;
    }
    let (em, ep) = eigs_at(p, r);
    let mut eigs = vec![0.0; dim];
    eigs[0] = em;
    eigs[1] = ep;
    pucci_from_eigs(&eigs, p.ell.big_lambda, p.ell.lambda)
}

#[derive(Clone, Debug, Serialize)]
pub struct EpruneqReport {
    pub lower_bound: f64,
    /// `min (P⁺(D²u) + 2Λα)` over nodes with `0 < |x| < R`.
    pub min_margin: f64,
    /// Radius where the minimum margin occurs.
    pub argmin_radius: f64,
    pub nodes_inside: usize,
    pub nodes_outside: usize,
    pub violations: usize,
}

/// Checks `P⁺(D²u) ≥ −2Λα` at every in-domain node other than the origin.
/// Outside the bump `D²u = 0` and the margin is `2Λα`.
pub fn verify_epruneq(p: &CounterexampleParams, grid: &Grid) -> Result<EpruneqReport> {
    p.check_admissible()?;
    let bound = -2.0 * p.ell.big_lambda * p.alpha;
    let mut rep = EpruneqReport {
        lower_bound: bound,
        min_margin: f64::INFINITY,
        argmin_radius: f64::NAN,
        nodes_inside: 0,
        nodes_outside: 0,
        violations: 0,
    };
    for k in grid.domain_nodes() {
        let r = planar_radius(&grid.coords(k))?;
        if r == 0.0 {
            continue;
        }
        let margin = pucci_plus_exact(p, r, grid.dim()) - bound;
        if r < p.radius {
            rep.nodes_inside += 1;
        } else {
            rep.nodes_outside += 1;
        }
        if margin < rep.min_margin {
            rep.min_margin = margin;
            rep.argmin_radius = r;
        }
        if margin < 0.0 {
            rep.violations += 1;
        }
    }
    Ok(rep)
}

/// Radius `ρ_c < R` at which `κ·u(ρ_c) = 1`; inside it the clamp is active.
/// Found by bisection on the (decreasing) radial profile.
pub fn clamp_radius(p: &CounterexampleParams) -> f64 {
    let k = p.kappa();
    let (mut lo, mut hi) = (0.0, p.radius);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if k * p.profile(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `c` in `ρ_c = c·R^{(α+2)/α}`.
pub fn clamp_constant(p: &CounterexampleParams) -> f64 {
    clamp_radius(p) / p.radius.powf((p.alpha + 2.0) / p.alpha)
}

/// Lower bound `κα r^{−α−2}(R^{α+2} − r^{α+2})` on `Θ̲(v)` at distance
/// `ρ_c < r < R` from a lattice centre (from the tangential eigenvalue).
pub fn bump_bound(p: &CounterexampleParams, r: f64) -> f64 {
    if r >= p.radius {
        return 0.0;
    }
    -p.kappa() * eigs_at(p, r).0
}

/// `v(x) = −|x|² + Σ_y min(1, κ·u(x − c_y))` with centres `c_y = 2R·y + o`.
///
/// The bumps have disjoint supports, so only the nearest centre contributes.
/// `offset` is the lattice shift `o` along every axis; `None` uses `h/2`, so
/// no node sits on a centre. A node on a centre is an error.
pub fn counterexample_v(p: &CounterexampleParams, grid: &Grid, offset: Option<f64>) -> Result<GridFn> {
    let h = grid.h();
    let o = offset.unwrap_or(0.5 * h);
    let period = 2.0 * p.radius;
    ensure(period < 2.0 * grid.half_width(), || {
        format!("lattice period 2R = {period} exceeds the grid width {}", 2.0 * grid.half_width())
    })?;
    let kappa = p.kappa();
    let values: Result<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            if !grid.in_domain(k) {
                return Ok(0.0);
            }
            let x = grid.coords(k);
            let mut r2 = 0.0;
            let mut norm2 = 0.0;
            for (a, &xa) in x.iter().enumerate() {
                norm2 += xa * xa;
                if a < 2 {
                    let c = ((xa - o) / period).round() * period + o;
                    r2 += (xa - c) * (xa - c);
                }
            }
            let r = r2.sqrt();
            if r <= 1e-12 * h {
                return Err(Error::invalid(format!(
                    "node {x:?} coincides with a lattice centre; shift the lattice by h/2 = {}",
                    0.5 * h
                )));
            }
            Ok(-norm2 + (kappa * p.profile(r)).min(1.0))
        })
        .collect();
    GridFn::from_values(grid, values?)
}

#[derive(Clone, Debug, Serialize)]
pub struct LepsilonRow {
    pub radius: f64,
    pub integral: f64,
    pub clamp_radius: f64,
    pub capped_nodes: usize,
    pub max_theta: f64,
    /// `ρ_c/h`; below about 1 the clamp region is not resolved by the grid.
    pub clamp_cells: f64,
    /// Continuum reference `∫ max(2, κ|e₋|)^ε` (see [`continuum_reference`]).
    pub continuum_reference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LepsilonReport {
    pub alpha: f64,
    pub epsilon: f64,
    pub n: usize,
    pub rows: Vec<LepsilonRow>,
    /// Least-squares slope of `log ∫Θ̲^ε` against `log R`.
    pub fitted_slope: f64,
    /// `2(2 − (α+2)ε)/α`.
    pub predicted_slope: f64,
    /// `I(R_{i+1}) / I(R_i)` for consecutive radii.
    pub growth_factors: Vec<f64>,
    /// Tail fit of `Θ̲(v)` at the smallest radius.
    pub tail: Option<TailFit>,
    pub tail_error: Option<String>,
    /// `2/(Λ/λ + 1)`.
    pub conjectured_exponent: f64,
}

/// Continuum counterpart of the discrete integral over `B_ρ` in the plane,
/// using `Θ̲(v) ≈ max(2, κ|e₋|)` between the clamp and `R` (2 is the opening
/// of `−|x|²`) and counting cells by area. A reference curve for the growth
/// law, not a bound.
pub fn continuum_reference(p: &CounterexampleParams, epsilon: f64, rho: f64) -> f64 {
    let disk = std::f64::consts::PI * rho * rho;
    let base = 2f64.powf(epsilon);
    let (a, b) = (clamp_radius(p).ln(), p.radius.ln());
    // Simpson in log r.
    let m = 4000;
    let step = (b - a) / m as f64;
    let f = |t: f64| {
        let r = t.exp();
        let excess = bump_bound(p, r).max(2.0).powf(epsilon) - base;
        2.0 * std::f64::consts::PI * r * r * excess
    };
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let per_cell = s * step / 3.0;
    base * disk + disk / (4.0 * p.radius * p.radius) * per_cell
}

/// Smallest admissible `R` in units of `h`.
pub const MIN_RADIUS_CELLS: f64 = 4.0;

/// Validates the blow-up regime `(α+2)ε > 2`, `(Λ/λ+1)ε > 2`, `α ≤ Λ/λ − 1`.
pub fn check_regime(alpha: f64, ell: Ellipticity, epsilon: f64) -> Result<()> {
    ensure(epsilon.is_finite() && epsilon > 0.0, || format!("epsilon must be positive, got {epsilon}"))?;
    ensure((alpha + 2.0) * epsilon > 2.0, || {
        format!("blow-up needs (alpha + 2)·epsilon > 2, got {}", (alpha + 2.0) * epsilon)
    })?;
    ensure((ell.ratio() + 1.0) * epsilon > 2.0, || {
        format!("blow-up needs (Lambda/lambda + 1)·epsilon > 2, got {}", (ell.ratio() + 1.0) * epsilon)
    })?;
    CounterexampleParams::new(alpha, 1.0, ell)?.check_admissible()
}

/// Discrete `∫_{B_{1/2}} Θ̲(v, B₁)^ε` (node quadrature) for each `R`, on the
/// ball grid `B₁` with resolution `n`.
pub fn lepsilon_growth(
    alpha: f64,
    ell: Ellipticity,
    epsilon: f64,
    radii: &[f64],
    n: usize,
    cap: f64,
) -> Result<LepsilonReport> {
    check_regime(alpha, ell, epsilon)?;
    ensure(radii.len() >= 2, || "need at least two radii".into())?;
    ensure(radii.windows(2).all(|w| w[1] < w[0]), || "radii must be strictly decreasing".into())?;
    let grid = Grid::new(2, n, 1.0, Domain::Ball { radius: 1.0 })?;
    let h = grid.h();
    ensure(radii.iter().all(|&r| r >= MIN_RADIUS_CELLS * h), || {
        format!("every R must be at least {MIN_RADIUS_CELLS}h = {}", MIN_RADIUS_CELLS * h)
    })?;
    let inner = grid.nodes_within(0.5);
    let cell = h.powi(grid.dim() as i32);

    let mut rows = Vec::new();
    let mut last_field = Vec::new();
    let mut last_sup = 1.0;
    for &radius in radii {
        let p = CounterexampleParams::new(alpha, radius, ell)?;
        let v = counterexample_v(&p, &grid, None)?;
        let prob = ContactProblem::new(&v);
        let field: Vec<f64> = inner.par_iter().map(|&k| prob.theta_lower_at(k, cap)).collect();
        let capped = field.iter().filter(|t| t.is_infinite()).count();
        let integral = field.iter().map(|t| t.powf(epsilon) * cell).sum();
        let max_theta = field.iter().cloned().filter(|t| t.is_finite()).fold(0.0, f64::max);
        let rho = clamp_radius(&p);
        rows.push(LepsilonRow {
            radius,
            integral,
            clamp_radius: rho,
            capped_nodes: capped,
            max_theta,
            clamp_cells: rho / h,
            continuum_reference: continuum_reference(&p, epsilon, 0.5),
        });
        last_sup = v.sup_abs();
        last_field = field;
    }

    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.radius.ln(), r.integral.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let fitted_slope =
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let growth_factors = rows.windows(2).map(|w| w[1].integral / w[0].integral).collect();

    let (tail, tail_error) = match tail_fit(&last_field, last_sup.max(f64::MIN_POSITIVE), 1.0, cap) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(LepsilonReport {
        alpha,
        epsilon,
        n,
        rows,
        fitted_slope,
        predicted_slope: 2.0 * (2.0 - (alpha + 2.0) * epsilon) / alpha,
        growth_factors,
        tail,
        tail_error,
        conjectured_exponent: 2.0 / (ell.ratio() + 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fd_hessian;

    fn params(alpha: f64, radius: f64, lambda: f64, big: f64) -> CounterexampleParams {
        CounterexampleParams::new(alpha, radius, Ellipticity::new(lambda, big).unwrap()).unwrap()
    }

    #[test]
    fn values_and_eigenvalues() {
        let p = params(1.0, 1.0, 1.0, 2.0);
        assert!((counterexample_u(&p, &[0.5, 0.0]).unwrap() - 0.625).abs() < 1e-15);
        assert_eq!(counterexample_u(&p, &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(counterexample_u(&p, &[0.0, 2.0]).unwrap(), 0.0);
        assert!(counterexample_u(&p, &[0.0, 0.0]).is_err());
        let (em, ep) = hessian_eigs(&p, &[0.0, 0.5]).unwrap();
        assert!((em + 7.0).abs() < 1e-12 && (ep - 17.0).abs() < 1e-12);
        assert!(hessian_eigs(&p, &[1.0, 0.0]).is_err());
        let (em, _) = hessian_eigs(&p, &[1.0 - 1e-9, 0.0]).unwrap();
        assert!(em.abs() < 1e-7);
        // P⁺ = 2·7 − 17 = −3 ≥ −4.
        assert!((pucci_plus_exact(&p, 0.5, 2) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn c1_across_the_bump_edge() {
        for (alpha, radius) in [(0.5, 0.3), (1.0, 1.0), (3.0, 0.1)] {
            let p = params(alpha, radius, 1.0, 4.0);
            let mut prev = f64::INFINITY;
            for k in 4..12 {
                let h = radius * 2f64.powi(-k);
                let left = (p.profile(radius) - p.profile(radius - h)) / h;
                let err = left.abs();
                assert!(err <= prev * 0.6 || err < 1e-12, "one-sided slope {err} at h = {h}");
                prev = err;
            }
            assert!(p.profile_slope(radius - 1e-9).abs() < 1e-6);
        }
    }

    #[test]
    fn eigenvalues_match_fd_hessian() {
        let p = params(1.0, 1.0, 1.0, 2.0);
        let mut errs = Vec::new();
        for n in [64, 128] {
            let g = Grid::ball(2, n, 1.0).unwrap();
            let (u, origin) = sample_u(&p, &g).unwrap();
            assert!(origin.is_some());
            let hess = fd_hessian(&u);
            let mut worst: f64 = 0.0;
            for k in g.domain_nodes() {
                let x = g.coords(k);
                let r = planar_radius(&x).unwrap();
                if !(0.25..=0.75).contains(&r) {
                    continue;
                }
                let e = hess[k].unwrap().eigenvalues();
                let (em, ep) = hessian_eigs(&p, &x).unwrap();
                worst = worst.max((e[0] - em).abs() / em.abs()).max((e[1] - ep).abs() / ep.abs());
            }
            errs.push(worst);
        }
        assert!(errs[1] <= 2e-2, "{errs:?}");
        assert!(errs[1] / errs[0] <= 0.35, "{errs:?}");
    }

    #[test]
    fn pucci_two_ways_agree() {
        // For α = 1, λ = 1, Λ = 2 the closed form is P⁺ ≡ −3 on the bump.
        let p = params(1.0, 1.0, 1.0, 2.0);
        let mut errs = Vec::new();
        for n in [64, 128] {
            let g = Grid::ball(2, n, 1.0).unwrap();
            let (u, _) = sample_u(&p, &g).unwrap();
            let hess = fd_hessian(&u);
            let mut worst: f64 = 0.0;
            for k in g.nodes_within(0.75) {
                let r = g.norm(k);
                if r < 0.25 {
                    continue;
                }
                let exact = pucci_plus_exact(&p, r, 2);
                assert!((exact + 3.0).abs() < 1e-9);
                worst = worst.max((crate::symmat::pucci_plus(&hess[k].unwrap(), p.ell) - exact).abs());
            }
            errs.push(worst);
        }
        // O(h²): halving h divides the error by about four.
        assert!(errs[1] / errs[0] <= 0.35, "{errs:?}");
    }

    #[test]
    fn epruneq_sweep_has_no_violations() {
        let g = Grid::ball(2, 64, 1.0).unwrap();
        for alpha in [0.5, 1.0] {
            let rep = verify_epruneq(&params(alpha, 0.7, 1.0, 2.0), &g).unwrap();
            assert_eq!(rep.violations, 0);
            assert!(rep.min_margin >= 0.0 && rep.nodes_inside > 0 && rep.nodes_outside > 0);
        }
        let bad = params(1.5, 0.7, 1.0, 2.0);
        assert!(matches!(verify_epruneq(&bad, &g), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn clamp_radius_solves_the_clamp_equation() {
        let p = params(3.0, 0.1, 1.0, 4.0);
        let rho = clamp_radius(&p);
        assert!(rho > 0.0 && rho < p.radius);
        assert!((p.kappa() * p.profile(rho) - 1.0).abs() < 1e-9);
        // For small R the leading term gives c ≈ κ^{1/α}.
        let small = params(3.0, 1e-3, 1.0, 4.0);
        assert!((clamp_constant(&small) - small.kappa().powf(1.0 / 3.0)).abs() < 1e-3);
    }

    #[test]
    fn v_is_bounded_and_offset() {
        let p = params(3.0, 0.1, 1.0, 4.0);
        let g = Grid::ball(2, 64, 1.0).unwrap();
        let v = counterexample_v(&p, &g, None).unwrap();
        assert!(v.sup_abs() <= 1.0);
        // Far from every centre v = −|x|².
        let o = 0.5 * g.h();
        for k in g.domain_nodes() {
            let x = g.coords(k);
            let d = x.iter().map(|&c| {
                let t = (c - o) / 0.2;
                (t - t.round()).abs() * 0.2
            });
            if d.fold(0.0, f64::max) > 0.1 {
                let n2: f64 = x.iter().map(|c| c * c).sum();
                assert_eq!(v.at(k), -n2);
            }
        }
        assert!(counterexample_v(&p, &g, Some(0.0)).is_err());
    }

    #[test]
    fn theta_of_u_near_quarter_radius() {
        // α = 1, R = 1/2: at |x| = 1/4 the tangential bound is 7.
        let p = params(1.0, 0.5, 1.0, 2.0);
        let g = Grid::ball(2, 64, 1.0).unwrap();
        let (u, _) = sample_u(&p, &g).unwrap();
        let k = g.index_of(&[64 + 16, 64]);
        let prob = ContactProblem::new(&u);
        let t = prob.theta_lower_at(k, 1e6);
        assert!(t >= 7.0 - 10.0 * g.h(), "theta_lower = {t}");
    }

    #[test]
    fn theta_of_v_follows_the_bump_bound() {
        let p = params(3.0, 0.2, 1.0, 4.0);
        let g = Grid::ball(2, 64, 1.0).unwrap();
        let v = counterexample_v(&p, &g, None).unwrap();
        let prob = ContactProblem::new(&v);
        let o = 0.5 * g.h();
        let rho = clamp_radius(&p);
        // Nodes near the centre at (o, o), between the clamp and R/2.
        let mut checked = 0;
        for k in g.nodes_within(0.5) {
            let x = g.coords(k);
            let r = (x[0] - o).hypot(x[1] - o);
            if r > rho.max(2.0 * g.h()) && r < 0.5 * p.radius {
                let t = prob.theta_lower_at(k, 1e9);
                assert!(t >= 0.5 * bump_bound(&p, r), "r={r}: {t} vs {}", bump_bound(&p, r));
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn continuum_reference_grows_at_the_predicted_rate() {
        let vals: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&r| continuum_reference(&params(3.0, r, 1.0, 4.0), 0.5, 0.5))
            .collect();
        assert!((vals[0] - 3.2328).abs() < 1e-3, "{vals:?}");
        for w in vals.windows(2) {
            let g = w[1] / w[0];
            assert!(g > 1.2 && g < 2f64.powf(1.0 / 3.0) + 0.1, "{vals:?}");
        }
    }

    #[test]
    fn regime_boundaries_are_rejected() {
        let ell = Ellipticity::new(1.0, 4.0).unwrap();
        assert!(check_regime(3.0, ell, 0.5).is_ok());
        assert!(matches!(check_regime(3.0, ell, 2.0 / 5.0), Err(Error::InvalidInput(_))));
        assert!(check_regime(3.0, Ellipticity::new(1.0, 2.0).unwrap(), 0.5).is_err());
        assert!(lepsilon_growth(3.0, ell, 0.5, &[0.1, 0.001], 64, 1e9).is_err());
    }

    #[test]
    fn lifted_bump_has_same_theta() {
        let p = params(1.0, 0.5, 1.0, 2.0);
        let g2 = Grid::new(2, 8, 1.0, Domain::Cube { half_side: 1.0 }).unwrap();
        let g3 = Grid::new(3, 8, 1.0, Domain::Cube { half_side: 1.0 }).unwrap();
        let (u2, _) = sample_u(&p, &g2).unwrap();
        let (u3, _) = sample_u(&p, &g3).unwrap();
        let (p2, p3) = (ContactProblem::new(&u2), ContactProblem::new(&u3));
        for (i, j) in [(10, 8), (12, 9), (5, 13), (11, 11)] {
            let a = p2.theta_lower_at(g2.index_of(&[i, j]), 1e9);
            let b = p3.theta_lower_at(g3.index_of(&[i, j, 8]), 1e9);
            assert!((a - b).abs() <= 1e-8 * (1.0 + a), "{a} vs {b}");
        }
    }
}
