//! Flatness iteration: quadratic approximations `P_k` with `F(D²P_k) = 0` and
//! `sup_{B_{η^k}} |u − P_k|` decaying like `η^{(2+α)k}`, plus the empirical
//! calibration of `δ₀`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::grid::{Grid, GridFn};
use crate::operators::Operator;
use crate::rng;
use crate::solver::{solve_dirichlet, DiscreteProblem, Iteration, Scheme};
use crate::symmat::{SymMat, MAX_DIM};
use crate::testfns::{sample_normalized, TrigPoly};

/// Residual required of the scalar correction.
pub const CORRECTION_TOL: f64 = 1e-10;

/// Default smallness threshold for `sup_{B₁}|u|` (top of the calibration
/// search range).
pub const DEFAULT_DELTA0: f64 = 1.0;

/// Smallest resolvable scale, in grid spacings.
pub const MIN_SCALE_CELLS: f64 = 4.0;

/// `c + b·x + ½ xᵀHx`.
#[derive(Clone, Debug, Serialize)]
pub struct Quadratic {
    pub constant: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymMat,
}

impl Quadratic {
    pub fn zero(dim: usize) -> Self {
        Quadratic { constant: 0.0, gradient: vec![0.0; dim], hessian: SymMat::zeros(dim) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.gradient.iter().zip(x).map(|(b, xi)| b * xi).sum();
        self.constant + lin + 0.5 * self.hessian.quad_form(x)
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.gradient.iter().all(|v| v.is_finite()) && self.hessian.is_finite()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatnessScale {
    pub k: usize,
    pub radius: f64,
    pub nodes: usize,
    /// `P_k`.
    pub quadratic: Quadratic,
    /// `e_k = sup_{B_{η^k}} |u − P_k|`.
    pub error: f64,
    /// `e_{k+1}/e_k`; absent at the last scale.
    pub ratio: Option<f64>,
    /// Correction `a` applied to the fit that produced `P_{k+1}`.
    pub correction: Option<f64>,
    /// `|F(D²P̃ + 2aI)|` at the returned `a`.
    pub correction_residual: Option<f64>,
    /// `|F(D²P̃)|` before the correction.
    pub uncorrected_value: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatnessTrace {
    pub eta: f64,
    pub alpha: f64,
    /// `sup_{B₁} |u|`.
    pub delta: f64,
    pub delta0: f64,
    /// `η^{2+α}`.
    pub target_ratio: f64,
    pub hypothesis_met: bool,
    pub warnings: Vec<String>,
    pub scales: Vec<FlatnessScale>,
}

impl FlatnessTrace {
    pub fn ratios(&self) -> Vec<f64> {
        self.scales.iter().filter_map(|s| s.ratio).collect()
    }

    pub fn worst_ratio(&self) -> f64 {
        self.ratios().into_iter().fold(0.0, f64::max)
    }

    /// Every ratio is at most `factor·η^{2+α}`.
    pub fn ratios_within(&self, factor: f64) -> bool {
        self.ratios().iter().all(|&r| r <= factor * self.target_ratio)
    }

    /// CSV: `k,radius,nodes,error,ratio,target,correction,correction_residual`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,radius,nodes,error,ratio,target,correction,correction_residual\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for sc in &self.scales {
            s.push_str(&format!(
                "{},{:?},{},{:?},{},{:?},{},{}\n",
                sc.k,
                sc.radius,
                sc.nodes,
                sc.error,
                opt(sc.ratio),
                self.target_ratio,
                opt(sc.correction),
                opt(sc.correction_residual)
            ));
        }
        s
    }
}

/// Scalar `a` with `F(N + 2aI) = 0`.
///
/// By uniform ellipticity `a ↦ F(N + 2aI)` is decreasing with slope in
/// `[−2Λd, −2λd]`, so the root lies between `F(N)/(2Λd)` and `F(N)/(2λd)`.
fn correction(op: &Operator, n: &SymMat) -> Result<(f64, f64)> {
    let d = n.dim() as f64;
    let ell = op.ell();
    let g = |a: f64| op.eval(&(*n + SymMat::scalar(n.dim(), 2.0 * a)));
    let f0 = g(0.0);
    if f0 == 0.0 {
        return Ok((0.0, 0.0));
    }
    let (x, y) = (f0 / (2.0 * ell.big_lambda * d), f0 / (2.0 * ell.lambda * d));
    let pad = 1e-9 * y.abs().max(x.abs());
    let (mut lo, mut hi) = (x.min(y) - pad, x.max(y) + pad);
    let (mut glo, mut ghi) = (g(lo), g(hi));
    if !(glo >= 0.0 && ghi <= 0.0) {
        return Err(Error::numerical(format!(
            "correction not bracketed: F = {glo:e} at a = {lo:e}, {ghi:e} at a = {hi:e}; operator violates uniform ellipticity"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok((mid, 0.0));
        }
        if gm > 0.0 {
            (lo, glo) = (mid, gm);
        } else {
            (hi, ghi) = (mid, gm);
        }
    }
    let secant = if glo != ghi { lo + glo * (hi - lo) / (glo - ghi) } else { lo };
    let best = [lo, hi, secant]
        .into_iter()
        .map(|a| (a, g(a).abs()))
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .expect("three candidates");
    Ok(best)
}

/// Least-squares quadratic through `(y, w)` samples.
fn fit_quadratic(dim: usize, pts: &[[f64; MAX_DIM]], w: &[f64]) -> Result<Quadratic> {
    let cols = 1 + dim + dim * (dim + 1) / 2;
    ensure(pts.len() >= cols, || format!("{} nodes cannot determine a quadratic in d = {dim}", pts.len()))?;
    let mut a = DMatrix::zeros(pts.len(), cols);
    for (r, y) in pts.iter().enumerate() {
        a[(r, 0)] = 1.0;
        let mut c = 1;
        for i in 0..dim {
            a[(r, c)] = y[i];
            c += 1;
        }
        for i in 0..dim {
            for j in i..dim {
                a[(r, c)] = if i == j { 0.5 * y[i] * y[i] } else { y[i] * y[j] };
                c += 1;
            }
        }
    }
    let x = a
        .svd(true, true)
        .solve(&DVector::from_column_slice(w), 1e-12)
        .map_err(|e| Error::numerical(format!("quadratic fit failed: {e}")))?;
    let gradient = x.as_slice()[1..=dim].to_vec();
    let mut hessian = SymMat::zeros(dim);
    let mut c = 1 + dim;
    for i in 0..dim {
        for j in i..dim {
            hessian.set(i, j, x[c]);
            c += 1;
        }
    }
    Ok(Quadratic { constant: x[0], gradient, hessian })
}

/// Runs the iteration on scales `η^k`, `k = 0, …, kmax`, truncated at the
/// smallest scale with radius `≥ 4h`.
///
/// Each step fits a quadratic `P̃` to `(u − P_k)(η^k y)/η^{2k}` on `|y| ≤ η`,
/// corrects it by `a|y|²` so that `F(D²P_k + D²P̃) = 0`, and sets
/// `P_{k+1}(x) = P_k(x) + η^{2k}P̃(x/η^k)`. `P_0 = a₀|x|²` with `F(2a₀I) = 0`.
pub fn flatness_iterate(
    u: &GridFn,
    op: &Operator,
    eta: f64,
    alpha: f64,
    kmax: usize,
    delta0: f64,
) -> Result<FlatnessTrace> {
    let grid = u.grid();
    let dim = grid.dim();
    ensure(op.dim() == dim, || "operator and grid dimensions differ".into())?;
    ensure(eta > 0.0 && eta < 1.0, || format!("eta must lie in (0, 1), got {eta}"))?;
    ensure(alpha > 0.0 && alpha < 1.0, || format!("alpha must lie in (0, 1), got {alpha}"))?;
    ensure(delta0 > 0.0, || "delta0 must be positive".into())?;
    let unit = grid.nodes_within(1.0);
    ensure(!unit.is_empty(), || "no nodes in the unit ball".into())?;

    let mut warnings = Vec::new();
    let resolvable = ((MIN_SCALE_CELLS * grid.h()).ln() / eta.ln()).floor().max(0.0) as usize;
    let last = if kmax > resolvable {
        warnings.push(format!(
            "scales beyond k = {resolvable} are below {MIN_SCALE_CELLS}h and were truncated (requested kmax = {kmax})"
        ));
        resolvable
    } else {
        kmax
    };

    let delta = unit.iter().fold(0.0f64, |a, &k| a.max(u.at(k).abs()));
    let hypothesis_met = delta <= delta0;
    if !hypothesis_met {
        warnings.push(format!("flatness hypothesis not met: sup|u| = {delta} exceeds delta0 = {delta0}"));
    }

    let mut p = Quadratic::zero(dim);
    let (a0, _) = correction(op, &p.hessian)?;
    p.hessian = SymMat::scalar(dim, 2.0 * a0);

    let mut scales: Vec<FlatnessScale> = Vec::new();
    let mut x = [0.0; MAX_DIM];
    for k in 0..=last {
        let radius = eta.powi(k as i32);
        let nodes = grid.nodes_within(radius);
        let error = nodes.iter().fold(0.0f64, |acc, &n| {
            grid.coords_into(n, &mut x);
            acc.max((u.at(n) - p.eval(&x[..dim])).abs())
        });
        if let Some(prev) = scales.last_mut() {
            prev.ratio = Some(if prev.error > 0.0 {
                error / prev.error
            } else if error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            });
        }
        let mut scale = FlatnessScale {
            k,
            radius,
            nodes: nodes.len(),
            quadratic: p.clone(),
            error,
            ratio: None,
            correction: None,
            correction_residual: None,
            uncorrected_value: None,
        };
        if k < last {
            let inner = grid.nodes_within(radius * eta);
            let mut pts = Vec::with_capacity(inner.len());
            let mut w = Vec::with_capacity(inner.len());
            for &n in &inner {
                grid.coords_into(n, &mut x);
                let resid = (u.at(n) - p.eval(&x[..dim])) / (radius * radius);
                let mut y = [0.0; MAX_DIM];
                for a in 0..dim {
                    y[a] = x[a] / radius;
                }
                pts.push(y);
                w.push(resid);
            }
            let mut fit = fit_quadratic(dim, &pts, &w)?;
            let total = p.hessian + fit.hessian;
            let before = op.eval(&total).abs();
            let (a, residual) = correction(op, &total)?;
            if residual > CORRECTION_TOL {
                return Err(Error::numerical(format!(
                    "correction residual {residual:e} exceeds {CORRECTION_TOL:e} at scale {k}"
                )));
            }
            let bound = before / (2.0 * op.ell().lambda * dim as f64);
            if a.abs() > bound * (1.0 + 1e-9) + 1e-300 {
                return Err(Error::numerical(format!("correction |a| = {a:e} exceeds the slope bound {bound:e}")));
            }
            fit.hessian = fit.hessian + SymMat::scalar(dim, 2.0 * a);
            scale.correction = Some(a);
            scale.correction_residual = Some(residual);
            scale.uncorrected_value = Some(before);
            let s2 = radius * radius;
            p = Quadratic {
                constant: p.constant + s2 * fit.constant,
                gradient: p.gradient.iter().zip(&fit.gradient).map(|(b, f)| b + radius * f).collect(),
                hessian: p.hessian + fit.hessian,
            };
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("quadratic at scale {}", k + 1)));
            }
        }
        scales.push(scale);
    }
    Ok(FlatnessTrace {
        eta,
        alpha,
        delta,
        delta0,
        target_ratio: eta.powf(2.0 + alpha),
        hypothesis_met,
        warnings,
        scales,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationOptions {
    pub eta: f64,
    /// Grid resolution of the sampled problems.
    pub n: usize,
    /// Top of the dyadic search `top·2^{−j}`, `j < levels`.
    pub top: f64,
    pub levels: usize,
    /// Ratios may exceed `η^{2+α}` by this relative amount.
    pub slack: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { eta: 0.5, n: 32, top: DEFAULT_DELTA0, levels: 8, slack: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationTrial {
    pub operator: String,
    pub trial: usize,
    pub worst_ratio: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationLevel {
    pub delta: f64,
    pub pass: bool,
    pub trials: Vec<CalibrationTrial>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    pub delta0_hat: f64,
    pub eta_hat: f64,
    pub delta_alpha_hat: f64,
    pub alpha: f64,
    pub target_ratio: f64,
    pub options: CalibrationOptions,
    pub levels: Vec<CalibrationLevel>,
}

/// Worst flatness ratio of the solution with boundary data `delta·g`.
fn trial_ratio(op: &Operator, g: &GridFn, delta: f64, eta: f64, alpha: f64) -> Result<f64> {
    let p = DiscreteProblem::new(op.clone(), g.map(|v| v * delta), None, Scheme::MonotoneFrames)?;
    let sol = solve_dirichlet(&p, 1e-11 * (1.0 + delta), 200, Iteration::Newton)?;
    if !sol.converged {
        return Err(Error::NotConverged { iterations: sol.iterations, residual: sol.residual() });
    }
    Ok(flatness_iterate(&sol.u, op, eta, alpha, usize::MAX, f64::INFINITY)?.worst_ratio())
}

/// Largest `δ` in the dyadic search for which every sampled problem contracts
/// at rate `η^{2+α}`; `δ̂_α = δ̂₀/3`.
///
/// Problem `i` for operator `j` takes boundary data from a trigonometric
/// polynomial drawn from stream `(seed, j·trials + i)`, normalized to sup 1.
pub fn calibrate_constants(
    family: &[Operator],
    alpha: f64,
    trials: usize,
    seed: u64,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    ensure(trials >= 1, || "calibration needs at least one trial".into())?;
    ensure(!family.is_empty(), || "empty operator family".into())?;
    ensure(opts.levels >= 1 && opts.top > 0.0, || "empty search range".into())?;
    ensure(opts.slack >= 0.0, || "slack must be ≥ 0".into())?;
    let target = opts.eta.powf(2.0 + alpha);
    let mut data = Vec::new();
    for (j, op) in family.iter().enumerate() {
        let grid = Grid::ball(op.dim(), opts.n, 1.0)?;
        for i in 0..trials {
            let mut r = rng::stream(seed, (j * trials + i) as u64);
            let t = TrigPoly::random(op.dim(), 2, 4, &mut r);
            data.push((j, i, sample_normalized(&grid, 1.0, |x| t.eval(x))?));
        }
    }
    let mut levels = Vec::new();
    let mut found = None;
    for l in 0..opts.levels {
        let delta = opts.top * 0.5f64.powi(l as i32);
        let results: Vec<Result<CalibrationTrial>> = data
            .par_iter()
            .map(|(j, i, g)| {
                let op = &family[*j];
                let worst = trial_ratio(op, g, delta, opts.eta, alpha)?;
                Ok(CalibrationTrial {
                    operator: op.name().to_string(),
                    trial: *i,
                    worst_ratio: worst,
                    pass: worst <= target * (1.0 + opts.slack),
                })
            })
            .collect();
        let trials: Vec<CalibrationTrial> = results.into_iter().collect::<Result<_>>()?;
        let pass = trials.iter().all(|t| t.pass);
        levels.push(CalibrationLevel { delta, pass, trials });
        if pass {
            found = Some(delta);
            break;
        }
    }
    let Some(delta0_hat) = found else {
        return Err(Error::numerical(format!(
            "calibration failed: no delta in [{:e}, {}] contracts at rate {target:.4} on all trials",
            opts.top * 0.5f64.powi(opts.levels as i32 - 1),
            opts.top
        )));
    };
    Ok(Calibration {
        delta0_hat,
        eta_hat: opts.eta,
        delta_alpha_hat: delta0_hat / 3.0,
        alpha,
        target_ratio: target,
        options: opts.clone(),
        levels,
    })
}
