//! The experiment commands. Each returns a JSON result (no timing), CSV
//! artifacts and a one-line summary.

use prlab_core::analysis::flatness::DEFAULT_DELTA0;
use prlab_core::analysis::{
    calibrate_constants, cz_check, cz_instance, flag_singular_lazy, flatness_iterate, measure_decay_check, tail_fit,
    CalibrationOptions, DyadicGrid,
};
use prlab_core::contact::{curvature_field, psi_bound_via_gradient, FieldSet, DEFAULT_CAP};
use prlab_core::counterexample::{
    check_regime, clamp_radius, hessian_eigs, lepsilon_growth, verify_epruneq, CounterexampleParams,
};
use prlab_core::grid::{abp_check, abp_grid, Grid, GridFn};
use prlab_core::operators::OperatorSpec;
use prlab_core::rng;
use prlab_core::symmat::{pucci_brute, pucci_minus, pucci_plus};
use prlab_core::{Ellipticity, Error, Result, SymMat};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{build_source, ExperimentConfig, FunctionSpec, SolveParams};

pub struct Outcome {
    pub result: Value,
    pub artifacts: Vec<(String, String)>,
    pub summary: String,
}

pub struct CommandInfo {
    pub name: &'static str,
    pub about: &'static str,
}

pub const CATALOG: [CommandInfo; 11] = [
    CommandInfo {
        name: "pucci",
        about: "Pucci extremal operators: closed form against sampled sup/inf over the ellipticity class",
    },
    CommandInfo { name: "solve", about: "Dirichlet problem F(D²u) = 0 with the monotone wide-stencil scheme" },
    CommandInfo {
        name: "theta", about: "Touching-paraboloid curvatures Θ̲, Θ̄ on the inner region via contact LPs"
    },
    CommandInfo { name: "psi", about: "Cubic contact quantity Ψ and its gradient-curvature bound" },
    CommandInfo {
        name: "tail",
        about: "Power-law tail |{Θ̲ > t}| ≈ C t^(-ε) of the lower curvature (W^{2,ε} exponent)",
    },
    CommandInfo { name: "abp", about: "Measured Alexandroff–Bakelman–Pucci constant on the contact set" },
    CommandInfo { name: "czcheck", about: "Calderón–Zygmund covering lemma on random dyadic instances" },
    CommandInfo { name: "flatness", about: "Quadratic approximation iteration with geometric decay η^(2+α)" },
    CommandInfo { name: "calibrate", about: "Empirical smallness constants δ₀, η, δ_α from sampled solutions" },
    CommandInfo { name: "singular", about: "Singular-set flags from Ψ and box-counting dimension of the flagged set" },
    CommandInfo { name: "counterexample", about: "Radial bump family: P⁺ bound, L^ε growth and tail exponent" },
];

pub fn run(name: &str, cfg: &ExperimentConfig) -> Result<Outcome> {
    match name {
        "pucci" => pucci(cfg),
        "solve" => solve(cfg),
        "theta" => theta(cfg),
        "psi" => psi(cfg),
        "tail" => tail(cfg),
        "abp" => abp(cfg),
        "czcheck" => czcheck(cfg),
        "flatness" => flatness(cfg),
        "calibrate" => calibrate(cfg),
        "singular" => singular(cfg),
        "counterexample" => counterexample(cfg),
        other => Err(Error::invalid(format!("unknown command `{other}`"))),
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn f1() -> f64 {
    1.0
}
fn f2() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}
fn cap() -> f64 {
    DEFAULT_CAP
}

// ---------------------------------------------------------------- pucci

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PucciParams {
    #[serde(default = "f1")]
    lambda: f64,
    #[serde(default = "f2", rename = "Lambda")]
    big_lambda: f64,
    #[serde(default)]
    matrices: Option<Vec<SymMat>>,
    #[serde(default = "pucci_count")]
    count: usize,
    #[serde(default = "pucci_dim")]
    dim: usize,
    #[serde(default = "pucci_scale")]
    scale: f64,
    #[serde(default = "pucci_samples")]
    brute_samples: usize,
}

fn pucci_count() -> usize {
    100
}
fn pucci_dim() -> usize {
    2
}
fn pucci_scale() -> f64 {
    3.0
}
fn pucci_samples() -> usize {
    10_000
}

#[derive(Serialize)]
struct PucciRow {
    eigenvalues: Vec<f64>,
    plus: f64,
    minus: f64,
    brute_plus: f64,
    brute_minus: f64,
    within_tolerance: bool,
}

fn pucci(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: PucciParams = cfg.params()?;
    let ell = Ellipticity::new(p.lambda, p.big_lambda)?;
    let mats = match p.matrices {
        Some(m) => m,
        None => {
            let mut r = rng::stream(cfg.seed, 0);
            (0..p.count).map(|_| SymMat::random_uniform(p.dim, p.scale, &mut r)).collect()
        }
    };
    let rows: Vec<PucciRow> = mats
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let (bp, bm) = pucci_brute(m, ell, p.brute_samples, &mut rng::stream(cfg.seed, 1 + i as u64));
            let (plus, minus) = (pucci_plus(m, ell), pucci_minus(m, ell));
            let tol = 1e-3 * (1.0 + m.frobenius_norm());
            let slack = 1e-12 * (1.0 + m.frobenius_norm());
            PucciRow {
                eigenvalues: m.eigenvalues(),
                plus,
                minus,
                brute_plus: bp,
                brute_minus: bm,
                within_tolerance: bp >= plus - tol && bp <= plus + slack && bm <= minus + tol && bm >= minus - slack,
            }
        })
        .collect();
    let mut csv = String::from("index,plus,minus,brute_plus,brute_minus,within_tolerance\n");
    for (i, r) in rows.iter().enumerate() {
        csv.push_str(&format!(
            "{i},{:?},{:?},{:?},{:?},{}\n",
            r.plus, r.minus, r.brute_plus, r.brute_minus, r.within_tolerance
        ));
    }
    let bad = rows.iter().filter(|r| !r.within_tolerance).count();
    Ok(Outcome {
        summary: format!("{} matrices, {bad} outside tolerance", rows.len()),
        result: json!({ "lambda": p.lambda, "Lambda": p.big_lambda, "brute_samples": p.brute_samples, "outside_tolerance": bad, "rows": to_value(&rows)? }),
        artifacts: vec![("pucci.csv".into(), csv)],
    })
}

// ---------------------------------------------------------------- solve

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveCmd {
    boundary: FunctionSpec,
    #[serde(default)]
    solver: SolveParams,
}

fn history_csv(h: &[f64]) -> String {
    let mut s = String::from("iteration,residual\n");
    for (i, r) in h.iter().enumerate() {
        s.push_str(&format!("{i},{r:?}\n"));
    }
    s
}

fn solve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: SolveCmd = cfg.params()?;
    let g = p.boundary.sample(&cfg.grid()?, cfg.seed)?;
    let s = p.solver.solve(cfg.operator()?, g.clone())?;
    let grid = g.grid();
    let diff = grid.domain_nodes().iter().fold(0.0f64, |a, &k| a.max((s.u.at(k) - g.at(k)).abs()));
    Ok(Outcome {
        summary: format!("converged in {} iterations, residual {:e}", s.iterations, s.residual()),
        result: json!({ "solution": to_value(&s)?, "residual": s.residual(), "sup_diff_from_sampled_data": diff }),
        artifacts: vec![
            ("solution.csv".into(), s.u.to_csv()),
            ("residual_history.csv".into(), history_csv(&s.history)),
        ],
    })
}

// ---------------------------------------------------------------- theta / psi

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldCmd {
    function: FunctionSpec,
    #[serde(default)]
    solve: Option<SolveParams>,
    #[serde(default = "half")]
    inner_radius: f64,
    #[serde(default = "cap")]
    cap: f64,
}

fn finite_max(v: &[f64]) -> f64 {
    v.iter().cloned().filter(|x| x.is_finite()).fold(0.0, f64::max)
}

fn theta(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: FieldCmd = cfg.params()?;
    let (u, _) = build_source(cfg, &p.function, &p.solve)?;
    let f = curvature_field(&u, p.inner_radius, p.cap, FieldSet::THETA)?;
    let mut result = json!({
        "inner_nodes": f.inner.len(),
        "theta_lower_max": finite_max(&f.theta_lower),
        "theta_upper_max": finite_max(&f.theta_upper),
        "capped_lower": f.theta_lower.iter().filter(|v| v.is_infinite()).count(),
    });
    let mut summary = format!("{} inner nodes", f.inner.len());
    if let (Some((lo, up)), None) = (p.function.quadratic_theta(), &p.solve) {
        let err_lo = f.theta_lower.iter().fold(0.0f64, |a, v| a.max((v - lo).abs()));
        let err_up = f.theta_upper.iter().fold(0.0f64, |a, v| a.max((v - up).abs()));
        result["closed_form"] =
            json!({ "theta_lower": lo, "theta_upper": up, "max_error_lower": err_lo, "max_error_upper": err_up });
        summary.push_str(&format!(", closed-form error {:.2e}", err_lo.max(err_up)));
    }
    Ok(Outcome { summary, result, artifacts: vec![("theta.csv".into(), f.to_csv())] })
}

fn psi(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: FieldCmd = cfg.params()?;
    let (u, _) = build_source(cfg, &p.function, &p.solve)?;
    let f = curvature_field(&u, p.inner_radius, p.cap, FieldSet { theta_lower: false, theta_upper: false, psi: true })?;
    let psi = f.psi.clone().expect("requested");
    let bound = psi_bound_via_gradient(&u, &f.inner, p.cap)?;
    let excess = psi.iter().zip(&bound).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let mut csv = String::from("node,psi,gradient_bound\n");
    for (&k, (a, b)) in f.inner.iter().zip(psi.iter().zip(&bound)) {
        csv.push_str(&format!("{k},{a:?},{b:?}\n"));
    }
    let centre = f.inner.iter().position(|&k| k == u.grid().center()).map(|j| psi[j]);
    Ok(Outcome {
        summary: format!("max Ψ {:.4}, max Ψ − bound {:.3e}", finite_max(&psi), excess),
        result: json!({
            "inner_nodes": f.inner.len(),
            "psi_max": finite_max(&psi),
            "psi_at_origin": centre,
            "max_excess_over_gradient_bound": excess,
        }),
        artifacts: vec![("psi.csv".into(), f.to_csv()), ("psi_bound.csv".into(), csv)],
    })
}

// ---------------------------------------------------------------- tail

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TailCmd {
    function: FunctionSpec,
    #[serde(default)]
    solve: Option<SolveParams>,
    #[serde(default = "half")]
    inner_radius: f64,
    #[serde(default = "cap")]
    cap: f64,
    #[serde(default = "f1")]
    t0: f64,
    #[serde(default)]
    decay: Option<DecayParams>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecayParams {
    m: f64,
    sigma: f64,
    t: Vec<f64>,
}

fn tail(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: TailCmd = cfg.params()?;
    let (u, _) = build_source(cfg, &p.function, &p.solve)?;
    let f = curvature_field(&u, p.inner_radius, p.cap, FieldSet::LOWER)?;
    let sup = u.sup_abs();
    let decay = match &p.decay {
        Some(d) => Some(to_value(&measure_decay_check(&f, d.m, d.sigma, &d.t)?)?),
        None => None,
    };
    match tail_fit(&f.theta_lower, sup, p.t0, p.cap) {
        Ok(fit) => Ok(Outcome {
            summary: if fit.bounded {
                "bounded field: survival reaches 0, ε̂ = +∞".into()
            } else {
                format!("ε̂ = {:.4} over {} points", fit.epsilon_hat, fit.points)
            },
            result: json!({
                "sup_u": sup,
                "epsilon_hat": fit.epsilon_hat,
                "bounded": fit.bounded,
                "fit": to_value(&fit)?,
                "decay": decay,
            }),
            artifacts: vec![("survival.csv".into(), fit.survival_csv()), ("theta.csv".into(), f.to_csv())],
        }),
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------- abp

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AbpParams {
    #[serde(default = "f1")]
    c: f64,
    #[serde(default = "half")]
    radius: f64,
    #[serde(default = "abp_ns")]
    ns: Vec<usize>,
    #[serde(default = "pucci_dim")]
    dim: usize,
    #[serde(default = "f1")]
    lambda: f64,
}

fn abp_ns() -> Vec<usize> {
    vec![32, 64]
}

/// `u = c(|x|² − R²)` and `f ≡ −2λcd`, so that `P⁺(D²u) = f`.
pub fn abp_quadratic(dim: usize, n: usize, radius: f64, c: f64, lambda: f64) -> Result<(GridFn, GridFn)> {
    let g = abp_grid(dim, n, radius)?;
    let u = GridFn::sample(&g, |x| c * (x.iter().map(|v| v * v).sum::<f64>() - radius * radius))?;
    let f = GridFn::sample(&g, |_| -2.0 * lambda * c * dim as f64)?;
    Ok((u, f))
}

fn abp(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: AbpParams = cfg.params()?;
    let mut rows = Vec::new();
    let mut csv = String::from("n,c_meas,c_meas_scaled,contact_nodes\n");
    for &n in &p.ns {
        let (u, f) = abp_quadratic(p.dim, n, p.radius, p.c, p.lambda)?;
        let r = abp_check(&u, &f, p.radius)?;
        let s = abp_check(&u.map(|v| 2.0 * v), &f.map(|v| 2.0 * v), p.radius)?;
        csv.push_str(&format!("{n},{:?},{:?},{}\n", r.c_meas, s.c_meas, r.contact_nodes));
        rows.push(json!({ "n": n, "report": to_value(&r)?, "scaled_c_meas": s.c_meas, "scaling_exact": r.c_meas == s.c_meas }));
    }
    let cs: Vec<f64> = rows.iter().map(|r| r["report"]["c_meas"].as_f64().unwrap_or(f64::NAN)).collect();
    let variation = if cs.len() >= 2 { (cs[cs.len() - 1] - cs[0]).abs() / cs[0] } else { 0.0 };
    Ok(Outcome {
        summary: format!("C_meas {:?}, relative variation {variation:.4}", cs),
        result: json!({ "rows": rows, "relative_variation": variation }),
        artifacts: vec![("abp.csv".into(), csv)],
    })
}

// ---------------------------------------------------------------- czcheck

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CzParams {
    #[serde(default = "pucci_dim")]
    dim: usize,
    #[serde(default = "cz_level")]
    level: u32,
    #[serde(default = "cz_instances")]
    instances: usize,
    #[serde(default = "cz_delta_range")]
    delta_range: (f64, f64),
}

fn cz_level() -> u32 {
    6
}
fn cz_instances() -> usize {
    1000
}
fn cz_delta_range() -> (f64, f64) {
    (0.05, 0.9)
}

fn czcheck(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: CzParams = cfg.params()?;
    let g = DyadicGrid::new(p.dim, p.level)?;
    let (lo, hi) = p.delta_range;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::invalid("delta_range must satisfy 0 < lo < hi < 1"));
    }
    let mut csv = String::from("instance,delta,d_nodes,e_nodes,hypothesis_failure,conclusion_holds\n");
    let (mut violations, mut hyp_fail) = (0, 0);
    for i in 0..p.instances {
        let mut r = rng::stream(cfg.seed, i as u64);
        let delta = r.random_range(lo..hi);
        let (d, e) = cz_instance(g, delta, &mut r);
        let rep = cz_check(g, &d, &e, delta)?;
        violations += usize::from(rep.is_violation());
        hyp_fail += usize::from(rep.hypothesis_failure.is_some());
        csv.push_str(&format!(
            "{i},{delta:?},{},{},{},{}\n",
            rep.d_nodes,
            rep.e_nodes,
            rep.hypothesis_failure.is_some(),
            rep.conclusion_holds
        ));
    }
    Ok(Outcome {
        summary: format!(
            "{} instances, {violations} conclusion violations, {hyp_fail} hypothesis failures",
            p.instances
        ),
        result: json!({ "instances": p.instances, "side": g.side(), "dim": p.dim, "violations": violations, "hypothesis_failures": hyp_fail }),
        artifacts: vec![("czcheck.csv".into(), csv)],
    })
}

// ---------------------------------------------------------------- flatness

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatnessParams {
    function: FunctionSpec,
    #[serde(default)]
    solve: Option<SolveParams>,
    #[serde(default = "half")]
    eta: f64,
    #[serde(default = "half")]
    alpha: f64,
    #[serde(default = "kmax")]
    kmax: usize,
    #[serde(default = "delta0")]
    delta0: f64,
}

fn kmax() -> usize {
    16
}
fn delta0() -> f64 {
    DEFAULT_DELTA0
}

fn flatness(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: FlatnessParams = cfg.params()?;
    let (u, _) = build_source(cfg, &p.function, &p.solve)?;
    let t = flatness_iterate(&u, &cfg.operator()?, p.eta, p.alpha, p.kmax, p.delta0)?;
    Ok(Outcome {
        summary: format!(
            "{} scales, worst ratio {:.4} vs η^(2+α) = {:.4}{}",
            t.scales.len(),
            t.worst_ratio(),
            t.target_ratio,
            if t.hypothesis_met { "" } else { " (flatness hypothesis not met)" }
        ),
        result: to_value(&t)?,
        artifacts: vec![("flatness.csv".into(), t.to_csv())],
    })
}

// ---------------------------------------------------------------- calibrate

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrateParams {
    #[serde(default)]
    family: Option<Vec<OperatorSpec>>,
    #[serde(default = "half")]
    alpha: f64,
    #[serde(default = "trials")]
    trials: usize,
    #[serde(default)]
    options: Option<CalibrationOptionsSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationOptionsSpec {
    eta: Option<f64>,
    n: Option<usize>,
    top: Option<f64>,
    levels: Option<usize>,
    slack: Option<f64>,
}

fn trials() -> usize {
    4
}

fn calibrate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: CalibrateParams = cfg.params()?;
    let family = match &p.family {
        Some(f) => f.iter().map(OperatorSpec::build).collect::<Result<Vec<_>>>()?,
        None => vec![cfg.operator()?],
    };
    let mut opts = CalibrationOptions::default();
    if let Some(o) = &p.options {
        opts.eta = o.eta.unwrap_or(opts.eta);
        opts.n = o.n.unwrap_or(opts.n);
        opts.top = o.top.unwrap_or(opts.top);
        opts.levels = o.levels.unwrap_or(opts.levels);
        opts.slack = o.slack.unwrap_or(opts.slack);
    }
    let c = calibrate_constants(&family, p.alpha, p.trials, cfg.seed, &opts)?;
    Ok(Outcome {
        summary: format!("δ̂₀ = {}, η̂ = {}, δ̂_α = {:.6}", c.delta0_hat, c.eta_hat, c.delta_alpha_hat),
        result: to_value(&c)?,
        artifacts: vec![],
    })
}

// ---------------------------------------------------------------- singular

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SingularParams {
    function: FunctionSpec,
    #[serde(default)]
    solve: Option<SolveParams>,
    radius: f64,
    delta_alpha: f64,
    #[serde(default)]
    epsilons: Vec<f64>,
    #[serde(default = "half")]
    inner_radius: f64,
}

fn singular(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: SingularParams = cfg.params()?;
    let (u, _) = build_source(cfg, &p.function, &p.solve)?;
    let rep = flag_singular_lazy(&u, p.inner_radius, p.radius, p.delta_alpha, &p.epsilons)?;
    let mut flags = String::from("node,flagged\n");
    for (&k, &b) in u.grid().nodes_within(p.inner_radius).iter().zip(&rep.flagged) {
        flags.push_str(&format!("{k},{}\n", u8::from(b)));
    }
    Ok(Outcome {
        summary: format!(
            "{} of {} inner nodes flagged, box dimension {:.3}",
            rep.flagged_count, rep.inner_count, rep.covering.dim_hat
        ),
        result: to_value(&rep)?,
        artifacts: vec![("covering.csv".into(), rep.covering.to_csv()), ("flags.csv".into(), flags)],
    })
}

// ---------------------------------------------------------------- counterexample

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CounterexampleCmd {
    alpha: f64,
    #[serde(default = "f1")]
    lambda: f64,
    #[serde(rename = "Lambda")]
    big_lambda: f64,
    #[serde(default)]
    epsilon: Option<f64>,
    radii: Vec<f64>,
    #[serde(default = "ce_n")]
    n: usize,
    #[serde(default = "ce_cap")]
    cap: f64,
    /// Skip the `L^ε` integrals (they dominate the runtime).
    #[serde(default)]
    skip_growth: bool,
}

fn ce_n() -> usize {
    128
}
fn ce_cap() -> f64 {
    1e9
}

fn counterexample(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: CounterexampleCmd = cfg.params()?;
    let ell = Ellipticity::new(p.lambda, p.big_lambda)?;
    if let Some(eps) = p.epsilon {
        check_regime(p.alpha, ell, eps)?;
    }
    if p.radii.is_empty() {
        return Err(Error::invalid("need at least one radius"));
    }
    let grid = Grid::ball(2, p.n, 1.0)?;
    let mut checks = Vec::new();
    let mut profile = String::from("radius,r,u,e_minus,e_plus\n");
    for &radius in &p.radii {
        let cp = CounterexampleParams::new(p.alpha, radius, ell)?;
        let rep = verify_epruneq(&cp, &grid)?;
        checks.push(json!({ "radius": radius, "epruneq": to_value(&rep)?, "clamp_radius": clamp_radius(&cp) }));
        for i in 1..64 {
            let r = radius * i as f64 / 64.0;
            let (em, ep) = hessian_eigs(&cp, &[r, 0.0])?;
            profile.push_str(&format!("{radius:?},{r:?},{:?},{em:?},{ep:?}\n", cp.profile(r)));
        }
    }
    let mut artifacts = vec![("profile.csv".into(), profile)];
    let mut result =
        json!({ "alpha": p.alpha, "lambda": p.lambda, "Lambda": p.big_lambda, "n": p.n, "epruneq": checks });
    let mut summary = format!("P⁺ bound checked at {} radii", p.radii.len());
    if let (Some(eps), false) = (p.epsilon, p.skip_growth) {
        let g = lepsilon_growth(p.alpha, ell, eps, &p.radii, p.n, p.cap)?;
        let mut csv =
            String::from("radius,integral,clamp_radius,clamp_cells,capped_nodes,max_theta,continuum_reference\n");
        for r in &g.rows {
            csv.push_str(&format!(
                "{:?},{:?},{:?},{:?},{},{:?},{:?}\n",
                r.radius, r.integral, r.clamp_radius, r.clamp_cells, r.capped_nodes, r.max_theta, r.continuum_reference
            ));
        }
        if let Some(t) = &g.tail {
            artifacts.push(("survival.csv".into(), t.survival_csv()));
        }
        artifacts.push(("lepsilon.csv".into(), csv));
        summary.push_str(&format!(", growth factors {:?}", g.growth_factors));
        result["growth"] = to_value(&g)?;
    }
    Ok(Outcome { summary, result, artifacts })
}
