//! Experiment configuration files (JSON).

use std::path::{Path, PathBuf};

use prlab_core::grid::{Grid, GridFn, GridSpec};
use prlab_core::operators::{Operator, OperatorSpec};
use prlab_core::rng;
use prlab_core::solver::{solve_dirichlet, DiscreteProblem, Iteration, Scheme, Solution};
use prlab_core::testfns::{sample_normalized, HarmonicPoly, TrigPoly};
use prlab_core::{Error, Result, SymMat};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; when present it must match the subcommand.
    #[serde(default)]
    pub command: Option<String>,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_slice(&bytes)?;
        Ok((cfg, bytes))
    }

    pub fn operator(&self) -> Result<Operator> {
        self.operator.as_ref().ok_or_else(|| Error::invalid("this command needs an `operator` block"))?.build()
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid.as_ref().ok_or_else(|| Error::invalid("this command needs a `grid` block"))?.build()
    }

    /// Command parameters; a missing block means all defaults.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        let v = if self.params.is_null() { serde_json::json!({}) } else { self.params.clone() };
        Ok(serde_json::from_value(v)?)
    }
}

/// A function sampled on the grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `½ xᵀHx + b·x + c`.
    Quadratic {
        hessian: SymMat,
        #[serde(default)]
        gradient: Option<Vec<f64>>,
        #[serde(default)]
        constant: f64,
    },
    /// `c·x_axis³`.
    Cubic { coefficient: f64, axis: usize },
    /// Random trigonometric polynomial from stream `stream`, scaled to `sup`.
    Trig {
        #[serde(default = "two")]
        max_freq: i32,
        #[serde(default = "four")]
        terms: usize,
        #[serde(default = "unit")]
        sup: f64,
        #[serde(default)]
        stream: u64,
    },
    /// Random planar harmonic polynomial, scaled to `sup`.
    Harmonic {
        #[serde(default = "three")]
        degree: usize,
        #[serde(default = "unit")]
        sup: f64,
        #[serde(default)]
        stream: u64,
    },
    /// `δ·Re (x₁ + i x₂)³`.
    HarmonicCubic { delta: f64 },
}

fn two() -> i32 {
    2
}
fn three() -> usize {
    3
}
fn four() -> usize {
    4
}
fn unit() -> f64 {
    1.0
}

impl FunctionSpec {
    pub fn sample(&self, grid: &Grid, seed: u64) -> Result<GridFn> {
        let d = grid.dim();
        match self {
            FunctionSpec::Quadratic { hessian, gradient, constant } => {
                if hessian.dim() != d {
                    return Err(Error::invalid("quadratic Hessian has the wrong dimension"));
                }
                let b = gradient.clone().unwrap_or_else(|| vec![0.0; d]);
                if b.len() != d {
                    return Err(Error::invalid("quadratic gradient has the wrong dimension"));
                }
                GridFn::sample(grid, |x| {
                    0.5 * hessian.quad_form(x) + b.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + constant
                })
            }
            FunctionSpec::Cubic { coefficient, axis } => {
                if *axis >= d {
                    return Err(Error::invalid(format!("axis {axis} out of range for d = {d}")));
                }
                GridFn::sample(grid, |x| coefficient * x[*axis].powi(3))
            }
            FunctionSpec::Trig { max_freq, terms, sup, stream } => {
                let t = TrigPoly::random(d, *max_freq, *terms, &mut rng::stream(seed, *stream));
                sample_normalized(grid, *sup, |x| t.eval(x))
            }
            FunctionSpec::Harmonic { degree, sup, stream } => {
                if d != 2 {
                    return Err(Error::invalid("harmonic polynomials are planar (d = 2)"));
                }
                let p = HarmonicPoly::random(*degree, &mut rng::stream(seed, *stream));
                sample_normalized(grid, *sup, |x| p.eval(x))
            }
            FunctionSpec::HarmonicCubic { delta } => {
                if d != 2 {
                    return Err(Error::invalid("the harmonic cubic is planar (d = 2)"));
                }
                let p = HarmonicPoly::cubic(*delta);
                GridFn::sample(grid, |x| p.eval(x))
            }
        }
    }

    /// Closed-form `(Θ̲, Θ̄)` for quadratics.
    pub fn quadratic_theta(&self) -> Option<(f64, f64)> {
        match self {
            FunctionSpec::Quadratic { hessian, .. } => {
                let e = hessian.eigenvalues();
                Some(((-e[0]).max(0.0), e[e.len() - 1].max(0.0)))
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_iteration")]
    pub iteration: Iteration,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_iters() -> usize {
    200
}
fn default_iteration() -> Iteration {
    Iteration::Newton
}
fn default_scheme() -> Scheme {
    Scheme::MonotoneFrames
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            tol: default_tol(),
            max_iters: default_iters(),
            iteration: default_iteration(),
            scheme: default_scheme(),
        }
    }
}

impl SolveParams {
    pub fn solve(&self, op: Operator, boundary: GridFn) -> Result<Solution> {
        let p = DiscreteProblem::new(op, boundary, None, self.scheme)?;
        let s = solve_dirichlet(&p, self.tol, self.max_iters, self.iteration)?;
        if !s.converged {
            return Err(Error::NotConverged { iterations: s.iterations, residual: s.residual() });
        }
        Ok(s)
    }
}

/// A field source: the sampled function, or the solution of the configured
/// equation with that function as boundary data.
pub fn build_source(
    cfg: &ExperimentConfig,
    function: &FunctionSpec,
    solve: &Option<SolveParams>,
) -> Result<(GridFn, Option<Solution>)> {
    let g = function.sample(&cfg.grid()?, cfg.seed)?;
    match solve {
        None => Ok((g, None)),
        Some(sp) => {
            let s = sp.solve(cfg.operator()?, g)?;
            Ok((s.u.clone(), Some(s)))
        }
    }
}
