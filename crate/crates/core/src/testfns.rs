//! Seeded smooth test functions: trigonometric and harmonic polynomials.

use rand::Rng as _;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::grid::{Grid, GridFn};
use crate::rng::{normal, Rng};

#[derive(Clone, Debug, Serialize)]
pub struct TrigTerm {
    pub freq: Vec<i32>,
    pub cos: f64,
    pub sin: f64,
}

/// `Σ a cos(π k·x) + b sin(π k·x)` over integer frequency vectors `k`.
#[derive(Clone, Debug, Serialize)]
pub struct TrigPoly {
    pub dim: usize,
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    /// `terms` random frequencies with `|k_i| ≤ max_freq`, coefficients
    /// `N(0, 1)/(1 + |k|²)`.
    pub fn random(dim: usize, max_freq: i32, terms: usize, rng: &mut Rng) -> Self {
        let terms = (0..terms)
            .map(|_| {
                let freq: Vec<i32> = (0..dim).map(|_| rng.random_range(-max_freq..=max_freq)).collect();
                let damp = 1.0 + freq.iter().map(|&k| (k * k) as f64).sum::<f64>();
                TrigTerm { freq, cos: normal(rng) / damp, sin: normal(rng) / damp }
            })
            .collect();
        TrigPoly { dim, terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let phase: f64 =
                    t.freq.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum::<f64>() * std::f64::consts::PI;
                t.cos * phase.cos() + t.sin * phase.sin()
            })
            .sum()
    }
}

/// `Σ_{n ≤ deg} a_n Re z^n + b_n Im z^n` with `z = x₁ + i x₂`.
#[derive(Clone, Debug, Serialize)]
pub struct HarmonicPoly {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl HarmonicPoly {
    pub fn random(degree: usize, rng: &mut Rng) -> Self {
        let re = (0..=degree).map(|_| normal(rng)).collect();
        let im = (0..=degree).map(|n| if n == 0 { 0.0 } else { normal(rng) }).collect();
        HarmonicPoly { re, im }
    }

    /// `δ·Re z³`.
    pub fn cubic(delta: f64) -> Self {
        HarmonicPoly { re: vec![0.0, 0.0, 0.0, delta], im: vec![0.0; 4] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let (mut zr, mut zi) = (1.0, 0.0);
        let mut s = 0.0;
        for (a, b) in self.re.iter().zip(&self.im) {
            s += a * zr + b * zi;
            (zr, zi) = (zr * x[0] - zi * x[1], zr * x[1] + zi * x[0]);
        }
        s
    }
}

/// Samples `f` and rescales so that the sup over the domain is `target`.
pub fn sample_normalized(grid: &Grid, target: f64, f: impl Fn(&[f64]) -> f64) -> Result<GridFn> {
    ensure(target > 0.0 && target.is_finite(), || "normalization target must be positive".into())?;
    let u = GridFn::sample(grid, f)?;
    let s = u.sup_abs();
    if s == 0.0 {
        return Err(Error::numerical("cannot normalize an identically zero sample"));
    }
    Ok(u.map(|v| v * target / s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn harmonic_poly_values() {
        let p = HarmonicPoly::cubic(2.0);
        assert!((p.eval(&[0.5, 0.0]) - 0.25).abs() < 1e-15);
        // Re (1 + i)³ = −2.
        assert!((p.eval(&[1.0, 1.0]) + 4.0).abs() < 1e-12);
        let q = HarmonicPoly { re: vec![0.0, 0.0, 0.0], im: vec![0.0, 0.0, 1.0] };
        assert!((q.eval(&[1.0, 2.0]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn random_harmonic_has_zero_laplacian() {
        let p = HarmonicPoly::random(4, &mut rng::stream(3, 0));
        let (x, y, h) = (0.3, -0.2, 1e-3);
        let lap = p.eval(&[x + h, y]) + p.eval(&[x - h, y]) + p.eval(&[x, y + h]) + p.eval(&[x, y - h])
            - 4.0 * p.eval(&[x, y]);
        assert!(lap.abs() / (h * h) < 1e-5);
    }

    #[test]
    fn normalization() {
        let g = Grid::ball(2, 8, 1.0).unwrap();
        let t = TrigPoly::random(2, 3, 4, &mut rng::stream(1, 0));
        let u = sample_normalized(&g, 0.5, |x| t.eval(x)).unwrap();
        assert!((u.sup_abs() - 0.5).abs() < 1e-15);
        assert!(sample_normalized(&g, 1.0, |_| 0.0).is_err());
    }
}
