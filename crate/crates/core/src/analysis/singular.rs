//! Singular-set flags from the cubic contact field and box-counting
//! dimension.
//!
//! Box-counting dimension bounds Hausdorff dimension from above, so
//! `dim_hat ≤ d − ε` is evidence, not proof.

use std::collections::HashSet;

use serde::Serialize;

use crate::contact::{ContactProblem, CurvatureField};
use crate::error::{ensure, Error, Result};
use crate::grid::{Grid, GridFn};
use crate::symmat::MAX_DIM;

/// Flag radii must stay below this bound.
pub const MAX_FLAG_RADIUS: f64 = 1.0 / 16.0;

#[derive(Clone, Debug, Serialize)]
pub struct BoxDimension {
    pub dim_hat: f64,
    pub scales: Vec<f64>,
    /// `N(ρ)`: fewest `ρ`-cubes of the node lattice meeting the mask.
    pub counts: Vec<usize>,
}

impl BoxDimension {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho,count\n");
        for (r, c) in self.scales.iter().zip(&self.counts) {
            s.push_str(&format!("{r:?},{c}\n"));
        }
        s
    }
}

/// Blocks of `k` nodes per axis, minimized over the `k^d` placements of the
/// block lattice, so counts are invariant under node translations.
fn covering_count(grid: &Grid, nodes: &[[usize; MAX_DIM]], k: usize) -> usize {
    let d = grid.dim();
    let mut best = usize::MAX;
    let mut seen: HashSet<[usize; MAX_DIM]> = HashSet::with_capacity(nodes.len());
    for o in 0..k.pow(d as u32) {
        let mut off = [0usize; MAX_DIM];
        let mut t = o;
        for slot in off.iter_mut().take(d) {
            *slot = t % k;
            t /= k;
        }
        seen.clear();
        for idx in nodes {
            let mut key = [0usize; MAX_DIM];
            for a in 0..d {
                key[a] = (idx[a] + off[a]) / k;
            }
            seen.insert(key);
            if seen.len() >= best {
                break;
            }
        }
        best = best.min(seen.len());
        if best == 1 {
            break;
        }
    }
    best
}

/// Box-counting dimension of `mask` (one flag per grid node) at the given
/// scales.
pub fn box_dimension(grid: &Grid, mask: &[bool], scales: &[f64]) -> Result<BoxDimension> {
    ensure(mask.len() == grid.len(), || "mask does not match the grid".into())?;
    ensure(scales.len() >= 3, || format!("at least 3 scales are needed, got {}", scales.len()))?;
    let h = grid.h();
    ensure(scales.iter().all(|&r| r.is_finite() && r >= 2.0 * h * (1.0 - 1e-9)), || {
        format!("every scale must be at least 2h = {}", 2.0 * h)
    })?;
    ensure(scales.windows(2).all(|w| w[0] < w[1]), || "scales must be strictly increasing".into())?;
    let nodes: Vec<[usize; MAX_DIM]> = (0..grid.len())
        .filter(|&k| mask[k])
        .map(|k| {
            let mut idx = [0usize; MAX_DIM];
            grid.indices_into(k, &mut idx[..grid.dim()]);
            idx
        })
        .collect();
    if nodes.is_empty() {
        return Ok(BoxDimension { dim_hat: 0.0, scales: scales.to_vec(), counts: vec![0; scales.len()] });
    }
    let counts: Vec<usize> =
        scales.iter().map(|&r| covering_count(grid, &nodes, ((r / h).round() as usize).max(1))).collect();
    let xs: Vec<f64> = scales.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(BoxDimension { dim_hat: -sxy / sxx, scales: scales.to_vec(), counts })
}

#[derive(Clone, Debug, Serialize)]
pub struct VitaliProduct {
    pub epsilon: f64,
    /// `m(r)·r^{d−ε}`.
    pub product: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularReport {
    pub radius: f64,
    pub delta_alpha: f64,
    /// `δ_α / r`.
    pub threshold: f64,
    /// One flag per inner node of the field.
    #[serde(skip)]
    pub flagged: Vec<bool>,
    pub flagged_count: usize,
    pub inner_count: usize,
    /// Greedy count of flagged nodes with pairwise distance `> 2r`.
    pub vitali_count: usize,
    pub products: Vec<VitaliProduct>,
    pub covering: BoxDimension,
}

fn check_radius(grid: &Grid, r: f64, delta_alpha: f64) -> Result<()> {
    let h = grid.h();
    ensure(r > 0.0 && r < MAX_FLAG_RADIUS, || format!("radius {r} must lie in (0, 1/16)"))?;
    ensure(r >= 4.0 * h * (1.0 - 1e-9), || format!("radius {r} is below 4h = {}", 4.0 * h))?;
    ensure(delta_alpha >= 0.0 && delta_alpha.is_finite(), || "delta_alpha must be finite and ≥ 0".into())
}

/// Flags from a certificate oracle (`certify(j)` ⇔ `Ψ(inner[j]) ≤ δ_α/r`).
///
/// A certified node clears its whole ball, so the oracle is queried only
/// until each node is either cleared or has its ball exhausted; the result
/// equals the exhaustive definition.
fn flags_with(grid: &Grid, inner: &[usize], r: f64, mut certify: impl FnMut(usize) -> bool) -> Vec<bool> {
    let h = grid.h();
    let mut slot = vec![usize::MAX; grid.len()];
    for (j, &k) in inner.iter().enumerate() {
        slot[k] = j;
    }
    let reach = (r / h + 1e-9).floor() as isize;
    let mut offsets: Vec<Vec<isize>> = grid
        .offsets(reach)
        .into_iter()
        .filter(|o| o.iter().map(|&c| (c * c) as f64).sum::<f64>() * h * h <= r * r * (1.0 + 1e-12))
        .collect();
    offsets.insert(0, vec![0; grid.dim()]);
    let ball = |j: usize| -> Vec<usize> {
        offsets.iter().filter_map(|o| grid.shift(inner[j], o).map(|z| slot[z]).filter(|&s| s != usize::MAX)).collect()
    };
    let mut cert: Vec<Option<bool>> = vec![None; inner.len()];
    let mut cleared = vec![false; inner.len()];
    let mut flagged = vec![false; inner.len()];
    for y in 0..inner.len() {
        if cleared[y] {
            continue;
        }
        let mut found = false;
        for z in ball(y) {
            let c = *cert[z].get_or_insert_with(|| certify(z));
            if c {
                for w in ball(z) {
                    cleared[w] = true;
                }
                found = true;
                break;
            }
        }
        flagged[y] = !found;
    }
    flagged
}

fn report(
    grid: &Grid,
    inner: &[usize],
    inner_radius: f64,
    r: f64,
    delta_alpha: f64,
    flagged: Vec<bool>,
    epsilons: &[f64],
) -> Result<SingularReport> {
    let d = grid.dim();
    let mut centres: Vec<Vec<f64>> = Vec::new();
    for (j, &k) in inner.iter().enumerate() {
        if !flagged[j] {
            continue;
        }
        let x = grid.coords(k);
        let far = centres.iter().all(|c| c.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() > 4.0 * r * r);
        if far {
            centres.push(x);
        }
    }
    let products = epsilons
        .iter()
        .map(|&e| VitaliProduct { epsilon: e, product: centres.len() as f64 * r.powf(d as f64 - e) })
        .collect();

    let mut mask = vec![false; grid.len()];
    for (j, &k) in inner.iter().enumerate() {
        mask[k] = flagged[j];
    }
    let mut scales = Vec::new();
    let mut rho = r;
    while rho <= 2.0 * inner_radius * (1.0 + 1e-9) || scales.len() < 3 {
        scales.push(rho);
        rho *= 2.0;
    }
    let covering = box_dimension(grid, &mask, &scales)?;
    Ok(SingularReport {
        radius: r,
        delta_alpha,
        threshold: delta_alpha / r,
        flagged_count: flagged.iter().filter(|&&b| b).count(),
        inner_count: flagged.len(),
        flagged,
        vitali_count: centres.len(),
        products,
        covering,
    })
}

/// Flags inner node `y` when every inner node `z` with `|z − y| ≤ r` has
/// `Ψ(z) > δ_α/r`, i.e. no node of `B(y, r)` certifies regularity.
pub fn flag_singular(field: &CurvatureField, r: f64, delta_alpha: f64, epsilons: &[f64]) -> Result<SingularReport> {
    let grid = field.grid();
    check_radius(grid, r, delta_alpha)?;
    let psi = field.psi.as_ref().ok_or_else(|| Error::invalid("the field carries no Ψ values"))?;
    if psi.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN in the Ψ field".into()));
    }
    let threshold = delta_alpha / r;
    let flagged = flags_with(grid, &field.inner, r, |j| psi[j] <= threshold);
    report(grid, &field.inner, field.inner_radius, r, delta_alpha, flagged, epsilons)
}

/// [`flag_singular`] without a precomputed field: certificates
/// `Ψ(z) ≤ δ_α/r` are decided by feasibility LPs, only where needed.
pub fn flag_singular_lazy(
    u: &GridFn,
    inner_radius: f64,
    r: f64,
    delta_alpha: f64,
    epsilons: &[f64],
) -> Result<SingularReport> {
    let grid = u.grid();
    check_radius(grid, r, delta_alpha)?;
    ensure(inner_radius > 0.0, || "inner radius must be positive".into())?;
    let inner = grid.nodes_within(inner_radius);
    ensure(!inner.is_empty(), || "no grid nodes inside the inner region".into())?;
    let prob = ContactProblem::new(u);
    let threshold = delta_alpha / r;
    let flagged = flags_with(grid, &inner, r, |j| prob.psi_feasible(inner[j], threshold));
    report(grid, &inner, inner_radius, r, delta_alpha, flagged, epsilons)
}
