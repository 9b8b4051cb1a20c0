//! Low-dimensional linear programming.
//!
//! [`seidel`] is the randomized incremental algorithm: expected `O(k!·m)` for
//! `m` constraints in `k` unknowns, exact up to rounding. All unknowns live in
//! the box `[-BOX, BOX]^k`, which keeps every subproblem bounded.
//!
//! Curvature fields need LPs with one constraint per grid node (hundreds of
//! thousands), of which only a handful are ever tight. [`cutting_plane`]
//! solves such problems on a small working set, scans the full constraint
//! family for violations, adds the worst offenders and repeats.

use rand::seq::SliceRandom;

use crate::rng::{self, Rng};

/// Half-width of the bounding box for every unknown.
pub const BOX: f64 = 1e9;
/// Relative feasibility slack.
pub const SLACK: f64 = 1e-12;

/// Explicit list of half-spaces `a·z ≤ b`.
#[derive(Clone, Debug, Default)]
pub struct LpInstance {
    n_vars: usize,
    rows: Vec<f64>,
}

impl LpInstance {
    pub fn new(n_vars: usize) -> Self {
        assert!(n_vars >= 1);
        LpInstance { n_vars, rows: Vec::new() }
    }

    /// Adds `normal·z ≤ offset`.
    pub fn push(&mut self, normal: &[f64], offset: f64) {
        assert_eq!(normal.len(), self.n_vars);
        self.rows.extend_from_slice(normal);
        self.rows.push(offset);
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn len(&self) -> usize {
        self.rows.len() / (self.n_vars + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        let s = self.n_vars + 1;
        &self.rows[i * s..(i + 1) * s]
    }

    /// Maximizes `c·z`; `None` if infeasible.
    pub fn maximize(&self, c: &[f64], seed: u64) -> Option<Vec<f64>> {
        let mut rng = rng::stream(seed, 0x5e1de1);
        cutting_plane(self, c, &[], &[], &mut rng)
    }

    /// Whether some `z` in the box satisfies every row.
    pub fn is_feasible(&self, seed: u64) -> bool {
        self.maximize(&vec![0.0; self.n_vars], seed).is_some()
    }
}

/// Feasibility of an explicit instance.
pub fn lp_feasible(inst: &LpInstance, seed: u64) -> bool {
    inst.is_feasible(seed)
}

/// A (possibly huge) family of half-spaces that can be scanned for violations.
pub trait RowSource {
    fn n_vars(&self) -> usize;
    /// Writes the normal of row `i` into `out` and returns its offset.
    fn row(&self, i: usize, out: &mut [f64]) -> f64;
    /// Pushes `(violation, i)` for every row violated at `z` beyond the slack.
    fn violations(&self, z: &[f64], out: &mut Vec<(f64, usize)>);
}

impl RowSource for LpInstance {
    fn n_vars(&self) -> usize {
        self.n_vars
    }

    fn row(&self, i: usize, out: &mut [f64]) -> f64 {
        let r = self.row(i);
        out.copy_from_slice(&r[..self.n_vars]);
        r[self.n_vars]
    }

    fn violations(&self, z: &[f64], out: &mut Vec<(f64, usize)>) {
        for i in 0..self.len() {
            let r = self.row(i);
            let (a, b) = r.split_at(self.n_vars);
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let (excess, mag) = excess(a, b[0], z);
            if excess > SLACK * (1.0 + mag) {
                out.push((excess / norm, i));
            }
        }
    }
}

/// `(a·z − b, |b| + Σ|a_l z_l|)`.
#[inline]
fn excess(a: &[f64], b: f64, z: &[f64]) -> (f64, f64) {
    let mut s = 0.0;
    let mut mag = b.abs();
    for (ai, zi) in a.iter().zip(z) {
        let t = ai * zi;
        s += t;
        mag += t.abs();
    }
    (s - b, mag)
}

/// Rows added to the working set per round.
fn batch(n_vars: usize) -> usize {
    2 * n_vars
}

const MAX_ROUNDS: usize = 10_000;

/// Maximizes `c·z` over the rows of `src` plus the explicit `fixed` rows
/// (stride `n_vars + 1`), starting from the working set `init`.
pub fn cutting_plane(
    src: &impl RowSource,
    c: &[f64],
    fixed: &[f64],
    init: &[usize],
    rng: &mut Rng,
) -> Option<Vec<f64>> {
    let k = src.n_vars();
    let stride = k + 1;
    let mut rows: Vec<f64> = fixed.to_vec();
    let mut members: Vec<usize> = Vec::with_capacity(init.len() + 16);
    let mut buf = vec![0.0; k];
    let mut add = |i: usize, rows: &mut Vec<f64>, members: &mut Vec<usize>| {
        if members.contains(&i) {
            return false;
        }
        let b = src.row(i, &mut buf);
        rows.extend_from_slice(&buf);
        rows.push(b);
        members.push(i);
        true
    };
    for &i in init {
        add(i, &mut rows, &mut members);
    }
    let mut found = Vec::new();
    for _ in 0..MAX_ROUNDS {
        debug_assert_eq!(rows.len() % stride, 0);
        let z = seidel(k, c, &rows, rng)?;
        found.clear();
        src.violations(&z, &mut found);
        if found.is_empty() {
            return Some(z);
        }
        found.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut added = 0;
        for &(_, i) in found.iter() {
            if add(i, &mut rows, &mut members) {
                added += 1;
                if added == batch(k) {
                    break;
                }
            }
        }
        if added == 0 {
            // Every violated row is already in the working set: the residual
            // violation is rounding inside the recursion.
            return Some(z);
        }
    }
    None
}

#[inline]
fn violated(a: &[f64], b: f64, z: &[f64]) -> bool {
    let (e, mag) = excess(a, b, z);
    e > SLACK * (1.0 + mag)
}

/// Seidel's algorithm: maximize `c·z` subject to `rows` (stride `k + 1`) and
/// the box. Returns `None` when infeasible.
pub fn seidel(k: usize, c: &[f64], rows: &[f64], rng: &mut Rng) -> Option<Vec<f64>> {
    debug_assert_eq!(c.len(), k);
    if k == 1 {
        return solve_1d(c[0], rows);
    }
    let stride = k + 1;
    let m = rows.len() / stride;
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut z: Vec<f64> = c
        .iter()
        .map(|&ci| {
            if ci > 0.0 {
                BOX
            } else if ci < 0.0 {
                -BOX
            } else {
                0.0
            }
        })
        .collect();
    let mut unit = vec![0.0; k];
    for pos in 0..m {
        let row = &rows[order[pos] * stride..(order[pos] + 1) * stride];
        let (a, b) = (&row[..k], row[k]);
        if !violated(a, b, &z) {
            continue;
        }
        // The new optimum lies on a·z = b: eliminate the best-conditioned unknown.
        let mut j = 0;
        for l in 1..k {
            if a[l].abs() > a[j].abs() {
                j = l;
            }
        }
        let aj = a[j];
        if aj == 0.0 {
            return None;
        }
        let mut sub = Vec::with_capacity((pos + 2) * k);
        for &r in &order[..pos] {
            let rr = &rows[r * stride..(r + 1) * stride];
            reduce_row(&rr[..k], rr[k], a, b, j, &mut sub);
        }
        for sign in [1.0, -1.0] {
            unit.iter_mut().for_each(|v| *v = 0.0);
            unit[j] = sign;
            reduce_row(&unit, BOX, a, b, j, &mut sub);
        }
        let sub_c: Vec<f64> = (0..k).filter(|&l| l != j).map(|l| c[l] - c[j] * a[l] / aj).collect();
        let zs = seidel(k - 1, &sub_c, &sub, rng)?;
        let mut it = zs.into_iter();
        let mut rest = b;
        for l in 0..k {
            if l != j {
                z[l] = it.next().unwrap();
                rest -= a[l] * z[l];
            }
        }
        z[j] = rest / aj;
    }
    Some(z)
}

/// Substitutes `z_j = (b − Σ_{l≠j} a_l z_l)/a_j` into `r·z ≤ rb` and appends
/// the reduced, rescaled row to `out`.
fn reduce_row(r: &[f64], rb: f64, a: &[f64], b: f64, j: usize, out: &mut Vec<f64>) {
    let f = r[j] / a[j];
    let start = out.len();
    let mut scale = 0.0f64;
    for l in 0..r.len() {
        if l == j {
            continue;
        }
        let raw = r[l] - f * a[l];
        // Cancellation noise between (nearly) parallel rows is snapped to 0.
        let v = if raw.abs() <= 1e-13 * (r[l].abs() + (f * a[l]).abs()) { 0.0 } else { raw };
        scale = scale.max(v.abs());
        out.push(v);
    }
    out.push(rb - f * b);
    if scale > 0.0 {
        out[start..].iter_mut().for_each(|v| *v /= scale);
    }
}

fn solve_1d(c: f64, rows: &[f64]) -> Option<Vec<f64>> {
    let (mut lo, mut hi) = (-BOX, BOX);
    for r in rows.chunks_exact(2) {
        let (a, b) = (r[0], r[1]);
        if a == 0.0 {
            if b < -SLACK * (1.0 + b.abs()) {
                return None;
            }
        } else if a > 0.0 {
            hi = hi.min(b / a);
        } else {
            lo = lo.max(b / a);
        }
    }
    if lo > hi {
        if lo - hi > SLACK * (1.0 + lo.abs() + hi.abs()) {
            return None;
        }
        return Some(vec![0.5 * (lo + hi)]);
    }
    let z = if c > 0.0 {
        hi
    } else if c < 0.0 {
        lo
    } else {
        0.0f64.clamp(lo, hi)
    };
    Some(vec![z])
}
