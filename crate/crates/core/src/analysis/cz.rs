//! Calderón–Zygmund covering check on dyadic node grids of the unit cube.
//!
//! The unit cube carries `2^m` nodes per axis, one per cell, each of measure
//! `2^{−md}`. Hypotheses, quantified over all dyadic subcubes `Q = Q_{x,r}`:
//!
//! 1. `|D| ≤ δ|Q₁|`;
//! 2. if `Q_{x,3r} ⊆ Q₁` and `|D ∩ Q| ≥ δ|Q|`, then `Q_{x,3r} ⊆ E`.
//!
//! Conclusion: `|D| ≤ δ|E|`.
//!
//! Hypothesis 2 leaves cubes near `∂Q₁` unconstrained, so sets hugging the
//! boundary can satisfy both hypotheses and still violate the conclusion (see
//! the `boundary_layer_breaks_the_conclusion` test). The instance generator
//! keeps `D` in the middle third of its cubes, away from that defect.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;

use crate::error::{ensure, Result};
use crate::rng::Rng;

/// Dyadic node grid `[0, 2^level)^dim` on the unit cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DyadicGrid {
    pub dim: usize,
    pub level: u32,
}

impl DyadicGrid {
    pub fn new(dim: usize, level: u32) -> Result<Self> {
        ensure((1..=3).contains(&dim), || format!("dyadic grids support d ≤ 3, got {dim}"))?;
        ensure((1..=12).contains(&level) && (level as usize) * dim <= 24, || {
            format!("dyadic level {level} out of range for d = {dim}")
        })?;
        Ok(DyadicGrid { dim, level })
    }

    pub fn side(&self) -> usize {
        1 << self.level
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.side() + i)
    }

    fn unindex(&self, mut k: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = k % self.side();
            k /= self.side();
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CzReport {
    pub delta: f64,
    pub d_nodes: usize,
    pub e_nodes: usize,
    pub total_nodes: usize,
    /// The first hypothesis found to fail, if any.
    pub hypothesis_failure: Option<String>,
    /// `|D| ≤ δ|E|`.
    pub conclusion_holds: bool,
    pub cubes_checked: usize,
}

impl CzReport {
    /// Hypotheses hold but the conclusion fails.
    pub fn is_violation(&self) -> bool {
        self.hypothesis_failure.is_none() && !self.conclusion_holds
    }
}

/// Counts of `mask` per cube at every dyadic level, finest first.
fn level_counts(g: DyadicGrid, mask: &[bool]) -> Vec<Vec<u32>> {
    let mut levels = vec![mask.iter().map(|&b| u32::from(b)).collect::<Vec<_>>()];
    let mut idx = vec![0usize; g.dim];
    for j in (0..g.level).rev() {
        let side = 1usize << j;
        let fine = levels.last().expect("nonempty");
        let mut coarse = vec![0u32; side.pow(g.dim as u32)];
        let fine_grid = DyadicGrid { dim: g.dim, level: j + 1 };
        for (k, &c) in fine.iter().enumerate() {
            fine_grid.unindex(k, &mut idx);
            let ck = idx.iter().fold(0, |acc, &i| acc * side + i / 2);
            coarse[ck] += c;
        }
        levels.push(coarse);
    }
    levels
}

/// Checks the hypotheses, then the conclusion, with node-count measure.
pub fn cz_check(g: DyadicGrid, d: &[bool], e: &[bool], delta: f64) -> Result<CzReport> {
    ensure(d.len() == g.len() && e.len() == g.len(), || "masks do not match the grid".into())?;
    ensure(delta > 0.0 && delta < 1.0, || format!("delta must lie in (0, 1), got {delta}"))?;
    ensure(d.iter().zip(e).all(|(&a, &b)| !a || b), || "D is not contained in E".into())?;
    let d_nodes = d.iter().filter(|&&b| b).count();
    let e_nodes = e.iter().filter(|&&b| b).count();
    let total = g.len();
    let mut report = CzReport {
        delta,
        d_nodes,
        e_nodes,
        total_nodes: total,
        hypothesis_failure: None,
        conclusion_holds: d_nodes as f64 <= delta * e_nodes as f64,
        cubes_checked: 0,
    };
    if d_nodes as f64 > delta * total as f64 {
        report.hypothesis_failure = Some(format!("|D| = {d_nodes} exceeds δ|Q₁| = {}", delta * total as f64));
        return Ok(report);
    }

    let dc = level_counts(g, d);
    let ec = level_counts(g, e);
    let mut idx = vec![0usize; g.dim];
    let mut nb = vec![0usize; g.dim];
    // Level j cubes have side 2^{−j}; levels[m − j] holds their counts.
    for j in 0..=g.level {
        let side = 1usize << j;
        let cube_nodes = 1u64 << ((g.level - j) as u64 * g.dim as u64);
        let lg = DyadicGrid { dim: g.dim, level: j };
        let (dl, el) = (&dc[(g.level - j) as usize], &ec[(g.level - j) as usize]);
        for (k, &count) in dl.iter().enumerate() {
            lg.unindex(k, &mut idx);
            // Q_{x,3r} ⊆ Q₁ iff every same-level neighbour exists.
            if idx.iter().any(|&i| i == 0 || i + 1 == side) {
                continue;
            }
            report.cubes_checked += 1;
            if (count as f64) < delta * cube_nodes as f64 {
                continue;
            }
            let mut full = true;
            for m in 0..3usize.pow(g.dim as u32) {
                let mut t = m;
                for a in 0..g.dim {
                    nb[a] = idx[a] + t % 3 - 1;
                    t /= 3;
                }
                if el[nb.iter().fold(0, |acc, &i| acc * side + i)] as u64 != cube_nodes {
                    full = false;
                    break;
                }
            }
            if !full {
                report.hypothesis_failure =
                    Some(format!("cube {idx:?} at level {j} has |D∩Q| ≥ δ|Q| but its triple is not inside E"));
                return Ok(report);
            }
        }
    }
    Ok(report)
}

/// A random hypothesis-satisfying instance: a random family of disjoint
/// dyadic cubes (side ≥ 4 nodes) forms `E`; `D` takes at most a `δ`-fraction
/// of the nodes in the middle third of each.
pub fn cz_instance(g: DyadicGrid, delta: f64, rng: &mut Rng) -> (Vec<bool>, Vec<bool>) {
    let mut d = vec![false; g.len()];
    let mut e = vec![false; g.len()];
    let mut stack = vec![(0u32, vec![0usize; g.dim])];
    let mut idx = vec![0usize; g.dim];
    while let Some((j, corner)) = stack.pop() {
        let cube_side = 1usize << (g.level - j);
        let can_split = cube_side >= 8;
        if can_split && rng.random_bool(if j == 0 { 1.0 } else { 0.6 }) {
            for c in 0..(1usize << g.dim) {
                let child: Vec<usize> = (0..g.dim).map(|a| corner[a] * 2 + ((c >> a) & 1)).collect();
                stack.push((j + 1, child));
            }
            continue;
        }
        if !rng.random_bool(0.5) {
            continue;
        }
        // Mark the cube; collect the middle third of its nodes.
        let lo = cube_side.div_ceil(3);
        let hi = (2 * cube_side) / 3;
        let mut middle = Vec::new();
        for m in 0..cube_side.pow(g.dim as u32) {
            let mut t = m;
            let mut inside = true;
            for a in 0..g.dim {
                let off = t % cube_side;
                t /= cube_side;
                idx[a] = corner[a] * cube_side + off;
                inside &= off >= lo && off < hi;
            }
            let k = g.index(&idx);
            e[k] = true;
            if inside {
                middle.push(k);
            }
        }
        let take = ((delta * middle.len() as f64).floor() as usize).min(middle.len());
        let take = rng.random_range(0..=take);
        middle.shuffle(rng);
        for &k in &middle[..take] {
            d[k] = true;
        }
    }
    (d, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn trivial_cases() {
        let g = DyadicGrid::new(2, 4).unwrap();
        let none = vec![false; g.len()];
        let all = vec![true; g.len()];
        let r = cz_check(g, &none, &all, 0.3).unwrap();
        assert!(r.conclusion_holds && r.hypothesis_failure.is_none());
        let r = cz_check(g, &all, &all, 0.5).unwrap();
        assert!(r.hypothesis_failure.unwrap().contains("δ|Q₁|"));
        assert!(cz_check(g, &all, &none, 0.5).is_err());
    }

    #[test]
    fn dense_interior_cube_needs_its_triple() {
        let g = DyadicGrid::new(2, 3).unwrap();
        let mut d = vec![false; g.len()];
        d[g.index(&[3, 3])] = true;
        let e = d.clone();
        let r = cz_check(g, &d, &e, 0.3).unwrap();
        assert!(r.hypothesis_failure.is_some());
        let mut e = vec![false; g.len()];
        for i in 2..5 {
            for j in 2..5 {
                e[g.index(&[i, j])] = true;
            }
        }
        let r = cz_check(g, &d, &e, 0.3).unwrap();
        assert!(r.hypothesis_failure.is_none() && r.conclusion_holds);
    }

    #[test]
    fn boundary_layer_breaks_the_conclusion() {
        // D = E = one-node layer along x₁ = 0: no cube whose triple stays in
        // Q₁ meets D, so both hypotheses hold, yet |D| > δ|E|.
        let g = DyadicGrid::new(2, 5).unwrap();
        let mut d = vec![false; g.len()];
        for j in 0..g.side() {
            d[g.index(&[0, j])] = true;
        }
        let r = cz_check(g, &d, &d.clone(), 0.1).unwrap();
        assert!(r.is_violation());
    }

    #[test]
    fn generated_instances_satisfy_hypotheses() {
        for (dim, level) in [(2, 6), (1, 8), (3, 4)] {
            let g = DyadicGrid::new(dim, level).unwrap();
            let mut r = rng::stream(42, dim as u64);
            for _ in 0..50 {
                let delta = r.random_range(0.05..0.9);
                let (d, e) = cz_instance(g, delta, &mut r);
                let rep = cz_check(g, &d, &e, delta).unwrap();
                assert!(rep.hypothesis_failure.is_none(), "{:?}", rep.hypothesis_failure);
                assert!(rep.conclusion_holds);
            }
        }
    }
}
