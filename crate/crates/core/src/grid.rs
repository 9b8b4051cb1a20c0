//! Uniform grids on `[-L, L]^d`, grid functions, finite differences, discrete
//! convex envelopes and the ABP measurement.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::lp::{cutting_plane, RowSource, SLACK};
use crate::error::{ensure, Error, Result};
use crate::rng;
use crate::symmat::{SymMat, MAX_DIM};

/// Region of the box on which a grid function lives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `{|x| ≤ radius}`.
    Ball { radius: f64 },
    /// `{max_i |x_i| ≤ half_side}`.
    Cube { half_side: f64 },
}

impl Domain {
    fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Domain::Ball { radius } => x.iter().map(|v| v * v).sum::<f64>() <= radius * radius * (1.0 + 1e-12),
            Domain::Cube { half_side } => x.iter().all(|v| v.abs() <= half_side * (1.0 + 1e-12)),
        }
    }

    fn extent(&self) -> f64 {
        match *self {
            Domain::Ball { radius } => radius,
            Domain::Cube { half_side } => half_side,
        }
    }
}

const OUTSIDE: u8 = 0;
const INTERIOR: u8 = 1;
const BOUNDARY: u8 = 2;

/// Nodes `x = (i − n)·h`, `i ∈ {0, …, 2n}^d`, `h = L/n`, stored in
/// lexicographic order (first index slowest).
#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_width: f64,
    domain: Domain,
    h: f64,
    side: usize,
    strides: [usize; MAX_DIM],
    mask: Arc<Vec<u8>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("half_width", &self.half_width)
            .field("domain", &self.domain)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec() == other.spec()
    }
}

/// Serializable grid description (also the CSV sidecar).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "one")]
    pub half_width: f64,
    #[serde(default)]
    pub domain: Option<Domain>,
}

fn one() -> f64 {
    1.0
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        let domain = self.domain.unwrap_or(Domain::Ball { radius: self.half_width });
        Grid::new(self.dim, self.n, self.half_width, domain)
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64, domain: Domain) -> Result<Self> {
        ensure((1..=MAX_DIM).contains(&dim), || format!("dimension {dim} not in 1..=8"))?;
        ensure(n >= 2, || format!("resolution too small: n = {n} < 2"))?;
        ensure(half_width.is_finite() && half_width > 0.0, || "half width must be positive".into())?;
        let extent = domain.extent();
        ensure(extent.is_finite() && extent > 0.0 && extent <= half_width * (1.0 + 1e-12), || {
            format!("domain extent {extent} must lie in (0, {half_width}]")
        })?;
        let side = 2 * n + 1;
        let total = side
            .checked_pow(dim as u32)
            .filter(|&t| t <= 200_000_000)
            .ok_or_else(|| Error::invalid("grid too large"))?;
        let mut strides = [0usize; MAX_DIM];
        let mut s = 1;
        for a in (0..dim).rev() {
            strides[a] = s;
            s *= side;
        }
        let mut g =
            Grid { dim, n, half_width, domain, h: half_width / n as f64, side, strides, mask: Arc::new(Vec::new()) };
        let mut x = [0.0; MAX_DIM];
        let inside: Vec<bool> = (0..total)
            .map(|k| {
                g.coords_into(k, &mut x);
                domain.contains(&x[..dim])
            })
            .collect();
        let mut idx = [0usize; MAX_DIM];
        let mask = (0..total)
            .map(|k| {
                if !inside[k] {
                    return OUTSIDE;
                }
                g.indices_into(k, &mut idx);
                let on_edge = (0..dim)
                    .any(|a| idx[a] == 0 || idx[a] + 1 == side || !inside[k - strides[a]] || !inside[k + strides[a]]);
                if on_edge {
                    BOUNDARY
                } else {
                    INTERIOR
                }
            })
            .collect();
        g.mask = Arc::new(mask);
        Ok(g)
    }

    /// Ball of radius `radius` on the box `[-radius, radius]^d`.
    pub fn ball(dim: usize, n: usize, radius: f64) -> Result<Self> {
        Self::new(dim, n, radius, Domain::Ball { radius })
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { dim: self.dim, n: self.n, half_width: self.half_width, domain: Some(self.domain) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Nodes per axis.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    #[inline]
    pub fn index_of(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    #[inline]
    pub fn indices_into(&self, k: usize, out: &mut [usize]) {
        let mut r = k;
        for a in 0..self.dim {
            out[a] = r / self.strides[a];
            r %= self.strides[a];
        }
    }

    pub fn indices(&self, k: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        self.indices_into(k, &mut out);
        out
    }

    #[inline]
    pub fn coord_of_index(&self, i: usize) -> f64 {
        (i as f64 - self.n as f64) * self.h
    }

    #[inline]
    pub fn coords_into(&self, k: usize, out: &mut [f64]) {
        let mut r = k;
        for a in 0..self.dim {
            out[a] = self.coord_of_index(r / self.strides[a]);
            r %= self.strides[a];
        }
    }

    pub fn coords(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.coords_into(k, &mut out);
        out
    }

    pub fn norm(&self, k: usize) -> f64 {
        let mut x = [0.0; MAX_DIM];
        self.coords_into(k, &mut x);
        x[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Node at the origin.
    pub fn center(&self) -> usize {
        self.index_of(&vec![self.n; self.dim])
    }

    #[inline]
    pub fn in_domain(&self, k: usize) -> bool {
        self.mask[k] != OUTSIDE
    }

    /// In-domain node with an axis neighbour outside the domain.
    #[inline]
    pub fn is_boundary(&self, k: usize) -> bool {
        self.mask[k] == BOUNDARY
    }

    #[inline]
    pub fn is_interior(&self, k: usize) -> bool {
        self.mask[k] == INTERIOR
    }

    /// Node at integer offset `off` from `k`, if inside the box.
    pub fn shift(&self, k: usize, off: &[isize]) -> Option<usize> {
        let mut idx = [0usize; MAX_DIM];
        self.indices_into(k, &mut idx);
        let mut out = 0usize;
        for a in 0..self.dim {
            let i = idx[a] as isize + off[a];
            if i < 0 || i >= self.side as isize {
                return None;
            }
            out += i as usize * self.strides[a];
        }
        Some(out)
    }

    /// In-domain node at offset `off` from `k`.
    pub fn shift_in_domain(&self, k: usize, off: &[isize]) -> Option<usize> {
        self.shift(k, off).filter(|&j| self.in_domain(j))
    }

    pub fn domain_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.in_domain(k)).collect()
    }

    /// In-domain nodes with `|x| ≤ radius` (with a rounding guard).
    pub fn nodes_within(&self, radius: f64) -> Vec<usize> {
        let r2 = radius * radius * (1.0 + 1e-12);
        let mut x = [0.0; MAX_DIM];
        (0..self.len())
            .filter(|&k| {
                self.in_domain(k) && {
                    self.coords_into(k, &mut x);
                    x[..self.dim].iter().map(|v| v * v).sum::<f64>() <= r2
                }
            })
            .collect()
    }

    /// All offsets in `{-r, …, r}^d \ {0}`.
    pub fn offsets(&self, r: isize) -> Vec<Vec<isize>> {
        let mut out = Vec::new();
        let width = (2 * r + 1) as usize;
        let total = width.pow(self.dim as u32);
        for t in 0..total {
            let mut rem = t;
            let mut off = vec![0isize; self.dim];
            for a in (0..self.dim).rev() {
                off[a] = (rem % width) as isize - r;
                rem /= width;
            }
            if off.iter().any(|&v| v != 0) {
                out.push(off);
            }
        }
        out
    }
}

/// Real values on the nodes of a grid. Nodes outside the domain carry 0 and
/// are never read by domain-aware routines.
#[derive(Clone, Debug)]
pub struct GridFn {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFn {
    /// Evaluates `f` at every in-domain node.
    pub fn sample(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut x = [0.0; MAX_DIM];
        let mut values = vec![0.0; grid.len()];
        for (k, v) in values.iter_mut().enumerate() {
            if grid.in_domain(k) {
                grid.coords_into(k, &mut x);
                *v = f(&x[..grid.dim]);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("sampled value at node {:?}", grid.coords(k))));
                }
            }
        }
        Ok(GridFn { grid: grid.clone(), values })
    }

    pub fn from_values(grid: &Grid, mut values: Vec<f64>) -> Result<Self> {
        ensure(values.len() == grid.len(), || format!("expected {} values, got {}", grid.len(), values.len()))?;
        for (k, v) in values.iter_mut().enumerate() {
            if grid.in_domain(k) {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("value at node {:?}", grid.coords(k))));
                }
            } else {
                *v = 0.0;
            }
        }
        Ok(GridFn { grid: grid.clone(), values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFn {
        let values =
            self.values.iter().enumerate().map(|(k, &v)| if self.grid.in_domain(k) { f(v) } else { 0.0 }).collect();
        GridFn { grid: self.grid.clone(), values }
    }

    /// `sup |u|` over the domain.
    pub fn sup_abs(&self) -> f64 {
        (0..self.values.len()).filter(|&k| self.grid.in_domain(k)).fold(0.0, |a, k| a.max(self.values[k].abs()))
    }

    /// CSV with header `i1..id,x1..xd,value`, one row per in-domain node in
    /// lexicographic order.
    pub fn to_csv(&self) -> String {
        let d = self.grid.dim;
        let mut s = String::new();
        let head: Vec<String> = (1..=d)
            .map(|a| format!("i{a}"))
            .chain((1..=d).map(|a| format!("x{a}")))
            .chain(std::iter::once("value".to_string()))
            .collect();
        s.push_str(&head.join(","));
        s.push('\n');
        let mut idx = [0usize; MAX_DIM];
        for k in 0..self.values.len() {
            if !self.grid.in_domain(k) {
                continue;
            }
            self.grid.indices_into(k, &mut idx);
            for &i in &idx[..d] {
                let _ = write!(s, "{i},");
            }
            for &i in &idx[..d] {
                let _ = write!(s, "{:?},", self.grid.coord_of_index(i));
            }
            let _ = writeln!(s, "{:?}", self.values[k]);
        }
        s
    }

    /// Writes `<stem>.csv` and the grid sidecar `<stem>.json`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        let sidecar = serde_json::to_string_pretty(&self.grid.spec())?;
        std::fs::write(dir.join(format!("{stem}.json")), sidecar + "\n")?;
        Ok(())
    }

    /// Parses CSV produced by [`GridFn::to_csv`] against a known grid.
    pub fn from_csv(grid: &Grid, text: &str) -> Result<Self> {
        let d = grid.dim;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::invalid("empty CSV"))?;
        ensure(header.split(',').count() == 2 * d + 1, || "CSV header does not match grid dimension".into())?;
        let mut values = vec![0.0; grid.len()];
        let mut seen = vec![false; grid.len()];
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            ensure(fields.len() == 2 * d + 1, || format!("CSV line {} has wrong arity", ln + 2))?;
            let mut idx = vec![0usize; d];
            for a in 0..d {
                idx[a] = fields[a]
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad index on CSV line {}", ln + 2)))?;
                ensure(idx[a] < grid.side, || format!("index out of range on CSV line {}", ln + 2))?;
            }
            let k = grid.index_of(&idx);
            ensure(grid.in_domain(k), || format!("CSV line {} is outside the domain", ln + 2))?;
            let v: f64 = fields[2 * d]
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad value on CSV line {}", ln + 2)))?;
            values[k] = v;
            seen[k] = true;
        }
        ensure((0..grid.len()).all(|k| !grid.in_domain(k) || seen[k]), || {
            "CSV does not cover every domain node".into()
        })?;
        GridFn::from_values(grid, values)
    }

    /// Reads `<stem>.json` and `<stem>.csv`.
    pub fn read(dir: &Path, stem: &str) -> Result<Self> {
        let spec: GridSpec = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let grid = spec.build()?;
        GridFn::from_csv(&grid, &std::fs::read_to_string(dir.join(format!("{stem}.csv")))?)
    }
}

/// Discrete gradient, one [`GridFn`] per axis: central differences where both
/// axis neighbours are in the domain, second-order one-sided differences
/// otherwise.
pub fn fd_gradient(u: &GridFn) -> Result<Vec<GridFn>> {
    let g = &u.grid;
    let h = g.h;
    let mut out = Vec::with_capacity(g.dim);
    for a in 0..g.dim {
        let mut off = vec![0isize; g.dim];
        let mut vals = vec![0.0; g.len()];
        let mut isolated = Vec::new();
        for k in 0..g.len() {
            if !g.in_domain(k) {
                continue;
            }
            let nb = |t: isize, off: &mut Vec<isize>| {
                off[a] = t;
                g.shift_in_domain(k, off).map(|j| u.values[j])
            };
            let (p1, m1) = (nb(1, &mut off), nb(-1, &mut off));
            vals[k] = match (p1, m1) {
                (Some(p), Some(m)) => (p - m) / (2.0 * h),
                (Some(p), None) => match nb(2, &mut off) {
                    Some(p2) => (-3.0 * u.values[k] + 4.0 * p - p2) / (2.0 * h),
                    None => (p - u.values[k]) / h,
                },
                (None, Some(m)) => match nb(-2, &mut off) {
                    Some(m2) => (3.0 * u.values[k] - 4.0 * m + m2) / (2.0 * h),
                    None => (u.values[k] - m) / h,
                },
                (None, None) => {
                    isolated.push(k);
                    continue;
                }
            };
        }
        // Nodes with no neighbour along this axis (tips of a ball) copy the
        // value of the neighbour one step towards the centre.
        for &k in &isolated {
            let mut j = k;
            let mut found = None;
            for _ in 0..g.n {
                let x = g.coords(j);
                let b = (0..g.dim).max_by(|&p, &q| x[p].abs().total_cmp(&x[q].abs())).unwrap();
                let mut step = vec![0isize; g.dim];
                step[b] = if x[b] > 0.0 { -1 } else { 1 };
                match g.shift_in_domain(j, &step) {
                    Some(next) => j = next,
                    None => break,
                }
                if !isolated.contains(&j) {
                    found = Some(vals[j]);
                    break;
                }
            }
            vals[k] = found.ok_or_else(|| {
                Error::invalid(format!("node {:?} has no usable neighbour along axis {a}", g.coords(k)))
            })?;
        }
        out.push(GridFn { grid: g.clone(), values: vals });
    }
    Ok(out)
}

/// Central-difference Hessian at every node whose `±e_i` and `±e_i ± e_j`
/// neighbours are in the domain; `None` elsewhere. Exact on quadratics.
pub fn fd_hessian(u: &GridFn) -> Vec<Option<SymMat>> {
    let g = &u.grid;
    let d = g.dim;
    let h2 = g.h * g.h;
    let mut off = vec![0isize; d];
    (0..g.len())
        .map(|k| {
            if !g.in_domain(k) {
                return None;
            }
            let mut at = |pairs: &[(usize, isize)]| {
                off.iter_mut().for_each(|v| *v = 0);
                for &(a, t) in pairs {
                    off[a] += t;
                }
                g.shift_in_domain(k, &off).map(|j| u.values[j])
            };
            let mut m = SymMat::zeros(d);
            let c = u.values[k];
            for i in 0..d {
                let (p, q) = (at(&[(i, 1)])?, at(&[(i, -1)])?);
                m.set(i, i, (p - 2.0 * c + q) / h2);
                for j in i + 1..d {
                    let pp = at(&[(i, 1), (j, 1)])?;
                    let pm = at(&[(i, 1), (j, -1)])?;
                    let mp = at(&[(i, -1), (j, 1)])?;
                    let mm = at(&[(i, -1), (j, -1)])?;
                    m.set(i, j, (pp - pm - mp + mm) / (4.0 * h2));
                }
            }
            Some(m)
        })
        .collect()
}

/// In-domain nodes of a grid function in a flat, cache-friendly layout.
#[derive(Clone, Debug)]
pub struct NodeCloud {
    pub dim: usize,
    /// Grid index of each cloud point.
    pub nodes: Vec<usize>,
    /// `coords[a][i]` = coordinate `a` of point `i`.
    pub coords: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Grid index → cloud position (`u32::MAX` if absent).
    pub position: Vec<u32>,
}

impl NodeCloud {
    /// Cloud of the given nodes (sorted, in-domain) with values from `u`.
    pub fn new(u: &GridFn, nodes: Vec<usize>) -> Self {
        let g = &u.grid;
        let mut coords = vec![Vec::with_capacity(nodes.len()); g.dim];
        let mut position = vec![u32::MAX; g.len()];
        let mut x = [0.0; MAX_DIM];
        for (p, &k) in nodes.iter().enumerate() {
            g.coords_into(k, &mut x);
            for a in 0..g.dim {
                coords[a].push(x[a]);
            }
            position[k] = p as u32;
        }
        let values = nodes.iter().map(|&k| u.values[k]).collect();
        NodeCloud { dim: g.dim, nodes, coords, values, position }
    }

    /// Cloud of all in-domain nodes.
    pub fn of_domain(u: &GridFn) -> Self {
        Self::new(u, u.grid.domain_nodes())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn point(&self, p: usize) -> Vec<f64> {
        (0..self.dim).map(|a| self.coords[a][p]).collect()
    }

    /// Cloud positions of grid nodes at Chebyshev offsets `≤ r` from `k`
    /// (excluding `k`).
    pub fn neighbours(&self, grid: &Grid, k: usize, offsets: &[Vec<isize>]) -> Vec<usize> {
        offsets
            .iter()
            .filter_map(|off| grid.shift(k, off))
            .filter_map(|j| {
                let p = self.position[j];
                (p != u32::MAX).then_some(p as usize)
            })
            .collect()
    }
}

/// Rows `(y − x)·s + c ≤ w(y)` of the max-affine LP at `x`.
struct EnvelopeRows<'a> {
    cloud: &'a NodeCloud,
    x: Vec<f64>,
}

impl RowSource for EnvelopeRows<'_> {
    fn n_vars(&self) -> usize {
        self.cloud.dim + 1
    }

    fn row(&self, i: usize, out: &mut [f64]) -> f64 {
        let d = self.cloud.dim;
        for a in 0..d {
            out[a] = self.cloud.coords[a][i] - self.x[a];
        }
        out[d] = 1.0;
        self.cloud.values[i]
    }

    fn violations(&self, z: &[f64], out: &mut Vec<(f64, usize)>) {
        let d = self.cloud.dim;
        let c = z[d];
        for i in 0..self.cloud.len() {
            let mut lin = c;
            let mut mag = c.abs();
            let mut r2 = 1.0;
            for a in 0..d {
                let dy = self.cloud.coords[a][i] - self.x[a];
                lin += dy * z[a];
                mag += (dy * z[a]).abs();
                r2 += dy * dy;
            }
            let w = self.cloud.values[i];
            let e = lin - w;
            if e > SLACK * (1.0 + mag + w.abs()) {
                out.push((e / r2.sqrt(), i));
            }
        }
    }
}

/// Lower convex envelope and contact flag at one cloud point.
fn envelope_at(cloud: &NodeCloud, grid: &Grid, p: usize, offsets: &[Vec<isize>], tol: f64) -> (f64, bool) {
    let d = cloud.dim;
    let rows = EnvelopeRows { cloud, x: cloud.point(p) };
    let mut init = vec![p];
    init.extend(cloud.neighbours(grid, cloud.nodes[p], offsets));
    let mut c = vec![0.0; d + 1];
    c[d] = 1.0;
    let mut rng = rng::stream(0xE4E1, cloud.nodes[p] as u64);
    let z = cutting_plane(&rows, &c, &[], &init, &mut rng).expect("max-affine LP is feasible for finite data");
    let env = z[d].min(cloud.values[p]);
    (env, env >= cloud.values[p] - tol)
}

/// Discrete lower convex envelope.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub envelope: GridFn,
    /// `envelope(x) ≥ w(x) − tol_contact`.
    pub contact: Vec<bool>,
}

/// `tol_contact = 1e-9·(1 + ‖w‖_∞)`.
pub fn contact_tolerance(w: &GridFn) -> f64 {
    1e-9 * (1.0 + w.sup_abs())
}

/// Envelope `Γ_w(x) = max{ℓ(x) : ℓ affine, ℓ ≤ w at every domain node}`,
/// computed by an exact LP per node.
pub fn convex_envelope(w: &GridFn) -> Envelope {
    let cloud = NodeCloud::of_domain(w);
    let tol = contact_tolerance(w);
    let offsets = w.grid.offsets(1);
    let res: Vec<(f64, bool)> =
        (0..cloud.len()).into_par_iter().map(|p| envelope_at(&cloud, &w.grid, p, &offsets, tol)).collect();
    let mut values = vec![0.0; w.grid.len()];
    let mut contact = vec![false; w.grid.len()];
    for (p, &k) in cloud.nodes.iter().enumerate() {
        values[k] = res[p].0;
        contact[k] = res[p].1;
    }
    Envelope { envelope: GridFn { grid: w.grid.clone(), values }, contact }
}

/// Contact flags of the envelope of `w` at selected grid nodes.
pub fn contact_at(w: &GridFn, nodes: &[usize]) -> Vec<bool> {
    let cloud = NodeCloud::of_domain(w);
    let tol = contact_tolerance(w);
    let offsets = w.grid.offsets(1);
    nodes
        .par_iter()
        .map(|&k| {
            let p = cloud.position[k];
            assert!(p != u32::MAX, "node outside the domain");
            envelope_at(&cloud, &w.grid, p as usize, &offsets, tol).1
        })
        .collect()
}

/// Result of [`abp_check`].
#[derive(Clone, Debug, Serialize)]
pub struct AbpReport {
    pub sup_neg: f64,
    /// `(Σ_contact f⁻(x)^d h^d)^{1/d}` over contact nodes in `B_R`.
    pub f_norm: f64,
    pub contact_nodes: usize,
    /// `sup u⁻ / (R·f_norm)`; 0 when `u ≥ 0`, `+∞` when the contact set misses
    /// the support of `f⁻`.
    pub c_meas: f64,
}

/// Grid on `[-2R, 2R]^d` with ball domain `B_{2R}`, as needed by [`abp_check`].
pub fn abp_grid(dim: usize, n: usize, radius: f64) -> Result<Grid> {
    Grid::ball(dim, n, 2.0 * radius)
}

/// Measures the ABP constant `sup_{B_R} u⁻ / (R·‖f⁻‖_{L^d(contact)})`.
///
/// `u` and `f` live on a grid whose domain contains `B_{2R}`; only their
/// values on `B_R` are used. The envelope is that of `−u⁻` extended by zero to
/// `B_{2R}`. The forcing enters through `f⁻ = max(0, −f)`: for a supersolution
/// `P⁺(D²u) ≥ f` the contact set is where `u` is bent upward and `f ≤ 0`.
pub fn abp_check(u: &GridFn, f: &GridFn, radius: f64) -> Result<AbpReport> {
    let g = &u.grid;
    ensure(f.grid == *g, || "u and f must share a grid".into())?;
    ensure(radius > 0.0 && radius.is_finite(), || "radius must be positive".into())?;
    let grid = if g.domain() == (Domain::Ball { radius: 2.0 * radius }) {
        g.clone()
    } else {
        Grid::new(g.dim, g.n, g.half_width, Domain::Ball { radius: 2.0 * radius })?
    };
    let small = grid.nodes_within(radius);
    ensure(small.iter().all(|&k| g.in_domain(k)), || "B_R must lie inside the domain of u".into())?;
    let mut vals = vec![0.0; grid.len()];
    let mut sup_neg = 0.0f64;
    for &k in &small {
        let neg = (-u.values[k]).max(0.0);
        sup_neg = sup_neg.max(neg);
        vals[k] = -neg;
    }
    if sup_neg == 0.0 {
        return Ok(AbpReport { sup_neg, f_norm: 0.0, contact_nodes: 0, c_meas: 0.0 });
    }
    let w = GridFn::from_values(&grid, vals)?;
    let contact = contact_at(&w, &small);
    let d = g.dim as i32;
    let mut sum = 0.0;
    let mut count = 0;
    for (&k, &c) in small.iter().zip(&contact) {
        if c {
            count += 1;
            sum += (-f.values[k]).max(0.0).powi(d) * g.h.powi(d);
        }
    }
    let f_norm = sum.powf(1.0 / d as f64);
    let c_meas = if f_norm > 0.0 { sup_neg / (radius * f_norm) } else { f64::INFINITY };
    Ok(AbpReport { sup_neg, f_norm, contact_nodes: count, c_meas })
}
