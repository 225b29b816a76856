//! Exit problems on rectangular 1D/2D domains.
//!
//! For the generator A g = (∇g)ᵀb + ½Tr[σσᵀ D²g] of an SDE, the escape
//! probability p through a boundary portion Γ solves A p = 0 with p = 1 on Γ
//! and p = 0 on the rest of the boundary, and the mean residence time u
//! solves A u = −1 with u = 0 on the whole boundary. Both are discretized by
//! central second differences for the diffusion, central first differences
//! for the drift with automatic first-order upwinding wherever the cell
//! Péclet number |b_i| h / (σσᵀ)_{ii} exceeds 1 (the exact monotonicity
//! boundary of the central stencil, which keeps the operator an M-matrix),
//! and a 4-point cross difference for the mixed derivative, admitted only
//! while σσᵀ stays diagonally dominant.
//!
//! The same problems are solved by Monte Carlo first-exit simulation for
//! cross-validation: discrete-node crossing detection by default (exit-time
//! bias O(√dt)), with an optional Brownian-bridge crossing test per step.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Banded;
use crate::model::SdeModel;
use crate::rng::{self, domain};
use crate::stats;

/// Sides of a rectangular domain, used to select Γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// Rectangular 1D/2D grid domain with a Γ labeling of boundary nodes.
#[derive(Clone, Debug)]
pub struct Domain {
    pub dims: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: Vec<f64>,
    /// Cells per axis; nodes per axis is `n_cells + 1`.
    pub n_cells: Vec<usize>,
    /// Γ mask over all grid nodes; meaningful (and true-able) only on the
    /// boundary.
    gamma: Vec<bool>,
}

impl Domain {
    pub fn interval(lo: f64, hi: f64, h: f64) -> Result<Self> {
        Self::build(vec![lo], vec![hi], vec![h])
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2], h: [f64; 2]) -> Result<Self> {
        Self::build(lo.to_vec(), hi.to_vec(), h.to_vec())
    }

    fn build(lo: Vec<f64>, hi: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        let dims = lo.len();
        if !(1..=2).contains(&dims) {
            return Err(Error::Validation("domains are 1D or 2D".into()));
        }
        let mut n_cells = Vec::with_capacity(dims);
        for i in 0..dims {
            if !(h[i] > 0.0) || !(hi[i] > lo[i]) {
                return Err(Error::Validation(format!(
                    "axis {i}: need lo < hi and h > 0, got [{}, {}] at h = {}",
                    lo[i], hi[i], h[i]
                )));
            }
            let cells = ((hi[i] - lo[i]) / h[i]).round() as usize;
            if cells < 2 {
                return Err(Error::Validation(format!(
                    "axis {i}: grid must have at least one interior node"
                )));
            }
            if ((hi[i] - lo[i]) / h[i] - cells as f64).abs() > 1e-9 * cells as f64 {
                return Err(Error::Validation(format!(
                    "axis {i}: h = {} does not divide the extent",
                    h[i]
                )));
            }
            n_cells.push(cells);
        }
        let total = n_cells.iter().map(|c| c + 1).product();
        Ok(Domain { dims, lo, hi, h, n_cells, gamma: vec![false; total] })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells.iter().map(|c| c + 1).product()
    }

    pub fn nodes_per_axis(&self, axis: usize) -> usize {
        self.n_cells[axis] + 1
    }

    pub fn node_index(&self, ij: &[usize]) -> usize {
        match self.dims {
            1 => ij[0],
            _ => ij[1] * self.nodes_per_axis(0) + ij[0],
        }
    }

    pub fn node_multi(&self, idx: usize) -> Vec<usize> {
        match self.dims {
            1 => vec![idx],
            _ => {
                let nx = self.nodes_per_axis(0);
                vec![idx % nx, idx / nx]
            }
        }
    }

    pub fn node_coord(&self, idx: usize) -> Vec<f64> {
        self.node_multi(idx)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.lo[axis] + i as f64 * self.h[axis])
            .collect()
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.node_multi(idx)
            .iter()
            .enumerate()
            .any(|(axis, &i)| i == 0 || i == self.n_cells[axis])
    }

    pub fn is_gamma(&self, idx: usize) -> bool {
        self.gamma[idx]
    }

    /// Mark whole sides of the boundary as Γ.
    pub fn with_gamma_sides(mut self, sides: &[Side]) -> Result<Self> {
        for idx in 0..self.n_nodes() {
            let ij = self.node_multi(idx);
            let mut on_gamma = false;
            for side in sides {
                let hit = match side {
                    Side::Left => ij[0] == 0,
                    Side::Right => ij[0] == self.n_cells[0],
                    Side::Bottom => {
                        if self.dims < 2 {
                            return Err(Error::Validation(
                                "bottom/top sides need a 2D domain".into(),
                            ));
                        }
                        ij[1] == 0
                    }
                    Side::Top => {
                        if self.dims < 2 {
                            return Err(Error::Validation(
                                "bottom/top sides need a 2D domain".into(),
                            ));
                        }
                        ij[1] == self.n_cells[1]
                    }
                };
                on_gamma = on_gamma || hit;
            }
            self.gamma[idx] = on_gamma && self.is_boundary(idx);
        }
        Ok(self)
    }

    /// Mark boundary nodes where the predicate on the node coordinates holds.
    pub fn with_gamma_predicate(mut self, pred: impl Fn(&[f64]) -> bool) -> Self {
        for idx in 0..self.n_nodes() {
            self.gamma[idx] = self.is_boundary(idx) && pred(&self.node_coord(idx));
        }
        self
    }

    pub fn gamma_count(&self) -> usize {
        self.gamma.iter().filter(|&&g| g).count()
    }

    fn contains_open(&self, x: &[f64]) -> bool {
        (0..self.dims).all(|i| x[i] > self.lo[i] && x[i] < self.hi[i])
    }

    /// |D|, the length/area of the domain.
    pub fn volume(&self) -> f64 {
        (0..self.dims).map(|i| self.hi[i] - self.lo[i]).product()
    }
}

/// Scalar field on all grid nodes of a domain.
#[derive(Clone, Debug)]
pub struct GridField {
    pub domain: Domain,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Assembled interior operator of the generator with Dirichlet elimination.
pub struct GeneratorOperator {
    pub band: Banded,
    /// Grid index of each interior row.
    pub interior: Vec<usize>,
    /// Interior row of each grid node, if any.
    pub interior_of_grid: Vec<Option<usize>>,
    /// Per row: boundary grid nodes coupled to it with their coefficients.
    pub boundary_coupling: Vec<Vec<(usize, f64)>>,
}

/// Finite-difference discretization of A on the interior nodes.
pub fn assemble_generator(model: &SdeModel, dom: &Domain) -> Result<GeneratorOperator> {
    if model.n != dom.dims {
        return Err(Error::Validation(format!(
            "model dimension {} does not match domain dimension {}",
            model.n, dom.dims
        )));
    }
    let n_nodes = dom.n_nodes();
    let mut interior = Vec::new();
    let mut interior_of_grid = vec![None; n_nodes];
    for idx in 0..n_nodes {
        if !dom.is_boundary(idx) {
            interior_of_grid[idx] = Some(interior.len());
            interior.push(idx);
        }
    }
    if interior.is_empty() {
        return Err(Error::Validation("domain has no interior nodes".into()));
    }
    let kl = match dom.dims {
        1 => 1,
        _ => dom.n_cells[0], // row of interior + corner neighbors
    };
    let mut band = Banded::new(interior.len(), kl);
    let mut boundary_coupling = vec![Vec::new(); interior.len()];
    let mut axis_active = vec![false; dom.dims];

    for (row, &idx) in interior.iter().enumerate() {
        let x = dom.node_coord(idx);
        let b = model.drift(&x);
        let sig = model.sigma(&x);
        // σσᵀ at this node.
        let mut a = vec![vec![0.0; dom.dims]; dom.dims];
        for i in 0..dom.dims {
            for l in 0..dom.dims {
                let mut s = 0.0;
                for j in 0..model.m {
                    s += sig[(i, j)] * sig[(l, j)];
                }
                a[i][l] = s;
            }
        }
        if dom.dims == 2 {
            let off = a[0][1].abs();
            if off > a[0][0].min(a[1][1]) + 1e-14 * off.max(1.0) {
                return Err(Error::Validation(format!(
                    "σσᵀ is not diagonally dominant at {x:?}; the cross-difference stencil is invalid"
                )));
            }
        }
        let ij = dom.node_multi(idx);
        let mut stencil: Vec<(i64, i64, f64)> = Vec::new(); // (di, dj, coeff)
        let push = |di: i64, dj: i64, v: f64, stencil: &mut Vec<(i64, i64, f64)>| {
            stencil.push((di, dj, v));
        };
        for axis in 0..dom.dims {
            let h = dom.h[axis];
            let diff = 0.5 * a[axis][axis];
            let adv = b[axis];
            if diff != 0.0 || adv != 0.0 {
                axis_active[axis] = true;
            }
            let (di, dj): (i64, i64) = if axis == 0 { (1, 0) } else { (0, 1) };
            if diff > 0.0 {
                push(di, dj, diff / (h * h), &mut stencil);
                push(-di, -dj, diff / (h * h), &mut stencil);
                push(0, 0, -2.0 * diff / (h * h), &mut stencil);
            }
            if adv != 0.0 {
                let peclet = if a[axis][axis] > 0.0 {
                    adv.abs() * h / a[axis][axis]
                } else {
                    f64::INFINITY
                };
                if peclet <= 1.0 {
                    push(di, dj, adv / (2.0 * h), &mut stencil);
                    push(-di, -dj, -adv / (2.0 * h), &mut stencil);
                } else if adv > 0.0 {
                    push(di, dj, adv / h, &mut stencil);
                    push(0, 0, -adv / h, &mut stencil);
                } else {
                    push(-di, -dj, -adv / h, &mut stencil);
                    push(0, 0, adv / h, &mut stencil);
                }
            }
        }
        if dom.dims == 2 && a[0][1] != 0.0 {
            let c = a[0][1] / (4.0 * dom.h[0] * dom.h[1]);
            push(1, 1, c, &mut stencil);
            push(-1, -1, c, &mut stencil);
            push(1, -1, -c, &mut stencil);
            push(-1, 1, -c, &mut stencil);
        }
        for (di, dj, v) in stencil {
            if v == 0.0 {
                continue;
            }
            let ni = ij[0] as i64 + di;
            let nj = if dom.dims == 2 { ij[1] as i64 + dj } else { 0 };
            let nidx = match dom.dims {
                1 => ni as usize,
                _ => dom.node_index(&[ni as usize, nj as usize]),
            };
            match interior_of_grid[nidx] {
                Some(col) => band.add(row, col, v),
                None => boundary_coupling[row].push((nidx, v)),
            }
        }
    }
    for (axis, active) in axis_active.iter().enumerate() {
        if !active {
            return Err(Error::Solver(format!(
                "axis {axis} carries neither diffusion nor drift anywhere; the operator is singular"
            )));
        }
    }
    Ok(GeneratorOperator { band, interior, interior_of_grid, boundary_coupling })
}

impl GeneratorOperator {
    /// Solve A v = rhs with Dirichlet data g on the boundary.
    fn solve_dirichlet(&self, dom: &Domain, rhs_interior: &[f64], g: &dyn Fn(usize) -> f64) -> Result<GridField> {
        let n = self.interior.len();
        let mut rhs = rhs_interior.to_vec();
        for row in 0..n {
            for &(bidx, c) in &self.boundary_coupling[row] {
                rhs[row] -= c * g(bidx);
            }
        }
        // Direct banded factorization at desk scale; iterative fallback for
        // systems whose in-band fill would be too large.
        let x = if n <= 100_000 && n.saturating_mul(2 * self.band.kl + 1) <= 50_000_000 {
            self.band.solve(&rhs)?
        } else {
            self.band.solve_gauss_seidel(&rhs, 1e-10, 200_000)?
        };
        let mut values = vec![0.0; dom.n_nodes()];
        for idx in 0..dom.n_nodes() {
            match self.interior_of_grid[idx] {
                Some(row) => values[idx] = x[row],
                None => values[idx] = g(idx),
            }
        }
        Ok(GridField { domain: dom.clone(), values })
    }
}

/// Escape probability through Γ: A p = 0, p|_Γ = 1, p|_{∂D∖Γ} = 0.
pub fn escape_probability(model: &SdeModel, dom: &Domain) -> Result<GridField> {
    if dom.gamma_count() == 0 {
        return Err(Error::Validation("escape problem needs at least one Γ node".into()));
    }
    let op = assemble_generator(model, dom)?;
    let rhs = vec![0.0; op.interior.len()];
    op.solve_dirichlet(dom, &rhs, &|idx| if dom.is_gamma(idx) { 1.0 } else { 0.0 })
}

/// Mean residence time: A u = −1, u|_{∂D} = 0.
pub fn mean_residence_time(model: &SdeModel, dom: &Domain) -> Result<GridField> {
    let op = assemble_generator(model, dom)?;
    let rhs = vec![-1.0; op.interior.len()];
    op.solve_dirichlet(dom, &rhs, &|_| 0.0)
}

/// (1/|D|) ∫_D p dx by trapezoidal quadrature over the grid.
pub fn average_escape_probability(field: &GridField) -> f64 {
    let dom = &field.domain;
    let weight = |i: usize, axis: usize| -> f64 {
        if i == 0 || i == dom.n_cells[axis] {
            0.5
        } else {
            1.0
        }
    };
    let mut total = 0.0;
    for idx in 0..dom.n_nodes() {
        let ij = dom.node_multi(idx);
        let mut w = weight(ij[0], 0) * dom.h[0];
        if dom.dims == 2 {
            w *= weight(ij[1], 1) * dom.h[1];
        }
        total += w * field.values[idx];
    }
    total / dom.volume()
}

/// Monte Carlo first-exit statistics.
#[derive(Clone, Debug, Serialize)]
pub struct ExitStats {
    pub n_paths: usize,
    pub censored: usize,
    pub gamma_hits: usize,
    pub gamma_probability: f64,
    pub gamma_probability_se: f64,
    pub mean_exit_time: f64,
    pub mean_exit_time_se: f64,
    pub quantiles: [f64; 3],
    #[serde(skip)]
    pub exit_times: Vec<f64>,
}

struct PathExit {
    time: f64,
    gamma: bool,
}

fn simulate_exit(
    model: &SdeModel,
    x0: &[f64],
    dom: &Domain,
    dt: f64,
    seed: u64,
    bridge_correction: bool,
    t_max: f64,
) -> Result<Option<PathExit>> {
    let sqrt_dt = dt.sqrt();
    let mut x = x0.to_vec();
    let max_steps = (t_max / dt).ceil() as u64;
    for k in 0..max_steps {
        let b = model.drift(&x);
        let s = model.sigma(&x);
        let mut nx = x.clone();
        for i in 0..model.n {
            let mut dx = b[i] * dt;
            for j in 0..model.m {
                let z = rng::normal(seed, &[domain::EXIT_STEP, k, j as u64]);
                dx += s[(i, j)] * sqrt_dt * z;
            }
            nx[i] += dx;
        }
        let t_exit = (k + 1) as f64 * dt;
        if !dom.contains_open(&nx) {
            // Attribute the crossed face: smallest crossing parameter along
            // the segment from the last interior point.
            let mut best: Vec<(usize, bool, f64)> = Vec::new(); // (axis, low_side, λ)
            let mut lambda_min = f64::INFINITY;
            for axis in 0..dom.dims {
                for (bound, low) in [(dom.lo[axis], true), (dom.hi[axis], false)] {
                    let crossed = if low { nx[axis] <= bound } else { nx[axis] >= bound };
                    if crossed && (nx[axis] - x[axis]).abs() > 0.0 {
                        let lam = (bound - x[axis]) / (nx[axis] - x[axis]);
                        if lam >= 0.0 {
                            if lam < lambda_min - 1e-12 {
                                best.clear();
                                lambda_min = lam;
                            }
                            if lam <= lambda_min + 1e-12 {
                                best.push((axis, low, lam));
                            }
                        }
                    }
                }
            }
            if best.is_empty() {
                // Degenerate segment (e.g. jumped exactly onto a node); treat
                // the whole move as the crossing.
                best.push((0, nx[0] <= dom.lo[0], 1.0));
            }
            // Ties at corners resolve to Γ when any tied face says Γ.
            let mut gamma = false;
            for &(axis, low, lam) in &best {
                let mut p = vec![0.0; dom.dims];
                for i in 0..dom.dims {
                    p[i] = x[i] + lam * (nx[i] - x[i]);
                }
                p[axis] = if low { dom.lo[axis] } else { dom.hi[axis] };
                gamma = gamma || gamma_at_face_point(dom, axis, low, &p);
            }
            return Ok(Some(PathExit { time: t_exit, gamma }));
        }
        if bridge_correction {
            // Per-axis Brownian-bridge crossing test between interior
            // endpoints: P(cross) = exp(−2 d d' / (σ² dt)) per face.
            for axis in 0..dom.dims {
                let var = {
                    let mut v = 0.0;
                    for j in 0..model.m {
                        v += s[(axis, j)] * s[(axis, j)];
                    }
                    v
                };
                if var == 0.0 {
                    continue;
                }
                for (bound, low) in [(dom.lo[axis], true), (dom.hi[axis], false)] {
                    let d0 = (x[axis] - bound).abs();
                    let d1 = (nx[axis] - bound).abs();
                    let p_cross = (-2.0 * d0 * d1 / (var * dt)).exp();
                    let u = rng::uniform(seed, &[domain::EXIT_BRIDGE, k, axis as u64, low as u64]);
                    if u < p_cross {
                        let mut p = x.clone();
                        for i in 0..dom.dims {
                            p[i] = 0.5 * (x[i] + nx[i]);
                        }
                        p[axis] = bound;
                        let gamma = gamma_at_face_point(dom, axis, low, &p);
                        return Ok(Some(PathExit { time: t_exit, gamma }));
                    }
                }
            }
        }
        x = nx;
        if x.iter().any(|v| !v.is_finite() || v.abs() > crate::integrate::BLOWUP_THRESHOLD) {
            return Err(Error::BlowUp { t: t_exit, detail: "exit simulation blew up".into() });
        }
    }
    Ok(None)
}

/// Γ label of the boundary node nearest to a crossing point on a face.
fn gamma_at_face_point(dom: &Domain, axis: usize, low: bool, p: &[f64]) -> bool {
    let mut ij = vec![0usize; dom.dims];
    ij[axis] = if low { 0 } else { dom.n_cells[axis] };
    if dom.dims == 2 {
        let other = 1 - axis;
        let rel = ((p[other] - dom.lo[other]) / dom.h[other]).round();
        ij[other] = (rel.max(0.0) as usize).min(dom.n_cells[other]);
    }
    dom.is_gamma(dom.node_index(&ij))
}

/// First-exit Monte Carlo from an interior start.
///
/// A path that has not exited by `t_max` is censored; more than 10%
/// censoring fails the run.
#[allow(clippy::too_many_arguments)]
pub fn mc_exit(
    model: &SdeModel,
    x0: &[f64],
    dom: &Domain,
    n_paths: usize,
    dt: f64,
    master_seed: u64,
    bridge_correction: bool,
    t_max: f64,
) -> Result<ExitStats> {
    if x0.len() != dom.dims || model.n != dom.dims {
        return Err(Error::Validation("state/domain dimension mismatch".into()));
    }
    if !dom.contains_open(x0) {
        return Err(Error::Validation(format!(
            "start {x0:?} must lie strictly inside the domain"
        )));
    }
    if n_paths == 0 || !(dt > 0.0) || !(t_max > dt) {
        return Err(Error::Validation("need n_paths >= 1 and 0 < dt < t_max".into()));
    }
    const BLOCK: usize = 64;
    let n_blocks = n_paths.div_ceil(BLOCK);
    let partials: Result<Vec<Vec<Option<PathExit>>>> = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let mut out = Vec::new();
            for i in blk * BLOCK..((blk + 1) * BLOCK).min(n_paths) {
                let seed = rng::key_hash(master_seed, &[domain::PATH_OF_ENSEMBLE, i as u64]);
                out.push(simulate_exit(model, x0, dom, dt, seed, bridge_correction, t_max)?);
            }
            Ok(out)
        })
        .collect();
    let mut exit_times = Vec::with_capacity(n_paths);
    let mut gamma_hits = 0usize;
    let mut censored = 0usize;
    for exit in partials?.into_iter().flatten() {
        match exit {
            Some(e) => {
                exit_times.push(e.time);
                if e.gamma {
                    gamma_hits += 1;
                }
            }
            None => censored += 1,
        }
    }
    if censored * 10 > n_paths {
        return Err(Error::Validation(format!(
            "{censored} of {n_paths} paths were censored at t_max = {t_max} (> 10%)"
        )));
    }
    let n_exit = exit_times.len();
    let p = gamma_hits as f64 / n_exit as f64;
    let p_se = (p * (1.0 - p) / n_exit as f64).sqrt();
    let mean = stats::mean(&exit_times);
    let mean_se = stats::standard_error(&exit_times);
    let mut sorted = exit_times.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantiles = [
        stats::quantile(&sorted, 0.25),
        stats::quantile(&sorted, 0.5),
        stats::quantile(&sorted, 0.75),
    ];
    Ok(ExitStats {
        n_paths,
        censored,
        gamma_hits,
        gamma_probability: p,
        gamma_probability_se: p_se,
        mean_exit_time: mean,
        mean_exit_time_se: mean_se,
        quantiles,
        exit_times,
    })
}

/// A quantile of the first-exit-time distribution with a bootstrap CI.
#[derive(Clone, Debug, Serialize)]
pub struct PredictabilityWindow {
    pub q: f64,
    pub time: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_exits: usize,
    pub censored: usize,
}

/// q-quantile of the exit-time distribution from the data domain D.
#[allow(clippy::too_many_arguments)]
pub fn predictability_window(
    model: &SdeModel,
    x0: &[f64],
    dom: &Domain,
    q: f64,
    n_paths: usize,
    dt: f64,
    master_seed: u64,
    t_max: f64,
) -> Result<PredictabilityWindow> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Validation(format!("quantile must be in (0, 1), got {q}")));
    }
    let stats_out = mc_exit(model, x0, dom, n_paths, dt, master_seed, false, t_max)?;
    let censored_frac = stats_out.censored as f64 / n_paths as f64;
    if censored_frac >= 1.0 - q {
        return Err(Error::Validation(format!(
            "censoring fraction {censored_frac:.3} reaches 1 − q; the {q}-quantile is undefined"
        )));
    }
    // The order statistic over all paths, with censored samples counted as
    // beyond every exit: the quantile index must land among the exits.
    let mut sorted = stats_out.exit_times.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = (q * n_paths as f64).ceil() as usize;
    if idx > sorted.len() {
        return Err(Error::Validation("quantile falls among censored samples".into()));
    }
    let time = sorted[idx.saturating_sub(1)];
    let (ci_low, ci_high) =
        stats::bootstrap_quantile_ci(&sorted, q, 200, 0.95, rng::key_hash(master_seed, &[99]));
    Ok(PredictabilityWindow {
        q,
        time,
        ci_low,
        ci_high,
        n_exits: sorted.len(),
        censored: stats_out.censored,
    })
}
