//! Time-stepping schemes driven by shared Brownian paths, ensemble execution
//! with order-independent reductions, and strong-order measurement.
//!
//! Schemes consume pre-generated paths rather than drawing noise inline, so
//! a scheme and a closed-form oracle can be evaluated on the same ω, and a
//! refinement study can reuse one realization. Ensembles fan out across
//! worker threads in fixed-size blocks and reduce block partials in index
//! order, which makes every accumulator bit-identical for any thread count.

use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use crate::brownian::BrownianPath;
use crate::error::{Error, Result};
use crate::model::SdeModel;
use crate::rng::{self, domain};

/// Any state component beyond this magnitude aborts the path as blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Paths per reduction block; fixed so that the reduction tree does not
/// depend on the worker count.
const ENSEMBLE_BLOCK: usize = 64;

/// A discrete solution sampled on the driving path's grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub label: String,
    pub times: Vec<f64>,
    /// Node-major states, `n` entries per node.
    pub states: Vec<f64>,
    pub n: usize,
    pub path_seed: u64,
}

impl Trajectory {
    pub fn new(label: impl Into<String>, times: Vec<f64>, states: Vec<f64>, n: usize, path_seed: u64) -> Self {
        debug_assert_eq!(times.len() * n, states.len());
        Trajectory { label: label.into(), times, states, n, path_seed }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    #[inline]
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.n..(k + 1) * self.n]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    Milstein,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::EulerMaruyama => "euler_maruyama",
            Scheme::Milstein => "milstein",
        }
    }

    pub fn solve(
        self,
        model: &SdeModel,
        x0: &[f64],
        path: &BrownianPath,
        t0: f64,
        t_final: f64,
    ) -> Result<Trajectory> {
        match self {
            Scheme::EulerMaruyama => euler_maruyama(model, x0, path, t0, t_final),
            Scheme::Milstein => milstein(model, x0, path, t0, t_final),
        }
    }
}

fn check_window(model: &SdeModel, x0: &[f64], path: &BrownianPath, t0: f64, t_final: f64) -> Result<(usize, usize)> {
    if x0.len() != model.n {
        return Err(Error::Validation(format!(
            "initial state has length {}, model n = {}",
            x0.len(),
            model.n
        )));
    }
    if path.m != model.m {
        return Err(Error::Validation(format!(
            "path noise dimension {} does not match model m = {}",
            path.m, model.m
        )));
    }
    let i0 = path.index_of_time(t0)?;
    let i1 = path.index_of_time(t_final)?;
    if i0 >= i1 {
        return Err(Error::Validation(format!("need t0 < t_final, got [{t0}, {t_final}]")));
    }
    Ok((i0, i1))
}

fn blowup_check(x: &[f64], t: f64, label: &str) -> Result<()> {
    for (i, v) in x.iter().enumerate() {
        if !v.is_finite() || v.abs() > BLOWUP_THRESHOLD {
            return Err(Error::BlowUp {
                t,
                detail: format!("component {i} of '{label}' reached {v}"),
            });
        }
    }
    Ok(())
}

/// Euler–Maruyama: X_{k+1} = X_k + b(X_k) dt + σ(X_k) ΔW_k.
pub fn euler_maruyama(
    model: &SdeModel,
    x0: &[f64],
    path: &BrownianPath,
    t0: f64,
    t_final: f64,
) -> Result<Trajectory> {
    let (i0, i1) = check_window(model, x0, path, t0, t_final)?;
    let n = model.n;
    let dt = path.dt;
    let mut x = x0.to_vec();
    let mut times = Vec::with_capacity(i1 - i0 + 1);
    let mut states = Vec::with_capacity((i1 - i0 + 1) * n);
    times.push(path.time(i0));
    states.extend_from_slice(&x);
    for k in i0..i1 {
        let b = model.drift(&x);
        let s = model.sigma(&x);
        for i in 0..n {
            let mut dx = b[i] * dt;
            for j in 0..model.m {
                dx += s[(i, j)] * path.increment(k, j);
            }
            x[i] += dx;
        }
        blowup_check(&x, path.time(k + 1), &model.label)?;
        times.push(path.time(k + 1));
        states.extend_from_slice(&x);
    }
    Ok(Trajectory::new(model.label.clone(), times, states, n, path.seed))
}

/// Milstein: the Euler–Maruyama step plus ½ (Dσ^j σ^j) ((ΔW_j)² − dt) per
/// noise column. Restricted to single-column (m = 1) or diagonal noise;
/// general non-commutative noise would require Lévy areas.
pub fn milstein(
    model: &SdeModel,
    x0: &[f64],
    path: &BrownianPath,
    t0: f64,
    t_final: f64,
) -> Result<Trajectory> {
    if model.m > 1 && !model.diagonal_noise {
        return Err(Error::Capability(format!(
            "Milstein supports m = 1 or diagonal noise; model '{}' has m = {} with non-diagonal σ",
            model.label, model.m
        )));
    }
    let (i0, i1) = check_window(model, x0, path, t0, t_final)?;
    let n = model.n;
    let dt = path.dt;
    let mut x = x0.to_vec();
    let mut times = Vec::with_capacity(i1 - i0 + 1);
    let mut states = Vec::with_capacity((i1 - i0 + 1) * n);
    times.push(path.time(i0));
    states.extend_from_slice(&x);
    for k in i0..i1 {
        let b = model.drift(&x);
        let s = model.sigma(&x);
        let jacs = model.sigma_jacobians(&x);
        let mut new_x = x.clone();
        for i in 0..n {
            let mut dx = b[i] * dt;
            for j in 0..model.m {
                dx += s[(i, j)] * path.increment(k, j);
            }
            new_x[i] = x[i] + dx;
        }
        for (j, dj) in jacs.iter().enumerate() {
            let col: Vec<f64> = (0..n).map(|i| s[(i, j)]).collect();
            let v = dj.matvec(&col);
            let dw = path.increment(k, j);
            let corr = 0.5 * (dw * dw - dt);
            for i in 0..n {
                new_x[i] += v[i] * corr;
            }
        }
        x = new_x;
        blowup_check(&x, path.time(k + 1), &model.label)?;
        times.push(path.time(k + 1));
        states.extend_from_slice(&x);
    }
    Ok(Trajectory::new(model.label.clone(), times, states, n, path.seed))
}

/// Classical RK4 for the noise-free part dY = b(Y) dt, recorded on the grid
/// `t0 + k dt_record` with `substeps` internal steps per grid cell. Used as
/// the deterministic reference for error-growth diagnostics.
pub fn rk4_reference(
    model: &SdeModel,
    x0: &[f64],
    t0: f64,
    t_final: f64,
    dt_record: f64,
    substeps: usize,
) -> Result<Trajectory> {
    if x0.len() != model.n {
        return Err(Error::Validation("initial state length mismatch".into()));
    }
    if !(dt_record > 0.0) || substeps == 0 || !(t_final > t0) {
        return Err(Error::Validation("need dt_record > 0, substeps >= 1, t_final > t0".into()));
    }
    let n_cells = ((t_final - t0) / dt_record).round() as usize;
    let h = dt_record / substeps as f64;
    let n = model.n;
    let mut x = x0.to_vec();
    let mut times = Vec::with_capacity(n_cells + 1);
    let mut states = Vec::with_capacity((n_cells + 1) * n);
    times.push(t0);
    states.extend_from_slice(&x);
    let axpy = |x: &[f64], k: &[f64], a: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
    };
    for cell in 0..n_cells {
        for _ in 0..substeps {
            let k1 = model.drift(&x);
            let k2 = model.drift(&axpy(&x, &k1, 0.5 * h));
            let k3 = model.drift(&axpy(&x, &k2, 0.5 * h));
            let k4 = model.drift(&axpy(&x, &k3, h));
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        blowup_check(&x, t0 + (cell + 1) as f64 * dt_record, &model.label)?;
        times.push(t0 + (cell + 1) as f64 * dt_record);
        states.extend_from_slice(&x);
    }
    Ok(Trajectory::new(format!("{}+rk4", model.label), times, states, n, 0))
}

/// What an ensemble accumulates per path: plain second-moment diagnostics of
/// the state itself, or of the error U = X − Y against a deterministic
/// reference trajectory on the same grid.
#[derive(Clone)]
pub enum EnsembleStatistic {
    Energy,
    ErrorVsReference(Arc<Trajectory>),
}

/// Streaming per-node moment sums over an ensemble. `half_sq` refers to
/// ½‖Z‖² where Z is the state (Energy mode) or the error (Error mode);
/// `xb` is Σ Z·Δb (drift term) and `tr` is ½ Tr(σσᵀ) evaluated on X.
/// `resid` is the per-path balance statistic FD_t(½‖Z‖²) − (xb + tr).
#[derive(Clone, Debug)]
pub struct MomentAccum {
    pub n_nodes: usize,
    pub n_state: usize,
    pub count: usize,
    pub sum_state: Vec<f64>,
    pub sum_state_sq: Vec<f64>,
    pub sum_half_sq: Vec<f64>,
    pub sum_half_sq_sq: Vec<f64>,
    pub sum_xb: Vec<f64>,
    pub sum_tr: Vec<f64>,
    pub sum_resid: Vec<f64>,
    pub sum_resid_sq: Vec<f64>,
}

impl MomentAccum {
    fn new(n_nodes: usize, n_state: usize) -> Self {
        MomentAccum {
            n_nodes,
            n_state,
            count: 0,
            sum_state: vec![0.0; n_nodes * n_state],
            sum_state_sq: vec![0.0; n_nodes * n_state],
            sum_half_sq: vec![0.0; n_nodes],
            sum_half_sq_sq: vec![0.0; n_nodes],
            sum_xb: vec![0.0; n_nodes],
            sum_tr: vec![0.0; n_nodes],
            sum_resid: vec![0.0; n_nodes],
            sum_resid_sq: vec![0.0; n_nodes],
        }
    }

    fn merge(&mut self, other: &MomentAccum) {
        self.count += other.count;
        let pairs: [(&mut Vec<f64>, &Vec<f64>); 8] = [
            (&mut self.sum_state, &other.sum_state),
            (&mut self.sum_state_sq, &other.sum_state_sq),
            (&mut self.sum_half_sq, &other.sum_half_sq),
            (&mut self.sum_half_sq_sq, &other.sum_half_sq_sq),
            (&mut self.sum_xb, &other.sum_xb),
            (&mut self.sum_tr, &other.sum_tr),
            (&mut self.sum_resid, &other.sum_resid),
            (&mut self.sum_resid_sq, &other.sum_resid_sq),
        ];
        for (dst, src) in pairs {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += b;
            }
        }
    }

    fn add_path(&mut self, model: &SdeModel, traj: &Trajectory, stat: &EnsembleStatistic, dt: f64) {
        let n_nodes = traj.len();
        let n = traj.n;
        let mut a = vec![0.0; n_nodes];
        let mut xb = vec![0.0; n_nodes];
        let mut tr = vec![0.0; n_nodes];
        let mut z = vec![0.0; n];
        for k in 0..n_nodes {
            let x = traj.state(k);
            match stat {
                EnsembleStatistic::Energy => z.copy_from_slice(x),
                EnsembleStatistic::ErrorVsReference(r) => {
                    let y = r.state(k);
                    for i in 0..n {
                        z[i] = x[i] - y[i];
                    }
                }
            }
            a[k] = 0.5 * z.iter().map(|v| v * v).sum::<f64>();
            let bdiff = match stat {
                EnsembleStatistic::Energy => model.drift(x),
                EnsembleStatistic::ErrorVsReference(r) => {
                    let y = r.state(k);
                    let bx = model.drift(x);
                    let by = model.drift(y);
                    bx.iter().zip(&by).map(|(p, q)| p - q).collect()
                }
            };
            for i in 0..n {
                xb[k] += z[i] * bdiff[i];
            }
            let s = model.sigma(x);
            let mut t = 0.0;
            for i in 0..n {
                for j in 0..model.m {
                    t += s[(i, j)] * s[(i, j)];
                }
            }
            tr[k] = 0.5 * t;
            for i in 0..n {
                self.sum_state[k * n + i] += z[i];
                self.sum_state_sq[k * n + i] += z[i] * z[i];
            }
            self.sum_half_sq[k] += a[k];
            self.sum_half_sq_sq[k] += a[k] * a[k];
            self.sum_xb[k] += xb[k];
            self.sum_tr[k] += tr[k];
        }
        for k in 0..n_nodes {
            let fd = if k == 0 {
                (a[1] - a[0]) / dt
            } else if k == n_nodes - 1 {
                (a[k] - a[k - 1]) / dt
            } else {
                (a[k + 1] - a[k - 1]) / (2.0 * dt)
            };
            let r = fd - xb[k] - tr[k];
            self.sum_resid[k] += r;
            self.sum_resid_sq[k] += r * r;
        }
        self.count += 1;
    }
}

/// A seeded collection of simulated trajectories reduced to streaming moment
/// accumulators. Blown-up paths are excluded from the moments and counted.
pub struct Ensemble {
    pub model_label: String,
    pub scheme: Scheme,
    pub master_seed: u64,
    pub n_paths: usize,
    pub blowups: usize,
    pub t0: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub n_state: usize,
    pub accum: MomentAccum,
    pub statistic_is_error: bool,
}

impl Ensemble {
    /// Paths that contributed to the moments.
    pub fn n_effective(&self) -> usize {
        self.accum.count
    }

    pub fn mean_state(&self, k: usize) -> Vec<f64> {
        let n = self.n_state;
        let c = self.accum.count as f64;
        (0..n).map(|i| self.accum.sum_state[k * n + i] / c).collect()
    }

    /// Per-component sample variance at node k.
    pub fn component_variance(&self, k: usize, i: usize) -> f64 {
        let c = self.accum.count as f64;
        let s = self.accum.sum_state[k * self.n_state + i];
        let s2 = self.accum.sum_state_sq[k * self.n_state + i];
        (s2 - s * s / c) / (c - 1.0)
    }

    /// ½ E‖Z‖² at node k.
    pub fn half_sq_mean(&self, k: usize) -> f64 {
        self.accum.sum_half_sq[k] / self.accum.count as f64
    }

    pub fn half_sq_se(&self, k: usize) -> f64 {
        let c = self.accum.count as f64;
        let m = self.accum.sum_half_sq[k] / c;
        let var = (self.accum.sum_half_sq_sq[k] - c * m * m) / (c - 1.0);
        (var.max(0.0) / c).sqrt()
    }
}

/// Seed for path `i` of the ensemble keyed by `master_seed`.
pub fn path_seed(master_seed: u64, index: usize) -> u64 {
    rng::key_hash(master_seed, &[domain::PATH_OF_ENSEMBLE, index as u64])
}

/// Run `n_paths` trajectories of `scheme` and reduce their moments.
///
/// The initial state of path i is `init(i, seed_i)`; use a constant closure
/// for a deterministic start. More than 1% blown-up paths fails the run.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble_init<F>(
    model: &SdeModel,
    init: F,
    scheme: Scheme,
    n_paths: usize,
    t0: f64,
    t_final: f64,
    dt: f64,
    master_seed: u64,
    statistic: EnsembleStatistic,
) -> Result<Ensemble>
where
    F: Fn(usize, u64) -> Vec<f64> + Sync,
{
    if n_paths == 0 {
        return Err(Error::Validation("n_paths must be >= 1".into()));
    }
    let expected_nodes = ((t_final - t0) / dt).round() as usize + 1;
    if let EnsembleStatistic::ErrorVsReference(r) = &statistic {
        if r.len() != expected_nodes {
            return Err(Error::Validation(format!(
                "reference trajectory has {} nodes, the ensemble grid has {expected_nodes}",
                r.len()
            )));
        }
        let probe = init(0, path_seed(master_seed, 0));
        let y0 = r.state(0);
        if probe
            .iter()
            .zip(y0)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0))
        {
            return Err(Error::Validation(
                "reference trajectory must start from the same initial state".into(),
            ));
        }
    }
    let n_nodes = expected_nodes;
    let n_blocks = n_paths.div_ceil(ENSEMBLE_BLOCK);
    let partials: Result<Vec<(MomentAccum, usize)>> = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let mut acc = MomentAccum::new(n_nodes, model.n);
            let mut blowups = 0usize;
            let lo = blk * ENSEMBLE_BLOCK;
            let hi = ((blk + 1) * ENSEMBLE_BLOCK).min(n_paths);
            for i in lo..hi {
                let seed = path_seed(master_seed, i);
                let path = BrownianPath::sample(seed, model.m, t0.min(0.0), t_final.max(0.0), dt)?;
                let x0 = init(i, seed);
                match scheme.solve(model, &x0, &path, t0, t_final) {
                    Ok(traj) => acc.add_path(model, &traj, &statistic, dt),
                    Err(Error::BlowUp { .. }) => blowups += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok((acc, blowups))
        })
        .collect();
    let partials = partials?;
    let mut accum = MomentAccum::new(n_nodes, model.n);
    let mut blowups = 0;
    for (p, b) in &partials {
        accum.merge(p);
        blowups += b;
    }
    if blowups * 100 > n_paths {
        return Err(Error::Validation(format!(
            "{blowups} of {n_paths} paths blew up (> 1%); decrease dt"
        )));
    }
    if accum.count == 0 {
        return Err(Error::Validation("all paths blew up".into()));
    }
    let times: Vec<f64> = (0..n_nodes).map(|k| t0 + k as f64 * dt).collect();
    Ok(Ensemble {
        model_label: model.label.clone(),
        scheme,
        master_seed,
        n_paths,
        blowups,
        t0,
        dt,
        times,
        n_state: model.n,
        accum,
        statistic_is_error: matches!(statistic, EnsembleStatistic::ErrorVsReference(_)),
    })
}

/// Ensemble from a fixed initial state.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    model: &SdeModel,
    x0: &[f64],
    scheme: Scheme,
    n_paths: usize,
    t0: f64,
    t_final: f64,
    dt: f64,
    master_seed: u64,
) -> Result<Ensemble> {
    let x0 = x0.to_vec();
    run_ensemble_init(
        model,
        move |_, _| x0.clone(),
        scheme,
        n_paths,
        t0,
        t_final,
        dt,
        master_seed,
        EnsembleStatistic::Energy,
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongOrder {
    pub dts: Vec<f64>,
    pub rms_errors: Vec<f64>,
    pub slope: f64,
}

/// Least-squares slope of log RMS terminal error against log dt, measured
/// against a closed-form reference evaluated on the same path. The reference
/// closure receives the path and the horizon and must return a trajectory
/// whose first state is the initial condition.
pub fn strong_order_estimate<R>(
    model: &SdeModel,
    scheme: Scheme,
    reference: R,
    dt_list: &[f64],
    n_paths: usize,
    t_final: f64,
    master_seed: u64,
) -> Result<StrongOrder>
where
    R: Fn(&BrownianPath, f64) -> Result<Trajectory> + Sync,
{
    if dt_list.len() < 3 {
        return Err(Error::Validation(format!(
            "strong-order regression needs >= 3 dt points, got {}",
            dt_list.len()
        )));
    }
    let mut rms = Vec::with_capacity(dt_list.len());
    for (level, &dt) in dt_list.iter().enumerate() {
        let sq_errs: Result<Vec<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let seed =
                    rng::key_hash(master_seed, &[domain::PATH_OF_ENSEMBLE, level as u64, i as u64]);
                let path = BrownianPath::sample(seed, model.m, 0.0, t_final, dt)?;
                let oracle = reference(&path, t_final)?;
                let x0 = oracle.state(0).to_vec();
                let traj = scheme.solve(model, &x0, &path, 0.0, t_final)?;
                let a = traj.terminal();
                let b = oracle.terminal();
                Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            })
            .collect();
        let sq_errs = sq_errs?;
        rms.push((sq_errs.iter().sum::<f64>() / n_paths as f64).sqrt());
    }
    let xs: Vec<f64> = dt_list.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = rms.iter().map(|e| e.ln()).collect();
    Ok(StrongOrder { dts: dt_list.to_vec(), rms_errors: rms, slope: crate::linalg::ls_slope(&xs, &ys) })
}
