//! Ito and Stratonovich integrals on realized paths, plus Monte Carlo
//! verification of the classical identities: the Ito isometry, its
//! generalized two-integrand form, the Doob maximal bound, the second-moment
//! sup bound, the Ito formula, and the discrete product rule.
//!
//! Sign convention: the toolkit verifies ∫_t^T W dW = ½(W_T² − W_t²) − ½(T−t)
//! (the standard orientation, confirmed by Monte Carlo below); sources
//! occasionally print the right-hand side with the opposite sign.

use rayon::prelude::*;
use serde::Serialize;

use crate::brownian::BrownianPath;
use crate::error::{Error, Result};
use crate::integrate::{euler_maruyama, Trajectory};
use crate::linalg::Mat;
use crate::model::{ScalarObservable, SdeModel};
use crate::rng::{self, domain};

/// A scalar integrand realized on a path's grid: values[k] = f(t_k, ω).
#[derive(Clone, Debug)]
pub struct IntegrandOnGrid {
    pub values: Vec<f64>,
}

impl IntegrandOnGrid {
    pub fn constant(path: &BrownianPath, c: f64) -> Self {
        IntegrandOnGrid { values: vec![c; path.n_nodes()] }
    }

    pub fn of_time(path: &BrownianPath, f: impl Fn(f64) -> f64) -> Self {
        IntegrandOnGrid { values: (0..path.n_nodes()).map(|k| f(path.time(k))).collect() }
    }

    /// f(t, ω) = W(t), the canonical random integrand.
    pub fn of_path(path: &BrownianPath) -> Self {
        IntegrandOnGrid { values: (0..path.n_nodes()).map(|k| path.value(k, 0)).collect() }
    }

    fn check_against(&self, path: &BrownianPath) -> Result<()> {
        if self.values.len() != path.n_nodes() {
            return Err(Error::Validation(format!(
                "integrand has {} values, path grid has {} nodes",
                self.values.len(),
                path.n_nodes()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("integrand contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Matrix integrand for the vector case: one n×m matrix per grid node.
#[derive(Clone, Debug)]
pub struct MatrixIntegrandOnGrid {
    pub values: Vec<Mat>,
}

/// Left-point Riemann–Ito sum Σ f(t_j) (W_{t_{j+1}} − W_{t_j}) over [a, b].
pub fn ito_integral(f: &IntegrandOnGrid, path: &BrownianPath, a: f64, b: f64) -> Result<f64> {
    f.check_against(path)?;
    if path.m != 1 {
        return Err(Error::Validation("scalar integral needs a one-dimensional path".into()));
    }
    let ia = path.index_of_time(a)?;
    let ib = path.index_of_time(b)?;
    if ia >= ib {
        return Err(Error::Validation(format!("need a < b, got [{a}, {b}]")));
    }
    let mut s = 0.0;
    for j in ia..ib {
        s += f.values[j] * path.increment(j, 0);
    }
    Ok(s)
}

/// Midpoint (Stratonovich) sum; the midpoint value of f on a cell is the
/// average of its two nodal values.
pub fn stratonovich_integral(f: &IntegrandOnGrid, path: &BrownianPath, a: f64, b: f64) -> Result<f64> {
    f.check_against(path)?;
    if path.m != 1 {
        return Err(Error::Validation("scalar integral needs a one-dimensional path".into()));
    }
    let ia = path.index_of_time(a)?;
    let ib = path.index_of_time(b)?;
    if ia >= ib {
        return Err(Error::Validation(format!("need a < b, got [{a}, {b}]")));
    }
    let mut s = 0.0;
    for j in ia..ib {
        s += 0.5 * (f.values[j] + f.values[j + 1]) * path.increment(j, 0);
    }
    Ok(s)
}

/// Vector-valued left-point sum Σ F(t_j) ΔW_j for an n×m matrix integrand.
pub fn ito_integral_matrix(
    f: &MatrixIntegrandOnGrid,
    path: &BrownianPath,
    a: f64,
    b: f64,
) -> Result<Vec<f64>> {
    if f.values.len() != path.n_nodes() {
        return Err(Error::Validation("matrix integrand length mismatch".into()));
    }
    let ia = path.index_of_time(a)?;
    let ib = path.index_of_time(b)?;
    if ia >= ib {
        return Err(Error::Validation(format!("need a < b, got [{a}, {b}]")));
    }
    let n = f.values[0].rows;
    let m = f.values[0].cols;
    if m != path.m {
        return Err(Error::Validation("matrix integrand column count must match path m".into()));
    }
    let mut out = vec![0.0; n];
    for j in ia..ib {
        let fm = &f.values[j];
        if !fm.is_finite() {
            return Err(Error::Data("matrix integrand contains non-finite values".into()));
        }
        for i in 0..n {
            for c in 0..m {
                out[i] += fm[(i, c)] * path.increment(j, c);
            }
        }
    }
    Ok(out)
}

/// How a report's pass flag is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// pass ⇔ |lhs − rhs| ≤ 3 se.
    Equality,
    /// pass ⇔ lhs ≤ rhs + 3 se.
    UpperBound,
}

/// Monte Carlo comparison of two estimators at 3 standard errors. The
/// standard error is that of the per-path difference, so correlated
/// estimators are compared at their true resolution.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub se: f64,
    #[serde(rename = "n")]
    pub n_samples: usize,
    pub pass: bool,
    #[serde(skip)]
    pub kind: CheckKind,
}

impl IdentityReport {
    fn from_diffs(check: impl Into<String>, lhs: f64, rhs: f64, diffs: &[f64], kind: CheckKind) -> Self {
        let n = diffs.len();
        let se = crate::stats::standard_error(diffs);
        let pass = match kind {
            CheckKind::Equality => (lhs - rhs).abs() <= 3.0 * se,
            CheckKind::UpperBound => lhs <= rhs + 3.0 * se,
        };
        IdentityReport { check: check.into(), lhs, rhs, se, n_samples: n, pass, kind }
    }
}

/// A seeded rule producing an integrand per path.
pub trait IntegrandSampler: Sync {
    fn sample(&self, path: &BrownianPath) -> IntegrandOnGrid;
}

impl<F> IntegrandSampler for F
where
    F: Fn(&BrownianPath) -> IntegrandOnGrid + Sync,
{
    fn sample(&self, path: &BrownianPath) -> IntegrandOnGrid {
        self(path)
    }
}

fn require_paths(n_paths: usize) -> Result<()> {
    if n_paths < 1000 {
        return Err(Error::Validation(format!(
            "identity checks need at least 1000 paths, got {n_paths}"
        )));
    }
    Ok(())
}

fn per_path<T, F>(n_paths: usize, master_seed: u64, t_min: f64, t_max: f64, dt: f64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&BrownianPath) -> Result<T> + Sync,
{
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let seed = rng::key_hash(master_seed, &[domain::PATH_OF_ENSEMBLE, i as u64]);
            let path = BrownianPath::sample(seed, 1, t_min, t_max, dt)?;
            f(&path)
        })
        .collect()
}

/// Left-point quadrature of ∫ f g dt over [a, b] on the grid.
fn grid_dt_integral(f: &[f64], g: &[f64], path: &BrownianPath, a: f64, b: f64) -> Result<f64> {
    let ia = path.index_of_time(a)?;
    let ib = path.index_of_time(b)?;
    let mut s = 0.0;
    for j in ia..ib {
        s += f[j] * g[j] * path.dt;
    }
    Ok(s)
}

/// Ito isometry E(∫₀ᵀ f dW)² = E ∫₀ᵀ f² dt.
pub fn isometry_check(
    f: &dyn IntegrandSampler,
    t_final: f64,
    dt: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<IdentityReport> {
    require_paths(n_paths)?;
    let samples = per_path(n_paths, master_seed, 0.0, t_final, dt, |path| {
        let fv = f.sample(path);
        fv.check_against(path)?;
        let integral = ito_integral(&fv, path, 0.0, t_final)?;
        let quad = grid_dt_integral(&fv.values, &fv.values, path, 0.0, t_final)?;
        Ok((integral * integral, quad))
    })?;
    let lhs = samples.iter().map(|s| s.0).sum::<f64>() / n_paths as f64;
    let rhs = samples.iter().map(|s| s.1).sum::<f64>() / n_paths as f64;
    let diffs: Vec<f64> = samples.iter().map(|s| s.0 - s.1).collect();
    Ok(IdentityReport::from_diffs("isometry", lhs, rhs, &diffs, CheckKind::Equality))
}

/// Generalized isometry E(∫₀ᵃ f dW ∫₀ᵇ g dW) = E ∫₀^{a∧b} f g dt.
#[allow(clippy::too_many_arguments)]
pub fn generalized_isometry_check(
    f: &dyn IntegrandSampler,
    g: &dyn IntegrandSampler,
    a: f64,
    b: f64,
    dt: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<IdentityReport> {
    require_paths(n_paths)?;
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Validation("generalized isometry needs a, b > 0".into()));
    }
    let horizon = a.max(b);
    let cut = a.min(b);
    let samples = per_path(n_paths, master_seed, 0.0, horizon, dt, |path| {
        let fv = f.sample(path);
        let gv = g.sample(path);
        fv.check_against(path)?;
        gv.check_against(path)?;
        let ia = ito_integral(&fv, path, 0.0, a)?;
        let ib = ito_integral(&gv, path, 0.0, b)?;
        let quad = grid_dt_integral(&fv.values, &gv.values, path, 0.0, cut)?;
        Ok((ia * ib, quad))
    })?;
    let lhs = samples.iter().map(|s| s.0).sum::<f64>() / n_paths as f64;
    let rhs = samples.iter().map(|s| s.1).sum::<f64>() / n_paths as f64;
    let diffs: Vec<f64> = samples.iter().map(|s| s.0 - s.1).collect();
    Ok(IdentityReport::from_diffs("generalized_isometry", lhs, rhs, &diffs, CheckKind::Equality))
}

/// Doob-type maximal bound
/// P(sup_{t0≤t≤T} |∫_{t0}^t f dW| ≥ λ) ≤ (1/λ²) E ∫_{t0}^T f² dt.
/// The sup is taken over grid nodes (bias O(√dt), documented).
#[allow(clippy::too_many_arguments)]
pub fn doob_bound_check(
    f: &dyn IntegrandSampler,
    lambda: f64,
    t0: f64,
    t_final: f64,
    dt: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<IdentityReport> {
    require_paths(n_paths)?;
    if !(lambda > 0.0) {
        return Err(Error::Validation(format!("λ must be positive, got {lambda}")));
    }
    let samples = per_path(n_paths, master_seed, t0.min(0.0), t_final, dt, |path| {
        let fv = f.sample(path);
        fv.check_against(path)?;
        let i0 = path.index_of_time(t0)?;
        let i1 = path.index_of_time(t_final)?;
        let mut running = 0.0;
        let mut sup: f64 = 0.0;
        for j in i0..i1 {
            running += fv.values[j] * path.increment(j, 0);
            sup = sup.max(running.abs());
        }
        let hit = if sup >= lambda { 1.0 } else { 0.0 };
        let quad = grid_dt_integral(&fv.values, &fv.values, path, t0, t_final)? / (lambda * lambda);
        Ok((hit, quad))
    })?;
    let lhs = samples.iter().map(|s| s.0).sum::<f64>() / n_paths as f64;
    let rhs = samples.iter().map(|s| s.1).sum::<f64>() / n_paths as f64;
    let diffs: Vec<f64> = samples.iter().map(|s| s.0 - s.1).collect();
    Ok(IdentityReport::from_diffs("doob_bound", lhs, rhs, &diffs, CheckKind::UpperBound))
}

/// Second-moment maximal bound E sup |∫ f dW|² ≤ 4 E ∫ f² dt
/// (the 2k-moment family exercised at k = 1).
pub fn second_moment_sup_check(
    f: &dyn IntegrandSampler,
    t0: f64,
    t_final: f64,
    dt: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<IdentityReport> {
    require_paths(n_paths)?;
    let samples = per_path(n_paths, master_seed, t0.min(0.0), t_final, dt, |path| {
        let fv = f.sample(path);
        fv.check_against(path)?;
        let i0 = path.index_of_time(t0)?;
        let i1 = path.index_of_time(t_final)?;
        let mut running = 0.0;
        let mut sup: f64 = 0.0;
        for j in i0..i1 {
            running += fv.values[j] * path.increment(j, 0);
            sup = sup.max(running.abs());
        }
        let quad = grid_dt_integral(&fv.values, &fv.values, path, t0, t_final)?;
        Ok((sup * sup, 4.0 * quad))
    })?;
    let lhs = samples.iter().map(|s| s.0).sum::<f64>() / n_paths as f64;
    let rhs = samples.iter().map(|s| s.1).sum::<f64>() / n_paths as f64;
    let diffs: Vec<f64> = samples.iter().map(|s| s.0 - s.1).collect();
    Ok(IdentityReport::from_diffs("second_moment_sup", lhs, rhs, &diffs, CheckKind::UpperBound))
}

/// Terminal gap between g(T, X_T) and the Ito-formula integral form
/// accumulated on the same grid, with X simulated by Euler–Maruyama on the
/// given path.
pub fn ito_formula_residual(
    model: &SdeModel,
    obs: &ScalarObservable,
    path: &BrownianPath,
    x0: &[f64],
    t_final: f64,
) -> Result<f64> {
    if obs.n != model.n {
        return Err(Error::Validation(format!(
            "observable dimension {} does not match model n = {}",
            obs.n, model.n
        )));
    }
    let traj = euler_maruyama(model, x0, path, 0.0, t_final)?;
    let i0 = path.index_of_time(0.0)?;
    let dt = path.dt;
    let mut acc = obs.eval(0.0, x0);
    for k in 0..traj.len() - 1 {
        let t = traj.times[k];
        let x = traj.state(k);
        let grad = obs.gradient(t, x);
        let hess = obs.hessian(t, x);
        let b = model.drift(x);
        let s = model.sigma(x);
        let mut drift_part = obs.time_derivative(t, x);
        for i in 0..model.n {
            drift_part += grad[i] * b[i];
        }
        let mut tr = 0.0;
        for i in 0..model.n {
            for l in 0..model.n {
                let h = hess[(i, l)];
                if h == 0.0 {
                    continue;
                }
                let mut a_il = 0.0;
                for j in 0..model.m {
                    a_il += s[(i, j)] * s[(l, j)];
                }
                tr += a_il * h;
            }
        }
        drift_part += 0.5 * tr;
        let mut noise_part = 0.0;
        for j in 0..model.m {
            let mut gs = 0.0;
            for i in 0..model.n {
                gs += grad[i] * s[(i, j)];
            }
            noise_part += gs * path.increment(i0 + k, j);
        }
        acc += drift_part * dt + noise_part;
    }
    let terminal = obs.eval(t_final, traj.terminal());
    Ok((terminal - acc).abs())
}

/// Terminal gap of the discrete product rule
/// Δ(XY) = X ΔY + Y ΔX + ΔX ΔY, which is an algebraic identity on grids, so
/// the returned value is at floating-point rounding level.
pub fn product_rule_residual(x: &Trajectory, y: &Trajectory) -> Result<f64> {
    if x.n != 1 || y.n != 1 {
        return Err(Error::Validation("product rule is stated for scalar trajectories".into()));
    }
    if x.len() != y.len()
        || x.times
            .iter()
            .zip(&y.times)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::Validation("trajectories must share a grid".into()));
    }
    let mut acc = x.state(0)[0] * y.state(0)[0];
    for k in 0..x.len() - 1 {
        let (xk, yk) = (x.state(k)[0], y.state(k)[0]);
        let dx = x.state(k + 1)[0] - xk;
        let dy = y.state(k + 1)[0] - yk;
        acc += xk * dy + yk * dx + dx * dy;
    }
    let terminal = x.terminal()[0] * y.terminal()[0];
    Ok((terminal - acc).abs())
}
