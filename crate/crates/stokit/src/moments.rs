//! Mean-energy and error-growth diagnostics along ensembles.
//!
//! The mean energy obeys
//!   ½ d/dt E‖X_t‖² = E(X_t · b(X_t)) + ½ E Tr(σσᵀ)(X_t),
//! and the error U = X − Y against the noise-free reference dY = b(Y) dt
//! obeys the analogous balance with b(X) − b(Y) in place of b. Both are
//! verified by a per-path statistic: the centered time difference of ½‖Z‖²
//! minus the two right-hand-side terms, whose ensemble mean should vanish
//! within Monte Carlo resolution. Time derivatives of empirical moments use
//! centered differences (one-sided at the endpoints), so reported residuals
//! carry an O(dt²) discretization floor on top of the sampling error.

use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use crate::brownian::BrownianPath;
use crate::error::{Error, Result};
use crate::integrate::{
    path_seed, rk4_reference, run_ensemble_init, Ensemble, EnsembleStatistic, Scheme, Trajectory,
};
use crate::model::{builtin, SdeModel};

/// Mean-energy balance series with Monte Carlo standard errors.
#[derive(Clone, Debug, Serialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    /// ½ E‖X_t‖² per node.
    pub energy: Vec<f64>,
    pub energy_se: Vec<f64>,
    /// E(X·b) per node.
    pub drift_term: Vec<f64>,
    /// ½ E Tr(σσᵀ) per node.
    pub noise_term: Vec<f64>,
    /// Mean of the per-path balance statistic; ~0 when the identity holds.
    pub residual: Vec<f64>,
    pub residual_se: Vec<f64>,
}

/// Error-growth series for U = X − Y.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    /// ½ E‖U_t‖².
    pub half_mse: Vec<f64>,
    pub half_mse_se: Vec<f64>,
    /// E(U · [b(X) − b(Y)]).
    pub drift_term: Vec<f64>,
    /// ½ E Tr(σσᵀ)(X).
    pub noise_term: Vec<f64>,
    pub residual: Vec<f64>,
    pub residual_se: Vec<f64>,
    pub reference_label: String,
}

struct BalanceColumns {
    times: Vec<f64>,
    half_sq: Vec<f64>,
    half_sq_se: Vec<f64>,
    drift: Vec<f64>,
    noise: Vec<f64>,
    resid: Vec<f64>,
    resid_se: Vec<f64>,
}

fn series_from_ensemble(ens: &Ensemble) -> Result<BalanceColumns> {
    let nodes = ens.times.len();
    if nodes < 3 {
        return Err(Error::Validation(format!(
            "balance residuals need at least 3 time nodes, got {nodes}"
        )));
    }
    let c = ens.n_effective() as f64;
    let mut energy = Vec::with_capacity(nodes);
    let mut energy_se = Vec::with_capacity(nodes);
    let mut drift = Vec::with_capacity(nodes);
    let mut noise = Vec::with_capacity(nodes);
    let mut resid = Vec::with_capacity(nodes);
    let mut resid_se = Vec::with_capacity(nodes);
    for k in 0..nodes {
        energy.push(ens.half_sq_mean(k));
        energy_se.push(ens.half_sq_se(k));
        drift.push(ens.accum.sum_xb[k] / c);
        noise.push(ens.accum.sum_tr[k] / c);
        let rm = ens.accum.sum_resid[k] / c;
        let var = (ens.accum.sum_resid_sq[k] - c * rm * rm) / (c - 1.0);
        resid.push(rm);
        resid_se.push((var.max(0.0) / c).sqrt());
    }
    Ok(BalanceColumns {
        times: ens.times.clone(),
        half_sq: energy,
        half_sq_se: energy_se,
        drift,
        noise,
        resid,
        resid_se,
    })
}

/// Energy-balance residual series of an ensemble run in Energy mode.
pub fn energy_balance_residual(ens: &Ensemble) -> Result<MomentSeries> {
    if ens.statistic_is_error {
        return Err(Error::Validation(
            "ensemble carries error moments; use error_growth_series output directly".into(),
        ));
    }
    let cols = series_from_ensemble(ens)?;
    Ok(MomentSeries {
        times: cols.times,
        energy: cols.half_sq,
        energy_se: cols.half_sq_se,
        drift_term: cols.drift,
        noise_term: cols.noise,
        residual: cols.resid,
        residual_se: cols.resid_se,
    })
}

/// Run a stochastic ensemble next to the noise-free RK4 reference (dt/10
/// sub-steps) from the same initial state and reduce the error moments.
#[allow(clippy::too_many_arguments)]
pub fn error_growth_series(
    model: &SdeModel,
    x0: &[f64],
    scheme: Scheme,
    n_paths: usize,
    t_final: f64,
    dt: f64,
    master_seed: u64,
) -> Result<ErrorSeries> {
    let reference = Arc::new(rk4_reference(model, x0, 0.0, t_final, dt, 10)?);
    let x0v = x0.to_vec();
    let ens = run_ensemble_init(
        model,
        move |_, _| x0v.clone(),
        scheme,
        n_paths,
        0.0,
        t_final,
        dt,
        master_seed,
        EnsembleStatistic::ErrorVsReference(Arc::clone(&reference)),
    )?;
    let cols = series_from_ensemble(&ens)?;
    Ok(ErrorSeries {
        times: cols.times,
        half_mse: cols.half_sq,
        half_mse_se: cols.half_sq_se,
        drift_term: cols.drift,
        noise_term: cols.noise,
        residual: cols.resid,
        residual_se: cols.resid_se,
        reference_label: reference.label.clone(),
    })
}

/// Outcome of a nodewise Gronwall-type bound check
/// d/dt E‖Z‖² ≤ c(t) E‖Z‖², verified by the per-path statistic
/// FD_t(‖Z‖²) − c(t)‖Z(t)‖² at 3 standard errors of Monte Carlo slack.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub check: String,
    /// Constant coefficient, or the nodewise maximum when time-varying.
    pub coefficient: f64,
    /// Per-node coefficients when they vary along the reference trajectory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    pub violations: usize,
    pub violation_nodes: Vec<usize>,
    pub nodes: usize,
    pub pass: bool,
}

/// Shared driver: accumulate mean and SE of the per-path bound statistic.
#[allow(clippy::too_many_arguments)]
fn bound_check(
    check: &str,
    model: &SdeModel,
    x0: &[f64],
    coefficients: &[f64],
    reference: Option<&Trajectory>,
    n_paths: usize,
    t_final: f64,
    dt: f64,
    master_seed: u64,
) -> Result<BoundReport> {
    if n_paths < 1000 {
        return Err(Error::Validation(format!(
            "bound checks need at least 1000 paths, got {n_paths}"
        )));
    }
    let n_nodes = (t_final / dt).round() as usize + 1;
    if coefficients.len() != n_nodes {
        return Err(Error::Validation("coefficient array does not match the grid".into()));
    }
    const BLOCK: usize = 64;
    type BlockSums = (Vec<f64>, Vec<f64>, usize);
    let n_blocks = n_paths.div_ceil(BLOCK);
    let partials: Result<Vec<BlockSums>> = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let mut sum_d = vec![0.0; n_nodes];
            let mut sum_d2 = vec![0.0; n_nodes];
            let mut count = 0usize;
            for i in blk * BLOCK..((blk + 1) * BLOCK).min(n_paths) {
                let seed = path_seed(master_seed, i);
                let path = BrownianPath::sample(seed, model.m, 0.0, t_final, dt)?;
                let traj = match Scheme::EulerMaruyama.solve(model, x0, &path, 0.0, t_final) {
                    Ok(t) => t,
                    Err(Error::BlowUp { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let sq: Vec<f64> = (0..n_nodes)
                    .map(|k| {
                        let x = traj.state(k);
                        match reference {
                            None => x.iter().map(|v| v * v).sum::<f64>(),
                            Some(r) => {
                                let y = r.state(k);
                                x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                            }
                        }
                    })
                    .collect();
                for k in 0..n_nodes {
                    let fd = if k == 0 {
                        (sq[1] - sq[0]) / dt
                    } else if k == n_nodes - 1 {
                        (sq[k] - sq[k - 1]) / dt
                    } else {
                        (sq[k + 1] - sq[k - 1]) / (2.0 * dt)
                    };
                    let d = fd - coefficients[k] * sq[k];
                    sum_d[k] += d;
                    sum_d2[k] += d * d;
                }
                count += 1;
            }
            Ok((sum_d, sum_d2, count))
        })
        .collect();
    let partials = partials?;
    let mut sum_d = vec![0.0; n_nodes];
    let mut sum_d2 = vec![0.0; n_nodes];
    let mut count = 0usize;
    for (d, d2, c) in &partials {
        for k in 0..n_nodes {
            sum_d[k] += d[k];
            sum_d2[k] += d2[k];
        }
        count += c;
    }
    if count * 100 < n_paths * 99 {
        return Err(Error::Validation("more than 1% of bound-check paths blew up".into()));
    }
    let c = count as f64;
    let mut violation_nodes = Vec::new();
    for k in 0..n_nodes {
        let mean = sum_d[k] / c;
        let var = (sum_d2[k] - c * mean * mean) / (c - 1.0);
        let se = (var.max(0.0) / c).sqrt();
        // The inequality must hold up to 3 SE of Monte Carlo slack.
        if mean > 3.0 * se {
            violation_nodes.push(k);
        }
    }
    let coef_max = coefficients.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let constant = coefficients.iter().all(|&v| v == coefficients[0]);
    Ok(BoundReport {
        check: check.into(),
        coefficient: coef_max,
        coefficients: if constant { None } else { Some(coefficients.to_vec()) },
        violations: violation_nodes.len(),
        violation_nodes: violation_nodes.clone(),
        nodes: n_nodes,
        pass: violation_nodes.is_empty(),
    })
}

/// Energy bound for the stochastic Lorenz system:
/// d/dt E‖X‖² ≤ 2[−min(s,1,b) + ½(r+s+ε)] E‖X‖².
#[allow(clippy::too_many_arguments)]
pub fn lorenz_energy_bound_check(
    r: f64,
    s: f64,
    b: f64,
    eps: f64,
    x0: &[f64],
    n_paths: usize,
    t_final: f64,
    dt: f64,
    master_seed: u64,
) -> Result<BoundReport> {
    let model = builtin::lorenz(r, s, b, eps);
    let coef = 2.0 * (-s.min(1.0).min(b) + 0.5 * (r + s + eps));
    let n_nodes = (t_final / dt).round() as usize + 1;
    bound_check(
        "lorenz_energy_bound",
        &model,
        x0,
        &vec![coef; n_nodes],
        None,
        n_paths,
        t_final,
        dt,
        master_seed,
    )
}

/// Error bound for the stochastic Lorenz system against its noise-free
/// solution (ŷ, ẑ evaluated along the RK4 reference):
/// d/dt E‖U‖² ≤ 2[−min(s,1,b) + ½(r+s+|ŷ(t)|+|ẑ(t)|+ε)] E‖U‖².
#[allow(clippy::too_many_arguments)]
pub fn lorenz_error_bound_check(
    r: f64,
    s: f64,
    b: f64,
    eps: f64,
    x0: &[f64],
    n_paths: usize,
    t_final: f64,
    dt: f64,
    master_seed: u64,
) -> Result<BoundReport> {
    let model = builtin::lorenz(r, s, b, eps);
    let reference = rk4_reference(&model, x0, 0.0, t_final, dt, 10)?;
    let coefficients: Vec<f64> = (0..reference.len())
        .map(|k| {
            let yhat = reference.state(k)[1].abs();
            let zhat = reference.state(k)[2].abs();
            2.0 * (-s.min(1.0).min(b) + 0.5 * (r + s + yhat + zhat + eps))
        })
        .collect();
    bound_check(
        "lorenz_error_bound",
        &model,
        x0,
        &coefficients,
        Some(&reference),
        n_paths,
        t_final,
        dt,
        master_seed,
    )
}

/// Coefficient arrays for the error bound; exposed so reports and tests can
/// inspect the ε-linearity of the right-hand side.
pub fn lorenz_error_bound_coefficients(
    r: f64,
    s: f64,
    b: f64,
    eps: f64,
    x0: &[f64],
    t_final: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let model = builtin::lorenz(r, s, b, eps);
    let reference = rk4_reference(&model, x0, 0.0, t_final, dt, 10)?;
    Ok((0..reference.len())
        .map(|k| {
            let yhat = reference.state(k)[1].abs();
            let zhat = reference.state(k)[2].abs();
            2.0 * (-s.min(1.0).min(b) + 0.5 * (r + s + yhat + zhat + eps))
        })
        .collect())
}
