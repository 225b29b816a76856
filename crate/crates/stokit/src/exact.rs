//! Closed-form solutions of the benchmark systems, evaluated on a supplied
//! Brownian path. These are the oracles the schemes are measured against.
//!
//! Stochastic convolutions with deterministic integrands are evaluated by
//! left-point Ito sums on the path grid, which is strongly O(dt) accurate
//! and unambiguous because the integrands are non-random. Every oracle is
//! emitted on the same grid as the driving path, with no internal
//! sub-stepping, so schemes and oracles share ω exactly.

use std::sync::Arc;

use crate::brownian::BrownianPath;
use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::linalg::{matexp, Mat};

/// Ornstein–Uhlenbeck parameters for dX = −bX dt + a dW.
///
/// `sigma0_sq` is the variance of the (independent, centered Gaussian)
/// initial condition that the covariance formulas assume.
#[derive(Clone, Copy, Debug)]
pub struct OUParams {
    pub b: f64,
    pub a: f64,
    pub sigma0_sq: f64,
}

impl OUParams {
    pub fn new(b: f64, a: f64, sigma0_sq: f64) -> Result<Self> {
        if sigma0_sq < 0.0 {
            return Err(Error::Validation("initial variance must be nonnegative".into()));
        }
        Ok(OUParams { b, a, sigma0_sq })
    }

    /// Initial variance that makes the process stationary: a²/(2b).
    pub fn stationary(b: f64, a: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::Validation("stationarity needs b > 0".into()));
        }
        Self::new(b, a, a * a / (2.0 * b))
    }
}

/// Exact OU solution X_t = e^{−bt} x0 + a e^{−bt} ∫₀ᵗ e^{bs} dW_s with the
/// convolution integral evaluated by a left-point sum on the path grid.
pub fn ou_solve(params: &OUParams, x0: f64, path: &BrownianPath, t_final: f64) -> Result<Trajectory> {
    let i0 = path.index_of_time(0.0)?;
    let i1 = path.index_of_time(t_final)?;
    if i1 < i0 {
        return Err(Error::Validation("t_final must be >= 0".into()));
    }
    let b = params.b;
    let n_nodes = i1 - i0 + 1;
    let mut times = Vec::with_capacity(n_nodes);
    let mut states = Vec::with_capacity(n_nodes);
    let mut conv = 0.0; // ∫₀ᵗ e^{bs} dW_s
    for k in 0..n_nodes {
        let t = path.time(i0 + k);
        times.push(t);
        states.push((-b * t).exp() * (x0 + params.a * conv));
        if k + 1 < n_nodes {
            conv += (b * t).exp() * path.increment(i0 + k, 0);
        }
    }
    Ok(Trajectory::new("ou", times, states, 1, path.seed))
}

/// Cov(X_s, X_t) = σ² e^{−b(s+t)} + (a²/2b)(e^{−b|s−t|} − e^{−b(s+t)}),
/// which collapses to σ² e^{−b|s−t|} in the stationary case σ² = a²/(2b).
pub fn ou_covariance(params: &OUParams, s: f64, t: f64) -> Result<f64> {
    if params.b == 0.0 {
        return Err(Error::Validation("covariance formula is singular at b = 0".into()));
    }
    if s < 0.0 || t < 0.0 {
        return Err(Error::Validation("covariance times must be nonnegative".into()));
    }
    let b = params.b;
    let sum = (-(b) * (s + t)).exp();
    Ok(params.sigma0_sq * sum + params.a * params.a / (2.0 * b) * ((-b * (s - t).abs()).exp() - sum))
}

/// Geometric Brownian motion X_t = x0 exp((r − α²/2) t + α W_t).
pub fn gbm_solve(r: f64, alpha: f64, x0: f64, path: &BrownianPath, t_final: f64) -> Result<Trajectory> {
    if !(x0 > 0.0) {
        return Err(Error::Validation(format!(
            "geometric Brownian motion needs x0 > 0, got {x0}"
        )));
    }
    let i0 = path.index_of_time(0.0)?;
    let i1 = path.index_of_time(t_final)?;
    let n_nodes = i1 - i0 + 1;
    let mut times = Vec::with_capacity(n_nodes);
    let mut states = Vec::with_capacity(n_nodes);
    let drift = r - 0.5 * alpha * alpha;
    for k in 0..n_nodes {
        let t = path.time(i0 + k);
        times.push(t);
        states.push(x0 * (drift * t + alpha * path.value(i0 + k, 0)).exp());
    }
    Ok(Trajectory::new("gbm", times, states, 1, path.seed))
}

/// General linear scalar SDE dX = (a1(t) X + a2(t)) dt + (b1(t) X + b2(t)) dW
/// through the fundamental solution
/// Φ_t = exp(∫ (a1 − b1²/2) ds + ∫ b1 dW) and variation of constants.
pub fn linear_scalar_solve(
    a1: &(dyn Fn(f64) -> f64 + Sync),
    a2: &(dyn Fn(f64) -> f64 + Sync),
    b1: &(dyn Fn(f64) -> f64 + Sync),
    b2: &(dyn Fn(f64) -> f64 + Sync),
    x0: f64,
    path: &BrownianPath,
    t_final: f64,
) -> Result<Trajectory> {
    let i0 = path.index_of_time(0.0)?;
    let i1 = path.index_of_time(t_final)?;
    let dt = path.dt;
    let n_nodes = i1 - i0 + 1;
    let mut times = Vec::with_capacity(n_nodes);
    let mut states = Vec::with_capacity(n_nodes);
    let mut log_phi = 0.0f64;
    let mut inner = x0; // x0 + ∫ (a2 − b1 b2) Φ⁻¹ ds + ∫ b2 Φ⁻¹ dW
    for k in 0..n_nodes {
        let t = path.time(i0 + k);
        let phi = log_phi.exp();
        if !phi.is_finite() {
            return Err(Error::Data(format!("fundamental solution overflowed at t = {t}")));
        }
        times.push(t);
        states.push(phi * inner);
        if k + 1 < n_nodes {
            let (a1v, a2v, b1v, b2v) = (a1(t), a2(t), b1(t), b2(t));
            if ![a1v, a2v, b1v, b2v].iter().all(|v| v.is_finite()) {
                return Err(Error::Data(format!("non-finite coefficient at t = {t}")));
            }
            let dw = path.increment(i0 + k, 0);
            let phi_inv = 1.0 / phi;
            inner += (a2v - b1v * b2v) * phi_inv * dt + b2v * phi_inv * dw;
            log_phi += (a1v - 0.5 * b1v * b1v) * dt + b1v * dw;
        }
    }
    Ok(Trajectory::new("linear_scalar", times, states, 1, path.seed))
}

type TimeVec = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Constant-matrix linear system dX = (A X + f(t)) dt + Σ_k g_k(t) dW_k.
#[derive(Clone)]
pub struct LinearSystemParams {
    pub a: Mat,
    pub f: TimeVec,
    pub g: Vec<TimeVec>,
}

impl LinearSystemParams {
    pub fn new(a: Mat, f: TimeVec, g: Vec<TimeVec>) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Validation("A must be square".into()));
        }
        let n = a.rows;
        if f(0.0).len() != n || g.iter().any(|gk| gk(0.0).len() != n) {
            return Err(Error::Validation("f and g_k must return n-vectors".into()));
        }
        Ok(LinearSystemParams { a, f, g })
    }

    /// Constant forcing and noise columns.
    pub fn constant(a: Mat, f: Vec<f64>, g: Vec<Vec<f64>>) -> Result<Self> {
        let fc = f.clone();
        let gs: Vec<TimeVec> = g
            .into_iter()
            .map(|gk| -> TimeVec { Arc::new(move |_| gk.clone()) })
            .collect();
        Self::new(a, Arc::new(move |_| fc.clone()), gs)
    }
}

/// X_t = e^{At} x0 + ∫₀ᵗ e^{A(t−s)} f(s) ds + Σ_k ∫₀ᵗ e^{A(t−s)} g_k(s) dW_k(s).
///
/// Implemented as the one-step recursion
/// X_{k+1} = E X_k + J f(t_k) + E Σ g_k(t_k) ΔW_k with E = e^{A dt} and
/// J = ∫₀^{dt} e^{As} ds, both computed once by the Padé exponential of the
/// augmented matrix [[A, I], [0, 0]] dt. This is the left-point quadrature of
/// the convolution integrals (exact for the f term when f is constant).
pub fn linear_system_solve(
    params: &LinearSystemParams,
    x0: &[f64],
    path: &BrownianPath,
    t_final: f64,
) -> Result<Trajectory> {
    let n = params.a.rows;
    let m = params.g.len();
    if x0.len() != n {
        return Err(Error::Validation("initial state dimension mismatch".into()));
    }
    if path.m != m {
        return Err(Error::Validation(format!(
            "path carries {} noise columns, system has {m}",
            path.m
        )));
    }
    let i0 = path.index_of_time(0.0)?;
    let i1 = path.index_of_time(t_final)?;
    let dt = path.dt;
    // Augmented exponential gives E = e^{A dt} and J = ∫₀^{dt} e^{As} ds.
    let mut aug = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = params.a[(i, j)] * dt;
        }
        aug[(i, n + i)] = dt;
    }
    let eaug = matexp(&aug);
    let mut e = Mat::zeros(n, n);
    let mut jmat = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            e[(i, j)] = eaug[(i, j)];
            jmat[(i, j)] = eaug[(i, n + j)];
        }
    }
    let n_nodes = i1 - i0 + 1;
    let mut x = x0.to_vec();
    let mut times = Vec::with_capacity(n_nodes);
    let mut states = Vec::with_capacity(n_nodes * n);
    for k in 0..n_nodes {
        let t = path.time(i0 + k);
        times.push(t);
        states.extend_from_slice(&x);
        if k + 1 < n_nodes {
            let fv = (params.f)(t);
            let mut bump = x.clone();
            for (j, gk) in params.g.iter().enumerate() {
                let gv = gk(t);
                let dw = path.increment(i0 + k, j);
                for i in 0..n {
                    bump[i] += gv[i] * dw;
                }
            }
            let mut next = e.matvec(&bump);
            let jf = jmat.matvec(&fv);
            for i in 0..n {
                next[i] += jf[i];
            }
            x = next;
        }
    }
    Ok(Trajectory::new("linear_system", times, states, n, path.seed))
}

/// Stochastic harmonic oscillator x'' + k x = h Ẇ, solved through the
/// rotation form of e^{At} (valid because A² = −kI):
///
///   x(t) = x0 cos(ωt) + (y0/ω) sin(ωt) + (h/ω) ∫₀ᵗ sin(ω(t−s)) dW_s,
///   y(t) = −x0 ω sin(ωt) + y0 cos(ωt) + h ∫₀ᵗ cos(ω(t−s)) dW_s,  ω = √k.
///
/// The convolutions are expanded by the angle-sum identities so a single
/// pass maintains running sums of cos(ωs) dW and sin(ωs) dW.
pub fn oscillator_solve(
    k: f64,
    h: f64,
    x0: f64,
    y0: f64,
    path: &BrownianPath,
    t_final: f64,
) -> Result<Trajectory> {
    if !(k > 0.0) {
        return Err(Error::Validation(format!("oscillator stiffness must be positive, got {k}")));
    }
    let i0 = path.index_of_time(0.0)?;
    let i1 = path.index_of_time(t_final)?;
    let omega = k.sqrt();
    let n_nodes = i1 - i0 + 1;
    let mut times = Vec::with_capacity(n_nodes);
    let mut states = Vec::with_capacity(n_nodes * 2);
    let mut cos_sum = 0.0; // ∫ cos(ωs) dW
    let mut sin_sum = 0.0; // ∫ sin(ωs) dW
    for idx in 0..n_nodes {
        let t = path.time(i0 + idx);
        let (s, c) = (omega * t).sin_cos();
        let conv_sin = s * cos_sum - c * sin_sum;
        let conv_cos = c * cos_sum + s * sin_sum;
        times.push(t);
        states.push(x0 * c + y0 / omega * s + h / omega * conv_sin);
        states.push(-x0 * omega * s + y0 * c + h * conv_cos);
        if idx + 1 < n_nodes {
            let dw = path.increment(i0 + idx, 0);
            cos_sum += c * dw;
            sin_sum += s * dw;
        }
    }
    Ok(Trajectory::new("oscillator", times, states, 2, path.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{self, path_seed, Scheme};
    use crate::model::builtin;
    use crate::rng::{self, domain};
    use crate::stats;

    #[test]
    fn ou_without_noise_is_pure_decay() {
        let params = OUParams::new(1.4, 0.0, 0.0).unwrap();
        let path = BrownianPath::sample(1, 1, 0.0, 2.0, 0.01).unwrap();
        let traj = ou_solve(&params, 3.0, &path, 2.0).unwrap();
        for k in (0..traj.len()).step_by(37) {
            let want = 3.0 * (-1.4 * traj.times[k]).exp();
            assert!((traj.state(k)[0] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn ou_variance_follows_formula() {
        let params = OUParams::new(1.0, std::f64::consts::SQRT_2, 1.0).unwrap();
        let n = 4000;
        let dt = 0.005;
        let sigma0 = params.sigma0_sq.sqrt();
        let nodes = [40usize, 120, 200];
        let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(n); nodes.len()];
        for i in 0..n {
            let seed = path_seed(4242, i);
            let path = BrownianPath::sample(seed, 1, 0.0, 1.0, dt).unwrap();
            let x0 = sigma0 * rng::normal(seed, &[domain::INITIAL_STATE]);
            let traj = ou_solve(&params, x0, &path, 1.0).unwrap();
            for (slot, &node) in nodes.iter().enumerate() {
                samples[slot].push(traj.state(node)[0]);
            }
        }
        for (slot, &node) in nodes.iter().enumerate() {
            let t = node as f64 * dt;
            let want = ou_covariance(&params, t, t).unwrap();
            let got = stats::sample_var(&samples[slot]);
            let se = want * (2.0 / n as f64).sqrt();
            assert!((got - want).abs() < 3.0 * se + 0.01 * want, "t={t}: var {got} want {want}");
        }
    }

    #[test]
    fn ou_covariance_closed_values() {
        // Stationary case: Cov = (a²/2b) e^{−b|s−t|}; at b=1, a=√2, |s−t|=ln 2
        // the value is exactly 1/2.
        let params = OUParams::stationary(1.0, std::f64::consts::SQRT_2).unwrap();
        assert!((params.sigma0_sq - 1.0).abs() < 1e-15);
        let c = ou_covariance(&params, 0.0, std::f64::consts::LN_2).unwrap();
        assert!((c - 0.5).abs() < 1e-14, "Cov(X_0, X_ln2) = {c}");
        for (s, t) in [(0.2f64, 1.3f64), (2.0, 0.4)] {
            let diag = ou_covariance(&params, s, s).unwrap();
            assert!((diag - params.sigma0_sq).abs() < 1e-14);
            let c = ou_covariance(&params, s, t).unwrap();
            let want = params.sigma0_sq * (-params.b * (s - t).abs()).exp();
            assert!((c - want).abs() < 1e-14);
        }
        let bad = OUParams::new(0.0, 1.0, 1.0).unwrap();
        assert!(ou_covariance(&bad, 0.1, 0.2).is_err());
    }

    #[test]
    fn ou_empirical_covariance_at_lag_ln2() {
        // Cov(X_0, X_{ln 2}) = 1/2 in the stationary unit-variance case.
        let params = OUParams::stationary(1.0, std::f64::consts::SQRT_2).unwrap();
        let t_final = std::f64::consts::LN_2;
        let dt = t_final / 512.0;
        let n = 10_000;
        let mut x_at_0 = Vec::with_capacity(n);
        let mut x_at_t = Vec::with_capacity(n);
        for i in 0..n {
            let seed = path_seed(31337, i);
            let path = BrownianPath::sample(seed, 1, 0.0, t_final, dt).unwrap();
            let x0 = rng::normal(seed, &[domain::INITIAL_STATE]);
            let traj = ou_solve(&params, x0, &path, t_final).unwrap();
            x_at_0.push(traj.state(0)[0]);
            x_at_t.push(traj.terminal()[0]);
        }
        let cov = stats::sample_cov(&x_at_0, &x_at_t);
        let se = (1.5 / n as f64).sqrt(); // Var(XY) for correlated unit Gaussians ≈ 1 + ρ²
        assert!((cov - 0.5).abs() < 3.0 * se, "cov {cov}");
    }

    #[test]
    fn gbm_reduces_to_exponential_growth() {
        let path = BrownianPath::sample(2, 1, 0.0, 1.0, 0.01).unwrap();
        let traj = gbm_solve(0.7, 0.0, 2.0, &path, 1.0).unwrap();
        for k in (0..traj.len()).step_by(13) {
            let want = 2.0 * (0.7 * traj.times[k]).exp();
            assert!((traj.state(k)[0] - want).abs() <= 1e-12 * want);
        }
        assert!(gbm_solve(0.7, 0.2, 0.0, &path, 1.0).is_err());
        assert!(gbm_solve(0.7, 0.2, -1.0, &path, 1.0).is_err());
    }

    #[test]
    fn gbm_log_mean_matches_drift() {
        // E ln(X_t/x0) = (r − α²/2) t.
        let (r, alpha, t_final) = (0.5, 0.8, 1.0);
        let n = 4000;
        let mut logs = Vec::with_capacity(n);
        for i in 0..n {
            let path = BrownianPath::sample(path_seed(8, i), 1, 0.0, t_final, 0.01).unwrap();
            let traj = gbm_solve(r, alpha, 1.0, &path, t_final).unwrap();
            logs.push(traj.terminal()[0].ln());
        }
        let want = (r - 0.5 * alpha * alpha) * t_final;
        let se = stats::standard_error(&logs);
        let got = stats::mean(&logs);
        assert!((got - want).abs() < 3.0 * se, "log-mean {got}, want {want}");
    }

    #[test]
    fn linear_scalar_reduces_to_gbm() {
        let (r, alpha) = (0.4, 0.9);
        let path = BrownianPath::sample(5, 1, 0.0, 1.0, 0.002).unwrap();
        let general = linear_scalar_solve(
            &move |_| r,
            &|_| 0.0,
            &move |_| alpha,
            &|_| 0.0,
            1.5,
            &path,
            1.0,
        )
        .unwrap();
        let gbm = gbm_solve(r, alpha, 1.5, &path, 1.0).unwrap();
        for k in 0..general.len() {
            let (a, b) = (general.state(k)[0], gbm.state(k)[0]);
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "node {k}: {a} vs {b}");
        }
    }

    #[test]
    fn linear_scalar_reduces_to_ou() {
        let (b, a) = (1.1, 0.7);
        let path = BrownianPath::sample(6, 1, 0.0, 1.0, 0.002).unwrap();
        let general = linear_scalar_solve(
            &move |_| -b,
            &|_| 0.0,
            &|_| 0.0,
            &move |_| a,
            0.8,
            &path,
            1.0,
        )
        .unwrap();
        let params = OUParams::new(b, a, 0.0).unwrap();
        let ou = ou_solve(&params, 0.8, &path, 1.0).unwrap();
        for k in 0..general.len() {
            let (x, y) = (general.state(k)[0], ou.state(k)[0]);
            assert!((x - y).abs() <= 1e-10 * y.abs().max(1.0), "node {k}: {x} vs {y}");
        }
    }

    #[test]
    fn linear_scalar_agrees_with_milstein_as_dt_shrinks() {
        // Generic constant coefficients with both multiplicative and additive
        // noise: the closed form and the scheme converge at order >= 0.5.
        let model = builtin::linear_scalar(0.3, 0.0, 0.4, 0.0);
        let mut gaps = Vec::new();
        for level in 0..3 {
            let dt = 0.01 / f64::powi(2.0, level);
            let mut rms = 0.0;
            let paths = 64;
            for i in 0..paths {
                let path = BrownianPath::sample(path_seed(70 + level as u64, i), 1, 0.0, 1.0, dt)
                    .unwrap();
                let closed = linear_scalar_solve(
                    &|_| 0.3,
                    &|_| 0.0,
                    &|_| 0.4,
                    &|_| 0.0,
                    1.0,
                    &path,
                    1.0,
                )
                .unwrap();
                let num = integrate::milstein(&model, &[1.0], &path, 0.0, 1.0).unwrap();
                let d = closed.terminal()[0] - num.terminal()[0];
                rms += d * d;
            }
            gaps.push((rms / paths as f64).sqrt());
        }
        let xs: Vec<f64> = (0..3).map(|l| (0.01 / f64::powi(2.0, l)).ln()).collect();
        let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
        let slope = crate::linalg::ls_slope(&xs, &ys);
        assert!(slope >= 0.5, "convergence slope {slope}, gaps {gaps:?}");
    }

    #[test]
    fn linear_system_with_identity_noise_shifts_by_w() {
        let params = LinearSystemParams::constant(
            Mat::zeros(2, 2),
            vec![0.0, 0.0],
            vec![vec![1.0, 0.0]],
        )
        .unwrap();
        let path = BrownianPath::sample(7, 1, 0.0, 1.0, 0.01).unwrap();
        let traj = linear_system_solve(&params, &[0.5, -0.25], &path, 1.0).unwrap();
        let i0 = path.index_of_time(0.0).unwrap();
        for k in 0..traj.len() {
            let w = path.value(i0 + k, 0);
            assert!((traj.state(k)[0] - (0.5 + w)).abs() < 1e-12);
            assert!((traj.state(k)[1] + 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_system_deterministic_part_matches_rk4() {
        let a = Mat::from_rows(&[&[0.0, 1.0], &[-2.0, -0.5]]);
        // A zero noise column keeps the solver's m = 1 contract while making
        // the dynamics purely deterministic.
        let params = LinearSystemParams::constant(a.clone(), vec![0.3, -0.1], vec![vec![0.0, 0.0]])
            .unwrap();
        let path = BrownianPath::sample(8, 1, 0.0, 1.0, 0.001).unwrap();
        let traj = linear_system_solve(&params, &[1.0, 0.0], &path, 1.0).unwrap();
        let ode = crate::model::SdeModel::new(
            2,
            1,
            "ode",
            move |x| {
                let mut v = a.matvec(x);
                v[0] += 0.3;
                v[1] -= 0.1;
                v
            },
            |_| Mat::zeros(2, 1),
        )
        .unwrap();
        let reference = integrate::rk4_reference(&ode, &[1.0, 0.0], 0.0, 1.0, 0.001, 10).unwrap();
        for k in (0..traj.len()).step_by(100) {
            for i in 0..2 {
                let (x, y) = (traj.state(k)[i], reference.state(k)[i]);
                assert!((x - y).abs() < 1e-6, "node {k} comp {i}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn oscillator_conserves_energy_without_noise() {
        // k x² + y² is invariant for the deterministic oscillator.
        let k = 3.0;
        let path = BrownianPath::sample(9, 1, 0.0, 10.0, 0.01).unwrap();
        let traj = oscillator_solve(k, 0.0, 1.0, 0.5, &path, 10.0).unwrap();
        let e0 = k * 1.0 + 0.25;
        for idx in (0..traj.len()).step_by(50) {
            let s = traj.state(idx);
            let e = k * s[0] * s[0] + s[1] * s[1];
            assert!((e - e0).abs() <= 1e-9 * e0, "energy {e} at node {idx}");
        }
        assert!(oscillator_solve(-1.0, 0.1, 0.0, 0.0, &path, 1.0).is_err());
    }

    #[test]
    fn rotation_matrix_quarter_period() {
        // k = 1: e^{At} at t = π/2 is [[0, 1], [-1, 0]].
        let e = matexp(&Mat::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).scale(std::f64::consts::FRAC_PI_2));
        assert!(e[(0, 0)].abs() < 1e-13 && (e[(0, 1)] - 1.0).abs() < 1e-13);
        assert!((e[(1, 0)] + 1.0).abs() < 1e-13 && e[(1, 1)].abs() < 1e-13);
    }

    #[test]
    fn oscillator_matches_linear_system_on_shared_path() {
        let (k, h) = (2.0, 0.6);
        let a = Mat::from_rows(&[&[0.0, 1.0], &[-k, 0.0]]);
        let params =
            LinearSystemParams::constant(a, vec![0.0, 0.0], vec![vec![0.0, h]]).unwrap();
        let path = BrownianPath::sample(10, 1, 0.0, 2.0, 0.001).unwrap();
        let osc = oscillator_solve(k, h, 0.7, -0.2, &path, 2.0).unwrap();
        let sys = linear_system_solve(&params, &[0.7, -0.2], &path, 2.0).unwrap();
        let scale = osc
            .states
            .iter()
            .map(|v| v.abs())
            .fold(1.0f64, f64::max);
        for idx in 0..osc.len() {
            for i in 0..2 {
                let (x, y) = (osc.state(idx)[i], sys.state(idx)[i]);
                assert!((x - y).abs() <= 1e-10 * scale, "node {idx} comp {i}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn oscillator_variance_matches_isometry_quadrature() {
        // Var x(t) = (h²/k) ∫₀ᵗ sin²(√k (t−s)) ds, evaluated by quadrature.
        let (k, h, t_final) = (1.5, 0.8, 1.0);
        let n = 4000;
        let dt = 0.005;
        let mut xs = Vec::with_capacity(n);
        for i in 0..n {
            let path = BrownianPath::sample(path_seed(55, i), 1, 0.0, t_final, dt).unwrap();
            let traj = oscillator_solve(k, h, 0.0, 0.0, &path, t_final).unwrap();
            xs.push(traj.terminal()[0]);
        }
        let omega = k.sqrt();
        let steps = 10_000;
        let q = (0..steps)
            .map(|j| {
                let s = (j as f64 + 0.5) * t_final / steps as f64;
                (omega * (t_final - s)).sin().powi(2)
            })
            .sum::<f64>()
            * t_final
            / steps as f64;
        let want = h * h / k * q;
        let got = stats::sample_var(&xs);
        let se = want * (2.0 / n as f64).sqrt();
        assert!((got - want).abs() < 3.0 * se + 0.01 * want, "var {got}, want {want}");
    }

    #[test]
    fn em_strong_order_on_gbm_path_sharing() {
        // Smoke-level order check; the acceptance suite runs the full sweep.
        let model = builtin::population(0.5, 0.5);
        let reference =
            |path: &BrownianPath, t: f64| -> Result<Trajectory> { gbm_solve(0.5, 0.5, 1.0, path, t) };
        let dts = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
        let res = integrate::strong_order_estimate(
            &model,
            Scheme::EulerMaruyama,
            reference,
            &dts,
            200,
            1.0,
            99,
        )
        .unwrap();
        assert!((res.slope - 0.5).abs() < 0.25, "EM slope {}", res.slope);
    }

    #[test]
    fn em_strong_order_upgrades_on_additive_noise() {
        // Additive noise removes the Milstein correction, so Euler–Maruyama
        // already converges at strong order 1 on the OU system.
        let (b, a) = (1.0, 0.8);
        let model = builtin::langevin(b, a);
        let params = OUParams::new(b, a, 0.0).unwrap();
        let reference = move |path: &BrownianPath, t: f64| -> Result<Trajectory> {
            ou_solve(&params, 1.0, path, t)
        };
        let dts = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0];
        let res = integrate::strong_order_estimate(
            &model,
            Scheme::EulerMaruyama,
            reference,
            &dts,
            1000,
            1.0,
            113,
        )
        .unwrap();
        assert!((res.slope - 1.0).abs() <= 0.15, "EM-on-OU slope {}", res.slope);
    }
}
