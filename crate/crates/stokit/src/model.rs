//! SDE system descriptions: drift b, diffusion σ, per-column Jacobians Dσ^j,
//! the generator A, and Stratonovich/Ito drift conversions.
//!
//! A model represents dX = b(X) dt + σ(X) dW with X in R^n and W in R^m.
//! Models are pure mappings with no internal state; explicit time dependence
//! enters only through the coefficient functions of the linear closed forms
//! in [`crate::exact`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{self, domain};

type VecFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type MatFn = dyn Fn(&[f64]) -> Mat + Send + Sync;
type JacFn = dyn Fn(&[f64]) -> Vec<Mat> + Send + Sync;

/// Drift/diffusion pair with optional analytic diffusion Jacobians.
#[derive(Clone)]
pub struct SdeModel {
    pub n: usize,
    pub m: usize,
    pub label: String,
    drift: Arc<VecFn>,
    sigma: Arc<MatFn>,
    sigma_jacobians: Option<Arc<JacFn>>,
    /// True when σ is n = m with zero off-diagonal entries (checked at probe
    /// points on construction); the Milstein scheme relies on it.
    pub diagonal_noise: bool,
}

impl SdeModel {
    /// Build a model and validate shapes (and Jacobians, when supplied,
    /// against central finite differences) at 8 pseudo-random probe states
    /// in [-1, 1]^n.
    pub fn new<B, S>(n: usize, m: usize, label: impl Into<String>, drift: B, sigma: S) -> Result<Self>
    where
        B: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        S: Fn(&[f64]) -> Mat + Send + Sync + 'static,
    {
        let model = SdeModel {
            n,
            m,
            label: label.into(),
            drift: Arc::new(drift),
            sigma: Arc::new(sigma),
            sigma_jacobians: None,
            diagonal_noise: false,
        };
        model.validate()
    }

    /// Attach analytic diffusion Jacobians (one n×n matrix per noise column).
    pub fn with_sigma_jacobians<J>(mut self, jac: J) -> Result<Self>
    where
        J: Fn(&[f64]) -> Vec<Mat> + Send + Sync + 'static,
    {
        self.sigma_jacobians = Some(Arc::new(jac));
        self.validate()
    }

    fn probe_states(&self) -> Vec<Vec<f64>> {
        (0..8)
            .map(|k| {
                (0..self.n)
                    .map(|i| {
                        2.0 * rng::uniform(0xC0FFEE, &[domain::PROBE, k, i as u64]) - 1.0
                    })
                    .collect()
            })
            .collect()
    }

    fn validate(self) -> Result<Self> {
        for x in self.probe_states() {
            let b = (self.drift)(&x);
            if b.len() != self.n || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "model '{}': drift must be a finite {}-vector",
                    self.label, self.n
                )));
            }
            let s = (self.sigma)(&x);
            if s.rows != self.n || s.cols != self.m || !s.is_finite() {
                return Err(Error::Validation(format!(
                    "model '{}': diffusion must be a finite {}x{} matrix",
                    self.label, self.n, self.m
                )));
            }
            if let Some(jac) = &self.sigma_jacobians {
                let js = jac(&x);
                if js.len() != self.m || js.iter().any(|j| j.rows != self.n || j.cols != self.n) {
                    return Err(Error::Validation(format!(
                        "model '{}': expected {} Jacobians of shape {}x{}",
                        self.label, self.m, self.n, self.n
                    )));
                }
                let fd = fd_sigma_jacobians(&*self.sigma, self.n, self.m, &x);
                for (j, (a, b)) in js.iter().zip(&fd).enumerate() {
                    for (va, vb) in a.data.iter().zip(&b.data) {
                        let scale = va.abs().max(vb.abs()).max(1.0);
                        if (va - vb).abs() > 1e-5 * scale {
                            return Err(Error::Validation(format!(
                                "model '{}': Jacobian of σ column {j} disagrees with finite differences ({va} vs {vb})",
                                self.label
                            )));
                        }
                    }
                }
            }
        }
        let diagonal = self.n == self.m
            && self.probe_states().iter().all(|x| {
                let s = (self.sigma)(x);
                (0..self.n).all(|i| (0..self.m).all(|j| i == j || s[(i, j)] == 0.0))
            });
        Ok(SdeModel { diagonal_noise: diagonal, ..self })
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        (self.drift)(x)
    }

    pub fn sigma(&self, x: &[f64]) -> Mat {
        (self.sigma)(x)
    }

    pub fn has_sigma_jacobians(&self) -> bool {
        self.sigma_jacobians.is_some()
    }

    /// Jacobians of the diffusion columns: analytic when supplied, otherwise
    /// central finite differences with step 1e-6 (1 + |x_k|).
    pub fn sigma_jacobians(&self, x: &[f64]) -> Vec<Mat> {
        match &self.sigma_jacobians {
            Some(jac) => jac(x),
            None => fd_sigma_jacobians(&*self.sigma, self.n, self.m, x),
        }
    }

    /// Σ_j (Dσ^j) σ^j, the Stratonovich/Ito correction vector.
    pub fn noise_induced_drift(&self, x: &[f64]) -> Vec<f64> {
        let sigma = self.sigma(x);
        let jacs = self.sigma_jacobians(x);
        let mut out = vec![0.0; self.n];
        for (j, dj) in jacs.iter().enumerate() {
            let col: Vec<f64> = (0..self.n).map(|i| sigma[(i, j)]).collect();
            let v = dj.matvec(&col);
            for i in 0..self.n {
                out[i] += v[i];
            }
        }
        out
    }
}

fn fd_sigma_jacobians(sigma: &MatFn, n: usize, m: usize, x: &[f64]) -> Vec<Mat> {
    let mut jacs = vec![Mat::zeros(n, n); m];
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for k in 0..n {
        let h = 1e-6 * (1.0 + x[k].abs());
        xp[k] = x[k] + h;
        xm[k] = x[k] - h;
        let sp = sigma(&xp);
        let sm = sigma(&xm);
        for j in 0..m {
            for i in 0..n {
                jacs[j][(i, k)] = (sp[(i, j)] - sm[(i, j)]) / (2.0 * h);
            }
        }
        xp[k] = x[k];
        xm[k] = x[k];
    }
    jacs
}

type ObsFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
type ObsGradFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
type ObsHessFn = Arc<dyn Fn(f64, &[f64]) -> Mat + Send + Sync>;

/// Scalar observable g(t, x) with analytic gradient, Hessian and time
/// derivative, validated against finite differences at probe points.
#[derive(Clone)]
pub struct ScalarObservable {
    pub n: usize,
    g: ObsFn,
    gradient: ObsGradFn,
    hessian: ObsHessFn,
    time_derivative: ObsFn,
}

impl ScalarObservable {
    pub fn new<G, Gr, H, T>(n: usize, g: G, gradient: Gr, hessian: H, time_derivative: T) -> Result<Self>
    where
        G: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        Gr: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
        H: Fn(f64, &[f64]) -> Mat + Send + Sync + 'static,
        T: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        let obs = ScalarObservable {
            n,
            g: Arc::new(g),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            time_derivative: Arc::new(time_derivative),
        };
        // Probe-point check of the supplied derivatives.
        for k in 0..8u64 {
            let x: Vec<f64> = (0..n)
                .map(|i| 2.0 * rng::uniform(0xBEEF, &[domain::PROBE, k, i as u64]) - 1.0)
                .collect();
            let t = k as f64 * 0.3;
            let grad = (obs.gradient)(t, &x);
            let hess = (obs.hessian)(t, &x);
            if grad.len() != n || hess.rows != n || hess.cols != n {
                return Err(Error::Validation("observable derivative shapes wrong".into()));
            }
            let mut xp = x.clone();
            let mut xm = x.clone();
            for i in 0..n {
                let h = 1e-5 * (1.0 + x[i].abs());
                xp[i] = x[i] + h;
                xm[i] = x[i] - h;
                let fd = ((obs.g)(t, &xp) - (obs.g)(t, &xm)) / (2.0 * h);
                let scale = fd.abs().max(grad[i].abs()).max(1.0);
                if (fd - grad[i]).abs() > 1e-4 * scale {
                    return Err(Error::Validation(format!(
                        "observable gradient component {i} disagrees with finite differences"
                    )));
                }
                let fd2 = (obs.gradient)(t, &xp)
                    .iter()
                    .zip((obs.gradient)(t, &xm).iter())
                    .map(|(a, b)| (a - b) / (2.0 * h))
                    .collect::<Vec<f64>>();
                for j in 0..n {
                    let scale = fd2[j].abs().max(hess[(j, i)].abs()).max(1.0);
                    if (fd2[j] - hess[(j, i)]).abs() > 1e-4 * scale {
                        return Err(Error::Validation(format!(
                            "observable Hessian entry ({j},{i}) disagrees with finite differences"
                        )));
                    }
                }
                xp[i] = x[i];
                xm[i] = x[i];
            }
        }
        Ok(obs)
    }

    /// Time-independent observable.
    pub fn autonomous<G, Gr, H>(n: usize, g: G, gradient: Gr, hessian: H) -> Result<Self>
    where
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        Gr: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        H: Fn(&[f64]) -> Mat + Send + Sync + 'static,
    {
        Self::new(
            n,
            move |_, x| g(x),
            move |_, x| gradient(x),
            move |_, x| hessian(x),
            |_, _| 0.0,
        )
    }

    /// g(x) = ||x||^2 / 2, the mean-energy observable.
    pub fn half_norm_squared(n: usize) -> Self {
        ScalarObservable {
            n,
            g: Arc::new(|_, x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>()),
            gradient: Arc::new(|_, x: &[f64]| x.to_vec()),
            hessian: Arc::new(move |_, _: &[f64]| Mat::identity(n)),
            time_derivative: Arc::new(|_, _| 0.0),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        (self.g)(t, x)
    }

    pub fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64> {
        (self.gradient)(t, x)
    }

    pub fn hessian(&self, t: f64, x: &[f64]) -> Mat {
        (self.hessian)(t, x)
    }

    pub fn time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        (self.time_derivative)(t, x)
    }
}

/// Generator A g = (∇g)ᵀ b + ½ Tr[σ σᵀ D²g] evaluated at x (autonomous part;
/// the g_t term of a time-dependent observable is not included here).
pub fn apply_generator(model: &SdeModel, obs: &ScalarObservable, x: &[f64]) -> Result<f64> {
    if obs.n != model.n || x.len() != model.n {
        return Err(Error::Validation(format!(
            "dimension mismatch: model n = {}, observable n = {}, state len = {}",
            model.n,
            obs.n,
            x.len()
        )));
    }
    let grad = obs.gradient(0.0, x);
    let b = model.drift(x);
    let mut val = 0.0;
    for i in 0..model.n {
        val += grad[i] * b[i];
    }
    let sigma = model.sigma(x);
    let hess = obs.hessian(0.0, x);
    // ½ Σ_{i,k} (σσᵀ)_{ik} g_{x_i x_k}, with (σσᵀ)_{ik} = Σ_j σ_{ij} σ_{kj}.
    let mut trace = 0.0;
    for i in 0..model.n {
        for k in 0..model.n {
            let h = hess[(i, k)];
            if h == 0.0 {
                continue;
            }
            let mut a_ik = 0.0;
            for j in 0..model.m {
                a_ik += sigma[(i, j)] * sigma[(k, j)];
            }
            trace += a_ik * h;
        }
    }
    Ok(val + 0.5 * trace)
}

/// Interpret the model's coefficients as a Stratonovich system and return
/// the equivalent Ito model: drift b + ½ Σ_j (Dσ^j) σ^j, diffusion unchanged.
pub fn stratonovich_to_ito(model: &SdeModel) -> Result<SdeModel> {
    if !model.has_sigma_jacobians() {
        return Err(Error::Capability(format!(
            "model '{}' carries no diffusion Jacobians; conversion needs Dσ^j",
            model.label
        )));
    }
    let inner = model.clone();
    let sigma_model = model.clone();
    let jac_model = model.clone();
    SdeModel::new(
        model.n,
        model.m,
        format!("{}+ito", model.label),
        move |x| {
            let mut b = inner.drift(x);
            let corr = inner.noise_induced_drift(x);
            for i in 0..b.len() {
                b[i] += 0.5 * corr[i];
            }
            b
        },
        move |x| sigma_model.sigma(x),
    )?
    .with_sigma_jacobians(move |x| jac_model.sigma_jacobians(x))
}

/// The Ito-to-Stratonovich drift μ(x) = b(x) − ½ Σ_j (Dσ^j)(x) σ^j(x).
///
/// This is the vector whose tangency to a candidate manifold (together with
/// that of every σ^j) characterizes almost-sure invariance.
pub fn ito_to_stratonovich_drift(model: &SdeModel, x: &[f64]) -> Result<Vec<f64>> {
    if !model.has_sigma_jacobians() {
        return Err(Error::Capability(format!(
            "model '{}' carries no diffusion Jacobians; μ needs Dσ^j",
            model.label
        )));
    }
    let mut mu = model.drift(x);
    let corr = model.noise_induced_drift(x);
    for i in 0..mu.len() {
        mu[i] -= 0.5 * corr[i];
    }
    Ok(mu)
}

/// Named model catalog. Parameter order follows the constructor signatures.
pub mod builtin {
    use super::*;

    /// Driftless Brownian motion with constant scalar diffusion σI in
    /// dimension d; the default carrier for exit-problem benchmarks.
    pub fn brownian(d: usize, sigma: f64) -> Result<SdeModel> {
        if !(1..=3).contains(&d) {
            return Err(Error::Validation(format!("brownian dimension must be 1..=3, got {d}")));
        }
        SdeModel::new(d, d, "brownian", move |_| vec![0.0; d], move |_| {
            Mat::identity(d).scale(sigma)
        })?
        .with_sigma_jacobians(move |_| vec![Mat::zeros(d, d); d])
    }

    /// Langevin equation dX = −bX dt + a dW.
    pub fn langevin(b: f64, a: f64) -> SdeModel {
        SdeModel::new(1, 1, "langevin", move |x| vec![-b * x[0]], move |_| {
            Mat::from_rows(&[&[a]])
        })
        .and_then(|m| m.with_sigma_jacobians(|_| vec![Mat::zeros(1, 1)]))
        .expect("langevin model is well-formed")
    }

    /// Stochastic population model dX = rX dt + αX dW.
    pub fn population(r: f64, alpha: f64) -> SdeModel {
        SdeModel::new(1, 1, "population", move |x| vec![r * x[0]], move |x| {
            Mat::from_rows(&[&[alpha * x[0]]])
        })
        .and_then(|m| m.with_sigma_jacobians(move |_| vec![Mat::from_rows(&[&[alpha]])]))
        .expect("population model is well-formed")
    }

    /// Linear scalar SDE with constant coefficients:
    /// dX = (a1 X + a2) dt + (b1 X + b2) dW.
    pub fn linear_scalar(a1: f64, a2: f64, b1: f64, b2: f64) -> SdeModel {
        SdeModel::new(
            1,
            1,
            "linear_scalar",
            move |x| vec![a1 * x[0] + a2],
            move |x| Mat::from_rows(&[&[b1 * x[0] + b2]]),
        )
        .and_then(|m| m.with_sigma_jacobians(move |_| vec![Mat::from_rows(&[&[b1]])]))
        .expect("linear_scalar model is well-formed")
    }

    /// Linear system dX = (A X + f) dt + Σ_k g_k dW_k with constant A, f, g_k.
    pub fn linear_system(a: Mat, f: Vec<f64>, g: Vec<Vec<f64>>) -> Result<SdeModel> {
        let n = a.rows;
        if a.cols != n || f.len() != n || g.iter().any(|gk| gk.len() != n) {
            return Err(Error::Validation("linear_system: inconsistent shapes".into()));
        }
        let m = g.len();
        let a2 = a.clone();
        let g2 = g.clone();
        SdeModel::new(
            n,
            m,
            "linear_system",
            move |x| {
                let mut v = a2.matvec(x);
                for i in 0..n {
                    v[i] += f[i];
                }
                v
            },
            move |_| {
                let mut s = Mat::zeros(n, m);
                for (k, gk) in g2.iter().enumerate() {
                    for i in 0..n {
                        s[(i, k)] = gk[i];
                    }
                }
                s
            },
        )?
        .with_sigma_jacobians(move |_| vec![Mat::zeros(n, n); m])
    }

    /// Damped stochastic oscillator x'' + a x' + b x = σ Ẇ as a first-order
    /// system in (x, y = x').
    pub fn oscillator(a: f64, b: f64, sigma: f64) -> SdeModel {
        SdeModel::new(
            2,
            1,
            "oscillator",
            move |x| vec![x[1], -b * x[0] - a * x[1]],
            move |_| Mat::from_rows(&[&[0.0], &[sigma]]),
        )
        .and_then(|m| m.with_sigma_jacobians(|_| vec![Mat::zeros(2, 2)]))
        .expect("oscillator model is well-formed")
    }

    /// Undamped stochastic harmonic oscillator x'' + k x = h Ẇ; the diffusion
    /// column is (0, h).
    pub fn harmonic(k: f64, h: f64) -> SdeModel {
        let mut m = oscillator(0.0, k, h);
        m.label = "harmonic".into();
        m
    }

    /// Lorenz system with multiplicative noise √ε x_i dW_i per component.
    pub fn lorenz(r: f64, s: f64, b: f64, eps: f64) -> SdeModel {
        let se = eps.sqrt();
        SdeModel::new(
            3,
            3,
            "lorenz",
            move |x| {
                vec![
                    -s * x[0] + s * x[1],
                    r * x[0] - x[1] - x[0] * x[2],
                    -b * x[2] + x[0] * x[1],
                ]
            },
            move |x| {
                let mut sig = Mat::zeros(3, 3);
                for i in 0..3 {
                    sig[(i, i)] = se * x[i];
                }
                sig
            },
        )
        .and_then(|m| {
            m.with_sigma_jacobians(move |_| {
                (0..3)
                    .map(|j| {
                        let mut d = Mat::zeros(3, 3);
                        d[(j, j)] = se;
                        d
                    })
                    .collect()
            })
        })
        .expect("lorenz model is well-formed")
    }

    /// Planar system with drift (−x/2, −y/2) and diffusion column (−y, x).
    /// Every circle centered at the origin is almost surely invariant for it,
    /// which makes it the workhorse benchmark of the manifold module.
    pub fn circle_manifold() -> SdeModel {
        SdeModel::new(
            2,
            1,
            "circle_manifold",
            |x| vec![-0.5 * x[0], -0.5 * x[1]],
            |x| Mat::from_rows(&[&[-x[1]], &[x[0]]]),
        )
        .and_then(|m| {
            m.with_sigma_jacobians(|_| vec![Mat::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]])])
        })
        .expect("circle model is well-formed")
    }

    /// Look up a model by its registered name with positional parameters.
    pub fn by_name(name: &str, params: &[f64]) -> Result<SdeModel> {
        fn want(params: &[f64], k: usize, name: &str) -> Result<()> {
            if params.len() != k {
                return Err(Error::Validation(format!(
                    "model '{name}' takes {k} parameters, got {}",
                    params.len()
                )));
            }
            Ok(())
        }
        match name {
            "brownian" => {
                want(params, 2, name)?;
                if params[0].fract() != 0.0 {
                    return Err(Error::Validation("brownian dimension must be an integer".into()));
                }
                brownian(params[0] as usize, params[1])
            }
            "langevin" => {
                want(params, 2, name)?;
                Ok(langevin(params[0], params[1]))
            }
            "population" => {
                want(params, 2, name)?;
                Ok(population(params[0], params[1]))
            }
            "linear_scalar" => {
                want(params, 4, name)?;
                Ok(linear_scalar(params[0], params[1], params[2], params[3]))
            }
            "oscillator" => {
                want(params, 3, name)?;
                Ok(oscillator(params[0], params[1], params[2]))
            }
            "harmonic" => {
                want(params, 2, name)?;
                Ok(harmonic(params[0], params[1]))
            }
            "lorenz" => {
                want(params, 4, name)?;
                Ok(lorenz(params[0], params[1], params[2], params[3]))
            }
            "circle_manifold" => {
                want(params, 0, name)?;
                Ok(circle_manifold())
            }
            other => Err(Error::Lookup(format!("unknown model '{other}'"))),
        }
    }

    /// Every registered model at benchmark parameters, for sweep tests.
    pub fn catalog() -> Vec<SdeModel> {
        vec![
            brownian(2, 1.0).expect("catalog brownian is well-formed"),
            langevin(1.0, std::f64::consts::SQRT_2),
            population(0.5, 0.4),
            linear_scalar(-0.5, 0.3, 0.2, 0.5),
            linear_system(
                Mat::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]),
                vec![0.0, 0.0],
                vec![vec![0.0, 0.5]],
            )
            .expect("catalog linear system is well-formed"),
            oscillator(0.4, 1.5, 0.3),
            harmonic(2.0, 0.5),
            lorenz(28.0, 10.0, 8.0 / 3.0, 0.01),
            circle_manifold(),
        ]
    }
}
