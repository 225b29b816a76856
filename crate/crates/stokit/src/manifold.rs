//! Almost-sure invariant manifolds: tangency tests, construction by the
//! method of characteristics, and invariance verification by simulation.
//!
//! A deterministic manifold M = {G = 0} is locally almost surely invariant
//! for dX = b dt + σ dW exactly when the corrected drift
//! μ = b − ½ Σ_j (Dσ^j) σ^j and every diffusion column σ^j are tangent to M,
//! i.e. ⟨μ, ∇G⟩ = 0 and ⟨σ^j, ∇G⟩ = 0 on M. Those inner products are the
//! tangency residuals computed here. The invariance equations form a system
//! of first-order PDEs for G which is solved by integrating the
//! characteristic ODEs dx/dt = a(x), du/dt = c(x) from a parametrized
//! initial manifold Γ₀ and intersecting the resulting integral surface with
//! the plane u = 0.

use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use crate::brownian::BrownianPath;
use crate::error::{Error, Result};
use crate::integrate::{milstein, Trajectory};
use crate::linalg::norm2;
use crate::model::{ito_to_stratonovich_drift, SdeModel};
use crate::rng::{self, domain};

type GraphFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Candidate invariant manifold as a graph G(x) = 0 with gradient access.
#[derive(Clone)]
pub struct ManifoldSpec {
    pub n: usize,
    pub label: String,
    g: GraphFn,
    grad: GradFn,
}

impl ManifoldSpec {
    pub fn new<G, Gr>(n: usize, label: impl Into<String>, g: G, grad: Gr) -> Result<Self>
    where
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        Gr: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        let spec = ManifoldSpec { n, label: label.into(), g: Arc::new(g), grad: Arc::new(grad) };
        for k in 0..8u64 {
            let x: Vec<f64> = (0..n)
                .map(|i| 2.0 * rng::uniform(0xFACE, &[domain::PROBE, k, i as u64]) - 1.0)
                .collect();
            let grad = spec.gradient(&x);
            if grad.len() != n {
                return Err(Error::Validation("gradient dimension mismatch".into()));
            }
            let mut xp = x.clone();
            let mut xm = x.clone();
            for i in 0..n {
                let h = 1e-5 * (1.0 + x[i].abs());
                xp[i] = x[i] + h;
                xm[i] = x[i] - h;
                let fd = (spec.eval(&xp) - spec.eval(&xm)) / (2.0 * h);
                let scale = fd.abs().max(grad[i].abs()).max(1.0);
                if (fd - grad[i]).abs() > 1e-5 * scale {
                    return Err(Error::Validation(format!(
                        "∇G component {i} disagrees with finite differences at probe point"
                    )));
                }
                xp[i] = x[i];
                xm[i] = x[i];
            }
        }
        Ok(spec)
    }

    /// The unit circle x² + y² = 1 (or any centered circle via `radius_sq`).
    pub fn circle(radius_sq: f64) -> Self {
        ManifoldSpec {
            n: 2,
            label: format!("circle(r²={radius_sq})"),
            g: Arc::new(move |x: &[f64]| x[0] * x[0] + x[1] * x[1] - radius_sq),
            grad: Arc::new(|x: &[f64]| vec![2.0 * x[0], 2.0 * x[1]]),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.g)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }
}

/// Tangency residuals (⟨μ, ∇G⟩, [⟨σ^j, ∇G⟩]_j) at a state.
pub fn tangency_residual(model: &SdeModel, spec: &ManifoldSpec, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    if spec.n != model.n || x.len() != model.n {
        return Err(Error::Validation("dimension mismatch in tangency test".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("state must be finite".into()));
    }
    let grad = spec.gradient(x);
    if norm2(&grad) < 1e-12 {
        return Err(Error::Validation(
            "∇G vanishes at the test point; the graph is not regular there".into(),
        ));
    }
    let mu = ito_to_stratonovich_drift(model, x)?;
    let r_mu = mu.iter().zip(&grad).map(|(a, b)| a * b).sum();
    let sigma = model.sigma(x);
    let r_sigma = (0..model.m)
        .map(|j| (0..model.n).map(|i| sigma[(i, j)] * grad[i]).sum())
        .collect();
    Ok((r_mu, r_sigma))
}

type StateFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type InitialData = Arc<dyn Fn(&[f64]) -> (Vec<f64>, f64) + Send + Sync>;

/// First-order PDE Σ a_i(x) u_{x_i} = c(x) with parametrized initial data
/// Γ₀: s ↦ (x(s), u(s)), s ∈ R^{n−1}.
#[derive(Clone)]
pub struct CharacteristicField {
    pub n: usize,
    pub a: StateFn,
    pub c: ScalarFn,
    pub gamma0: InitialData,
}

impl CharacteristicField {
    pub fn new<A, C, G>(n: usize, a: A, c: C, gamma0: G) -> Result<Self>
    where
        A: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        C: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> (Vec<f64>, f64) + Send + Sync + 'static,
    {
        if n < 2 {
            return Err(Error::Validation("characteristic fields need n >= 2".into()));
        }
        let field = CharacteristicField {
            n,
            a: Arc::new(a),
            c: Arc::new(c),
            gamma0: Arc::new(gamma0),
        };
        let (x0, _) = (field.gamma0)(&vec![0.0; n - 1]);
        if x0.len() != n || (field.a)(&x0).len() != n {
            return Err(Error::Validation("field dimensions are inconsistent".into()));
        }
        Ok(field)
    }

    /// The invariance equations of a model against a codimension-1 graph:
    /// the toolkit's standard construction uses the diffusion column as the
    /// transport field (a = σ^1, c = 0), which encodes ⟨σ^1, ∇G⟩ = 0.
    pub fn from_model_diffusion<G>(model: &SdeModel, gamma0: G) -> Result<Self>
    where
        G: Fn(&[f64]) -> (Vec<f64>, f64) + Send + Sync + 'static,
    {
        if model.m != 1 {
            return Err(Error::Capability(
                "diffusion-transport construction needs a single noise column".into(),
            ));
        }
        let m = model.clone();
        Self::new(
            model.n,
            move |x| {
                let s = m.sigma(x);
                (0..s.rows).map(|i| s[(i, 0)]).collect()
            },
            |_| 0.0,
            gamma0,
        )
    }
}

/// One integrated characteristic curve in (x, u)-space.
#[derive(Clone, Debug)]
pub struct CharCurve {
    pub s: Vec<f64>,
    pub times: Vec<f64>,
    /// Node-major positions, n per node.
    pub points: Vec<f64>,
    pub u: Vec<f64>,
    pub truncated: bool,
}

impl CharCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        let n = self.points.len() / self.times.len();
        &self.points[k * n..(k + 1) * n]
    }
}

/// Bundle of characteristic curves forming an integral surface.
#[derive(Clone, Debug)]
pub struct CharacteristicSurface {
    pub n: usize,
    pub curves: Vec<CharCurve>,
}

/// Integrate the characteristic ODEs by RK4 from each Γ₀ sample.
///
/// Curves escaping the bounding box are truncated and flagged rather than
/// extended; the construction is local by design.
pub fn characteristics_solve(
    field: &CharacteristicField,
    s_grid: &[Vec<f64>],
    t_span: f64,
    dt: f64,
    bbox: &[(f64, f64)],
) -> Result<CharacteristicSurface> {
    if s_grid.is_empty() {
        return Err(Error::Validation("empty initial-data grid".into()));
    }
    if !(dt > 0.0) || !(t_span > 0.0) {
        return Err(Error::Validation("need positive dt and t_span".into()));
    }
    if bbox.len() != field.n {
        return Err(Error::Validation("bounding box must cover every state axis".into()));
    }
    let steps = (t_span / dt).round() as usize;
    let n = field.n;
    let curves: Vec<CharCurve> = s_grid
        .par_iter()
        .map(|s| {
            let (mut x, mut u) = (field.gamma0)(s);
            let mut times = Vec::with_capacity(steps + 1);
            let mut points = Vec::with_capacity((steps + 1) * n);
            let mut us = Vec::with_capacity(steps + 1);
            times.push(0.0);
            points.extend_from_slice(&x);
            us.push(u);
            let mut truncated = false;
            for k in 0..steps {
                // RK4 on the joined system (x, u).
                let f = |x: &[f64]| ((field.a)(x), (field.c)(x));
                let (k1x, k1u) = f(&x);
                let x2: Vec<f64> = x.iter().zip(&k1x).map(|(a, b)| a + 0.5 * dt * b).collect();
                let (k2x, k2u) = f(&x2);
                let x3: Vec<f64> = x.iter().zip(&k2x).map(|(a, b)| a + 0.5 * dt * b).collect();
                let (k3x, k3u) = f(&x3);
                let x4: Vec<f64> = x.iter().zip(&k3x).map(|(a, b)| a + dt * b).collect();
                let (k4x, k4u) = f(&x4);
                for i in 0..n {
                    x[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
                }
                u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
                if x.iter().enumerate().any(|(i, v)| *v < bbox[i].0 || *v > bbox[i].1) {
                    truncated = true;
                    break;
                }
                times.push((k + 1) as f64 * dt);
                points.extend_from_slice(&x);
                us.push(u);
            }
            CharCurve { s: s.clone(), times, points, u: us, truncated }
        })
        .collect();
    Ok(CharacteristicSurface { n, curves })
}

/// Per-sample transversality diagnostic.
#[derive(Clone, Debug, Serialize)]
pub struct TransversalityReport {
    pub all_clear: bool,
    /// (sample index, residual singular value) for the failing samples.
    pub failures: Vec<(usize, f64)>,
}

/// Check that Γ₀ is non-characteristic: at every sample the field vector
/// (a, c) must not lie in the tangent space of Γ₀ in (x, u)-space. The test
/// orthonormalizes the finite-difference tangents and measures the residual
/// of the unit field vector after projection; residuals below 1e-8 fail.
pub fn noncharacteristic_check(
    field: &CharacteristicField,
    s_grid: &[Vec<f64>],
) -> Result<TransversalityReport> {
    const THRESHOLD: f64 = 1e-8;
    if s_grid.is_empty() {
        return Err(Error::Validation("empty initial-data grid".into()));
    }
    let n_param = field.n - 1;
    let mut failures = Vec::new();
    for (sample_idx, s) in s_grid.iter().enumerate() {
        if s.len() != n_param {
            return Err(Error::Validation("parameter dimension mismatch".into()));
        }
        let (x, _) = (field.gamma0)(s);
        // Tangents of Γ₀ by central differences in each parameter direction.
        let mut tangents: Vec<Vec<f64>> = Vec::with_capacity(n_param);
        for d in 0..n_param {
            let h = 1e-6 * (1.0 + s[d].abs());
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[d] += h;
            sm[d] -= h;
            let (xp, up) = (field.gamma0)(&sp);
            let (xm, um) = (field.gamma0)(&sm);
            let mut t: Vec<f64> = xp.iter().zip(&xm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            t.push((up - um) / (2.0 * h));
            let nt = norm2(&t);
            if nt < 1e-12 {
                return Err(Error::Validation(format!(
                    "Γ₀ tangent degenerates at sample {sample_idx}"
                )));
            }
            tangents.push(t.iter().map(|v| v / nt).collect());
        }
        // Field vector V = (a, c), normalized.
        let mut v: Vec<f64> = (field.a)(&x);
        v.push((field.c)(&x));
        let nv = norm2(&v);
        if nv < 1e-12 {
            failures.push((sample_idx, 0.0));
            continue;
        }
        let mut v: Vec<f64> = v.iter().map(|q| q / nv).collect();
        // Gram-Schmidt the tangents, then strip their span from V; the
        // remaining norm is the smallest singular value of the stacked
        // (orthonormalized) system.
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for t in tangents {
            let mut w = t.clone();
            for b in &basis {
                let proj: f64 = w.iter().zip(b).map(|(a, c)| a * c).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= proj * bi;
                }
            }
            let nw = norm2(&w);
            if nw > 1e-12 {
                basis.push(w.iter().map(|q| q / nw).collect());
            }
        }
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let resid = norm2(&v);
        if resid < THRESHOLD {
            failures.push((sample_idx, resid));
        }
    }
    Ok(TransversalityReport { all_clear: failures.is_empty(), failures })
}

/// Zero-set extraction outcome.
#[derive(Clone, Debug)]
pub struct ZeroSet {
    /// Points x with u = 0 on the integral surface.
    pub points: Vec<Vec<f64>>,
    /// True when no sign change was found anywhere: the initial data never
    /// made the solution penetrate the plane u = 0.
    pub empty_notice: bool,
}

/// Intersect the integral surface with the plane u = 0 by linear
/// interpolation, scanning both along each curve (in t) and across adjacent
/// curves (in the Γ₀ parameter).
pub fn extract_zero_set(surface: &CharacteristicSurface) -> ZeroSet {
    let n = surface.n;
    let mut points = Vec::new();
    let interp = |pa: &[f64], ua: f64, pb: &[f64], ub: f64, points: &mut Vec<Vec<f64>>| {
        if ua == 0.0 {
            points.push(pa.to_vec());
            return;
        }
        if ua * ub < 0.0 {
            let lam = ua / (ua - ub);
            points.push((0..n).map(|i| pa[i] + lam * (pb[i] - pa[i])).collect());
        }
    };
    for curve in &surface.curves {
        for k in 0..curve.len().saturating_sub(1) {
            interp(curve.point(k), curve.u[k], curve.point(k + 1), curve.u[k + 1], &mut points);
        }
        if let Some(last) = curve.len().checked_sub(1) {
            if curve.u[last] == 0.0 {
                points.push(curve.point(last).to_vec());
            }
        }
    }
    // Across curves at matching time indices.
    for pair in surface.curves.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let upto = a.len().min(b.len());
        for k in 0..upto {
            if a.u[k] != 0.0 {
                interp(a.point(k), a.u[k], b.point(k), b.u[k], &mut points);
            }
        }
    }
    let empty_notice = points.is_empty();
    ZeroSet { points, empty_notice }
}

/// Per-refinement-level invariance statistics.
#[derive(Clone, Debug, Serialize)]
pub struct InvarianceLevel {
    pub dt: f64,
    pub median_max_abs_g: f64,
    pub median_terminal_abs_g: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub levels: Vec<InvarianceLevel>,
    /// median_max ratios between consecutive levels (coarse / fine).
    pub halving_ratios: Vec<f64>,
}

/// Simulate with Milstein from a point on M and track |G(X_t)| as dt is
/// halved `levels` times.
#[allow(clippy::too_many_arguments)]
pub fn manifold_invariance_mc(
    model: &SdeModel,
    spec: &ManifoldSpec,
    x0: &[f64],
    n_paths: usize,
    dt: f64,
    t_final: f64,
    levels: usize,
    master_seed: u64,
) -> Result<InvarianceReport> {
    if spec.eval(x0).abs() > 1e-10 {
        return Err(Error::Validation(format!(
            "start point must lie on the manifold: |G(x0)| = {}",
            spec.eval(x0).abs()
        )));
    }
    if levels == 0 || n_paths == 0 {
        return Err(Error::Validation("need at least one level and one path".into()));
    }
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let dt_l = dt / f64::powi(2.0, level as i32);
        let stats: Result<Vec<(f64, f64)>> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let seed = rng::key_hash(master_seed, &[domain::PATH_OF_ENSEMBLE, level as u64, i as u64]);
                let path = BrownianPath::sample(seed, model.m, 0.0, t_final, dt_l)?;
                let traj = milstein(model, x0, &path, 0.0, t_final)?;
                let mut max_g: f64 = 0.0;
                for k in 0..traj.len() {
                    max_g = max_g.max(spec.eval(traj.state(k)).abs());
                }
                Ok((max_g, spec.eval(traj.terminal()).abs()))
            })
            .collect();
        let mut stats = stats?;
        stats.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let median_max = stats[stats.len() / 2].0;
        let mut terms: Vec<f64> = stats.iter().map(|s| s.1).collect();
        terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median_term = terms[terms.len() / 2];
        out.push(InvarianceLevel { dt: dt_l, median_max_abs_g: median_max, median_terminal_abs_g: median_term });
    }
    let ratios = out
        .windows(2)
        .map(|w| w[0].median_max_abs_g / w[1].median_max_abs_g)
        .collect();
    Ok(InvarianceReport { levels: out, halving_ratios: ratios })
}

/// Reduced dynamics of the circle benchmark: on the invariant unit circle
/// the planar system collapses to dθ = dW, and the lift
/// (cos θ, sin θ) solves the full system exactly.
pub fn restrict_circle(
    model: &SdeModel,
    theta0: f64,
    path: &BrownianPath,
    t_final: f64,
) -> Result<(Trajectory, Trajectory)> {
    if model.label != "circle_manifold" {
        return Err(Error::Capability(format!(
            "circle restriction applies to the circle benchmark model, not '{}'",
            model.label
        )));
    }
    let i0 = path.index_of_time(0.0)?;
    let i1 = path.index_of_time(t_final)?;
    let n_nodes = i1 - i0 + 1;
    let mut times = Vec::with_capacity(n_nodes);
    let mut theta = Vec::with_capacity(n_nodes);
    let mut lifted = Vec::with_capacity(2 * n_nodes);
    for k in 0..n_nodes {
        let t = path.time(i0 + k);
        let th = theta0 + path.value(i0 + k, 0);
        times.push(t);
        theta.push(th);
        lifted.push(th.cos());
        lifted.push(th.sin());
    }
    Ok((
        Trajectory::new("circle_theta", times.clone(), theta, 1, path.seed),
        Trajectory::new("circle_lift", times, lifted, 2, path.seed),
    ))
}

/// Convenience: evenly spaced points on the unit circle.
pub fn unit_circle_points(count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            vec![th.cos(), th.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::path_seed;
    use crate::model::builtin;

    #[test]
    fn circle_tangency_residuals_vanish() {
        let model = builtin::circle_manifold();
        let spec = ManifoldSpec::circle(1.0);
        for p in unit_circle_points(360) {
            let (r_mu, r_sigma) = tangency_residual(&model, &spec, &p).unwrap();
            assert!(r_mu.abs() <= 1e-12, "r_mu = {r_mu} at {p:?}");
            assert!(r_sigma[0].abs() <= 1e-12, "r_sigma = {} at {p:?}", r_sigma[0]);
        }
        // Every centered circle is invariant for this system.
        let spec4 = ManifoldSpec::circle(4.0);
        for p in [[2.0, 0.0], [0.0, -2.0], [2.0f64.sqrt(), 2.0f64.sqrt()]] {
            let (r_mu, r_sigma) = tangency_residual(&model, &spec4, &p).unwrap();
            assert!(r_mu.abs() <= 1e-12 && r_sigma[0].abs() <= 1e-12);
        }
    }

    #[test]
    fn deterministic_first_integral_reduction() {
        // σ ≡ 0: r_sigma is empty of content and r_mu = ⟨b, ∇G⟩.
        let model = SdeModel::new(
            2,
            1,
            "rotation",
            |x| vec![-x[1], x[0]],
            |_| crate::linalg::Mat::zeros(2, 1),
        )
        .unwrap()
        .with_sigma_jacobians(|_| vec![crate::linalg::Mat::zeros(2, 2)])
        .unwrap();
        let spec = ManifoldSpec::circle(1.0);
        let (r_mu, r_sigma) = tangency_residual(&model, &spec, &[0.6, 0.8]).unwrap();
        assert!(r_mu.abs() < 1e-14); // circles are first integrals of rotation
        assert_eq!(r_sigma, vec![0.0]);
    }

    #[test]
    fn tangency_scales_linearly_in_g() {
        let model = builtin::circle_manifold();
        let spec = ManifoldSpec::new(
            2,
            "tilted",
            |x: &[f64]| x[0] * x[0] + 2.0 * x[1] * x[1] - 1.0,
            |x: &[f64]| vec![2.0 * x[0], 4.0 * x[1]],
        )
        .unwrap();
        let lam = 3.5;
        let scaled = ManifoldSpec::new(
            2,
            "tilted-scaled",
            move |x: &[f64]| lam * (x[0] * x[0] + 2.0 * x[1] * x[1] - 1.0),
            move |x: &[f64]| vec![lam * 2.0 * x[0], lam * 4.0 * x[1]],
        )
        .unwrap();
        let x = [0.3, 0.7];
        let (r1, s1) = tangency_residual(&model, &spec, &x).unwrap();
        let (r2, s2) = tangency_residual(&model, &scaled, &x).unwrap();
        assert!((r2 - lam * r1).abs() < 1e-12 * r1.abs().max(1.0));
        assert!((s2[0] - lam * s1[0]).abs() < 1e-12 * s1[0].abs().max(1.0));
    }

    #[test]
    fn tangency_rejects_degenerate_gradient() {
        let model = builtin::circle_manifold();
        let spec = ManifoldSpec::circle(1.0);
        assert!(matches!(
            tangency_residual(&model, &spec, &[0.0, 0.0]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn constant_field_transports_in_straight_lines() {
        let field = CharacteristicField::new(
            2,
            |_| vec![1.0, 0.5],
            |_| 0.0,
            |s: &[f64]| (vec![0.0, s[0]], s[0] - 0.5),
        )
        .unwrap();
        let grid: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64 * 0.25]).collect();
        let surf = characteristics_solve(&field, &grid, 1.0, 0.01, &[(-10.0, 10.0), (-10.0, 10.0)])
            .unwrap();
        for curve in &surf.curves {
            let s = curve.s[0];
            for k in 0..curve.len() {
                let t = curve.times[k];
                let p = curve.point(k);
                assert!((p[0] - t).abs() < 1e-12);
                assert!((p[1] - (s + 0.5 * t)).abs() < 1e-12);
                assert_eq!(curve.u[k], curve.u[0]); // u constant when c = 0
            }
        }
    }

    #[test]
    fn rotation_field_traces_circles() {
        let field = CharacteristicField::new(
            2,
            |x: &[f64]| vec![-x[1], x[0]],
            |_| 0.0,
            |s: &[f64]| (vec![1.0 + s[0], 0.0], s[0]),
        )
        .unwrap();
        let grid = vec![vec![0.0], vec![0.3]];
        let two_pi = 2.0 * std::f64::consts::PI;
        let surf = characteristics_solve(&field, &grid, two_pi, 1e-3, &[(-5.0, 5.0), (-5.0, 5.0)])
            .unwrap();
        for curve in &surf.curves {
            let r0 = 1.0 + curve.s[0];
            for k in (0..curve.len()).step_by(500) {
                let p = curve.point(k);
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                assert!((r - r0).abs() < 1e-8, "radius drift {}", (r - r0).abs());
            }
        }
    }

    #[test]
    fn source_term_integrates_along_curves() {
        let field = CharacteristicField::new(
            2,
            |_| vec![1.0, 0.0],
            |_| 1.0,
            |s: &[f64]| (vec![0.0, s[0]], 0.0),
        )
        .unwrap();
        let surf = characteristics_solve(
            &field,
            &[vec![0.0]],
            2.0,
            0.01,
            &[(-10.0, 10.0), (-10.0, 10.0)],
        )
        .unwrap();
        let curve = &surf.curves[0];
        for k in 0..curve.len() {
            assert!((curve.u[k] - curve.times[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn curves_truncate_at_bounding_box() {
        let field = CharacteristicField::new(
            2,
            |_| vec![1.0, 0.0],
            |_| 0.0,
            |s: &[f64]| (vec![0.0, s[0]], 0.0),
        )
        .unwrap();
        let surf =
            characteristics_solve(&field, &[vec![0.0]], 10.0, 0.01, &[(-1.0, 1.0), (-1.0, 1.0)])
                .unwrap();
        assert!(surf.curves[0].truncated);
        assert!(surf.curves[0].times.last().unwrap() < &1.01);
    }

    #[test]
    fn transversality_check_distinguishes_cases() {
        // Γ₀ = {x = 0 line} with transport along x: transversal.
        let field = CharacteristicField::new(
            2,
            |_| vec![1.0, 0.0],
            |_| 0.0,
            |s: &[f64]| (vec![0.0, s[0]], 0.0),
        )
        .unwrap();
        let grid: Vec<Vec<f64>> = (0..4).map(|k| vec![k as f64 * 0.3]).collect();
        let rep = noncharacteristic_check(&field, &grid).unwrap();
        assert!(rep.all_clear);

        // Γ₀ an integral curve of the field itself: tangent everywhere.
        let bad = CharacteristicField::new(
            2,
            |_| vec![1.0, 0.0],
            |_| 0.0,
            |s: &[f64]| (vec![s[0], 1.0], 0.0),
        )
        .unwrap();
        let rep = noncharacteristic_check(&bad, &grid).unwrap();
        assert!(!rep.all_clear);
        assert_eq!(rep.failures.len(), grid.len());

        // Borderline angle 1e-9: reported as a failure with its residual.
        let borderline = CharacteristicField::new(
            2,
            |_| vec![1.0, 1e-9],
            |_| 0.0,
            |s: &[f64]| (vec![s[0], 0.0], 0.0),
        )
        .unwrap();
        let rep = noncharacteristic_check(&borderline, &grid).unwrap();
        assert!(!rep.all_clear);
        for (_, sv) in &rep.failures {
            assert!(*sv > 0.0 && *sv < 1e-8);
        }
    }

    #[test]
    fn zero_set_linear_case_and_empty_notice() {
        // u(t) = t − 1 along a straight curve: zero exactly at t = 1.
        let field = CharacteristicField::new(
            2,
            |_| vec![1.0, 0.0],
            |_| 1.0,
            |s: &[f64]| (vec![0.0, s[0]], -1.0),
        )
        .unwrap();
        let surf = characteristics_solve(
            &field,
            &[vec![0.0]],
            2.0,
            0.01,
            &[(-10.0, 10.0), (-10.0, 10.0)],
        )
        .unwrap();
        let zs = extract_zero_set(&surf);
        assert!(!zs.empty_notice);
        assert!(zs.points.iter().any(|p| (p[0] - 1.0).abs() < 1e-10));

        // All-positive u: empty set plus notice.
        let positive = CharacteristicField::new(
            2,
            |_| vec![1.0, 0.0],
            |_| 0.0,
            |s: &[f64]| (vec![0.0, s[0]], 1.0),
        )
        .unwrap();
        let surf = characteristics_solve(
            &positive,
            &[vec![0.0], vec![1.0]],
            1.0,
            0.01,
            &[(-10.0, 10.0), (-10.0, 10.0)],
        )
        .unwrap();
        let zs = extract_zero_set(&surf);
        assert!(zs.empty_notice && zs.points.is_empty());
    }

    #[test]
    fn circle_zero_set_from_model_diffusion() {
        // Transport along σ = (−y, x) with radial initial data u = s − 1:
        // the zero set is the unit circle.
        let model = builtin::circle_manifold();
        let field = CharacteristicField::from_model_diffusion(&model, |s: &[f64]| {
            (vec![s[0], 0.0], s[0] - 1.0)
        })
        .unwrap();
        let grid: Vec<Vec<f64>> = (0..11).map(|k| vec![0.5 + 0.1 * k as f64]).collect();
        let rep = noncharacteristic_check(&field, &grid).unwrap();
        assert!(rep.all_clear, "failures {:?}", rep.failures);
        let surf = characteristics_solve(
            &field,
            &grid,
            2.0 * std::f64::consts::PI,
            1e-3,
            &[(-3.0, 3.0), (-3.0, 3.0)],
        )
        .unwrap();
        let zs = extract_zero_set(&surf);
        assert!(!zs.empty_notice);
        assert!(zs.points.len() > 1000);
        for p in &zs.points {
            let g = p[0] * p[0] + p[1] * p[1] - 1.0;
            assert!(g.abs() <= 1e-6, "zero-set point off the circle by {g}");
        }
    }

    #[test]
    fn invariance_mc_shrinks_with_dt_and_control_does_not() {
        let model = builtin::circle_manifold();
        let spec = ManifoldSpec::circle(1.0);
        let report =
            manifold_invariance_mc(&model, &spec, &[1.0, 0.0], 100, 4e-3, 1.0, 3, 77).unwrap();
        for (i, ratio) in report.halving_ratios.iter().enumerate() {
            assert!(
                (1.4..=3.2).contains(ratio),
                "level {i}: halving ratio {ratio}, levels {:?}",
                report.levels
            );
        }
        // A non-invariant graph through the same start point drifts O(1).
        let control = ManifoldSpec::new(
            2,
            "ellipse",
            |x: &[f64]| x[0] * x[0] + 2.0 * x[1] * x[1] - 1.0,
            |x: &[f64]| vec![2.0 * x[0], 4.0 * x[1]],
        )
        .unwrap();
        let creport =
            manifold_invariance_mc(&model, &control, &[1.0, 0.0], 100, 4e-3, 1.0, 2, 78).unwrap();
        assert!(creport.levels[0].median_max_abs_g > 0.2);
        assert!(creport.levels[1].median_max_abs_g > 0.2, "control stays O(1)");

        // Off-manifold starts are rejected.
        assert!(matches!(
            manifold_invariance_mc(&model, &spec, &[1.1, 0.0], 10, 1e-3, 0.1, 1, 0),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn circle_restriction_lift_is_exact_and_converges() {
        let model = builtin::circle_manifold();
        let path = BrownianPath::sample(5, 1, 0.0, 1.0, 1e-3).unwrap();
        let (_, lift) = restrict_circle(&model, 0.4, &path, 1.0).unwrap();
        for k in (0..lift.len()).step_by(100) {
            let s = lift.state(k);
            assert!((s[0] * s[0] + s[1] * s[1] - 1.0).abs() < 1e-14);
        }
        // RMS gap to the full 2D Milstein run on the same path decays with
        // order >= 0.5.
        let mut gaps = Vec::new();
        let dts = [4e-3, 2e-3, 1e-3];
        for &dt in &dts {
            let mut sq = 0.0;
            let paths = 40;
            for i in 0..paths {
                let p = BrownianPath::sample(path_seed(91, i), 1, 0.0, 1.0, dt).unwrap();
                let (_, lift) = restrict_circle(&model, 0.0, &p, 1.0).unwrap();
                let num = milstein(&model, &[1.0, 0.0], &p, 0.0, 1.0).unwrap();
                let a = lift.terminal();
                let b = num.terminal();
                sq += (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            }
            gaps.push((sq / paths as f64).sqrt());
        }
        let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
        let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
        let slope = crate::linalg::ls_slope(&xs, &ys);
        assert!(slope >= 0.5, "slope {slope}, gaps {gaps:?}");

        // Zero path fixes the starting point.
        let zero = BrownianPath::from_values(0, 1, 0.1, 0, vec![0.0; 11]).unwrap();
        let (_, still) = restrict_circle(&model, 0.0, &zero, 1.0).unwrap();
        for k in 0..still.len() {
            assert_eq!(still.state(k), &[1.0, 0.0]);
        }

        // Wrong model is a capability error.
        let other = builtin::langevin(1.0, 1.0);
        assert!(matches!(
            restrict_circle(&other, 0.0, &path, 1.0),
            Err(Error::Capability(_))
        ));
    }
}
