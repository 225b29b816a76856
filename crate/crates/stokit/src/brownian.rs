//! Two-sided Brownian sample paths on a uniform grid.
//!
//! A path carries the realized noise ω for every other module. Paths are
//! two-sided: the negative-time half is built from a noise stream independent
//! of the positive-time one, so W(t) for t < 0 is a second Brownian motion
//! run backwards. Increments are drawn from counter-based streams keyed by
//! `(seed, half, component, step index)`, which makes construction
//! bit-reproducible regardless of traversal order or parallel layout.
//!
//! The time shift θ_s ω (s) = ω(t+s) − ω(s) is implemented by moving the
//! origin index inside a shared node array. Because a shifted path stores no
//! new floating-point values, θ_t ∘ θ_s and θ_{t+s} produce byte-identical
//! objects, and the shift semigroup holds exactly at the discrete level.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::ls_slope;
use crate::rng::{self, domain};

/// A realized Brownian sample on a uniform two-sided grid.
///
/// Node `k` sits at time `(k - origin) * dt`; the component values returned
/// by [`value`](Self::value) are re-based so that the path is exactly zero at
/// the origin node.
#[derive(Clone, Debug)]
pub struct BrownianPath {
    pub seed: u64,
    /// Noise dimension m.
    pub m: usize,
    pub dt: f64,
    origin: usize,
    n_nodes: usize,
    /// Node-major storage of the un-rebased values, shared across shifts.
    raw: Arc<Vec<f64>>,
}

impl BrownianPath {
    /// Sample a fresh two-sided path covering at least `[t_min, t_max]`.
    pub fn sample(seed: u64, m: usize, t_min: f64, t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Validation(format!("dt must be positive, got {dt}")));
        }
        if m == 0 {
            return Err(Error::Validation("noise dimension m must be >= 1".into()));
        }
        if !(t_min <= 0.0 && 0.0 <= t_max) || !t_min.is_finite() || !t_max.is_finite() {
            return Err(Error::Validation(format!(
                "window must satisfy t_min <= 0 <= t_max, got [{t_min}, {t_max}]"
            )));
        }
        let n_neg = ((-t_min) / dt - 1e-9).ceil().max(0.0) as usize;
        let n_pos = (t_max / dt - 1e-9).ceil().max(0.0) as usize;
        let n_nodes = n_neg + n_pos + 1;
        if n_nodes > 100_000_000 {
            return Err(Error::Validation(format!(
                "grid of {n_nodes} nodes is beyond the supported size"
            )));
        }
        let sqrt_dt = dt.sqrt();
        let mut raw = vec![0.0; n_nodes * m];
        for c in 0..m {
            // Positive half: W(t_{k+1}) = W(t_k) + sqrt(dt) Z.
            for k in 0..n_pos {
                let z = rng::normal(seed, &[domain::BROWNIAN_POS, c as u64, k as u64]);
                raw[(n_neg + k + 1) * m + c] = raw[(n_neg + k) * m + c] + sqrt_dt * z;
            }
            // Negative half from an independent stream, walking away from 0.
            for k in 0..n_neg {
                let z = rng::normal(seed, &[domain::BROWNIAN_NEG, c as u64, k as u64]);
                raw[(n_neg - k - 1) * m + c] = raw[(n_neg - k) * m + c] + sqrt_dt * z;
            }
        }
        Ok(BrownianPath { seed, m, dt, origin: n_neg, n_nodes, raw: Arc::new(raw) })
    }

    /// Wrap externally supplied node values (diagnostics and tests). The
    /// value at the origin node must be exactly zero in every component.
    pub fn from_values(seed: u64, m: usize, dt: f64, origin: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 || !(dt > 0.0) {
            return Err(Error::Validation("m >= 1 and dt > 0 required".into()));
        }
        if !values.len().is_multiple_of(m) {
            return Err(Error::Validation("value buffer length must be a multiple of m".into()));
        }
        let n_nodes = values.len() / m;
        if origin >= n_nodes {
            return Err(Error::Validation("origin outside the node range".into()));
        }
        for c in 0..m {
            if values[origin * m + c] != 0.0 {
                return Err(Error::Validation("value at t = 0 must be exactly zero".into()));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite path value".into()));
        }
        Ok(BrownianPath { seed, m, dt, origin, n_nodes, raw: Arc::new(values) })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn t_min(&self) -> f64 {
        -(self.origin as f64) * self.dt
    }

    pub fn t_max(&self) -> f64 {
        (self.n_nodes - 1 - self.origin) as f64 * self.dt
    }

    /// Time of node `k`.
    pub fn time(&self, node: usize) -> f64 {
        (node as f64 - self.origin as f64) * self.dt
    }

    /// Component `c` of W at node `k`, re-based to the origin.
    #[inline]
    pub fn value(&self, node: usize, c: usize) -> f64 {
        self.raw[node * self.m + c] - self.raw[self.origin * self.m + c]
    }

    /// Increment W(node+1) - W(node) in component `c`.
    #[inline]
    pub fn increment(&self, node: usize, c: usize) -> f64 {
        self.raw[(node + 1) * self.m + c] - self.raw[node * self.m + c]
    }

    /// Grid node for time `t`, which must be grid-aligned.
    pub fn index_of_time(&self, t: f64) -> Result<usize> {
        let rel = t / self.dt;
        let k = rel.round();
        if (rel - k).abs() > 1e-9 * rel.abs().max(1.0) {
            return Err(Error::Range(format!(
                "time {t} is not aligned to the grid of spacing {}",
                self.dt
            )));
        }
        let node = self.origin as i64 + k as i64;
        if node < 0 || node >= self.n_nodes as i64 {
            return Err(Error::Range(format!(
                "time {t} outside the sampled window [{}, {}]",
                self.t_min(),
                self.t_max()
            )));
        }
        Ok(node as usize)
    }

    /// Wiener shift: returns θ_s ω with (θ_s ω)(t) = ω(t+s) − ω(s).
    ///
    /// `s` must be grid-aligned and the shifted origin must stay inside the
    /// sampled window; off-grid shifts are rejected rather than interpolated.
    pub fn wiener_shift(&self, s: f64) -> Result<Self> {
        let new_origin = self.index_of_time(s)?;
        Ok(BrownianPath {
            seed: self.seed,
            m: self.m,
            dt: self.dt,
            origin: new_origin,
            n_nodes: self.n_nodes,
            raw: Arc::clone(&self.raw),
        })
    }

    /// Conditional (Brownian-bridge) refinement onto the grid `dt / factor`.
    ///
    /// Original nodes are copied bit-exactly; interior sub-nodes are filled by
    /// sequential conditional sampling keyed by `(seed, cell, sub-index)`, so
    /// a refined path is deterministic and agrees with its parent wherever
    /// they share nodes.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor < 2 {
            return Err(Error::Validation(format!("refine factor must be >= 2, got {factor}")));
        }
        let m = self.m;
        let sub_dt = self.dt / factor as f64;
        let n_new = (self.n_nodes - 1) * factor + 1;
        let mut raw = vec![0.0; n_new * m];
        for c in 0..m {
            for j in 0..self.n_nodes {
                raw[j * factor * m + c] = self.raw[j * m + c];
            }
        }
        for j in 0..self.n_nodes - 1 {
            let cell = rng::zigzag(j as i64 - self.origin as i64);
            for c in 0..m {
                let right = self.raw[(j + 1) * m + c];
                let mut prev = self.raw[j * m + c];
                for i in 1..factor {
                    let remaining = (factor - i + 1) as f64;
                    let mean = prev + (right - prev) / remaining;
                    let var = sub_dt * (factor - i) as f64 / remaining;
                    let z = rng::normal(
                        self.seed,
                        &[domain::BRIDGE, factor as u64, c as u64, cell, i as u64],
                    );
                    let w = mean + var.sqrt() * z;
                    raw[(j * factor + i) * m + c] = w;
                    prev = w;
                }
            }
        }
        Ok(BrownianPath {
            seed: self.seed,
            m,
            dt: sub_dt,
            origin: self.origin * factor,
            n_nodes: n_new,
            raw: Arc::new(raw),
        })
    }

    /// Log-log regression slope of the maximal increment magnitude against
    /// the lag. Diagnostic only: for Brownian data the slope sits below 1/2,
    /// for Lipschitz data near 1.
    pub fn holder_exponent_estimate(&self) -> Result<f64> {
        if self.n_nodes < 100 {
            return Err(Error::Validation(format!(
                "Hölder estimate needs at least 100 nodes, path has {}",
                self.n_nodes
            )));
        }
        let max_lag = (self.n_nodes - 1) / 4;
        let mut lags = Vec::new();
        let mut lag = 1usize;
        while lag <= max_lag {
            lags.push(lag);
            lag *= 2;
        }
        let mut xs = Vec::with_capacity(lags.len());
        let mut ys = Vec::with_capacity(lags.len());
        for &lag in &lags {
            let mut max_inc: f64 = 0.0;
            for j in 0..self.n_nodes - lag {
                let mut s = 0.0;
                for c in 0..self.m {
                    let d = self.raw[(j + lag) * self.m + c] - self.raw[j * self.m + c];
                    s += d * d;
                }
                max_inc = max_inc.max(s.sqrt());
            }
            if max_inc == 0.0 {
                return Err(Error::Validation(
                    "degenerate path: zero increments, Hölder slope undefined".into(),
                ));
            }
            xs.push((lag as f64 * self.dt).ln());
            ys.push(max_inc.ln());
        }
        Ok(ls_slope(&xs, &ys))
    }
}
