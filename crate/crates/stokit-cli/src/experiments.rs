//! Experiment registry and runners.
//!
//! Each experiment resolves its settings (flag > environment > config file >
//! default), runs the corresponding library machinery, and emits CSV/JSON
//! artifacts plus a manifest. All randomness flows from the single master
//! seed, so reruns with the same seed produce byte-identical data artifacts
//! regardless of the worker count.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use stokit::brownian::BrownianPath;
use stokit::calculus::{
    doob_bound_check, generalized_isometry_check, isometry_check, second_moment_sup_check,
    IdentityReport, IntegrandOnGrid,
};
use stokit::error::Error as StokitError;
use stokit::exact;
use stokit::exit::{
    average_escape_probability, escape_probability, mc_exit, mean_residence_time,
    predictability_window, Domain, Side,
};
use stokit::integrate::{run_ensemble, strong_order_estimate, Scheme, Trajectory};
use stokit::manifold::{
    characteristics_solve, extract_zero_set, manifold_invariance_mc, noncharacteristic_check,
    tangency_residual, unit_circle_points, CharacteristicField, ManifoldSpec,
};
use stokit::model::{builtin, SdeModel};
use stokit::moments::{
    energy_balance_residual, lorenz_energy_bound_check, lorenz_error_bound_check,
};
use stokit::rds::{
    cocycle_check, default_truncation, ou_stationary_orbit, stationary_orbit_check,
    CocycleSolver, RdsRecord,
};
use stokit::stats;

use crate::config::{DomainBlock, ModelBlock, RunBlock, RunConfig};
use crate::output::{fmt_f64, ArtifactSink, Format};

/// Registered experiment names, sorted lexicographically.
pub const EXPERIMENTS: &[&str] =
    &["calculus", "exit", "manifold", "moments", "order", "rds", "simulate"];

/// Everything an experiment needs, after precedence resolution.
pub struct Resolved {
    pub experiment: String,
    pub seed: u64,
    pub paths: usize,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: String,
    pub model: ModelBlock,
    pub domain: Option<DomainBlock>,
    pub dts: Vec<f64>,
    pub x0: Vec<f64>,
    pub q: f64,
    pub t_max: f64,
    pub bridge: bool,
    pub format: Format,
    /// True when x0 was given explicitly (config), as opposed to defaulted.
    pub x0_explicit: bool,
}

#[derive(Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub workers: usize,
    pub files: Vec<String>,
    pub wall_time_s: f64,
    pub config: Vec<String>,
}

fn default_x0(name: &str, params: &[f64]) -> Vec<f64> {
    match name {
        "lorenz" => vec![1.0, 1.0, 1.0],
        "circle_manifold" => vec![1.0, 0.0],
        "oscillator" | "harmonic" => vec![1.0, 0.0],
        "brownian" => vec![0.0; params[0] as usize],
        _ => vec![1.0],
    }
}

/// Per-experiment defaults for (model, paths, dt, t_final, scheme).
fn defaults(experiment: &str) -> (ModelBlock, usize, f64, f64, &'static str) {
    match experiment {
        "order" => (
            ModelBlock { name: "population".into(), params: vec![0.5, 0.5] },
            1000,
            1e-3,
            1.0,
            "em",
        ),
        "exit" => (
            ModelBlock { name: "brownian".into(), params: vec![1.0, 1.0] },
            4000,
            1e-4,
            1.0,
            "em",
        ),
        "manifold" => (
            ModelBlock { name: "circle_manifold".into(), params: vec![] },
            200,
            4e-3,
            1.0,
            "milstein",
        ),
        "rds" => (
            ModelBlock { name: "langevin".into(), params: vec![1.0, 1.0] },
            2000,
            5e-3,
            1.0,
            "em",
        ),
        _ => (
            ModelBlock {
                name: "lorenz".into(),
                params: vec![28.0, 10.0, 8.0 / 3.0, 0.01],
            },
            if experiment == "simulate" { 1 } else { 2000 },
            1e-3,
            1.0,
            "em",
        ),
    }
}

/// Merge config + CLI overrides into a resolved experiment description.
#[allow(clippy::too_many_arguments)]
pub fn resolve(
    experiment: &str,
    config: Option<&RunConfig>,
    seed_flag: Option<u64>,
    paths_flag: Option<usize>,
    dt_flag: Option<f64>,
    t_final_flag: Option<f64>,
    format_flag: Option<Format>,
) -> Result<Resolved, String> {
    let run: Option<&RunBlock> = config.map(|c| &c.run);
    if let Some(cfg_exp) = run.and_then(|r| r.experiment.as_deref()) {
        if cfg_exp != experiment {
            return Err(format!(
                "config names experiment '{cfg_exp}' but the command line asked for '{experiment}'"
            ));
        }
    }
    let (model_default, paths_default, dt_default, t_final_default, scheme_default) =
        defaults(experiment);
    let env_seed = std::env::var("STOKIT_SEED").ok().and_then(|v| v.parse::<u64>().ok());
    let seed = seed_flag
        .or(env_seed)
        .or(run.and_then(|r| r.seed))
        .unwrap_or(42);
    let model = config.and_then(|c| c.model.clone()).unwrap_or(model_default);
    let paths = paths_flag.or(run.and_then(|r| r.paths)).unwrap_or(paths_default);
    if paths == 0 {
        return Err("paths must be >= 1".into());
    }
    let dt = dt_flag.or(run.and_then(|r| r.dt)).unwrap_or(dt_default);
    let t_final = t_final_flag.or(run.and_then(|r| r.t_final)).unwrap_or(t_final_default);
    let scheme = run
        .and_then(|r| r.scheme.clone())
        .unwrap_or_else(|| scheme_default.to_string());
    let format = format_flag
        .or_else(|| run.and_then(|r| r.format.as_deref().and_then(Format::parse)))
        .unwrap_or(Format::Both);
    let explicit_x0 = run.and_then(|r| r.x0.clone());
    let x0_explicit = explicit_x0.is_some();
    let x0 = explicit_x0.unwrap_or_else(|| default_x0(&model.name, &model.params));
    let dts = run.and_then(|r| r.dts.clone()).unwrap_or_else(|| {
        (6..=11).map(|p| 0.5f64.powi(p)).collect()
    });
    Ok(Resolved {
        experiment: experiment.to_string(),
        seed,
        paths,
        dt,
        t_final,
        scheme,
        model,
        domain: config.and_then(|c| c.domain.clone()),
        dts,
        x0,
        q: run.and_then(|r| r.q).unwrap_or(0.5),
        t_max: run.and_then(|r| r.t_max).unwrap_or(100.0),
        bridge: run.and_then(|r| r.bridge).unwrap_or(false),
        format,
        x0_explicit,
    })
}

impl Resolved {
    fn build_model(&self) -> Result<SdeModel, StokitError> {
        builtin::by_name(&self.model.name, &self.model.params)
    }

    fn build_domain(&self) -> Result<Domain, StokitError> {
        let block = self.domain.clone().unwrap_or(DomainBlock {
            bounds: vec![0.0, 1.0],
            h: vec![0.005],
            gamma: "right".into(),
        });
        let dom = match block.bounds.len() {
            2 => Domain::interval(block.bounds[0], block.bounds[1], block.h[0])?,
            4 => Domain::rectangle(
                [block.bounds[0], block.bounds[2]],
                [block.bounds[1], block.bounds[3]],
                [block.h[0], block.h[1]],
            )?,
            n => {
                return Err(StokitError::Validation(format!(
                    "bounds must have 2 or 4 entries, got {n}"
                )))
            }
        };
        if block.gamma.trim() == "all" {
            let sides: &[Side] = if dom.dims == 1 {
                &[Side::Left, Side::Right]
            } else {
                &[Side::Left, Side::Right, Side::Bottom, Side::Top]
            };
            return dom.with_gamma_sides(sides);
        }
        let mut sides = Vec::new();
        for part in block.gamma.split(',') {
            match part.trim() {
                "left" => sides.push(Side::Left),
                "right" => sides.push(Side::Right),
                "bottom" => sides.push(Side::Bottom),
                "top" => sides.push(Side::Top),
                other => {
                    return Err(StokitError::Validation(format!(
                        "unknown gamma side '{other}' (left|right|bottom|top|all)"
                    )))
                }
            }
        }
        dom.with_gamma_sides(&sides)
    }

    /// Canonical text of the resolved configuration. The worker count is an
    /// execution knob, not an experiment parameter, so it is excluded here
    /// (and recorded in the manifest instead); this is what keeps artifacts
    /// byte-identical across worker counts.
    fn config_text(&self) -> String {
        let cfg = RunConfig {
            model: Some(self.model.clone()),
            domain: self.domain.clone(),
            run: RunBlock {
                experiment: Some(self.experiment.clone()),
                seed: Some(self.seed),
                paths: Some(self.paths),
                dt: Some(self.dt),
                t_final: Some(self.t_final),
                scheme: Some(self.scheme.clone()),
                out: None,
                format: None,
                dts: if self.experiment == "order" { Some(self.dts.clone()) } else { None },
                x0: Some(self.x0.clone()),
                q: if self.experiment == "exit" { Some(self.q) } else { None },
                t_max: if self.experiment == "exit" { Some(self.t_max) } else { None },
                bridge: if self.experiment == "exit" { Some(self.bridge) } else { None },
            },
        };
        cfg.serialize()
    }
}

/// A failed experiment run; `usage` marks input-validation problems, which
/// the harness reports with exit code 2 rather than 1.
pub struct RunFailure {
    pub message: String,
    pub usage: bool,
}

/// Run a resolved experiment, writing artifacts into `out_dir`.
pub fn run_experiment(res: &Resolved, out_dir: &Path, workers: usize) -> Result<Manifest, RunFailure> {
    let started = Instant::now();
    let mut sink = ArtifactSink::new(out_dir, res.config_text(), res.seed, res.format)
        .map_err(|e| RunFailure { message: format!("cannot create output directory: {e}"), usage: false })?;
    let run = match res.experiment.as_str() {
        "simulate" => simulate(res, &mut sink),
        "order" => order(res, &mut sink),
        "calculus" => calculus(res, &mut sink),
        "moments" => moments(res, &mut sink),
        "exit" => exit_experiment(res, &mut sink),
        "manifold" => manifold(res, &mut sink),
        "rds" => rds(res, &mut sink),
        other => {
            return Err(RunFailure { message: format!("unknown experiment '{other}'"), usage: true })
        }
    };
    run.map_err(|e| RunFailure { usage: e.is_usage(), message: e.to_string() })?;
    let mut files = sink.files.clone();
    files.sort();
    Ok(Manifest {
        experiment: res.experiment.clone(),
        seed: res.seed,
        workers,
        files,
        wall_time_s: started.elapsed().as_secs_f64(),
        config: res.config_text().lines().map(str::to_string).collect(),
    })
}

enum RunError {
    Lib(StokitError),
    Io(std::io::Error),
}

impl RunError {
    fn is_usage(&self) -> bool {
        matches!(self, RunError::Lib(StokitError::Validation(_)))
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Lib(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl From<StokitError> for RunError {
    fn from(e: StokitError) -> Self {
        RunError::Lib(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

fn scheme_of(name: &str) -> Result<Scheme, StokitError> {
    match name {
        "em" | "euler_maruyama" => Ok(Scheme::EulerMaruyama),
        "milstein" => Ok(Scheme::Milstein),
        other => Err(StokitError::Validation(format!(
            "scheme '{other}' is not a stepping scheme"
        ))),
    }
}

/// Closed-form single-trajectory dispatch for `--scheme exact`.
fn exact_trajectory(res: &Resolved, path: &BrownianPath) -> Result<Trajectory, StokitError> {
    let p = &res.model.params;
    match res.model.name.as_str() {
        "langevin" => {
            let params = exact::OUParams::new(p[0], p[1], 0.0)?;
            exact::ou_solve(&params, res.x0[0], path, res.t_final)
        }
        "population" => exact::gbm_solve(p[0], p[1], res.x0[0], path, res.t_final),
        "linear_scalar" => exact::linear_scalar_solve(
            &move |_| p[0],
            &move |_| p[1],
            &move |_| p[2],
            &move |_| p[3],
            res.x0[0],
            path,
            res.t_final,
        ),
        "harmonic" => {
            exact::oscillator_solve(p[0], p[1], res.x0[0], res.x0[1], path, res.t_final)
        }
        other => Err(StokitError::Capability(format!(
            "no closed form registered for model '{other}'"
        ))),
    }
}

fn simulate(res: &Resolved, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let model = res.build_model()?;
    if res.paths == 1 {
        let path = BrownianPath::sample(res.seed, model.m, 0.0, res.t_final, res.dt)?;
        let traj = if res.scheme == "exact" {
            exact_trajectory(res, &path)?
        } else {
            scheme_of(&res.scheme)?.solve(&model, &res.x0, &path, 0.0, res.t_final)?
        };
        // The driving realization, t plus one column per noise component.
        let path_header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=path.m).map(|j| format!("W_{j}")))
            .collect();
        let path_header_refs: Vec<&str> = path_header.iter().map(String::as_str).collect();
        sink.csv(
            "simulate_path.csv",
            &path_header_refs,
            (0..path.n_nodes()).map(|k| {
                let mut row = vec![fmt_f64(path.time(k))];
                row.extend((0..path.m).map(|c| fmt_f64(path.value(k, c))));
                row
            }),
        )?;
        let n = traj.n;
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("x_{i}")))
            .collect();
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        sink.csv(
            "simulate_trajectory.csv",
            &header_refs,
            (0..traj.len()).map(|k| {
                let mut row = vec![fmt_f64(traj.times[k])];
                row.extend(traj.state(k).iter().map(|v| fmt_f64(*v)));
                row
            }),
        )?;
        #[derive(Serialize)]
        struct Summary<'a> {
            scheme: &'a str,
            dt: f64,
            n_paths: usize,
            blowups: usize,
        }
        sink.json(
            "simulate_summary.json",
            &Summary { scheme: &res.scheme, dt: res.dt, n_paths: 1, blowups: 0 },
        )?;
        return Ok(());
    }
    if res.scheme == "exact" {
        return Err(StokitError::Capability(
            "exact scheme emits single trajectories; use paths = 1 or a stepping scheme".into(),
        )
        .into());
    }
    let scheme = scheme_of(&res.scheme)?;
    let ens = run_ensemble(
        &model,
        &res.x0,
        scheme,
        res.paths,
        0.0,
        res.t_final,
        res.dt,
        res.seed,
    )?;
    let n = ens.n_state;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("mean_{i}")))
        .chain(["energy".to_string(), "energy_se".to_string()])
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.csv(
        "simulate_moments.csv",
        &header_refs,
        (0..ens.times.len()).map(|k| {
            let mut row = vec![fmt_f64(ens.times[k])];
            row.extend(ens.mean_state(k).iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(ens.half_sq_mean(k)));
            row.push(fmt_f64(ens.half_sq_se(k)));
            row
        }),
    )?;
    #[derive(Serialize)]
    struct Summary<'a> {
        scheme: &'a str,
        dt: f64,
        n_paths: usize,
        blowups: usize,
    }
    sink.json(
        "simulate_summary.json",
        &Summary { scheme: &res.scheme, dt: res.dt, n_paths: res.paths, blowups: ens.blowups },
    )?;
    Ok(())
}

fn order(res: &Resolved, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let model = res.build_model()?;
    let scheme = scheme_of(&res.scheme)?;
    let reference = |path: &BrownianPath, t: f64| -> Result<Trajectory, StokitError> {
        let p = &res.model.params;
        match res.model.name.as_str() {
            "population" => exact::gbm_solve(p[0], p[1], res.x0[0], path, t),
            "langevin" => {
                let params = exact::OUParams::new(p[0], p[1], 0.0)?;
                exact::ou_solve(&params, res.x0[0], path, t)
            }
            other => Err(StokitError::Capability(format!(
                "order study needs a model with a closed form, got '{other}'"
            ))),
        }
    };
    let result = strong_order_estimate(
        &model,
        scheme,
        reference,
        &res.dts,
        res.paths,
        res.t_final,
        res.seed,
    )?;
    sink.csv(
        "order.csv",
        &["dt", "rms_error"],
        result
            .dts
            .iter()
            .zip(&result.rms_errors)
            .map(|(d, e)| vec![fmt_f64(*d), fmt_f64(*e)]),
    )?;
    #[derive(Serialize)]
    struct Summary<'a> {
        scheme: &'a str,
        dts: &'a [f64],
        rms_errors: &'a [f64],
        slope: f64,
        n_paths: usize,
    }
    sink.json(
        "order.json",
        &Summary {
            scheme: scheme.name(),
            dts: &result.dts,
            rms_errors: &result.rms_errors,
            slope: result.slope,
            n_paths: res.paths,
        },
    )?;
    Ok(())
}

fn calculus(res: &Resolved, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let one = |p: &BrownianPath| IntegrandOnGrid::constant(p, 1.0);
    let tf = |p: &BrownianPath| IntegrandOnGrid::of_time(p, |t| t);
    let w = |p: &BrownianPath| IntegrandOnGrid::of_path(p);
    let (n, dt, t) = (res.paths, res.dt, res.t_final);
    let mut reports: Vec<IdentityReport> = Vec::new();
    let named: [(&str, &dyn stokit::calculus::IntegrandSampler); 3] =
        [("1", &one), ("t", &tf), ("W", &w)];
    for (label, f) in &named {
        let mut r = isometry_check(*f, t, dt, n, res.seed)?;
        r.check = format!("isometry(f={label})");
        reports.push(r);
        let mut r = generalized_isometry_check(*f, *f, t, 2.0 * t, dt, n, res.seed)?;
        r.check = format!("generalized_isometry(f=g={label})");
        reports.push(r);
    }
    let mut r = doob_bound_check(&one, 2.0, 0.0, t, dt, n, res.seed)?;
    r.check = "doob_bound(f=1, lambda=2)".into();
    reports.push(r);
    let mut r = second_moment_sup_check(&one, 0.0, t, dt, n, res.seed)?;
    r.check = "second_moment_sup(f=1)".into();
    reports.push(r);

    sink.jsonl("calculus.jsonl", &reports)?;
    sink.csv(
        "calculus.csv",
        &["check", "lhs", "rhs", "se", "n", "pass"],
        reports.iter().map(|r| {
            vec![
                r.check.clone(),
                fmt_f64(r.lhs),
                fmt_f64(r.rhs),
                fmt_f64(r.se),
                r.n_samples.to_string(),
                r.pass.to_string(),
            ]
        }),
    )?;
    Ok(())
}

fn moments(res: &Resolved, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let model = res.build_model()?;
    let scheme = scheme_of(&res.scheme)?;
    let ens = run_ensemble(
        &model,
        &res.x0,
        scheme,
        res.paths,
        0.0,
        res.t_final,
        res.dt,
        res.seed,
    )?;
    let series = energy_balance_residual(&ens)?;
    sink.csv(
        "moments_energy.csv",
        &["t", "energy", "drift_term", "noise_term", "residual", "se"],
        (0..series.times.len()).map(|k| {
            vec![
                fmt_f64(series.times[k]),
                fmt_f64(series.energy[k]),
                fmt_f64(series.drift_term[k]),
                fmt_f64(series.noise_term[k]),
                fmt_f64(series.residual[k]),
                fmt_f64(series.residual_se[k]),
            ]
        }),
    )?;
    if res.model.name == "lorenz" {
        let p = &res.model.params;
        let energy = lorenz_energy_bound_check(
            p[0], p[1], p[2], p[3], &res.x0, res.paths, res.t_final, res.dt, res.seed,
        )?;
        let error = lorenz_error_bound_check(
            p[0], p[1], p[2], p[3], &res.x0, res.paths, res.t_final, res.dt, res.seed,
        )?;
        #[derive(Serialize)]
        struct Bounds<T> {
            energy: T,
            error: T,
        }
        sink.json("moments_bounds.json", &Bounds { energy, error })?;
    }
    Ok(())
}

fn exit_experiment(res: &Resolved, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let model = res.build_model()?;
    let dom = res.build_domain()?;
    let p = escape_probability(&model, &dom)?;
    let u = mean_residence_time(&model, &dom)?;
    let coord_header: Vec<&str> = if dom.dims == 1 { vec!["x"] } else { vec!["x", "y"] };
    for (name, field) in [("exit_escape.csv", &p), ("exit_residence.csv", &u)] {
        let mut header = coord_header.clone();
        header.push("value");
        sink.csv(
            name,
            &header,
            (0..dom.n_nodes()).map(|idx| {
                let mut row: Vec<String> =
                    dom.node_coord(idx).iter().map(|v| fmt_f64(*v)).collect();
                row.push(fmt_f64(field.values[idx]));
                row
            }),
        )?;
    }
    // MC start: explicit x0 when configured, otherwise the domain midpoint.
    let x0: Vec<f64> = if res.x0_explicit {
        if res.x0.len() != dom.dims {
            return Err(StokitError::Validation(format!(
                "x0 has {} components but the domain is {}-dimensional",
                res.x0.len(),
                dom.dims
            ))
            .into());
        }
        res.x0.clone()
    } else {
        (0..dom.dims).map(|i| 0.5 * (dom.lo[i] + dom.hi[i])).collect()
    };
    let stats_out = mc_exit(&model, &x0, &dom, res.paths, res.dt, res.seed, res.bridge, res.t_max)?;
    #[derive(Serialize)]
    struct McSummary<'a> {
        start: &'a [f64],
        average_escape_probability_fd: f64,
        #[serde(flatten)]
        stats: &'a stokit::exit::ExitStats,
    }
    sink.json(
        "exit_mc.json",
        &McSummary {
            start: &x0,
            average_escape_probability_fd: average_escape_probability(&p),
            stats: &stats_out,
        },
    )?;
    let window =
        predictability_window(&model, &x0, &dom, res.q, res.paths, res.dt, res.seed, res.t_max)?;
    sink.json("exit_window.json", &window)?;
    Ok(())
}

fn manifold(res: &Resolved, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let model = builtin::circle_manifold();
    let spec = ManifoldSpec::circle(1.0);
    #[derive(Serialize)]
    struct ResidualRecord {
        point: Vec<f64>,
        r_mu: f64,
        r_sigma: Vec<f64>,
    }
    let mut residuals = Vec::new();
    for p in unit_circle_points(360) {
        let (r_mu, r_sigma) = tangency_residual(&model, &spec, &p)?;
        residuals.push(ResidualRecord { point: p, r_mu, r_sigma });
    }
    sink.jsonl("manifold_tangency.jsonl", &residuals)?;

    let field = CharacteristicField::from_model_diffusion(&model, |s: &[f64]| {
        (vec![s[0], 0.0], s[0] - 1.0)
    })?;
    let grid: Vec<Vec<f64>> = (0..11).map(|k| vec![0.5 + 0.1 * k as f64]).collect();
    let trans = noncharacteristic_check(&field, &grid)?;
    if !trans.all_clear {
        return Err(StokitError::Validation(format!(
            "initial data is characteristic at samples {:?}",
            trans.failures
        ))
        .into());
    }
    let surf = characteristics_solve(
        &field,
        &grid,
        2.0 * std::f64::consts::PI,
        res.dt.min(1e-2),
        &[(-3.0, 3.0), (-3.0, 3.0)],
    )?;
    let zs = extract_zero_set(&surf);
    sink.csv(
        "manifold_zero_set.csv",
        &["x_1", "x_2"],
        zs.points.iter().map(|p| p.iter().map(|v| fmt_f64(*v)).collect()),
    )?;

    let report = manifold_invariance_mc(
        &model,
        &spec,
        &res.x0,
        res.paths,
        res.dt,
        res.t_final,
        3,
        res.seed,
    )?;
    sink.json("manifold_invariance.json", &report)?;
    Ok(())
}

fn rds(res: &Resolved, sink: &mut ArtifactSink) -> Result<(), RunError> {
    if res.model.name != "langevin" {
        return Err(StokitError::Capability(
            "rds checks are defined for the langevin model".into(),
        )
        .into());
    }
    let b = res.model.params[0];
    let t_trunc = default_truncation(b);
    let (t, s) = (0.5, 0.7);
    let mut records = Vec::new();
    let solver = CocycleSolver::linear_additive_closed_form(1.0);
    for &dt in &[2e-2, 1e-2, 5e-3, 2.5e-3] {
        let path = BrownianPath::sample(res.seed, 1, 0.0, t + s, dt)?;
        let residual = cocycle_check(&solver, t, s, &[res.x0[0]], &path)?;
        records.push(RdsRecord { check: "cocycle".into(), t, s, dt, residual });
        let path = BrownianPath::sample(res.seed, 1, -t_trunc, t, dt)?;
        let residual = stationary_orbit_check(&path, b, t, t_trunc)?;
        records.push(RdsRecord { check: "stationary_orbit".into(), t, s: 0.0, dt, residual });
    }
    sink.jsonl("rds.jsonl", &records)?;

    let ys: Vec<f64> = (0..res.paths)
        .map(|i| {
            let path = BrownianPath::sample(
                stokit::integrate::path_seed(res.seed, i),
                1,
                -t_trunc,
                0.0,
                res.dt,
            )?;
            ou_stationary_orbit(&path, b, t_trunc)
        })
        .collect::<Result<_, _>>()?;
    #[derive(Serialize)]
    struct VarSummary {
        n_seeds: usize,
        var_y: f64,
        expected: f64,
    }
    sink.json(
        "rds_summary.json",
        &VarSummary {
            n_seeds: res.paths,
            var_y: stats::sample_var(&ys),
            expected: 1.0 / (2.0 * b),
        },
    )?;
    Ok(())
}
