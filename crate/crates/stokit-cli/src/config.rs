//! Sectioned key-value experiment configuration.
//!
//! ```text
//! [model]
//! name = lorenz
//! params = r:28, s:10, b:2.6667, eps:0.01
//!
//! [domain]
//! bounds = 0,1
//! h = 0.005
//! gamma = right
//!
//! [run]
//! seed = 42
//! paths = 1000
//! dt = 0.001
//! t_final = 1
//! scheme = em
//! ```
//!
//! A semicolon separates entries on one line, so
//! `[domain] bounds = 0,1; h = 0.005; gamma = right` is also accepted.
//! Parsing reports every problem it finds, not just the first, and rejects
//! unknown sections, unknown keys, duplicate keys, and malformed numbers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Parameter-name order for every builtin model; `params = name:value, ...`
/// entries are matched against these.
pub const MODEL_PARAMS: &[(&str, &[&str])] = &[
    ("brownian", &["d", "sigma"]),
    ("langevin", &["b", "a"]),
    ("population", &["r", "alpha"]),
    ("linear_scalar", &["a1", "a2", "b1", "b2"]),
    ("oscillator", &["a", "b", "sigma"]),
    ("harmonic", &["k", "h"]),
    ("lorenz", &["r", "s", "b", "eps"]),
    ("circle_manifold", &[]),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ModelBlock {
    pub name: String,
    /// Positional parameters in the model's declared order.
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainBlock {
    /// lo, hi per axis: 2 values for 1D, 4 for 2D.
    pub bounds: Vec<f64>,
    /// Grid spacing per axis: 1 or 2 values.
    pub h: Vec<f64>,
    /// Γ selector: comma list of left|right|bottom|top, or all.
    pub gamma: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunBlock {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub scheme: Option<String>,
    pub out: Option<String>,
    pub format: Option<String>,
    pub dts: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub q: Option<f64>,
    pub t_max: Option<f64>,
    pub bridge: Option<bool>,
}

/// A fully parsed (but not yet defaulted) experiment configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: Option<ModelBlock>,
    pub domain: Option<DomainBlock>,
    pub run: RunBlock,
}

impl RunConfig {
    /// Canonical serialization; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        if let Some(m) = &self.model {
            let _ = writeln!(s, "[model]");
            let _ = writeln!(s, "name = {}", m.name);
            let names = MODEL_PARAMS
                .iter()
                .find(|(n, _)| *n == m.name)
                .map(|(_, p)| *p)
                .unwrap_or(&[]);
            if !m.params.is_empty() {
                let pairs: Vec<String> = names
                    .iter()
                    .zip(&m.params)
                    .map(|(n, v)| format!("{n}:{v}"))
                    .collect();
                let _ = writeln!(s, "params = {}", pairs.join(", "));
            }
            let _ = writeln!(s);
        }
        if let Some(d) = &self.domain {
            let _ = writeln!(s, "[domain]");
            let _ = writeln!(s, "bounds = {}", join_floats(&d.bounds));
            let _ = writeln!(s, "h = {}", join_floats(&d.h));
            let _ = writeln!(s, "gamma = {}", d.gamma);
            let _ = writeln!(s);
        }
        let _ = writeln!(s, "[run]");
        let r = &self.run;
        if let Some(v) = &r.experiment {
            let _ = writeln!(s, "experiment = {v}");
        }
        if let Some(v) = r.seed {
            let _ = writeln!(s, "seed = {v}");
        }
        if let Some(v) = r.paths {
            let _ = writeln!(s, "paths = {v}");
        }
        if let Some(v) = r.dt {
            let _ = writeln!(s, "dt = {v}");
        }
        if let Some(v) = r.t_final {
            let _ = writeln!(s, "t_final = {v}");
        }
        if let Some(v) = &r.scheme {
            let _ = writeln!(s, "scheme = {v}");
        }
        if let Some(v) = &r.out {
            let _ = writeln!(s, "out = {v}");
        }
        if let Some(v) = &r.format {
            let _ = writeln!(s, "format = {v}");
        }
        if let Some(v) = &r.dts {
            let _ = writeln!(s, "dts = {}", join_floats(v));
        }
        if let Some(v) = &r.x0 {
            let _ = writeln!(s, "x0 = {}", join_floats(v));
        }
        if let Some(v) = r.q {
            let _ = writeln!(s, "q = {v}");
        }
        if let Some(v) = r.t_max {
            let _ = writeln!(s, "t_max = {v}");
        }
        if let Some(v) = r.bridge {
            let _ = writeln!(s, "bridge = {v}");
        }
        s
    }
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Parse a config, collecting every error rather than stopping at the first.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<String>> {
    let mut errors: Vec<String> = Vec::new();
    // (section, key) -> (value, line_no); duplicate detection spans lines.
    let mut entries: BTreeMap<(String, String), (String, usize)> = BTreeMap::new();
    let mut section: Option<String> = None;
    let mut saw_run = false;

    for (line_no, raw_line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        for piece in raw_line.split(';') {
            let piece = piece.trim();
            let piece = piece.split('#').next().unwrap_or("").trim();
            if piece.is_empty() {
                continue;
            }
            let mut rest = piece;
            if rest.starts_with('[') {
                match rest.find(']') {
                    Some(end) => {
                        let name = rest[1..end].trim().to_string();
                        match name.as_str() {
                            "model" | "domain" | "run" => {
                                if name == "run" {
                                    saw_run = true;
                                }
                                section = Some(name);
                            }
                            other => {
                                errors.push(format!("line {line_no}: unknown section [{other}]"));
                                section = None;
                            }
                        }
                        rest = rest[end + 1..].trim();
                        if rest.is_empty() {
                            continue;
                        }
                    }
                    None => {
                        errors.push(format!("line {line_no}: unterminated section header"));
                        continue;
                    }
                }
            }
            let Some(eq) = rest.find('=') else {
                errors.push(format!("line {line_no}: expected 'key = value', got '{rest}'"));
                continue;
            };
            let key = rest[..eq].trim().to_string();
            let value = rest[eq + 1..].trim().to_string();
            let Some(sec) = &section else {
                errors.push(format!("line {line_no}: key '{key}' before any section header"));
                continue;
            };
            let known: &[&str] = match sec.as_str() {
                "model" => &["name", "params"],
                "domain" => &["bounds", "h", "gamma"],
                "run" => &[
                    "experiment", "seed", "paths", "dt", "t_final", "scheme", "out", "format",
                    "dts", "x0", "q", "t_max", "bridge",
                ],
                _ => &[],
            };
            if !known.contains(&key.as_str()) {
                errors.push(format!("line {line_no}: unknown key '{key}' in section [{sec}]"));
                continue;
            }
            if let Some((_, first_line)) =
                entries.insert((sec.clone(), key.clone()), (value, line_no))
            {
                errors.push(format!(
                    "line {line_no}: duplicate key '{key}' in [{sec}] (first set on line {first_line})"
                ));
            }
        }
    }

    if !saw_run {
        errors.push("missing [run] section".to_string());
    }

    let get = |sec: &str, key: &str| entries.get(&(sec.to_string(), key.to_string()));
    let parse_f64 = |sec: &str, key: &str, errors: &mut Vec<String>| -> Option<f64> {
        get(sec, key).and_then(|(v, line)| match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(x),
            _ => {
                errors.push(format!("line {line}: '{key}' must be a finite number, got '{v}'"));
                None
            }
        })
    };
    let parse_floats = |sec: &str, key: &str, errors: &mut Vec<String>| -> Option<Vec<f64>> {
        get(sec, key).and_then(|(v, line)| {
            let parts: Result<Vec<f64>, _> =
                v.split(',').map(|p| p.trim().parse::<f64>()).collect();
            match parts {
                Ok(xs) if xs.iter().all(|x| x.is_finite()) => Some(xs),
                _ => {
                    errors.push(format!(
                        "line {line}: '{key}' must be a comma list of numbers, got '{v}'"
                    ));
                    None
                }
            }
        })
    };

    // Model block.
    let model = if let Some((name, name_line)) = get("model", "name").cloned() {
        let spec = MODEL_PARAMS.iter().find(|(n, _)| *n == name);
        match spec {
            None => {
                errors.push(format!(
                    "line {name_line}: unknown model '{name}' (known: {})",
                    MODEL_PARAMS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
                ));
                None
            }
            Some((_, param_names)) => {
                let mut params = vec![f64::NAN; param_names.len()];
                if let Some((raw, line)) = get("model", "params").cloned() {
                    for pair in raw.split(',') {
                        let pair = pair.trim();
                        if pair.is_empty() {
                            continue;
                        }
                        let Some((k, v)) = pair.split_once(':') else {
                            errors.push(format!(
                                "line {line}: model parameter '{pair}' is not name:value"
                            ));
                            continue;
                        };
                        let k = k.trim();
                        match param_names.iter().position(|n| *n == k) {
                            None => errors.push(format!(
                                "line {line}: model '{name}' has no parameter '{k}' \
                                 (expected: {})",
                                param_names.join(", ")
                            )),
                            Some(pos) => match v.trim().parse::<f64>() {
                                Ok(x) if x.is_finite() => params[pos] = x,
                                _ => errors.push(format!(
                                    "line {line}: parameter '{k}' must be a finite number, got '{v}'"
                                )),
                            },
                        }
                    }
                }
                let missing: Vec<&str> = param_names
                    .iter()
                    .zip(&params)
                    .filter(|(_, v)| v.is_nan())
                    .map(|(n, _)| *n)
                    .collect();
                if !missing.is_empty() {
                    errors.push(format!(
                        "model '{name}' is missing parameters: {}",
                        missing.join(", ")
                    ));
                    None
                } else {
                    Some(ModelBlock { name, params })
                }
            }
        }
    } else if get("model", "params").is_some() {
        errors.push("[model] has params but no name".to_string());
        None
    } else {
        None
    };

    // Domain block.
    let domain = if entries.keys().any(|(s, _)| s == "domain") {
        let bounds = parse_floats("domain", "bounds", &mut errors);
        let h = parse_floats("domain", "h", &mut errors);
        let gamma = get("domain", "gamma").map(|(v, _)| v.clone()).unwrap_or_else(|| "all".into());
        match (bounds, h) {
            (Some(bounds), Some(h)) => {
                if !(bounds.len() == 2 && h.len() == 1 || bounds.len() == 4 && h.len() == 2) {
                    errors.push(format!(
                        "[domain] bounds/h must be 2/1 values (1D) or 4/2 values (2D), got {}/{}",
                        bounds.len(),
                        h.len()
                    ));
                    None
                } else {
                    Some(DomainBlock { bounds, h, gamma })
                }
            }
            _ => {
                if get("domain", "bounds").is_none() {
                    errors.push("[domain] is missing 'bounds'".to_string());
                }
                if get("domain", "h").is_none() {
                    errors.push("[domain] is missing 'h'".to_string());
                }
                None
            }
        }
    } else {
        None
    };

    // Run block scalars with range validation.
    let seed = get("run", "seed").and_then(|(v, line)| match v.parse::<u64>() {
        Ok(x) => Some(x),
        Err(_) => {
            errors.push(format!("line {line}: 'seed' must be an unsigned integer, got '{v}'"));
            None
        }
    });
    let paths = get("run", "paths").and_then(|(v, line)| match v.parse::<usize>() {
        Ok(x) if x >= 1 => Some(x),
        _ => {
            errors.push(format!("line {line}: 'paths' must be a positive integer, got '{v}'"));
            None
        }
    });
    let dt = parse_f64("run", "dt", &mut errors).and_then(|x| {
        if x > 0.0 {
            Some(x)
        } else {
            errors.push(format!("'dt' must be positive, got {x}"));
            None
        }
    });
    let t_final = parse_f64("run", "t_final", &mut errors).and_then(|x| {
        if x > 0.0 {
            Some(x)
        } else {
            errors.push(format!("'t_final' must be positive, got {x}"));
            None
        }
    });
    let q = parse_f64("run", "q", &mut errors).and_then(|x| {
        if x > 0.0 && x < 1.0 {
            Some(x)
        } else {
            errors.push(format!("'q' must lie in (0, 1), got {x}"));
            None
        }
    });
    let t_max = parse_f64("run", "t_max", &mut errors).and_then(|x| {
        if x > 0.0 {
            Some(x)
        } else {
            errors.push(format!("'t_max' must be positive, got {x}"));
            None
        }
    });
    let scheme = get("run", "scheme").and_then(|(v, line)| {
        let v = v.to_lowercase();
        if ["em", "euler_maruyama", "milstein", "exact"].contains(&v.as_str()) {
            Some(v)
        } else {
            errors.push(format!(
                "line {line}: 'scheme' must be em|milstein|exact, got '{v}'"
            ));
            None
        }
    });
    let format = get("run", "format").and_then(|(v, line)| {
        let v = v.to_lowercase();
        if ["csv", "json", "both"].contains(&v.as_str()) {
            Some(v)
        } else {
            errors.push(format!("line {line}: 'format' must be csv|json|both, got '{v}'"));
            None
        }
    });
    let bridge = get("run", "bridge").and_then(|(v, line)| match v.parse::<bool>() {
        Ok(b) => Some(b),
        Err(_) => {
            errors.push(format!("line {line}: 'bridge' must be true|false, got '{v}'"));
            None
        }
    });
    let dts = parse_floats("run", "dts", &mut errors).and_then(|v| {
        if v.iter().all(|x| *x > 0.0) {
            Some(v)
        } else {
            errors.push("'dts' must all be positive".to_string());
            None
        }
    });
    let x0 = parse_floats("run", "x0", &mut errors);
    let experiment = get("run", "experiment").map(|(v, _)| v.clone());
    let out = get("run", "out").map(|(v, _)| v.clone());

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(RunConfig {
        model,
        domain,
        run: RunBlock {
            experiment,
            seed,
            paths,
            dt,
            t_final,
            scheme,
            out,
            format,
            dts,
            x0,
            q,
            t_max,
            bridge,
        },
    })
}

/// Levenshtein distance, for near-miss suggestions.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = if ca == cb { 0 } else { 1 };
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_reports_missing_run_section() {
        let err = parse_config("").unwrap_err();
        assert!(err.iter().any(|e| e.contains("missing [run] section")), "{err:?}");
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let text = "[run]\nseed = 1\nseed = 2\n";
        let err = parse_config(text).unwrap_err();
        assert!(
            err.iter().any(|e| e.contains("duplicate key 'seed'") && e.contains("line 2")),
            "{err:?}"
        );
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "[runn]\nseed = 1\n[run]\npaths = 0\ndt = -1\nnope = 3\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.len() >= 4, "want section, paths, dt, and key errors: {err:?}");
    }

    #[test]
    fn lorenz_config_round_trips() {
        let text = "[model]\nname = lorenz\nparams = r:28, s:10, b:2.6667, eps:0.01\n\n\
                    [domain]\nbounds = 0,1; h = 0.005; gamma = right\n\n\
                    [run]\nseed = 42\npaths = 100\ndt = 0.001\nt_final = 1\nscheme = em\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.model.as_ref().unwrap().params, vec![28.0, 10.0, 2.6667, 0.01]);
        let round = parse_config(&cfg.serialize()).unwrap();
        assert_eq!(cfg, round);
        // Idempotence of the canonical form.
        assert_eq!(cfg.serialize(), round.serialize());
    }

    #[test]
    fn semicolons_split_like_newlines() {
        let a = parse_config("[run] seed = 7; dt = 0.5").unwrap();
        let b = parse_config("[run]\nseed = 7\ndt = 0.5\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_model_parameter_is_rejected() {
        let text = "[model]\nname = lorenz\nparams = r:28, sigma:10, b:2.7, eps:0.01\n[run]\nseed = 1\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.iter().any(|e| e.contains("no parameter 'sigma'")), "{err:?}");
    }

    #[test]
    fn edit_distance_basics() {
        assert_eq!(edit_distance("simulate", "simulate"), 0);
        assert_eq!(edit_distance("moments", "momments"), 1);
        assert_eq!(edit_distance("exit", "exti"), 2);
    }
}
