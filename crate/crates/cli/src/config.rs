//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments run to the end of the line
//! system = example
//! epsilon = 0.001
//! alpha = [5, 1]
//! ```
//!
//! Every key is optional; missing keys take the values of
//! [`SimConfig::paper`]. `step` defaults to `epsilon / 20` (or `1e-3` in
//! reduced mode), `record_stride` to about one sample per millisecond, `M_xi`
//! to 1.5 times the peak `‖ξ‖` of the state-feedback run from the configured
//! initial state, and `kappa` to `0.1 M_xi`. Matrices (`Q`, `P0`) are either
//! a scalar multiple of the identity or a row-major list.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use ehgo_core::simulator::{
    calibrate_m_xi, default_stride, lookup, DEFAULT_REDUCED_STEP, STEPS_PER_EPSILON,
};
use ehgo_core::{EhgoGains, EkfWeights, Mode, SaturationConfig, SimConfig};
use nalgebra::DMatrix;

/// Accepted keys, in echo order.
pub const KEYS: &[&str] = &[
    "system",
    "mode",
    "epsilon",
    "alpha",
    "Q",
    "R",
    "P0",
    "M_xi",
    "M_sigma",
    "kappa",
    "saturation",
    "y_substitution",
    "t_final",
    "step",
    "record_stride",
    "eta0",
    "xi0",
    "eta_hat0",
    "xi_hat0",
    "sigma_hat0",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line number, absent when the problem involves the config as a
    /// whole.
    pub line: Option<usize>,
    pub key: String,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}, key '{}': {}", self.key, self.msg),
            None => write!(f, "key '{}': {}", self.key, self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

struct Document<'a> {
    entries: BTreeMap<&'a str, Entry<'a>>,
}

impl<'a> Document<'a> {
    fn parse(text: &'a str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    key: content.to_string(),
                    msg: "expected 'key = value'".into(),
                });
            };
            let key = key.trim();
            let err = |msg: String| ConfigError {
                line: Some(line),
                key: key.to_string(),
                msg,
            };
            if !KEYS.contains(&key) {
                return Err(err("unknown key".into()));
            }
            if let Some(prev) = entries.get(key) {
                let prev: &Entry = prev;
                return Err(err(format!(
                    "duplicate key, first set on line {}",
                    prev.line
                )));
            }
            entries.insert(
                key,
                Entry {
                    line,
                    value: value.trim(),
                },
            );
        }
        Ok(Self { entries })
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.entries.get(key).map(|e| e.line),
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.entries.get(key).map(|e| e.value)
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|v| parse_number(v).map_err(|m| self.err(key, m)))
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.raw(key)
            .map(|v| parse_list(v).map_err(|m| self.err(key, m)))
            .transpose()
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.raw(key)
            .map(|v| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(self.err(key, format!("expected true or false, got '{other}'"))),
            })
            .transpose()
    }
}

fn parse_number(v: &str) -> Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("malformed number '{v}'")),
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    let inner = v
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .unwrap_or(v);
    if inner.trim().is_empty() {
        return Err("empty list".into());
    }
    inner.split(',').map(|s| parse_number(s.trim())).collect()
}

/// The key an invariant message starts with, defaulting to the first one.
fn leading_key<'k>(msg: &str, keys: &[&'k str]) -> &'k str {
    let body = msg.strip_prefix("invalid configuration: ").unwrap_or(msg);
    let first = body.split_whitespace().next().unwrap_or("");
    keys.iter()
        .find(|k| **k == first)
        .copied()
        .unwrap_or(keys[0])
}

fn square(values: &[f64], m: usize) -> Result<DMatrix<f64>, String> {
    match values.len() {
        1 => Ok(DMatrix::identity(m, m) * values[0]),
        n if n == m * m => Ok(DMatrix::from_row_slice(m, m, values)),
        n => Err(format!("expected 1 or {} entries, got {n}", m * m)),
    }
}

/// Parses and fully resolves a configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let doc = Document::parse(text)?;
    let base = SimConfig::paper();

    let system = doc.raw("system").unwrap_or(&base.system).to_string();
    let design = lookup(&system).map_err(|e| doc.err("system", e.to_string()))?;
    let m = design.system.internal_dim();

    let mode = match doc.raw("mode") {
        Some(v) => v
            .parse::<Mode>()
            .map_err(|e| doc.err("mode", e.to_string()))?,
        None => base.mode,
    };

    let epsilon = doc.number("epsilon")?.unwrap_or(base.epsilon());
    let alphas = doc
        .list("alpha")?
        .unwrap_or_else(|| base.gains.alphas().to_vec());
    let gains = EhgoGains::new(alphas, epsilon).map_err(|e| {
        let key = if doc.has("alpha") || !doc.has("epsilon") {
            "alpha"
        } else {
            "epsilon"
        };
        doc.err(key, e.to_string())
    })?;

    let q = match doc.list("Q")? {
        Some(v) => square(&v, m).map_err(|e| doc.err("Q", e))?,
        None => base.weights.q.clone(),
    };
    let p0 = match doc.list("P0")? {
        Some(v) => square(&v, m).map_err(|e| doc.err("P0", e))?,
        None => base.weights.p0.clone(),
    };
    let r = doc.number("R")?.unwrap_or(base.weights.r);
    let weights = EkfWeights::new(q, r, p0).map_err(|e| {
        let msg = e.to_string();
        doc.err(leading_key(&msg, &["R", "Q", "P0"]), msg)
    })?;

    let initial = {
        let mut ic = base.initial.clone();
        let rho = design.system.rho();
        for (key, slot, len) in [
            ("eta0", &mut ic.eta, m),
            ("xi0", &mut ic.xi, rho),
            ("eta_hat0", &mut ic.eta_hat, m),
            ("xi_hat0", &mut ic.xi_hat, rho),
        ] {
            if let Some(v) = doc.list(key)? {
                if v.len() != len {
                    return Err(doc.err(key, format!("expected {len} entries, got {}", v.len())));
                }
                *slot = v;
            }
        }
        if let Some(v) = doc.number("sigma_hat0")? {
            ic.sigma_hat = v;
        }
        ic
    };

    let t_final = doc.number("t_final")?.unwrap_or(base.t_final);
    if t_final <= 0.0 {
        return Err(doc.err("t_final", "must be positive"));
    }

    let m_sigma = doc.number("M_sigma")?.unwrap_or(base.sat.m_sigma);
    let m_xi = match doc.number("M_xi")? {
        Some(v) => v,
        None => calibrate_m_xi(&design, &initial.eta, &initial.xi, t_final)
            .map_err(|e| doc.err("M_xi", format!("cannot calibrate default: {e}")))?,
    };
    let kappa = doc.number("kappa")?.unwrap_or(0.1 * m_xi);
    let sat = SaturationConfig::new(m_xi, m_sigma, kappa).map_err(|e| {
        let msg = e.to_string();
        doc.err(leading_key(&msg, &["M_xi", "M_sigma", "kappa"]), msg)
    })?;

    let step = match doc.number("step")? {
        Some(v) => v,
        None if mode == Mode::Reduced => DEFAULT_REDUCED_STEP,
        None => epsilon / STEPS_PER_EPSILON,
    };
    let record_stride = match doc.raw("record_stride") {
        Some(v) => v.parse::<usize>().map_err(|_| {
            doc.err(
                "record_stride",
                format!("expected a positive integer, got '{v}'"),
            )
        })?,
        None => default_stride(step),
    };

    let cfg = SimConfig {
        system,
        gains,
        weights,
        sat,
        mode,
        y_substitution: doc
            .boolean("y_substitution")?
            .unwrap_or(base.y_substitution),
        saturation_enabled: doc
            .boolean("saturation")?
            .unwrap_or(base.saturation_enabled),
        t_final,
        step,
        record_stride,
        initial,
    };
    cfg.validate(&design).map_err(|e| ConfigError {
        line: None,
        key: "config".into(),
        msg: e.to_string(),
    })?;
    Ok(cfg)
}

fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| fmt_num(*x)).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    let scalar = m[(0, 0)];
    if *m == DMatrix::identity(m.nrows(), m.ncols()) * scalar {
        return fmt_num(scalar);
    }
    let row_major: Vec<f64> = m.transpose().iter().copied().collect();
    fmt_list(&row_major)
}

/// Every resolved key, one per line, in a form [`parse_config`] reads back to
/// an identical config.
pub fn echo_config(cfg: &SimConfig) -> String {
    let ic = &cfg.initial;
    let values = [
        cfg.system.clone(),
        cfg.mode.to_string(),
        fmt_num(cfg.epsilon()),
        fmt_list(cfg.gains.alphas()),
        fmt_matrix(&cfg.weights.q),
        fmt_num(cfg.weights.r),
        fmt_matrix(&cfg.weights.p0),
        fmt_num(cfg.sat.m_xi),
        fmt_num(cfg.sat.m_sigma),
        fmt_num(cfg.sat.kappa),
        cfg.saturation_enabled.to_string(),
        cfg.y_substitution.to_string(),
        fmt_num(cfg.t_final),
        fmt_num(cfg.step),
        cfg.record_stride.to_string(),
        fmt_list(&ic.eta),
        fmt_list(&ic.xi),
        fmt_list(&ic.eta_hat),
        fmt_list(&ic.xi_hat),
        fmt_num(ic.sigma_hat),
    ];
    let mut out = String::new();
    for (key, value) in KEYS.iter().zip(values) {
        let _ = writeln!(out, "{key} = {value}");
    }
    out
}
