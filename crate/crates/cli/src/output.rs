//! CSV tables.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ehgo_core::{RecoveryReport, Trajectory};

#[derive(Debug, thiserror::Error)]
#[error("{}: {source}", path.display())]
pub struct IoError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

impl IoError {
    pub fn new(path: &Path, source: io::Error) -> Self {
        Self {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// `x` with 15 significant digits, trailing zeros removed, switching to
/// exponent notation below `1e-4` and from `1e15` on (C's `%.15g`).
pub fn format_g15(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{x:.14e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..15).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (14 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A header and numeric rows.
pub trait CsvTable {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<f64>>;
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=n).map(|i| format!("{prefix}_{i}")).collect()
    }
}

impl CsvTable for Trajectory {
    fn header(&self) -> Vec<String> {
        let (m, rho) = (self.internal_dim, self.rho);
        let mut h = vec!["t".to_string()];
        h.extend(names("eta", m));
        h.extend(names("xi", rho));
        h.extend(["y".to_string(), "u".to_string()]);
        h.extend(names("eta_hat", m));
        h.extend(names("xi_hat", rho));
        h.push("sigma_hat".into());
        for i in 1..=m {
            for j in 1..=m {
                h.push(format!("P_{i}{j}"));
            }
        }
        h.extend(names("eta_tilde", m));
        h.extend(["V2".to_string(), "W".to_string()]);
        h
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.records
            .iter()
            .map(|r| {
                let mut row = vec![r.t];
                row.extend(&r.eta);
                row.extend(&r.xi);
                row.extend([r.y, r.u]);
                row.extend(&r.eta_hat);
                row.extend(&r.xi_hat);
                row.push(r.sigma_hat);
                row.extend(&r.p);
                row.extend(&r.eta_tilde);
                row.extend([r.v2, r.w]);
                row
            })
            .collect()
    }
}

impl CsvTable for RecoveryReport {
    fn header(&self) -> Vec<String> {
        [
            "epsilon",
            "sup_dev_theta",
            "sup_dev_eta_tilde",
            "post_transient_xi_error",
            "max_abs_chi",
            "transient_cutoff",
        ]
        .map(String::from)
        .to_vec()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| {
                vec![
                    self.epsilons[i],
                    self.sup_dev_theta[i],
                    self.sup_dev_eta_tilde[i],
                    self.post_transient_xi_error[i],
                    self.max_abs_chi[i],
                    self.transient_cutoff,
                ]
            })
            .collect()
    }
}

/// Named columns sharing one time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Columns {
    pub t: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
}

impl CsvTable for Columns {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(self.series.iter().map(|(name, _)| name.clone()));
        h
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.t.len())
            .map(|k| {
                let mut row = vec![self.t[k]];
                row.extend(self.series.iter().map(|(_, v)| v[k]));
                row
            })
            .collect()
    }
}

pub fn render_csv<T: CsvTable + ?Sized>(table: &T) -> String {
    let mut out = table.header().join(",");
    out.push('\n');
    for row in table.rows() {
        let cells: Vec<String> = row.into_iter().map(format_g15).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv<T: CsvTable + ?Sized>(table: &T, path: &Path) -> Result<(), IoError> {
    fs::write(path, render_csv(table)).map_err(|e| IoError::new(path, e))
}

/// Header and rows of a numeric CSV file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::new(path, e))?;
    let bad = |msg: String| IoError::new(path, io::Error::new(io::ErrorKind::InvalidData, msg));
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("missing header".into()))?
        .split(',')
        .map(String::from)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if row.len() != header.len() {
            return Err(bad(format!("row {} has {} cells", i + 1, row.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
