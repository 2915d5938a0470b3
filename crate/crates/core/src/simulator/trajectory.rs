use super::config::Mode;

/// One recorded sample of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
    pub y: f64,
    pub u: f64,
    pub eta_hat: Vec<f64>,
    pub xi_hat: Vec<f64>,
    pub sigma_hat: f64,
    /// The virtual-output value entering the EKF correction (after saturation).
    pub sigma_fed: f64,
    /// Riccati matrix, row-major.
    pub p: Vec<f64>,
    pub eta_tilde: Vec<f64>,
    /// Scaled observer error `χ`.
    pub chi: Vec<f64>,
    pub v2: f64,
    pub w: f64,
}

/// Time-indexed record of plant, observer, control and monitor signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mode: Mode,
    /// `None` for reduced runs.
    pub epsilon: Option<f64>,
    pub internal_dim: usize,
    pub rho: usize,
    pub records: Vec<Record>,
}

impl Trajectory {
    pub fn empty(mode: Mode, epsilon: Option<f64>, internal_dim: usize, rho: usize) -> Self {
        Self {
            mode,
            epsilon,
            internal_dim,
            rho,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.t)
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// Records with `t >= from`.
    pub fn after(&self, from: f64) -> impl Iterator<Item = &Record> + '_ {
        self.records.iter().filter(move |r| r.t >= from)
    }

    /// Record nearest to `t`.
    pub fn at(&self, t: f64) -> Option<&Record> {
        self.records
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
