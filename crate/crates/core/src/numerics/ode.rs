//! Fixed-step classical Runge–Kutta integration.
//!
//! The simulator integrates one coupled system (plant, observers and the
//! Riccati matrix) on a uniform grid. Grid times are computed as `t0 + k h`
//! rather than accumulated, so two runs with the same `h` land on
//! bit-identical times.

use crate::error::{ensure_dim, Error, Result};

/// Right-hand side of `x' = f(t, x)`.
pub trait VectorField {
    fn dim(&self) -> usize;

    /// Writes `f(t, x)` into `dx`. Both slices have length [`dim`](Self::dim).
    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]);
}

/// Adapts a closure to [`VectorField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (self.f)(t, x, dx)
    }
}

/// Scratch space for allocation-free RK4 steps.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `x` in place from `t` to `t + h`.
    pub fn step<V: VectorField + ?Sized>(
        &mut self,
        field: &V,
        t: f64,
        x: &mut [f64],
        h: f64,
    ) -> Result<()> {
        let n = x.len();
        ensure_dim("rk4 state", field.dim(), n)?;
        if self.k1.len() != n {
            *self = Rk4::new(n);
        }
        let half = 0.5 * h;

        field.eval(t, x, &mut self.k1);
        check_finite(&self.k1, t, "derivative")?;
        offset(&mut self.tmp, x, half, &self.k1);
        field.eval(t + half, &self.tmp, &mut self.k2);
        check_finite(&self.k2, t, "derivative")?;
        offset(&mut self.tmp, x, half, &self.k2);
        field.eval(t + half, &self.tmp, &mut self.k3);
        check_finite(&self.k3, t, "derivative")?;
        offset(&mut self.tmp, x, h, &self.k3);
        field.eval(t + h, &self.tmp, &mut self.k4);
        check_finite(&self.k4, t, "derivative")?;

        let sixth = h / 6.0;
        let stages = self.k1.iter().zip(&self.k2).zip(&self.k3).zip(&self.k4);
        for (xi, (((a, b), c), d)) in x.iter_mut().zip(stages) {
            *xi += sixth * (a + 2.0 * b + 2.0 * c + d);
        }
        check_finite(x, t + h, "state")
    }
}

/// `out = x + c k`.
fn offset(out: &mut [f64], x: &[f64], c: f64, k: &[f64]) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + c * ki;
    }
}

fn check_finite(v: &[f64], t: f64, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Integration { t, what })
    }
}

/// One classical RK4 step of size `h` from `(t, x)`.
pub fn rk4_step<V: VectorField + ?Sized>(field: &V, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("step must be positive, got {h}")));
    }
    check_finite(x, t, "state")?;
    let mut out = x.to_vec();
    Rk4::new(x.len()).step(field, t, &mut out, h)?;
    Ok(out)
}

/// States recorded on a uniform grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl OdeSolution {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.states.last()?.as_slice()))
    }
}

/// Number of fixed steps needed to cover `[t0, t_end]`. A span that is an
/// integer multiple of `h` up to rounding is treated as exact.
pub fn step_count(t0: f64, t_end: f64, h: f64) -> usize {
    let ratio = (t_end - t0) / h;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Integrates from `t0` to `t_end` with step `h`, recording every
/// `record_stride` steps plus the final state.
pub fn integrate_fixed<V: VectorField + ?Sized>(
    field: &V,
    t0: f64,
    x0: &[f64],
    h: f64,
    t_end: f64,
    record_stride: usize,
) -> Result<OdeSolution> {
    integrate_with(field, t0, x0, h, t_end, record_stride, |_, _| Ok(()))
}

/// Like [`integrate_fixed`], with a hook applied to the state after every
/// step (projection, invariant checks). An error from the hook aborts the run.
pub fn integrate_with<V, H>(
    field: &V,
    t0: f64,
    x0: &[f64],
    h: f64,
    t_end: f64,
    record_stride: usize,
    mut post_step: H,
) -> Result<OdeSolution>
where
    V: VectorField + ?Sized,
    H: FnMut(f64, &mut [f64]) -> Result<()>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Config(format!("step must be positive, got {h}")));
    }
    if !(t_end > t0) {
        return Err(Error::Config(format!(
            "t_end ({t_end}) must exceed t0 ({t0})"
        )));
    }
    if record_stride == 0 {
        return Err(Error::Config("record stride must be at least 1".into()));
    }
    ensure_dim("initial state", field.dim(), x0.len())?;
    check_finite(x0, t0, "state")?;

    let steps = step_count(t0, t_end, h);
    let mut out = OdeSolution {
        times: Vec::with_capacity(steps / record_stride + 2),
        states: Vec::with_capacity(steps / record_stride + 2),
    };
    let mut x = x0.to_vec();
    let mut rk = Rk4::new(x.len());
    out.times.push(t0);
    out.states.push(x.clone());

    for k in 0..steps {
        let t = t0 + k as f64 * h;
        rk.step(field, t, &mut x, h)?;
        let t_next = t0 + (k + 1) as f64 * h;
        post_step(t_next, &mut x)?;
        if (k + 1) % record_stride == 0 || k + 1 == steps {
            out.times.push(t_next);
            out.states.push(x.clone());
        }
    }
    Ok(out)
}
