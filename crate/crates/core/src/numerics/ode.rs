//! Explicit Runge–Kutta integration with optional post-step constraint
//! projection.
//!
//! Two methods are provided: classical RK4 on a fixed step and the adaptive
//! Dormand–Prince 5(4) pair with local extrapolation. When projection is
//! enabled the system's [`OdeSystem::project`] hook runs after every accepted
//! step; the vector field itself is never modified.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Pulls `y` back onto the constraint manifold. Identity by default.
    fn project(&self, _t: f64, _y: &mut [f64]) -> Result<()> {
        Ok(())
    }
}

/// Adapter turning a closure into an unconstrained [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (self.f)(t, y, dy);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed { dt: f64 },
    Rk45Adaptive { abs_tol: f64, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub max_steps: usize,
    pub projection: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self::adaptive(1e-10)
    }
}

impl IntegratorConfig {
    /// Dormand–Prince with `abs_tol = rel_tol = tol`.
    pub fn adaptive(tol: f64) -> Self {
        Self {
            method: Method::Rk45Adaptive { abs_tol: tol, rel_tol: tol },
            max_steps: 2_000_000,
            projection: false,
        }
    }

    pub fn fixed(dt: f64) -> Self {
        Self { method: Method::Rk4Fixed { dt }, max_steps: 50_000_000, projection: false }
    }

    pub fn with_projection(mut self, on: bool) -> Self {
        self.projection = on;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.method {
            Method::Rk4Fixed { dt } => dt > 0.0 && dt.is_finite(),
            Method::Rk45Adaptive { abs_tol, rel_tol } => {
                abs_tol > 0.0 && rel_tol > 0.0 && abs_tol.is_finite() && rel_tol.is_finite()
            }
        };
        if !ok {
            return Err(Error::InvalidConfig(format!("non-positive integrator tolerance: {:?}", self.method)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Sampled solution together with step statistics.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.states.last()?.as_slice()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().copied().zip(self.states.iter().map(Vec::as_slice))
    }
}

/// Integrates over `t_span`, recording every accepted step (both endpoints
/// included).
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    run(sys, y0, &[t_span.0, t_span.1], cfg, true)
}

/// Integrates through the increasing `times`, landing exactly on each and
/// recording only those samples.
pub fn integrate_sampled<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    run(sys, y0, times, cfg, false)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Stepper<'a, S: ?Sized> {
    sys: &'a S,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    fsal_valid: bool,
}

impl<'a, S: OdeSystem + ?Sized> Stepper<'a, S> {
    fn new(sys: &'a S) -> Self {
        let n = sys.dim();
        Self {
            sys,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            fsal_valid: false,
        }
    }

    fn eval(&mut self, slot: usize, t: f64, y_is_tmp: bool, y: &[f64]) -> Result<()> {
        let src = if y_is_tmp { &self.tmp } else { y };
        self.sys.rhs(t, src, &mut self.k[slot])?;
        if self.k[slot].iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { t });
        }
        Ok(())
    }

    fn stage(&mut self, y: &[f64], h: f64, coeffs: &[(usize, f64)]) {
        for i in 0..y.len() {
            let mut acc = 0.0;
            for &(s, a) in coeffs {
                acc += a * self.k[s][i];
            }
            self.tmp[i] = y[i] + h * acc;
        }
    }

    /// One RK4 step; writes the new state into `out`.
    fn rk4(&mut self, t: f64, y: &[f64], h: f64, out: &mut [f64]) -> Result<()> {
        self.eval(0, t, false, y)?;
        self.stage(y, h, &[(0, 0.5)]);
        self.eval(1, t + 0.5 * h, true, y)?;
        self.stage(y, h, &[(1, 0.5)]);
        self.eval(2, t + 0.5 * h, true, y)?;
        self.stage(y, h, &[(2, 1.0)]);
        self.eval(3, t + h, true, y)?;
        for i in 0..y.len() {
            out[i] = y[i] + h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
        Ok(())
    }

    /// One Dormand–Prince attempt; returns the scaled error norm.
    fn dopri(&mut self, t: f64, y: &[f64], h: f64, out: &mut [f64], atol: f64, rtol: f64) -> Result<f64> {
        if !self.fsal_valid {
            self.eval(0, t, false, y)?;
            self.fsal_valid = true;
        }
        self.stage(y, h, &[(0, A21)]);
        self.eval(1, t + C2 * h, true, y)?;
        self.stage(y, h, &[(0, A31), (1, A32)]);
        self.eval(2, t + C3 * h, true, y)?;
        self.stage(y, h, &[(0, A41), (1, A42), (2, A43)]);
        self.eval(3, t + C4 * h, true, y)?;
        self.stage(y, h, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        self.eval(4, t + C5 * h, true, y)?;
        self.stage(y, h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        self.eval(5, t + h, true, y)?;
        self.stage(y, h, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)]);
        out.copy_from_slice(&self.tmp);
        self.eval(6, t + h, false, out)?;
        let n = y.len();
        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            let sc = atol + rtol * y[i].abs().max(out[i].abs());
            err += (e / sc).powi(2);
        }
        Ok((err / n as f64).sqrt())
    }

    fn accept_fsal(&mut self) {
        self.k.swap(0, 6);
    }
}

fn initial_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &[f64], span: f64, atol: f64, rtol: f64) -> Result<f64> {
    let n = y.len();
    let mut f0 = vec![0.0; n];
    sys.rhs(t, y, &mut f0)?;
    let sc: Vec<f64> = y.iter().map(|v| atol + rtol * v.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = rms(y);
    let d1 = rms(&f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span.abs());
    let y1: Vec<f64> = y.iter().zip(&f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(&f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(span.abs()))
}

fn run<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    checkpoints: &[f64],
    cfg: &IntegratorConfig,
    record_all: bool,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y0.len() });
    }
    if checkpoints.is_empty() {
        return Ok(Trajectory::default());
    }
    if let Some(i) = checkpoints.windows(2).position(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidSampling { index: i + 1 });
    }
    if checkpoints.iter().any(|t| !t.is_finite()) || y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite initial data or time span".into()));
    }

    let mut traj = Trajectory::default();
    let mut t = checkpoints[0];
    let mut y = y0.to_vec();
    if cfg.projection {
        sys.project(t, &mut y)?;
    }
    traj.times.push(t);
    traj.states.push(y.clone());

    let mut stepper = Stepper::new(sys);
    let mut y_new = vec![0.0; n];
    let mut total_steps = 0usize;
    let mut h = match cfg.method {
        Method::Rk4Fixed { dt } => dt,
        Method::Rk45Adaptive { abs_tol, rel_tol } => {
            let span = checkpoints[checkpoints.len() - 1] - t;
            if span > 0.0 {
                initial_step(sys, t, &y, span, abs_tol, rel_tol)?
            } else {
                0.0
            }
        }
    };

    for &target in &checkpoints[1..] {
        match cfg.method {
            Method::Rk4Fixed { dt } => {
                let span = target - t;
                let steps = (span / dt).ceil().max(if span > 0.0 { 1.0 } else { 0.0 }) as usize;
                let start = t;
                for k in 0..steps {
                    total_steps += 1;
                    if total_steps > cfg.max_steps {
                        return Err(Error::StepBudgetExceeded { max_steps: cfg.max_steps, t });
                    }
                    let t_next = if k + 1 == steps { target } else { start + span * (k + 1) as f64 / steps as f64 };
                    stepper.rk4(t, &y, t_next - t, &mut y_new).map_err(|e| blowup_at(e, t))?;
                    if cfg.projection {
                        sys.project(t_next, &mut y_new)?;
                    }
                    check_finite(&y_new, t)?;
                    std::mem::swap(&mut y, &mut y_new);
                    t = t_next;
                    traj.accepted_steps += 1;
                    if record_all {
                        traj.times.push(t);
                        traj.states.push(y.clone());
                    }
                }
            }
            Method::Rk45Adaptive { abs_tol, rel_tol } => {
                while t < target {
                    total_steps += 1;
                    if total_steps > cfg.max_steps {
                        return Err(Error::StepBudgetExceeded { max_steps: cfg.max_steps, t });
                    }
                    let remaining = target - t;
                    let landing = h >= remaining * (1.0 - 1e-12);
                    let h_try = if landing { remaining } else { h };
                    if h_try <= f64::EPSILON * t.abs().max(1.0) {
                        return Err(Error::StepSizeUnderflow { t });
                    }
                    let err = stepper
                        .dopri(t, &y, h_try, &mut y_new, abs_tol, rel_tol)
                        .map_err(|e| blowup_at(e, t))?;
                    if !err.is_finite() {
                        return Err(Error::NumericalBlowup { t });
                    }
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if err <= 1.0 {
                        let t_next = if landing { target } else { t + h_try };
                        stepper.accept_fsal();
                        if cfg.projection {
                            sys.project(t_next, &mut y_new)?;
                            stepper.fsal_valid = false;
                        }
                        check_finite(&y_new, t)?;
                        std::mem::swap(&mut y, &mut y_new);
                        t = t_next;
                        traj.accepted_steps += 1;
                        if record_all {
                            traj.times.push(t);
                            traj.states.push(y.clone());
                        }
                        // A step shortened to land on a checkpoint does not
                        // shrink the step used afterwards.
                        h = if landing { h.max(h_try * factor) } else { h_try * factor };
                    } else {
                        traj.rejected_steps += 1;
                        h = h_try * factor.min(1.0);
                    }
                }
            }
        }
        if !record_all {
            traj.times.push(t);
            traj.states.push(y.clone());
        }
    }
    Ok(traj)
}

fn blowup_at(e: Error, t: f64) -> Error {
    match e {
        Error::NumericalBlowup { .. } => Error::NumericalBlowup { t },
        other => other,
    }
}

fn check_finite(y: &[f64], t: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBlowup { t })
    }
}
