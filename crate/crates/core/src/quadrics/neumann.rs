//! The Neumann system `q″ = −Bq + μq` on the unit sphere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, integrate, integrate_sampled, IntegratorConfig, OdeSystem, Trajectory};

/// Position on the unit sphere, velocity and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannState {
    pub q: Vec<f64>,
    pub qp: Vec<f64>,
    pub tau: f64,
}

impl NeumannState {
    pub fn new(q: Vec<f64>, qp: Vec<f64>) -> Self {
        Self { q, qp, tau: 0.0 }
    }

    /// `(||q| − 1|, |(q, q′)|)`.
    pub fn constraint_residuals(&self) -> [f64; 2] {
        [(dot(&self.q, &self.q).sqrt() - 1.0).abs(), dot(&self.q, &self.qp).abs()]
    }
}

fn b_form(b: &[f64], u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).zip(b).map(|((x, y), w)| x * y * w).sum()
}

/// `μ = (Bq, q) − |q′|²`, the multiplier keeping `|q| = 1`.
pub fn neumann_mu(q: &[f64], qp: &[f64], b: &[f64]) -> f64 {
    b_form(b, q, q) - dot(qp, qp)
}

/// `E = ½|q′|² + ½(Bq, q)`.
pub fn neumann_energy(q: &[f64], qp: &[f64], b: &[f64]) -> f64 {
    0.5 * dot(qp, qp) + 0.5 * b_form(b, q, q)
}

struct NeumannFlow<'a> {
    b: &'a [f64],
}

impl OdeSystem for NeumannFlow<'_> {
    fn dim(&self) -> usize {
        2 * self.b.len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.b.len();
        let (q, qp) = y.split_at(n);
        let mu = neumann_mu(q, qp, self.b);
        dy[..n].copy_from_slice(qp);
        for k in 0..n {
            dy[n + k] = (mu - self.b[k]) * q[k];
        }
        Ok(())
    }

    fn project(&self, _t: f64, y: &mut [f64]) -> Result<()> {
        let n = self.b.len();
        let (q, qp) = y.split_at_mut(n);
        let len = dot(q, q).sqrt();
        if len == 0.0 {
            return Err(Error::ZeroVector);
        }
        q.iter_mut().for_each(|v| *v /= len);
        let c = dot(q, qp);
        qp.iter_mut().zip(q.iter()).for_each(|(v, w)| *v -= c * w);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannReport {
    pub energy_initial: f64,
    pub energy_drift: f64,
    /// Worst `||q| − 1|` and `|(q, q′)|`.
    pub constraint_residuals: [f64; 2],
    /// Worst `|(q″, q) + |q′|²|`, the twice-differentiated constraint.
    pub second_constraint: f64,
}

#[derive(Debug, Clone)]
pub struct NeumannRun {
    pub states: Vec<NeumannState>,
    pub report: NeumannReport,
    pub steps: usize,
}

fn check(s0: &NeumannState, b: &[f64]) -> Result<Vec<f64>> {
    if s0.q.len() != b.len() || s0.qp.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: b.len(), found: s0.q.len() });
    }
    let r = s0.constraint_residuals();
    if r.iter().any(|v| !(*v <= 1e-8)) {
        return Err(Error::InvalidConfig(format!("initial Neumann state violates constraints: {r:?}")));
    }
    Ok(s0.q.iter().chain(&s0.qp).copied().collect())
}

fn collect(b: &[f64], traj: Trajectory) -> NeumannRun {
    let n = b.len();
    let flow = NeumannFlow { b };
    let states: Vec<NeumannState> = traj
        .iter()
        .map(|(t, y)| NeumannState { q: y[..n].to_vec(), qp: y[n..].to_vec(), tau: t })
        .collect();
    let e0 = neumann_energy(&states[0].q, &states[0].qp, b);
    let mut report = NeumannReport { energy_initial: e0, energy_drift: 0.0, constraint_residuals: [0.0; 2], second_constraint: 0.0 };
    let mut dy = vec![0.0; 2 * n];
    for (st, (t, y)) in states.iter().zip(traj.iter()) {
        report.energy_drift = report.energy_drift.max((neumann_energy(&st.q, &st.qp, b) - e0).abs());
        for (w, r) in report.constraint_residuals.iter_mut().zip(st.constraint_residuals()) {
            *w = w.max(r);
        }
        flow.rhs(t, y, &mut dy).expect("Neumann field is total");
        let second = dot(&dy[n..], &st.q) + dot(&st.qp, &st.qp);
        report.second_constraint = report.second_constraint.max(second.abs());
    }
    NeumannRun { states, report, steps: traj.accepted_steps }
}

/// Integrates the Neumann system with diagonal potential `b` to `tau_end`.
pub fn integrate_neumann(s0: &NeumannState, b: &[f64], tau_end: f64, cfg: &IntegratorConfig) -> Result<NeumannRun> {
    let y0 = check(s0, b)?;
    let traj = integrate(&NeumannFlow { b }, &y0, (s0.tau, tau_end), cfg)?;
    Ok(collect(b, traj))
}

/// Like [`integrate_neumann`] but sampled at `times`.
pub fn neumann_samples(s0: &NeumannState, b: &[f64], times: &[f64], cfg: &IntegratorConfig) -> Result<NeumannRun> {
    let y0 = check(s0, b)?;
    let traj = integrate_sampled(&NeumannFlow { b }, &y0, times, cfg)?;
    Ok(collect(b, traj))
}

/// First return of an orbit to its initial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnEvent {
    pub period: f64,
    /// `|q(T) − q(0)|`.
    pub position_error: f64,
    /// `|q′(T) − q′(0)| / |q′(0)|`.
    pub velocity_error: f64,
}

/// Finds the first `T` in `(0, tau_max]` where the orbit crosses the
/// hyperplane through `q(0)` normal to `q′(0)` in the same direction and
/// close to `q(0)`, refined by bisection.
pub fn return_time(s0: &NeumannState, b: &[f64], tau_max: f64, cfg: &IntegratorConfig) -> Result<ReturnEvent> {
    let run = integrate_neumann(s0, b, s0.tau + tau_max, cfg)?;
    let v0 = dot(&s0.qp, &s0.qp).sqrt();
    if v0 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let section = |q: &[f64]| -> f64 { q.iter().zip(&s0.q).zip(&s0.qp).map(|((a, c), v)| (a - c) * v).sum() };
    let near = |q: &[f64]| -> bool { q.iter().zip(&s0.q).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt() < 0.5 };
    let states = &run.states;
    let k = (1..states.len())
        .find(|&k| {
            states[k].tau > s0.tau && section(&states[k - 1].q) < 0.0 && section(&states[k].q) >= 0.0 && near(&states[k].q)
        })
        .ok_or_else(|| Error::InvalidConfig(format!("no return within tau_max = {tau_max}")))?;
    let base = &states[k - 1];
    let (mut lo, mut hi) = (base.tau, states[k].tau);
    let at = |t: f64| -> Result<NeumannState> {
        if t == base.tau {
            return Ok(base.clone());
        }
        let r = neumann_samples(base, b, &[base.tau, t], cfg)?;
        Ok(r.states.last().expect("two samples").clone())
    };
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if section(&at(mid)?.q) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let end = at(hi)?;
    let dq: f64 = end.q.iter().zip(&s0.q).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    let dv: f64 = end.qp.iter().zip(&s0.qp).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    Ok(ReturnEvent { period: hi - s0.tau, position_error: dq, velocity_error: dv / v0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::adaptive(1e-10).with_projection(true)
    }

    #[test]
    fn mu_examples() {
        assert_eq!(neumann_mu(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]), 0.0);
        assert_eq!(neumann_mu(&[0.6, 0.8], &[0.0, 0.0], &[1.0, 2.0]), 0.36 + 2.0 * 0.64);
    }

    #[test]
    fn unit_potential_gives_great_circles() {
        let s0 = NeumannState::new(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
        let ev = return_time(&s0, &[1.0, 1.0, 1.0], 8.0, &cfg()).unwrap();
        assert!((ev.period - TAU).abs() < 1e-8);
        assert!(ev.position_error < 1e-8);
    }

    #[test]
    fn energy_is_conserved() {
        let s0 = NeumannState::new(vec![1.0, 0.0], vec![0.0, 0.5]);
        let run = integrate_neumann(&s0, &[1.0, 2.0], 100.0, &cfg()).unwrap();
        assert!(run.report.energy_drift < 1e-8, "{:?}", run.report);
        assert!(run.report.second_constraint < 1e-10);
    }
}
