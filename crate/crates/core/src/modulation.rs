//! Time-dependent parameters and the modulated harmonic oscillator
//! `H = ½ ω(t) (p² + q²)`.
//!
//! For this form of the oscillator every modulation is integrable: the action
//! `I = ½(p² + q²)` is conserved and the angle advances by `τ(t) = ∫ ω dt`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cumulative_quadrature, integrate, integrate_sampled, IntegratorConfig, OdeSystem};

/// Maximum spacing of the grid on which `τ(t) = ∫ ω dt` is accumulated.
pub const TAU_QUADRATURE_SPACING: f64 = 5e-5;

/// A scalar function of time with an optional declared period.
///
/// The period is asserted by the caller, never inferred; [`check_period`]
/// verifies it on a grid.
///
/// [`check_period`]: ModulationProfile::check_period
#[derive(Clone)]
pub struct ModulationProfile {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    period: Option<f64>,
    label: String,
}

impl ModulationProfile {
    pub fn new(label: impl Into<String>, period: Option<f64>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), period, label: label.into() }
    }

    /// `f ≡ value`; periodic with any period, reported as none.
    pub fn constant(value: f64) -> Self {
        Self::new(format!("{value}"), None, move |_| value)
    }

    /// `offset + amplitude · sin(2πt / period)`.
    pub fn sinusoidal(offset: f64, amplitude: f64, period: f64) -> Self {
        Self::new(
            format!("{offset} + {amplitude} sin(2πt/{period})"),
            Some(period),
            move |t| offset + amplitude * (2.0 * PI * t / period).sin(),
        )
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Maximum of `|f(t + T) − f(t)|` over `samples` points of `[0, t_max]`;
    /// fails if it exceeds `1e-12`.
    pub fn check_period(&self, t_max: f64, samples: usize) -> Result<f64> {
        let Some(period) = self.period else {
            return Err(Error::InvalidConfig(format!("modulation {} declares no period", self.label)));
        };
        if !(period > 0.0) {
            return Err(Error::InvalidConfig(format!("period must be positive, got {period}")));
        }
        let n = samples.max(2);
        let worst = (0..n)
            .map(|k| t_max * k as f64 / (n - 1) as f64)
            .map(|t| (self.eval(t + period) - self.eval(t)).abs())
            .fold(0.0, f64::max);
        if worst > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "modulation {} is not {period}-periodic (deviation {worst:.3e})",
                self.label
            )));
        }
        Ok(worst)
    }
}

impl fmt::Debug for ModulationProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModulationProfile").field("label", &self.label).field("period", &self.period).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorState {
    pub p: f64,
    pub q: f64,
    pub t: f64,
}

impl OscillatorState {
    pub fn new(p: f64, q: f64) -> Self {
        Self { p, q, t: 0.0 }
    }
}

/// `(dp/dt, dq/dt) = (−ω(t) q, ω(t) p)`.
pub fn oscillator_rhs(s: &OscillatorState, omega: &ModulationProfile) -> (f64, f64) {
    let w = omega.eval(s.t);
    (-w * s.q, w * s.p)
}

/// The action variable `½(p² + q²)`.
pub fn oscillator_action(s: &OscillatorState) -> f64 {
    0.5 * (s.p * s.p + s.q * s.q)
}

/// The (time-dependent) Hamiltonian `½ ω(t)(p² + q²)`.
pub fn oscillator_hamiltonian(s: &OscillatorState, omega: &ModulationProfile) -> f64 {
    omega.eval(s.t) * oscillator_action(s)
}

struct Oscillator<'a>(&'a ModulationProfile);

impl OdeSystem for Oscillator<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let (dp, dq) = oscillator_rhs(&OscillatorState { p: y[0], q: y[1], t }, self.0);
        dy[0] = dp;
        dy[1] = dq;
        Ok(())
    }
}

/// Trajectory of the modulated oscillator with the accumulated angle `τ(t)`.
#[derive(Debug, Clone)]
pub struct OscillatorRun {
    pub states: Vec<OscillatorState>,
    /// `τ(t_i) = ∫₀^{t_i} ω dt` at each sample.
    pub tau: Vec<f64>,
    /// `max |I(t) − I(0)|`.
    pub action_drift: f64,
    /// `max |atan2(q, p) − τ − φ₀|` (mod 2π); zero at the rest point.
    pub phase_drift: f64,
    pub steps: usize,
}

/// Integrates the modulated oscillator from `s0` to `t_end`.
pub fn oscillator_flow(
    s0: OscillatorState,
    omega: &ModulationProfile,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<OscillatorRun> {
    let traj = integrate(&Oscillator(omega), &[s0.p, s0.q], (s0.t, t_end), cfg)?;
    let states: Vec<OscillatorState> = traj.iter().map(|(t, y)| OscillatorState { p: y[0], q: y[1], t }).collect();
    let tau = angle_along(omega, &traj.times)?;
    let (action_drift, phase_drift) = drifts(&states, &tau);
    Ok(OscillatorRun { states, tau, action_drift, phase_drift, steps: traj.accepted_steps })
}

/// Same as [`oscillator_flow`] but reports only the given sample times.
pub fn oscillator_samples(
    s0: OscillatorState,
    omega: &ModulationProfile,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<OscillatorRun> {
    let traj = integrate_sampled(&Oscillator(omega), &[s0.p, s0.q], times, cfg)?;
    let states: Vec<OscillatorState> = traj.iter().map(|(t, y)| OscillatorState { p: y[0], q: y[1], t }).collect();
    let tau = angle_along(omega, &traj.times)?;
    let (action_drift, phase_drift) = drifts(&states, &tau);
    Ok(OscillatorRun { states, tau, action_drift, phase_drift, steps: traj.accepted_steps })
}

/// `τ` at each of `times` via the cumulative trapezoid rule on a grid that
/// subdivides every interval to at most [`TAU_QUADRATURE_SPACING`].
fn angle_along(omega: &ModulationProfile, times: &[f64]) -> Result<Vec<f64>> {
    let mut grid = Vec::new();
    let mut node_index = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            let t0 = times[i - 1];
            let pieces = ((t - t0) / TAU_QUADRATURE_SPACING).ceil().max(1.0) as usize;
            for k in 1..pieces {
                grid.push(t0 + (t - t0) * k as f64 / pieces as f64);
            }
        }
        node_index.push(grid.len());
        grid.push(t);
    }
    let values: Vec<f64> = grid.iter().map(|&t| omega.eval(t)).collect();
    let cumulative = cumulative_quadrature(&grid, &values)?;
    Ok(node_index.into_iter().map(|i| cumulative[i]).collect())
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn drifts(states: &[OscillatorState], tau: &[f64]) -> (f64, f64) {
    let Some(first) = states.first() else {
        return (0.0, 0.0);
    };
    let i0 = oscillator_action(first);
    let phi0 = first.q.atan2(first.p) - tau[0];
    let action = states.iter().map(|s| (oscillator_action(s) - i0).abs()).fold(0.0, f64::max);
    let phase = if i0 == 0.0 {
        0.0
    } else {
        states
            .iter()
            .zip(tau)
            .map(|(s, t)| wrap_angle(s.q.atan2(s.p) - t - phi0).abs())
            .fold(0.0, f64::max)
    };
    (action, phase)
}

/// Largest `|H(t + T) − H(t)|` over `t` in `[0, t_end − T]` sampled every
/// `T/8`, for a modulation with declared period `T`.
pub fn hamiltonian_period_defect(
    s0: OscillatorState,
    omega: &ModulationProfile,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let period = omega
        .period()
        .ok_or_else(|| Error::InvalidConfig("modulation has no declared period".into()))?;
    let per = 8usize;
    let count = (t_end / period * per as f64).floor() as usize;
    let times: Vec<f64> = (0..=count).map(|k| s0.t + period * k as f64 / per as f64).collect();
    let run = oscillator_samples(s0, omega, &times, cfg)?;
    let h: Vec<f64> = run.states.iter().map(|s| oscillator_hamiltonian(s, omega)).collect();
    Ok(h.iter().zip(h.iter().skip(per)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Demonstration only: modulating the other form `H = ½(p² + ω² q²)` does
/// not preserve its action `E/ω`. Returns `max |E/ω − E₀/ω₀|`.
pub fn standard_form_action_drift(
    s0: OscillatorState,
    omega: &ModulationProfile,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    struct StandardForm<'a>(&'a ModulationProfile);
    impl OdeSystem for StandardForm<'_> {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            let w = self.0.eval(t);
            dy[0] = -w * w * y[1];
            dy[1] = y[0];
            Ok(())
        }
    }
    let traj = integrate(&StandardForm(omega), &[s0.p, s0.q], (s0.t, t_end), cfg)?;
    let action = |t: f64, y: &[f64]| {
        let w = omega.eval(t);
        0.5 * (y[0] * y[0] + w * w * y[1] * y[1]) / w
    };
    let a0 = action(traj.times[0], &traj.states[0]);
    Ok(traj.iter().map(|(t, y)| (action(t, y) - a0).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_examples() {
        let one = ModulationProfile::constant(1.0);
        assert_eq!(oscillator_rhs(&OscillatorState::new(1.0, 0.0), &one), (0.0, 1.0));
        let w = ModulationProfile::new("sin", None, |t: f64| 1.0 + t.sin());
        let (dp, dq) = oscillator_rhs(&OscillatorState::new(0.0, 0.0), &w);
        assert_eq!((dp.abs(), dq.abs()), (0.0, 0.0));
        let two = ModulationProfile::constant(2.0);
        assert_eq!(oscillator_rhs(&OscillatorState { p: 1.0, q: 2.0, t: 3.0 }, &two), (-4.0, 2.0));
    }

    #[test]
    fn action_examples() {
        assert_eq!(oscillator_action(&OscillatorState::new(1.0, 0.0)), 0.5);
        assert_eq!(oscillator_action(&OscillatorState::new(0.0, 0.0)), 0.0);
        assert_eq!(oscillator_action(&OscillatorState::new(3.0, 4.0)), 12.5);
    }

    #[test]
    fn unmodulated_circle_closes() {
        let run = oscillator_flow(OscillatorState::new(1.0, 0.0), &ModulationProfile::constant(1.0), 2.0 * PI, &IntegratorConfig::default()).unwrap();
        let last = run.states.last().unwrap();
        assert!((last.p - 1.0).abs() < 1e-7 && last.q.abs() < 1e-7);
        assert!((run.tau.last().unwrap() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn constant_two_makes_two_turns() {
        let run = oscillator_flow(OscillatorState::new(1.0, 0.0), &ModulationProfile::constant(2.0), PI, &IntegratorConfig::default()).unwrap();
        let last = run.states.last().unwrap();
        assert!((last.p - 1.0).abs() < 1e-7 && last.q.abs() < 1e-7);
    }

    #[test]
    fn sine_modulation_keeps_action_and_full_turn_angle() {
        let omega = ModulationProfile::sinusoidal(1.0, 0.5, 2.0 * PI);
        let run = oscillator_flow(OscillatorState::new(1.0, 0.0), &omega, 2.0 * PI, &IntegratorConfig::default()).unwrap();
        assert!(run.action_drift < 1e-8);
        // ∫₀^{2π} (1 + ½ sin t) dt = 2π.
        assert!((run.tau.last().unwrap() - 2.0 * PI).abs() < 1e-8);
        assert!(run.phase_drift < 1e-6);
    }

    #[test]
    fn period_check() {
        let omega = ModulationProfile::sinusoidal(1.0, 0.5, 2.0);
        assert!(omega.check_period(20.0, 500).unwrap() <= 1e-12);
        let fake = ModulationProfile::new("t", Some(1.0), |t| t);
        assert!(fake.check_period(5.0, 10).is_err());
        assert!(ModulationProfile::constant(1.0).check_period(1.0, 10).is_err());
    }

    #[test]
    fn other_form_is_not_integrable_under_modulation() {
        let omega = ModulationProfile::sinusoidal(1.0, 0.5, 2.0 * PI);
        let drift = standard_form_action_drift(OscillatorState::new(1.0, 0.0), &omega, 20.0, &IntegratorConfig::default()).unwrap();
        assert!(drift > 1e-3, "drift {drift}");
    }
}
