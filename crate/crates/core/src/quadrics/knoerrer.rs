//! Knörrer's map: the Gauss map `q = Bx/|Bx|` with the new time
//! `dτ = √|λ| ds` carries quadric geodesics to Neumann orbits.

use serde::{Deserialize, Serialize};

use super::{geodesic_samples, joachimsthal, lagrange_multiplier, GeodesicState, Quadric};
use crate::error::{Error, Result};
use crate::numerics::{cumulative_quadrature, dot, norm, IntegratorConfig};

use super::neumann::{neumann_mu, NeumannState};

/// One transformed sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannSample {
    pub s: f64,
    pub tau: f64,
    pub q: Vec<f64>,
    /// `dq/dτ`.
    pub qp: Vec<f64>,
    /// `α = dτ/ds`.
    pub alpha: f64,
}

impl NeumannSample {
    pub fn state(&self) -> NeumannState {
        NeumannState { q: self.q.clone(), qp: self.qp.clone(), tau: self.tau }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnoerrerRun {
    pub samples: Vec<NeumannSample>,
    /// Joachimsthal value of the source geodesic.
    pub f: f64,
    /// `sign(F)`: `+1` when `λ < 0`, `−1` when `λ > 0`.
    pub sign: f64,
    /// Potential of the Neumann system the image solves, `sign · b`.
    pub b_eff: Vec<f64>,
}

/// Unit vector `y / |y|`.
pub fn central_projection(y: &[f64]) -> Result<Vec<f64>> {
    let n = norm(y);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(y.iter().map(|v| v / n).collect())
}

/// Maps geodesic samples (ordered by arclength) to Neumann samples.
///
/// With `λ = −F/|Bx|⁴` of constant sign, `α = √|λ|`. For `F > 0` the image
/// solves the Neumann system with potential `B`; for `F < 0` the real time
/// `τ` turns it into the system with potential `−B`.
pub fn knoerrer_transform(traj: &[GeodesicState], q: &Quadric) -> Result<KnoerrerRun> {
    let first = traj.first().ok_or_else(|| Error::InvalidConfig("empty geodesic".into()))?;
    let f = joachimsthal(first, q);
    let bx0 = q.apply_b(&first.x);
    if f.abs() <= 1e-12 * dot(&bx0, &bx0).max(1.0) {
        return Err(Error::KnoerrerUndefined);
    }
    let sign = f.signum();
    let mut alphas = Vec::with_capacity(traj.len());
    let mut partial = Vec::with_capacity(traj.len());
    for st in traj {
        let lambda = lagrange_multiplier(st, q)?;
        let alpha = lambda.abs().sqrt();
        if alpha == 0.0 {
            return Err(Error::KnoerrerUndefined);
        }
        let bx = q.apply_b(&st.x);
        let nb = norm(&bx);
        let qv: Vec<f64> = bx.iter().map(|v| v / nb).collect();
        let bxp = q.apply_b(&st.xp);
        let c = dot(&qv, &bxp);
        let qp: Vec<f64> = bxp.iter().zip(&qv).map(|(v, w)| (v - c * w) / (nb * alpha)).collect();
        alphas.push(alpha);
        partial.push((st.s, qv, qp, alpha));
    }
    let s: Vec<f64> = traj.iter().map(|st| st.s).collect();
    let tau = cumulative_quadrature(&s, &alphas)?;
    let samples = partial
        .into_iter()
        .zip(tau)
        .map(|((s, q, qp, alpha), t)| NeumannSample { s, tau: t, q, qp, alpha })
        .collect();
    Ok(KnoerrerRun { samples, f, sign, b_eff: q.b().iter().map(|b| sign * b).collect() })
}

/// Largest `|q″ + B q − μ q|` over interior samples, with `q″` from
/// nonuniform centered second differences in `τ` and
/// `μ = (Bq, q) − |q′|²`.
pub fn neumann_residual(samples: &[NeumannSample], b: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for w in samples.windows(3) {
        let (a, m, c) = (&w[0], &w[1], &w[2]);
        let h1 = m.tau - a.tau;
        let h2 = c.tau - m.tau;
        let mu = neumann_mu(&m.q, &m.qp, b);
        let r: f64 = (0..b.len())
            .map(|k| {
                let qpp = 2.0 * (h1 * c.q[k] - (h1 + h2) * m.q[k] + h2 * a.q[k]) / (h1 * h2 * (h1 + h2));
                let e = qpp + b[k] * m.q[k] - mu * m.q[k];
                e * e
            })
            .sum::<f64>()
            .sqrt();
        worst = worst.max(r);
    }
    worst
}

/// `Ψ₀(u, v) = (1 − (Au, u))(Av, v) + (Au, v)²` with `A = B⁻¹`.
pub fn psi0(u: &[f64], v: &[f64], b: &[f64]) -> f64 {
    let a = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).zip(b).map(|((p, q), w)| p * q / w).sum() };
    (1.0 - a(u, u)) * a(v, v) + a(u, v).powi(2)
}

/// Finite-horizon evidence that `τ(s)` converges on a hyperbola branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauTail {
    /// `τ(s_max)` from the quadrature.
    pub tau_sampled: f64,
    /// Extrapolated `∫_{s_max}^∞ α ds` from the fit `α ≈ C s^p`.
    pub tail: f64,
    pub tau_infinity: f64,
    pub fit_constant: f64,
    pub fit_exponent: f64,
    /// `(τ(∞) − τ(s_fit_start)) / τ(∞)`.
    pub increment_ratio: f64,
    /// `λ s⁴` at the last sample (tends to a constant).
    pub lambda_s4: f64,
}

fn log_grid(start_uniform: f64, h: f64, s_max: f64, ratio: f64) -> Vec<f64> {
    let mut s = vec![0.0];
    while *s.last().unwrap() < start_uniform {
        s.push(s.last().unwrap() + h);
    }
    while *s.last().unwrap() < s_max {
        let next = (s.last().unwrap() * ratio).min(s_max);
        s.push(next);
    }
    s
}

/// Integrates the geodesic from the vertex of the 1-D hyperbola
/// `b₀x₀² + b₁x₁² = 1` (`b₀ > 0 > b₁`) to arclength `s_max`, transforms it,
/// and extrapolates `τ(∞)` from a power-law fit on `[s_fit_start, s_max]`.
pub fn hyperbola_tau_tail(q: &Quadric, s_max: f64, s_fit_start: f64, cfg: &IntegratorConfig) -> Result<(TauTail, KnoerrerRun)> {
    let b = q.b();
    if b.len() != 2 || !(b[0] > 0.0 && b[1] < 0.0) {
        return Err(Error::InvalidConfig("expected a hyperbola with b0 > 0 > b1".into()));
    }
    if !(0.0 < s_fit_start && s_fit_start < s_max) {
        return Err(Error::InvalidConfig("need 0 < s_fit_start < s_max".into()));
    }
    let vertex = 1.0 / b[0].sqrt();
    let s0 = GeodesicState::new(vec![vertex, 0.0], vec![0.0, 1.0]);
    let grid = log_grid(4.0 * vertex, vertex / 200.0, s_max, 1.002);
    let run = geodesic_samples(&s0, q, &grid, cfg)?;
    let kn = knoerrer_transform(&run.states, q)?;
    let fit: Vec<(f64, f64)> = kn
        .samples
        .iter()
        .filter(|p| p.s >= s_fit_start)
        .map(|p| (p.s.ln(), p.alpha.ln()))
        .collect();
    let n = fit.len() as f64;
    let (sx, sy) = fit.iter().fold((0.0, 0.0), |(a, c), (x, y)| (a + x, c + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = fit.iter().fold((0.0, 0.0), |(a, c), (x, y)| (a + (x - mx).powi(2), c + (x - mx) * (y - my)));
    let p = sxy / sxx;
    let c = (my - p * mx).exp();
    if p >= -1.0 {
        return Err(Error::InvalidConfig(format!("alpha decays too slowly to integrate: exponent {p}")));
    }
    let last = kn.samples.last().expect("nonempty");
    let tail = c * last.s.powf(p + 1.0) / (-p - 1.0);
    let tau_infinity = last.tau + tail;
    let at_fit = kn
        .samples
        .iter()
        .find(|p| p.s >= s_fit_start)
        .map(|p| p.tau)
        .expect("fit window nonempty");
    let lambda = lagrange_multiplier(run.states.last().unwrap(), q)?;
    let tail_info = TauTail {
        tau_sampled: last.tau,
        tail,
        tau_infinity,
        fit_constant: c,
        fit_exponent: p,
        increment_ratio: (tau_infinity - at_fit) / tau_infinity,
        lambda_s4: lambda * last.s.powi(4),
    };
    Ok((tail_info, kn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrics::integrate_geodesic;

    #[test]
    fn psi0_special_cases() {
        let b = [1.0, 2.0, 4.0];
        let v = [0.3, 0.5, 0.2];
        let expect: f64 = v.iter().zip(&b).map(|(x, w)| x * x / w).sum();
        assert!((psi0(&[0.0; 3], &v, &b) - expect).abs() < 1e-15);
    }

    #[test]
    fn projection_is_scale_free() {
        let y = [3.0, 4.0];
        assert_eq!(central_projection(&y).unwrap(), vec![0.6, 0.8]);
        assert_eq!(central_projection(&[6.0, 8.0]).unwrap(), vec![0.6, 0.8]);
        assert!(central_projection(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn sphere_is_fixed_by_the_transform() {
        let q = Quadric::new(vec![1.0, 1.0, 1.0]).unwrap();
        let s0 = GeodesicState::new(vec![1.0, 0.0, 0.0], vec![0.0, 0.6, 0.8]);
        let run = integrate_geodesic(&s0, &q, 2.0, &IntegratorConfig::adaptive(1e-10).with_projection(true)).unwrap();
        let kn = knoerrer_transform(&run.states, &q).unwrap();
        for (p, st) in kn.samples.iter().zip(&run.states) {
            assert!((p.tau - st.s).abs() < 1e-12);
            for k in 0..3 {
                assert!((p.q[k] - st.x[k]).abs() < 1e-12);
                assert!((p.qp[k] - st.xp[k]).abs() < 1e-12);
            }
            assert!(neumann_mu(&p.q, &p.qp, &kn.b_eff).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_lines_are_rejected() {
        let q = Quadric::new(vec![1.0, 1.0, -1.0]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = GeodesicState::new(vec![1.0, 0.0, 0.0], vec![0.0, r, r]);
        assert!(matches!(knoerrer_transform(&[s], &q), Err(Error::KnoerrerUndefined)));
    }
}
