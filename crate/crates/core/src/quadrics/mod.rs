//! Geodesics on central quadrics `(Bx, x) = 1` with `B` diagonal, the
//! Joachimsthal integral, Knörrer's map to the Neumann system, and the
//! geodesically equivalent metric `dr² = (B dx, dx) / |Bx|²`.

mod equivalence;
mod knoerrer;
mod neumann;

use serde::{Deserialize, Serialize};

pub use equivalence::{
    affine_metric, closure_metric_signature, closure_residual, equiv_metric_geodesic, points_at_infinity,
    projective_chart_metric, reparametrization_defect, to_projective_chart, trace_distance, EquivalentGeodesic, ProjectiveChart,
};
pub use knoerrer::{
    central_projection, hyperbola_tau_tail, knoerrer_transform, neumann_residual, psi0, KnoerrerRun, NeumannSample,
    TauTail,
};
pub use neumann::{
    integrate_neumann, neumann_energy, neumann_mu, neumann_samples, return_time, NeumannReport, NeumannRun,
    NeumannState, ReturnEvent,
};

use crate::error::{Error, Result};
use crate::numerics::{
    dot, integrate, integrate_sampled, project_in_place, Constraint, IntegratorConfig, OdeSystem, Trajectory,
};

const DEGENERATE: f64 = 1e-12;

/// `Σ bᵢ xᵢ² = 1`, i.e. `B = A⁻¹ = diag(b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Quadric {
    b: Vec<f64>,
}

impl Quadric {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.len() < 2 {
            return Err(Error::InvalidConfig("quadric needs at least two coordinates".into()));
        }
        if let Some(k) = b.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("quadric coefficient b[{k}] must be finite and nonzero")));
        }
        Ok(Self { b })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Ambient dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn is_ellipsoid(&self) -> bool {
        self.b.iter().all(|&v| v > 0.0)
    }

    /// Number of negative coefficients.
    pub fn negative_count(&self) -> usize {
        self.b.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn apply_b(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.b).map(|(xi, bi)| xi * bi).collect()
    }

    /// `(Bu, v)`.
    pub fn b_form(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.b).map(|((a, c), b)| a * c * b).sum()
    }

    /// `(Au, v)` with `A = B⁻¹`.
    pub fn a_form(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.b).map(|((a, c), b)| a * c / b).sum()
    }

    /// `(Bx, x) − 1`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.b_form(x, x) - 1.0
    }
}

impl TryFrom<Vec<f64>> for Quadric {
    type Error = Error;

    fn try_from(b: Vec<f64>) -> Result<Self> {
        Quadric::new(b)
    }
}

impl From<Quadric> for Vec<f64> {
    fn from(q: Quadric) -> Self {
        q.b
    }
}

/// Position, unit tangent and arclength on a quadric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub x: Vec<f64>,
    pub xp: Vec<f64>,
    pub s: f64,
}

impl GeodesicState {
    pub fn new(x: Vec<f64>, xp: Vec<f64>) -> Self {
        Self { x, xp, s: 0.0 }
    }

    /// Projects `x` onto `Q` radially and `xp` onto the unit tangent sphere.
    pub fn on_quadric(q: &Quadric, x: &[f64], xp: &[f64]) -> Result<Self> {
        let r = q.b_form(x, x);
        if r <= 0.0 {
            return Err(Error::InvalidConfig("point not radially projectable onto the quadric".into()));
        }
        let x: Vec<f64> = x.iter().map(|v| v / r.sqrt()).collect();
        let mut xp = xp.to_vec();
        tangent_unit(q, &x, &mut xp)?;
        Ok(Self::new(x, xp))
    }

    /// Largest violation of `(Bx,x) = 1`, `(Bx,x') = 0`, `|x'| = 1`.
    pub fn constraint_residuals(&self, q: &Quadric) -> [f64; 3] {
        [
            q.residual(&self.x).abs(),
            q.b_form(&self.x, &self.xp).abs(),
            (dot(&self.xp, &self.xp).sqrt() - 1.0).abs(),
        ]
    }
}

fn tangent_unit(q: &Quadric, x: &[f64], xp: &mut [f64]) -> Result<()> {
    let bx = q.apply_b(x);
    let nb = dot(&bx, &bx);
    if nb.sqrt() <= DEGENERATE {
        return Err(Error::DegeneratePoint);
    }
    let c = dot(&bx, xp) / nb;
    for (v, n) in xp.iter_mut().zip(&bx) {
        *v -= c * n;
    }
    let len = dot(xp, xp).sqrt();
    if len <= DEGENERATE {
        return Err(Error::ZeroVector);
    }
    xp.iter_mut().for_each(|v| *v /= len);
    Ok(())
}

/// `λ = −(Bx′, x′) / |Bx|²`.
pub fn lagrange_multiplier(s: &GeodesicState, q: &Quadric) -> Result<f64> {
    multiplier(q, &s.x, &s.xp)
}

fn multiplier(q: &Quadric, x: &[f64], xp: &[f64]) -> Result<f64> {
    let bx = q.apply_b(x);
    let nb = dot(&bx, &bx);
    if nb.sqrt() <= DEGENERATE {
        return Err(Error::DegeneratePoint);
    }
    Ok(-q.b_form(xp, xp) / nb)
}

/// `F = |Bx|² (Bx′, x′)`.
pub fn joachimsthal(s: &GeodesicState, q: &Quadric) -> f64 {
    let bx = q.apply_b(&s.x);
    dot(&bx, &bx) * q.b_form(&s.xp, &s.xp)
}

/// `(dx/ds, dx′/ds) = (x′, λ Bx)`.
pub fn geodesic_rhs(s: &GeodesicState, q: &Quadric) -> Result<(Vec<f64>, Vec<f64>)> {
    let lambda = lagrange_multiplier(s, q)?;
    Ok((s.xp.clone(), q.apply_b(&s.x).into_iter().map(|v| lambda * v).collect()))
}

struct QuadricConstraint<'a> {
    q: &'a Quadric,
}

impl Constraint for QuadricConstraint<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        self.q.residual(&y[..self.q.dim()])
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let n = self.q.dim();
        for k in 0..n {
            out[k] = 2.0 * self.q.b()[k] * y[k];
        }
    }

    fn scale(&self, y: &[f64]) -> f64 {
        y[..self.q.dim()].iter().zip(self.q.b()).map(|(x, b)| (b * x * x).abs()).sum()
    }
}

pub(crate) struct GeodesicFlow<'a> {
    pub q: &'a Quadric,
}

impl OdeSystem for GeodesicFlow<'_> {
    fn dim(&self) -> usize {
        2 * self.q.dim()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.q.dim();
        let (x, xp) = y.split_at(n);
        let lambda = multiplier(self.q, x, xp)?;
        dy[..n].copy_from_slice(xp);
        for k in 0..n {
            dy[n + k] = lambda * self.q.b()[k] * x[k];
        }
        Ok(())
    }

    fn project(&self, _t: f64, y: &mut [f64]) -> Result<()> {
        project_in_place(y, &[&QuadricConstraint { q: self.q }])?;
        let n = self.q.dim();
        let (x, xp) = y.split_at_mut(n);
        tangent_unit(self.q, x, xp)
    }
}

/// Drift and constraint diagnostics along a geodesic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicReport {
    pub f_initial: f64,
    pub f_drift: f64,
    /// Worst violations of `(Bx,x) = 1`, `(Bx,x′) = 0`, `|x′| = 1`.
    pub constraint_residuals: [f64; 3],
    /// `max |λ + F/|Bx|⁴| / (1 + |λ|)`, with `F` evaluated pointwise.
    pub lambda_identity: f64,
}

#[derive(Debug, Clone)]
pub struct GeodesicRun {
    pub states: Vec<GeodesicState>,
    pub report: GeodesicReport,
    pub steps: usize,
}

fn check_state(s0: &GeodesicState, q: &Quadric) -> Result<()> {
    if s0.x.len() != q.dim() || s0.xp.len() != q.dim() {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: s0.x.len() });
    }
    let r = s0.constraint_residuals(q);
    if r.iter().any(|v| !(*v <= 1e-8)) {
        return Err(Error::InvalidConfig(format!("initial geodesic state violates constraints: {r:?}")));
    }
    lagrange_multiplier(s0, q).map(|_| ())
}

fn collect(q: &Quadric, traj: Trajectory) -> Result<GeodesicRun> {
    let n = q.dim();
    let states: Vec<GeodesicState> = traj
        .iter()
        .map(|(s, y)| GeodesicState { x: y[..n].to_vec(), xp: y[n..].to_vec(), s })
        .collect();
    let f0 = joachimsthal(&states[0], q);
    let mut report = GeodesicReport { f_initial: f0, f_drift: 0.0, constraint_residuals: [0.0; 3], lambda_identity: 0.0 };
    for st in &states {
        let f = joachimsthal(st, q);
        report.f_drift = report.f_drift.max((f - f0).abs());
        for (w, r) in report.constraint_residuals.iter_mut().zip(st.constraint_residuals(q)) {
            *w = w.max(r);
        }
        let lambda = lagrange_multiplier(st, q)?;
        let bx = q.apply_b(&st.x);
        let nb = dot(&bx, &bx);
        report.lambda_identity = report.lambda_identity.max((lambda + f / (nb * nb)).abs() / (1.0 + lambda.abs()));
    }
    Ok(GeodesicRun { states, report, steps: traj.accepted_steps })
}

/// Integrates `x″ = λBx` from `s0` to arclength `s_end`, recording every
/// accepted step.
pub fn integrate_geodesic(s0: &GeodesicState, q: &Quadric, s_end: f64, cfg: &IntegratorConfig) -> Result<GeodesicRun> {
    check_state(s0, q)?;
    let y0: Vec<f64> = s0.x.iter().chain(&s0.xp).copied().collect();
    let traj = integrate(&GeodesicFlow { q }, &y0, (s0.s, s_end), cfg)?;
    collect(q, traj)
}

/// Like [`integrate_geodesic`] but recording only at the given arclengths.
pub fn geodesic_samples(s0: &GeodesicState, q: &Quadric, times: &[f64], cfg: &IntegratorConfig) -> Result<GeodesicRun> {
    check_state(s0, q)?;
    let y0: Vec<f64> = s0.x.iter().chain(&s0.xp).copied().collect();
    let traj = integrate_sampled(&GeodesicFlow { q }, &y0, times, cfg)?;
    collect(q, traj)
}

/// Uniform grid `s0, s0 + h, …, s_end`.
pub fn uniform_grid(s0: f64, s_end: f64, h: f64) -> Vec<f64> {
    let n = ((s_end - s0) / h).round().max(1.0) as usize;
    (0..=n).map(|k| s0 + (s_end - s0) * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::adaptive(1e-10).with_projection(true)
    }

    #[test]
    fn multiplier_examples() {
        let sphere = Quadric::new(vec![1.0, 1.0, 1.0]).unwrap();
        let s = GeodesicState::new(vec![1.0, 0.0, 0.0], vec![0.0, 0.6, 0.8]);
        assert_eq!(lagrange_multiplier(&s, &sphere).unwrap(), -1.0);
        assert_eq!(joachimsthal(&s, &sphere), 1.0);
        let ellipse = Quadric::new(vec![1.0, 4.0]).unwrap();
        let s = GeodesicState::new(vec![1.0, 0.0], vec![0.0, 1.0]);
        assert_eq!(lagrange_multiplier(&s, &ellipse).unwrap(), -4.0);
        assert_eq!(joachimsthal(&s, &ellipse), 4.0);
        let origin = GeodesicState::new(vec![0.0, 0.0], vec![0.0, 1.0]);
        assert!(matches!(lagrange_multiplier(&origin, &ellipse), Err(Error::DegeneratePoint)));
    }

    #[test]
    fn generator_line_is_straight() {
        // x² + y² − z² = 1 contains the line (1, t, t).
        let q = Quadric::new(vec![1.0, 1.0, -1.0]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = GeodesicState::new(vec![1.0, 0.0, 0.0], vec![0.0, r, r]);
        assert_eq!(lagrange_multiplier(&s, &q).unwrap(), 0.0);
        assert_eq!(joachimsthal(&s, &q), 0.0);
        let run = integrate_geodesic(&s, &q, 3.0, &cfg()).unwrap();
        let last = run.states.last().unwrap();
        assert!((last.x[0] - 1.0).abs() < 1e-9);
        assert!((last.x[1] - 3.0 * r).abs() < 1e-9);
    }

    #[test]
    fn acceleration_is_normal() {
        let q = Quadric::new(vec![1.0, 2.0, 3.0]).unwrap();
        let s = GeodesicState::on_quadric(&q, &[0.5, 0.4, 0.3], &[0.2, -0.7, 0.4]).unwrap();
        let (_, acc) = geodesic_rhs(&s, &q).unwrap();
        assert!(dot(&acc, &s.xp).abs() < 1e-15);
    }

    #[test]
    fn great_circle_closes() {
        let sphere = Quadric::new(vec![1.0, 1.0, 1.0]).unwrap();
        let s = GeodesicState::new(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
        let run = integrate_geodesic(&s, &sphere, std::f64::consts::TAU, &cfg()).unwrap();
        let last = run.states.last().unwrap();
        assert!((last.x[0] - 1.0).abs() < 1e-7 && last.x[1].abs() < 1e-7);
    }

    #[test]
    fn rejects_bad_quadrics() {
        assert!(Quadric::new(vec![1.0, 0.0]).is_err());
        assert!(Quadric::new(vec![1.0]).is_err());
    }
}
