//! The N-dimensional Euler top `dM/dt = [M, Ω]`, `M = ΩJ + JΩ`, its Manakov
//! Lax pair `L = M + λJ²`, and the integrable modulation `J² = J₀² + f(t) I`.
//!
//! Under that modulation the coefficients of `P₀(λ, μ) = det(M + λJ₀² − μI)`
//! stay constant, while those of `det(M + λJ² − μI) = P₀(λ, μ − fλ)` inherit
//! the time dependence of `f`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulation::ModulationProfile;
use crate::numerics::{
    eigenvalues, integrate, integrate_sampled, solve_dense, sym_eigen, sym_sqrt_psd, IntegratorConfig, OdeSystem,
    SkewMatrix, SquareMatrix, SymMatrix, Trajectory, PD_EPSILON,
};

/// Probe values of the spectral parameter used for the isospectrality check.
pub const PROBE_LAMBDAS: [f64; 3] = [0.0, 1.0, -2.0];

const SINGULAR_INERTIA: f64 = 1e-14;

/// Angular momentum, time, and optionally the body frame `X ∈ SO(N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyState {
    pub m: SkewMatrix,
    pub t: f64,
    pub x: Option<SquareMatrix>,
}

impl RigidBodyState {
    pub fn new(m: SkewMatrix) -> Self {
        Self { m, t: 0.0, x: None }
    }

    pub fn with_frame(mut self, x: SquareMatrix) -> Self {
        self.x = Some(x);
        self
    }
}

/// `J₀` together with an optional modulation `f(t)`, so that
/// `J(t)² = J₀² + f(t) I`.
#[derive(Debug, Clone)]
pub struct InertiaSpec {
    j0: SymMatrix,
    modulation: Option<ModulationProfile>,
    /// Eigenvectors of `J₀` (columns); all flows run in this basis.
    basis: SquareMatrix,
    principal: Vec<f64>,
}

impl InertiaSpec {
    pub fn new(j0: SymMatrix, modulation: Option<ModulationProfile>) -> Result<Self> {
        let eig = sym_eigen(&j0)?;
        if let Some(&bad) = eig.values.iter().find(|&&v| v <= PD_EPSILON) {
            return Err(Error::PositiveDefinitenessViolation { eigenvalue: bad });
        }
        Ok(Self { j0, modulation, basis: eig.vectors, principal: eig.values })
    }

    pub fn fixed(j0: SymMatrix) -> Result<Self> {
        Self::new(j0, None)
    }

    pub fn dim(&self) -> usize {
        self.j0.dim()
    }

    pub fn j0(&self) -> &SymMatrix {
        &self.j0
    }

    pub fn modulation(&self) -> Option<&ModulationProfile> {
        self.modulation.as_ref()
    }

    pub fn period(&self) -> Option<f64> {
        self.modulation.as_ref().and_then(ModulationProfile::period)
    }

    /// Eigenvalues of `J₀` (ascending).
    pub fn principal_moments(&self) -> &[f64] {
        &self.principal
    }

    /// Orthogonal matrix whose columns diagonalize `J₀`.
    pub fn basis(&self) -> &SquareMatrix {
        &self.basis
    }

    pub fn f(&self, t: f64) -> f64 {
        self.modulation.as_ref().map_or(0.0, |m| m.eval(t))
    }

    /// Eigenvalues of `J(t)` in the `J₀` eigenbasis.
    pub fn moments_at(&self, t: f64) -> Result<Vec<f64>> {
        let f = self.f(t);
        self.principal
            .iter()
            .map(|j| {
                let sq = j * j + f;
                if sq <= PD_EPSILON {
                    Err(Error::PositiveDefinitenessViolation { eigenvalue: sq })
                } else {
                    Ok(sq.sqrt())
                }
            })
            .collect()
    }

    /// `J(t) = (J₀² + f(t) I)^{1/2}` in the original basis.
    pub fn j_at(&self, t: f64) -> Result<SymMatrix> {
        sym_sqrt_psd(&self.j0.square().shift(self.f(t)))
    }

    /// Checks positive definiteness of `J₀² + f(t)I` on `samples` points of
    /// `[t0, t1]`.
    pub fn validate_over(&self, t0: f64, t1: f64, samples: usize) -> Result<()> {
        let n = samples.max(2);
        for k in 0..n {
            self.moments_at(t0 + (t1 - t0) * k as f64 / (n - 1) as f64)?;
        }
        Ok(())
    }

    fn to_eigenbasis(&self, m: &SkewMatrix) -> SkewMatrix {
        m.conjugate_by(&self.basis)
    }

    fn to_standard_basis(&self, m: &SkewMatrix) -> SkewMatrix {
        m.conjugate_by(&self.basis.transpose())
    }
}

/// `Ω̃_ij = M̃_ij / (j_i + j_j)` for `J` diagonal with entries `j`.
fn omega_diagonal(m: &SkewMatrix, j: &[f64]) -> Result<SkewMatrix> {
    let n = m.dim();
    for a in 0..n {
        for b in a + 1..n {
            let sum = j[a] + j[b];
            if sum.abs() <= SINGULAR_INERTIA {
                return Err(Error::SingularInertia { sum });
            }
        }
    }
    Ok(SkewMatrix::from_fn(n, |a, b| m[(a, b)] / (j[a] + j[b])))
}

/// Solves `ΩJ + JΩ = M` for skew `Ω` in the eigenbasis of `J`.
pub fn solve_omega(m: &SkewMatrix, j: &SymMatrix) -> Result<SkewMatrix> {
    if m.dim() != j.dim() {
        return Err(Error::DimensionMismatch { expected: j.dim(), found: m.dim() });
    }
    let eig = sym_eigen(j)?;
    let mt = m.conjugate_by(&eig.vectors);
    let wt = omega_diagonal(&mt, &eig.values)?;
    Ok(wt.conjugate_by(&eig.vectors.transpose()))
}

/// Time derivatives `(dM/dt, dX/dt) = ([M, Ω], XΩ)` with the modulated `J(t)`.
pub fn euler_rhs(s: &RigidBodyState, inertia: &InertiaSpec) -> Result<(SkewMatrix, Option<SquareMatrix>)> {
    let j = inertia.j_at(s.t)?;
    let omega = solve_omega(&s.m, &j)?;
    let dm = s.m.as_matrix().commutator(omega.as_matrix()).skew_part();
    let dx = s.x.as_ref().map(|x| x * omega.as_matrix());
    Ok((dm, dx))
}

/// `H = ½ tr(Mᵀ A⁻¹(M))` with `A(Ω) = ΩJ + JΩ`.
pub fn hamiltonian(m: &SkewMatrix, j: &SymMatrix) -> Result<f64> {
    let omega = solve_omega(m, j)?;
    Ok(0.5 * (&m.as_matrix().transpose() * omega.as_matrix()).trace())
}

/// Coefficient table of a bivariate polynomial of total degree `n`:
/// `P(λ, μ) = Σ c[a][b] λ^a μ^b` with `a + b ≤ n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharPoly {
    pub n: usize,
    pub c: Vec<Vec<f64>>,
}

impl CharPoly {
    pub fn eval(&self, lambda: f64, mu: f64) -> f64 {
        let mut total = 0.0;
        let mut lp = 1.0;
        for a in 0..=self.n {
            let mut mp = 1.0;
            for b in 0..=self.n - a {
                total += self.c[a][b] * lp * mp;
                mp *= mu;
            }
            lp *= lambda;
        }
        total
    }

    pub fn coefficient(&self, lambda_power: usize, mu_power: usize) -> f64 {
        self.c.get(lambda_power).and_then(|r| r.get(mu_power)).copied().unwrap_or(0.0)
    }
}

fn interpolation_nodes(n: usize) -> Vec<f64> {
    let shift = (n / 2) as f64;
    (0..=n).map(|k| k as f64 - shift).collect()
}

/// Monomial coefficients of the degree-`n` polynomial through `(x_k, y_k)`.
fn interpolate(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let v = SquareMatrix::from_fn(n, |i, j| nodes[i].powi(j as i32));
    solve_dense(&v, values).expect("interpolation nodes are distinct")
}

/// `det(M + λS − μI)` for symmetric `S`.
fn pencil_det(m: &SkewMatrix, s: &SymMatrix, lambda: f64, mu: f64) -> f64 {
    let a = m.as_matrix();
    SquareMatrix::from_fn(m.dim(), |i, j| a[(i, j)] + lambda * s[(i, j)] - if i == j { mu } else { 0.0 })
        .determinant()
}

/// Coefficients of `det(M + λS − μI)` by evaluation on an integer grid and
/// tensor-product Vandermonde interpolation.
pub fn characteristic_polynomial(m: &SkewMatrix, s: &SymMatrix) -> Result<CharPoly> {
    let n = m.dim();
    if s.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: s.dim() });
    }
    let nodes = interpolation_nodes(n);
    // Interpolate in μ for each λ node, then in λ for each power of μ.
    let in_mu: Vec<Vec<f64>> = nodes
        .iter()
        .map(|&l| {
            let vals: Vec<f64> = nodes.iter().map(|&mu| pencil_det(m, s, l, mu)).collect();
            interpolate(&nodes, &vals)
        })
        .collect();
    let mut c = vec![vec![0.0; n + 1]; n + 1];
    for b in 0..=n {
        let column: Vec<f64> = in_mu.iter().map(|row| row[b]).collect();
        let coeffs = interpolate(&nodes, &column);
        for (a, v) in coeffs.into_iter().enumerate() {
            if a + b <= n {
                c[a][b] = v;
            }
        }
    }
    for (a, row) in c.iter_mut().enumerate() {
        row.truncate(n + 1 - a);
    }
    Ok(CharPoly { n, c })
}

/// One coefficient `λ^a μ^b` of `P₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub lambda_power: usize,
    pub mu_power: usize,
    pub value: f64,
}

/// The nonconstant coefficients of `P₀(λ, μ) = det(M + λJ₀² − μI)`.
///
/// Terms of total degree `n` depend on `J₀` only and are omitted; terms whose
/// degree in `M` is odd vanish for skew `M` and are kept only as
/// `parity_residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralInvariants {
    pub n: usize,
    pub coefficients: Vec<Coefficient>,
    /// Largest forbidden-parity coefficient (zero up to rounding).
    pub parity_residual: f64,
}

impl SpectralInvariants {
    pub fn get(&self, lambda_power: usize, mu_power: usize) -> Option<f64> {
        self.coefficients
            .iter()
            .find(|c| c.lambda_power == lambda_power && c.mu_power == mu_power)
            .map(|c| c.value)
    }

    pub fn label(c: &Coefficient) -> String {
        format!("P0[l^{} m^{}]", c.lambda_power, c.mu_power)
    }
}

pub fn spectral_invariants(m: &SkewMatrix, j0: &SymMatrix) -> Result<SpectralInvariants> {
    let poly = characteristic_polynomial(m, &j0.square())?;
    Ok(invariants_from_poly(&poly))
}

fn invariants_from_poly(poly: &CharPoly) -> SpectralInvariants {
    let n = poly.n;
    let mut coefficients = Vec::new();
    let mut parity_residual: f64 = 0.0;
    for a in 0..n {
        for b in 0..n - a {
            let value = poly.c[a][b];
            if (n - a - b) % 2 == 1 {
                parity_residual = parity_residual.max(value.abs());
            } else {
                coefficients.push(Coefficient { lambda_power: a, mu_power: b, value });
            }
        }
    }
    SpectralInvariants { n, coefficients, parity_residual }
}

/// Relative residual of `det(M + λ(J₀² + fI) − μI) = P₀(λ, μ − fλ)` on a
/// grid of `(λ, μ)`.
pub fn polynomial_shift_identity(m: &SkewMatrix, j0: &SymMatrix, f: f64) -> Result<f64> {
    let d0 = j0.square();
    let p0 = characteristic_polynomial(m, &d0)?;
    let shifted = d0.shift(f);
    let grid = [-1.5, -0.75, 0.0, 0.5, 1.25, 2.0];
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for &lambda in &grid {
        for &mu in &grid {
            let lhs = pencil_det(m, &shifted, lambda, mu);
            let rhs = p0.eval(lambda, mu - f * lambda);
            worst = worst.max((lhs - rhs).abs());
            scale = scale.max(lhs.abs());
        }
    }
    Ok(worst / scale)
}

/// Eigenvalues of `M + λJ₀²` for each probe `λ`.
pub fn probe_eigenvalues(m: &SkewMatrix, j0: &SymMatrix, lambdas: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    let d0 = j0.square();
    lambdas
        .iter()
        .map(|&l| eigenvalues(&(m.as_matrix() + &d0.as_matrix().scale(l))))
        .collect()
}

/// Distance between two spectra after nearest-neighbour matching.
pub fn spectrum_distance(reference: &[Complex64], current: &[Complex64]) -> f64 {
    let mut used = vec![false; current.len()];
    let mut worst: f64 = 0.0;
    for z in reference {
        let (k, d) = current
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, w)| (k, (z - w).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, f64::INFINITY));
        if k < used.len() {
            used[k] = true;
        }
        worst = worst.max(d);
    }
    worst
}

/// Right-hand side in the `J₀` eigenbasis; state = packed upper triangle of
/// `M̃` followed (optionally) by `Y = XQ` row-major.
struct ModulatedTop<'a> {
    inertia: &'a InertiaSpec,
    with_frame: bool,
}

impl ModulatedTop<'_> {
    fn n(&self) -> usize {
        self.inertia.dim()
    }

    fn packed_len(&self) -> usize {
        let n = self.n();
        n * (n - 1) / 2
    }

    fn split(&self, y: &[f64]) -> Result<(SkewMatrix, Option<SquareMatrix>)> {
        let n = self.n();
        let m = SkewMatrix::from_upper(n, &y[..self.packed_len()])?;
        let x = self
            .with_frame
            .then(|| SquareMatrix::from_fn(n, |i, j| y[self.packed_len() + i * n + j]));
        Ok((m, x))
    }
}

impl OdeSystem for ModulatedTop<'_> {
    fn dim(&self) -> usize {
        let n = self.n();
        self.packed_len() + if self.with_frame { n * n } else { 0 }
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let (m, x) = self.split(y)?;
        let j = self.inertia.moments_at(t)?;
        let omega = omega_diagonal(&m, &j)?;
        let dm = m.as_matrix().commutator(omega.as_matrix()).skew_part();
        let k = self.packed_len();
        dy[..k].copy_from_slice(&dm.upper());
        if let Some(x) = x {
            dy[k..].copy_from_slice((&x * omega.as_matrix()).as_slice());
        }
        Ok(())
    }
}

fn pack(inertia: &InertiaSpec, s: &RigidBodyState) -> Vec<f64> {
    let mut y = inertia.to_eigenbasis(&s.m).upper();
    if let Some(x) = &s.x {
        y.extend_from_slice((x * inertia.basis()).as_slice());
    }
    y
}

fn unpack(inertia: &InertiaSpec, top: &ModulatedTop<'_>, t: f64, y: &[f64]) -> Result<RigidBodyState> {
    let (mt, yx) = top.split(y)?;
    let m = inertia.to_standard_basis(&mt);
    let x = yx.map(|yx| &yx * &inertia.basis().transpose());
    Ok(RigidBodyState { m, t, x })
}

/// Drift of one monitored quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantDrift {
    pub name: String,
    pub initial: f64,
    pub max_drift: f64,
}

/// Invariant monitoring along a modulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerDriftReport {
    /// One row per nonconstant coefficient of `P₀`.
    pub coefficients: Vec<InvariantDrift>,
    /// Worst spectrum displacement of `M + λJ₀²` over [`PROBE_LAMBDAS`].
    pub probe_spectrum_drift: f64,
    /// `max ‖M + Mᵀ‖_F`.
    pub skewness: f64,
    /// `max ‖XᵀX − I‖_F` when the frame is tracked.
    pub orthogonality: Option<f64>,
}

impl EulerDriftReport {
    pub fn max_coefficient_drift(&self) -> f64 {
        self.coefficients.iter().map(|c| c.max_drift).fold(0.0, f64::max)
    }
}

/// Tracks the drift of `P₀` coefficients and probe spectra over samples.
pub struct InvariantMonitor {
    j0: SymMatrix,
    initial: SpectralInvariants,
    initial_spectra: Vec<Vec<Complex64>>,
    drift: Vec<f64>,
    probe: f64,
    skew: f64,
    orth: Option<f64>,
}

impl InvariantMonitor {
    pub fn new(m0: &SkewMatrix, j0: &SymMatrix) -> Result<Self> {
        let initial = spectral_invariants(m0, j0)?;
        let initial_spectra = probe_eigenvalues(m0, j0, &PROBE_LAMBDAS)?;
        let drift = vec![0.0; initial.coefficients.len()];
        Ok(Self { j0: j0.clone(), initial, initial_spectra, drift, probe: 0.0, skew: 0.0, orth: None })
    }

    pub fn observe(&mut self, s: &RigidBodyState) -> Result<()> {
        let inv = spectral_invariants(&s.m, &self.j0)?;
        for (d, (c0, c)) in self.drift.iter_mut().zip(self.initial.coefficients.iter().zip(&inv.coefficients)) {
            *d = d.max((c.value - c0.value).abs());
        }
        let spectra = probe_eigenvalues(&s.m, &self.j0, &PROBE_LAMBDAS)?;
        for (r, c) in self.initial_spectra.iter().zip(&spectra) {
            self.probe = self.probe.max(spectrum_distance(r, c));
        }
        let m = s.m.as_matrix();
        self.skew = self.skew.max((m + &m.transpose()).frobenius_norm());
        if let Some(x) = &s.x {
            let defect = x.orthogonality_defect();
            self.orth = Some(self.orth.map_or(defect, |o| o.max(defect)));
        }
        Ok(())
    }

    pub fn report(&self) -> EulerDriftReport {
        let coefficients = self
            .initial
            .coefficients
            .iter()
            .zip(&self.drift)
            .map(|(c, &d)| InvariantDrift { name: SpectralInvariants::label(c), initial: c.value, max_drift: d })
            .collect();
        EulerDriftReport {
            coefficients,
            probe_spectrum_drift: self.probe,
            skewness: self.skew,
            orthogonality: self.orth,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EulerRun {
    pub states: Vec<RigidBodyState>,
    pub report: EulerDriftReport,
    pub steps: usize,
}

fn collect_run(inertia: &InertiaSpec, top: &ModulatedTop<'_>, traj: Trajectory, m0: &SkewMatrix) -> Result<EulerRun> {
    let mut monitor = InvariantMonitor::new(m0, inertia.j0())?;
    let mut states = Vec::with_capacity(traj.len());
    for (t, y) in traj.iter() {
        let s = unpack(inertia, top, t, y)?;
        monitor.observe(&s)?;
        states.push(s);
    }
    Ok(EulerRun { states, report: monitor.report(), steps: traj.accepted_steps })
}

/// Integrates the modulated Euler equation from `s0` to `t_end`, recording
/// every accepted step and the invariant drift.
pub fn modulated_flow(s0: &RigidBodyState, inertia: &InertiaSpec, t_end: f64, cfg: &IntegratorConfig) -> Result<EulerRun> {
    check_dims(s0, inertia)?;
    let top = ModulatedTop { inertia, with_frame: s0.x.is_some() };
    let traj = integrate(&top, &pack(inertia, s0), (s0.t, t_end), cfg)?;
    collect_run(inertia, &top, traj, &s0.m)
}

/// Like [`modulated_flow`] but samples only at `times`.
pub fn modulated_samples(s0: &RigidBodyState, inertia: &InertiaSpec, times: &[f64], cfg: &IntegratorConfig) -> Result<EulerRun> {
    check_dims(s0, inertia)?;
    let top = ModulatedTop { inertia, with_frame: s0.x.is_some() };
    let traj = integrate_sampled(&top, &pack(inertia, s0), times, cfg)?;
    collect_run(inertia, &top, traj, &s0.m)
}

fn check_dims(s0: &RigidBodyState, inertia: &InertiaSpec) -> Result<()> {
    let n = inertia.dim();
    if s0.m.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: s0.m.dim() });
    }
    if let Some(x) = &s0.x {
        if x.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.dim() });
        }
    }
    if n < 2 {
        return Err(Error::InvalidConfig("rigid body needs N >= 2".into()));
    }
    Ok(())
}

/// Largest `|H(t + T) − H(t)|` for `t` in `[0, t_end − T]` sampled every
/// `T/8`, with `H` evaluated using the instantaneous `J(t)`.
pub fn hamiltonian_period_defect(s0: &RigidBodyState, inertia: &InertiaSpec, t_end: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let period = inertia
        .period()
        .ok_or_else(|| Error::InvalidConfig("modulation has no declared period".into()))?;
    let per = 8usize;
    let count = (t_end / period * per as f64).floor() as usize;
    let times: Vec<f64> = (0..=count).map(|k| s0.t + period * k as f64 / per as f64).collect();
    let run = modulated_samples(s0, inertia, &times, cfg)?;
    let h = run
        .states
        .iter()
        .map(|s| hamiltonian(&s.m, &inertia.j_at(s.t)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(h.iter().zip(h.iter().skip(per)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// The period map `M(0) ↦ M(T)` of the modulated equation.
pub fn t_shift_map(inertia: &InertiaSpec, m0: &SkewMatrix, cfg: &IntegratorConfig) -> Result<SkewMatrix> {
    let period = inertia
        .period()
        .ok_or_else(|| Error::InvalidConfig("T-shift requires a modulation with declared period".into()))?;
    let s0 = RigidBodyState::new(m0.clone());
    let run = modulated_samples(&s0, inertia, &[0.0, period], cfg)?;
    Ok(run.states.last().expect("two samples").m.clone())
}

/// Iterates [`t_shift_map`], returning `M₀, M₁, …, M_k`.
pub fn t_shift_orbit(inertia: &InertiaSpec, m0: &SkewMatrix, iterations: usize, cfg: &IntegratorConfig) -> Result<Vec<SkewMatrix>> {
    let mut orbit = Vec::with_capacity(iterations + 1);
    orbit.push(m0.clone());
    for _ in 0..iterations {
        let next = t_shift_map(inertia, orbit.last().unwrap(), cfg)?;
        orbit.push(next);
    }
    Ok(orbit)
}

/// Drift report for a sequence of momenta (e.g. a T-shift orbit).
pub fn orbit_drift(orbit: &[SkewMatrix], j0: &SymMatrix) -> Result<EulerDriftReport> {
    let first = orbit.first().ok_or_else(|| Error::InvalidConfig("empty orbit".into()))?;
    let mut monitor = InvariantMonitor::new(first, j0)?;
    for m in orbit {
        monitor.observe(&RigidBodyState::new(m.clone()))?;
    }
    Ok(monitor.report())
}
