//! Hyperbolic toral automorphisms, their lift to the cotangent bundle
//! `T*T²`, and the two smooth momentum-only integrals of the lifted map.
//!
//! Eigen momenta are stored as `mantissa · λ^exponent` with an integer
//! exponent: over thousands of steps `p_v` grows like `λᵏ` and `p_u` decays
//! like `λ⁻ᵏ`, far outside the `f64` range, while `F₁ = p_u p_v` stays fixed.

use std::f64::consts::TAU;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An integer 2×2 matrix with determinant 1 and `|trace| > 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[[i64; 2]; 2]", into = "[[i64; 2]; 2]")]
pub struct ToralAutomorphism {
    a: [[i64; 2]; 2],
}

impl ToralAutomorphism {
    pub fn new(a11: i64, a12: i64, a21: i64, a22: i64) -> Result<Self> {
        let det = a11 * a22 - a12 * a21;
        if det != 1 {
            return Err(Error::NotUnimodular { det });
        }
        let trace = a11 + a22;
        if trace.abs() <= 2 {
            return Err(Error::NotHyperbolic { trace });
        }
        Ok(Self { a: [[a11, a12], [a21, a22]] })
    }

    /// The matrix `[[2, 1], [1, 1]]`.
    pub fn cat() -> Self {
        Self { a: [[2, 1], [1, 1]] }
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.a
    }

    pub fn trace(&self) -> i64 {
        self.a[0][0] + self.a[1][1]
    }

    /// `A⁻¹ = [[a22, −a12], [−a21, a11]]` (determinant 1).
    pub fn inverse(&self) -> [[i64; 2]; 2] {
        let [[a, b], [c, d]] = self.a;
        [[d, -b], [-c, a]]
    }

    fn apply_f64(m: &[[i64; 2]; 2], x: [f64; 2]) -> [f64; 2] {
        [
            m[0][0] as f64 * x[0] + m[0][1] as f64 * x[1],
            m[1][0] as f64 * x[0] + m[1][1] as f64 * x[1],
        ]
    }
}

impl TryFrom<[[i64; 2]; 2]> for ToralAutomorphism {
    type Error = Error;

    fn try_from(a: [[i64; 2]; 2]) -> Result<Self> {
        Self::new(a[0][0], a[0][1], a[1][0], a[1][1])
    }
}

impl From<ToralAutomorphism> for [[i64; 2]; 2] {
    fn from(t: ToralAutomorphism) -> Self {
        t.a
    }
}

/// Expanding eigenvalue, eigenbasis and entropy of a hyperbolic automorphism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicData {
    /// Eigenvalue of modulus greater than one (negative when the trace is).
    pub eigenvalue: f64,
    /// `λ = |eigenvalue| > 1`.
    pub lambda: f64,
    /// Columns: unit eigenvectors for `eigenvalue` and `1/eigenvalue`, each
    /// with nonnegative first component.
    pub eigenbasis: [[f64; 2]; 2],
    pub entropy: f64,
}

impl HyperbolicData {
    #[cfg(test)]
    fn column(&self, k: usize) -> [f64; 2] {
        [self.eigenbasis[0][k], self.eigenbasis[1][k]]
    }

    /// Eigen coordinates `(u, v) = E⁻¹ x`.
    pub fn to_eigen(&self, x: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.eigenbasis;
        let det = a * d - b * c;
        [(d * x[0] - b * x[1]) / det, (-c * x[0] + a * x[1]) / det]
    }

    /// Eigen momenta `(p_u, p_v) = Eᵀ p`.
    pub fn covector_to_eigen(&self, p: [f64; 2]) -> [f64; 2] {
        let e = self.eigenbasis;
        [e[0][0] * p[0] + e[1][0] * p[1], e[0][1] * p[0] + e[1][1] * p[1]]
    }

    /// Standard covector `p = E⁻ᵀ (p_u, p_v)`.
    pub fn covector_from_eigen(&self, q: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.eigenbasis;
        let det = a * d - b * c;
        [(d * q[0] - c * q[1]) / det, (-b * q[0] + a * q[1]) / det]
    }
}

fn unit_eigenvector(a: &[[i64; 2]; 2], ev: f64) -> [f64; 2] {
    let [[a11, a12], [a21, a22]] = a.map(|r| r.map(|v| v as f64));
    let v = if a12 != 0.0 { [a12, ev - a11] } else { [ev - a22, a21] };
    let n = v[0].hypot(v[1]);
    let s = if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) { -1.0 } else { 1.0 };
    [s * v[0] / n, s * v[1] / n]
}

pub fn hyperbolic_data(a: &ToralAutomorphism) -> HyperbolicData {
    let tr = a.trace() as f64;
    let disc = (tr * tr - 4.0).sqrt();
    let eigenvalue = if tr > 0.0 { (tr + disc) / 2.0 } else { (tr - disc) / 2.0 };
    let e1 = unit_eigenvector(&a.a, eigenvalue);
    let e2 = unit_eigenvector(&a.a, 1.0 / eigenvalue);
    let lambda = eigenvalue.abs();
    HyperbolicData {
        eigenvalue,
        lambda,
        eigenbasis: [[e1[0], e2[0]], [e1[1], e2[1]]],
        entropy: lambda.ln(),
    }
}

fn reduce_mod1(x: f64) -> f64 {
    let r = x - x.floor();
    // `x - floor(x)` can round up to exactly 1 for tiny negative x.
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// `A x mod 1`, componentwise in `[0, 1)`.
pub fn torus_step(a: &ToralAutomorphism, x: [f64; 2]) -> [f64; 2] {
    ToralAutomorphism::apply_f64(&a.a, x).map(reduce_mod1)
}

/// A real number `mantissa · λ^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledMomentum {
    pub mantissa: f64,
    pub exponent: i64,
}

impl ScaledMomentum {
    pub fn new(value: f64) -> Self {
        Self { mantissa: value, exponent: 0 }
    }

    /// The plain value; may overflow to infinity or underflow to zero.
    pub fn value(&self, lambda: f64) -> f64 {
        self.mantissa * lambda.powf(self.exponent as f64)
    }

    fn times_eigenvalue(self, sign: f64, power: i64) -> Self {
        let flip = if power % 2 != 0 { sign } else { 1.0 };
        Self { mantissa: flip * self.mantissa, exponent: self.exponent + power }
    }
}

/// A torus point with a cotangent covector held in eigen coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedTorusState {
    /// Base point in `[0, 1)²`.
    pub x: [f64; 2],
    pub p_u: ScaledMomentum,
    pub p_v: ScaledMomentum,
}

impl ExtendedTorusState {
    pub fn from_eigen(x: [f64; 2], p_u: f64, p_v: f64) -> Self {
        Self { x: x.map(reduce_mod1), p_u: ScaledMomentum::new(p_u), p_v: ScaledMomentum::new(p_v) }
    }

    pub fn from_standard(hd: &HyperbolicData, x: [f64; 2], p: [f64; 2]) -> Self {
        let [pu, pv] = hd.covector_to_eigen(p);
        Self::from_eigen(x, pu, pv)
    }

    /// Eigen coordinates `(u, v)` of the base point representative in `[0,1)²`.
    pub fn eigen_position(&self, hd: &HyperbolicData) -> [f64; 2] {
        hd.to_eigen(self.x)
    }

    pub fn eigen_momenta(&self, hd: &HyperbolicData) -> [f64; 2] {
        [self.p_u.value(hd.lambda), self.p_v.value(hd.lambda)]
    }

    /// Standard covector `(p₁, p₂)`; may overflow after many steps.
    pub fn standard_covector(&self, hd: &HyperbolicData) -> [f64; 2] {
        hd.covector_from_eigen(self.eigen_momenta(hd))
    }
}

/// Cotangent lift: base point by `A`, covector by `A⁻ᵀ`, i.e.
/// `(p_u, p_v) ↦ (p_u/ℓ, ℓ p_v)` for the expanding eigenvalue `ℓ`.
pub fn extended_step(a: &ToralAutomorphism, hd: &HyperbolicData, s: &ExtendedTorusState) -> ExtendedTorusState {
    let sign = hd.eigenvalue.signum();
    ExtendedTorusState {
        x: torus_step(a, s.x),
        p_u: s.p_u.times_eigenvalue(sign, -1),
        p_v: s.p_v.times_eigenvalue(sign, 1),
    }
}

/// Covector image `A⁻ᵀ p` in standard coordinates.
pub fn cotangent_covector_step(a: &ToralAutomorphism, p: [f64; 2]) -> [f64; 2] {
    let inv = a.inverse();
    let inv_t = [[inv[0][0], inv[1][0]], [inv[0][1], inv[1][1]]];
    ToralAutomorphism::apply_f64(&inv_t, p)
}

/// `F₁ = p_u p_v`.
pub fn integral_f1(s: &ExtendedTorusState, hd: &HyperbolicData) -> f64 {
    let e = s.p_u.exponent + s.p_v.exponent;
    s.p_u.mantissa * s.p_v.mantissa * hd.lambda.powf(e as f64)
}

/// `F₂ = exp(−1/F₁²) · sin(2π log p_u² / log λ²)`, extended by 0 where
/// `p_u p_v = 0`.
pub fn integral_f2(s: &ExtendedTorusState, hd: &HyperbolicData) -> f64 {
    if s.p_u.mantissa == 0.0 || s.p_v.mantissa == 0.0 {
        return 0.0;
    }
    let f1 = integral_f1(s, hd);
    // log|p_u| / log λ = log|mantissa| / log λ + exponent; the integer part
    // drops out of the sine.
    let phase = s.p_u.mantissa.abs().ln() / hd.lambda.ln();
    (-1.0 / (f1 * f1)).exp() * (TAU * phase).sin()
}

/// Gradient of a function on `T*T²` in canonical eigen coordinates
/// `(u, v; p_u, p_v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalGradient {
    pub position: [f64; 2],
    pub momentum: [f64; 2],
}

pub fn f1_gradient(p_u: f64, p_v: f64) -> CanonicalGradient {
    CanonicalGradient { position: [0.0; 2], momentum: [p_v, p_u] }
}

pub fn f2_gradient(p_u: f64, p_v: f64, lambda: f64) -> CanonicalGradient {
    if p_u == 0.0 || p_v == 0.0 {
        return CanonicalGradient { position: [0.0; 2], momentum: [0.0; 2] };
    }
    let f1 = p_u * p_v;
    let damp = (-1.0 / (f1 * f1)).exp();
    let theta = TAU * p_u.abs().ln() / lambda.ln();
    let d_damp = 2.0 / (f1 * f1 * f1);
    CanonicalGradient {
        position: [0.0; 2],
        momentum: [
            damp * (d_damp * p_v * theta.sin() + theta.cos() * TAU / (p_u * lambda.ln())),
            damp * d_damp * p_u * theta.sin(),
        ],
    }
}

/// Canonical bracket `{F, G} = Σ ∂F/∂xᵢ ∂G/∂pᵢ − ∂F/∂pᵢ ∂G/∂xᵢ`.
pub fn canonical_bracket(f: &CanonicalGradient, g: &CanonicalGradient) -> f64 {
    (0..2)
        .map(|i| f.position[i] * g.momentum[i] - f.momentum[i] * g.position[i])
        .sum()
}

/// A torus point with rational coordinates `num / den`, iterated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RationalTorusPoint {
    pub num: [i64; 2],
    pub den: i64,
}

impl RationalTorusPoint {
    pub fn new(num: [i64; 2], den: i64) -> Result<Self> {
        if den <= 0 {
            return Err(Error::InvalidConfig(format!("torus denominator must be positive, got {den}")));
        }
        Ok(Self { num: num.map(|v| v.rem_euclid(den)), den })
    }

    pub fn to_f64(&self) -> [f64; 2] {
        self.num.map(|v| v as f64 / self.den as f64)
    }

    /// Lowest-terms denominator of the point.
    pub fn reduced_denominator(&self) -> i64 {
        self.den / self.num[0].gcd(&self.num[1]).gcd(&self.den)
    }
}

pub fn torus_step_exact(a: &ToralAutomorphism, x: &RationalTorusPoint) -> RationalTorusPoint {
    let m = a.entries();
    let q = x.den as i128;
    let n = x.num.map(|v| v as i128);
    let image = [0, 1].map(|i| ((m[i][0] as i128 * n[0] + m[i][1] as i128 * n[1]).rem_euclid(q)) as i64);
    RationalTorusPoint { num: image, den: x.den }
}

/// Least `k ≥ 1` with `Aᵏ x = x`, searched up to `max_iter`.
pub fn exact_period(a: &ToralAutomorphism, x: &RationalTorusPoint, max_iter: u64) -> Option<u64> {
    let mut y = torus_step_exact(a, x);
    for k in 1..=max_iter {
        if y == *x {
            return Some(k);
        }
        y = torus_step_exact(a, &y);
    }
    None
}

/// Order of `A` in `GL(2, ℤ/qℤ)`.
pub fn group_period(a: &ToralAutomorphism, q: i64) -> u64 {
    if q == 1 {
        return 1;
    }
    let m = a.entries().map(|r| r.map(|v| v.rem_euclid(q)));
    let mul = |x: [[i64; 2]; 2], y: [[i64; 2]; 2]| {
        let mut out = [[0i64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (x[i][0] * y[0][j] + x[i][1] * y[1][j]).rem_euclid(q);
            }
        }
        out
    };
    let mut p = m;
    let mut k = 1;
    while p != [[1, 0], [0, 1]] {
        p = mul(p, m);
        k += 1;
    }
    k
}

/// Iterates the lift `steps` times, returning every state including the first.
pub fn extended_orbit(a: &ToralAutomorphism, s0: &ExtendedTorusState, steps: usize) -> Vec<ExtendedTorusState> {
    let hd = hyperbolic_data(a);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(*s0);
    for _ in 0..steps {
        let next = extended_step(a, &hd, out.last().unwrap());
        out.push(next);
    }
    out
}
