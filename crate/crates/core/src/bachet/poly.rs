//! Dense univariate polynomials over `ℚ` and reduced rational maps.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Coefficients lowest degree first, without trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    c: Vec<BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Self { c: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    /// The monomial `x`.
    pub fn x() -> Self {
        Self::from_coeffs(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn constant(v: BigRational) -> Self {
        Self::from_coeffs(vec![v])
    }

    pub fn from_coeffs(c: Vec<BigRational>) -> Self {
        let mut p = Self { c };
        p.trim();
        p
    }

    pub fn from_i64(c: &[i64]) -> Self {
        Self::from_coeffs(c.iter().map(|&v| BigRational::from_integer(v.into())).collect())
    }

    fn trim(&mut self) {
        while self.c.last().is_some_and(Zero::is_zero) {
            self.c.pop();
        }
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.c
    }

    pub fn coeff(&self, k: usize) -> BigRational {
        self.c.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&BigRational> {
        self.c.last()
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        Self::from_coeffs(self.c.iter().map(|v| v * s).collect())
    }

    pub fn monic(&self) -> Self {
        match self.leading() {
            Some(l) => self.scale(&l.recip()),
            None => Self::zero(),
        }
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.c.iter().rev().fold(BigRational::zero(), |acc, v| acc * x + v)
    }

    /// Quotient and remainder; panics on division by zero.
    pub fn divrem(&self, d: &Poly) -> (Poly, Poly) {
        let dd = d.degree().expect("polynomial division by zero");
        let lead = d.c[dd].recip();
        let mut r = self.c.clone();
        let Some(nd) = self.degree().filter(|&n| n >= dd) else {
            return (Poly::zero(), self.clone());
        };
        let mut q = vec![BigRational::zero(); nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let f = &r[k + dd] * &lead;
            if f.is_zero() {
                continue;
            }
            for (j, dj) in d.c.iter().enumerate() {
                r[k + j] -= &f * dj;
            }
            q[k] = f;
        }
        r.truncate(dd);
        (Poly::from_coeffs(q), Poly::from_coeffs(r))
    }

    /// Exact quotient; `None` if the division leaves a remainder.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        let (q, r) = self.divrem(d);
        r.is_zero().then_some(q)
    }

    /// Monic greatest common divisor (zero if both inputs are zero).
    pub fn gcd(&self, other: &Poly) -> Poly {
        if self.is_zero() {
            return other.monic();
        }
        if other.is_zero() {
            return self.monic();
        }
        if coprime_mod_prime(self, other) {
            return Poly::one();
        }
        let (mut a, mut b) = (self.monic(), other.monic());
        while !b.is_zero() {
            let (_, r) = a.divrem(&b);
            a = b;
            b = r.monic();
        }
        a.monic()
    }

    /// `self(g(x))`.
    pub fn compose(&self, g: &Poly) -> Poly {
        self.c.iter().rev().fold(Poly::zero(), |acc, v| &(&acc * g) + &Poly::constant(v.clone()))
    }

    pub fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Poly::one(), |acc, _| &acc * self)
    }

    /// Largest `bits(numerator) + bits(denominator)` over the coefficients.
    pub fn max_bits(&self) -> u64 {
        self.c.iter().map(rational_bits).max().unwrap_or(0)
    }
}

pub fn rational_bits(v: &BigRational) -> u64 {
    v.numer().bits() + v.denom().bits()
}

const PRIMES: [u64; 3] = [2_305_843_009_213_693_951, 1_000_000_007, 998_244_353];

fn mod_poly(p: &Poly, m: u64) -> Option<Vec<u64>> {
    let lcm = p.c.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let modulus = BigInt::from(m);
    let out: Vec<u64> = p
        .c
        .iter()
        .map(|v| {
            let n = v.numer() * (&lcm / v.denom());
            n.mod_floor(&modulus).to_u64().expect("residue fits")
        })
        .collect();
    // A leading coefficient divisible by m would change the degree.
    (*out.last()? != 0).then_some(out)
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod(mut a: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a, m);
        }
        a = mulmod(a, a, m);
        e >>= 1;
    }
    r
}

fn gcd_degree_mod(mut a: Vec<u64>, mut b: Vec<u64>, m: u64) -> usize {
    let trim = |v: &mut Vec<u64>| {
        while v.last() == Some(&0) {
            v.pop();
        }
    };
    trim(&mut a);
    trim(&mut b);
    while !b.is_empty() {
        let inv = powmod(*b.last().unwrap(), m - 2, m);
        while a.len() >= b.len() {
            let f = mulmod(*a.last().unwrap(), inv, m);
            let shift = a.len() - b.len();
            for (j, &bj) in b.iter().enumerate() {
                a[shift + j] = (a[shift + j] + m - mulmod(f, bj, m)) % m;
            }
            trim(&mut a);
            if a.is_empty() {
                break;
            }
        }
        std::mem::swap(&mut a, &mut b);
    }
    a.len().saturating_sub(1)
}

/// Sufficient test for coprimality: a trivial gcd modulo a prime that keeps
/// both degrees certifies a trivial gcd over `ℚ`.
fn coprime_mod_prime(a: &Poly, b: &Poly) -> bool {
    PRIMES.iter().any(|&m| match (mod_poly(a, m), mod_poly(b, m)) {
        (Some(x), Some(y)) => gcd_degree_mod(x, y, m) == 0,
        _ => false,
    })
}

impl Add for &Poly {
    type Output = Poly;

    fn add(self, rhs: &Poly) -> Poly {
        let n = self.c.len().max(rhs.c.len());
        Poly::from_coeffs((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;

    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.c.len().max(rhs.c.len());
        Poly::from_coeffs((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;

    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![BigRational::zero(); self.c.len() + rhs.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.c.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::from_coeffs(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;

    fn neg(self) -> Poly {
        Poly::from_coeffs(self.c.iter().map(|v| -v).collect())
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, v) in self.c.iter().enumerate().rev() {
            if v.is_zero() {
                continue;
            }
            let sign = if v.is_negative() { "-" } else if first { "" } else { "+" };
            let mag = v.abs();
            let sep = if first { "" } else { " " };
            let body = match (k, mag.is_one()) {
                (0, _) => mag.to_string(),
                (1, true) => "x".to_string(),
                (1, false) => format!("{mag}*x"),
                (_, true) => format!("x^{k}"),
                (_, false) => format!("{mag}*x^{k}"),
            };
            if first {
                write!(f, "{sign}{body}")?;
            } else {
                write!(f, "{sep}{sign} {body}")?;
            }
            first = false;
        }
        Ok(())
    }
}

/// A one-variable rational map `num / den` in lowest terms with monic
/// denominator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalMap1D {
    num: Poly,
    den: Poly,
}

impl RationalMap1D {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidConfig("rational map with zero denominator".into()));
        }
        let g = num.gcd(&den);
        let (num, den) = if g.degree() == Some(0) {
            (num, den)
        } else {
            (num.exact_div(&g).expect("gcd divides"), den.exact_div(&g).expect("gcd divides"))
        };
        let lead = den.leading().expect("nonzero").recip();
        Ok(Self { num: num.scale(&lead), den: den.scale(&lead) })
    }

    pub fn identity() -> Self {
        Self { num: Poly::x(), den: Poly::one() }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    /// `max(deg num, deg den)`.
    pub fn degree(&self) -> usize {
        self.num.degree().unwrap_or(0).max(self.den.degree().unwrap_or(0))
    }

    /// `None` at a pole.
    pub fn eval(&self, x: &BigRational) -> Option<BigRational> {
        let d = self.den.eval(x);
        (!d.is_zero()).then(|| self.num.eval(x) / d)
    }

    pub fn max_bits(&self) -> u64 {
        self.num.max_bits().max(self.den.max_bits())
    }
}

impl fmt::Display for RationalMap1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

/// Default coefficient budget for compositions, in bits per coefficient.
pub const DEFAULT_COMPOSE_BUDGET: u64 = 1_000_000;

/// `f ∘ g`, reduced.
pub fn compose_maps(f: &RationalMap1D, g: &RationalMap1D) -> Result<RationalMap1D> {
    compose_maps_with_budget(f, g, DEFAULT_COMPOSE_BUDGET)
}

pub fn compose_maps_with_budget(f: &RationalMap1D, g: &RationalMap1D, budget: u64) -> Result<RationalMap1D> {
    // f(N/D) = Σ aₖ Nᵏ D^{d−k} / Σ bₖ Nᵏ D^{d−k}.
    let d = f.degree();
    let mut n_pow = vec![Poly::one()];
    let mut d_pow = vec![Poly::one()];
    for k in 1..=d {
        n_pow.push(&n_pow[k - 1] * &g.num);
        d_pow.push(&d_pow[k - 1] * &g.den);
    }
    let homogenize = |p: &Poly| {
        p.coeffs().iter().enumerate().fold(Poly::zero(), |acc, (k, a)| {
            if a.is_zero() {
                acc
            } else {
                &acc + &(&n_pow[k] * &d_pow[d - k]).scale(a)
            }
        })
    };
    let num = homogenize(&f.num);
    let den = homogenize(&f.den);
    let bits = num.max_bits().max(den.max_bits());
    if bits > budget {
        return Err(Error::BudgetExceeded { bits, budget });
    }
    RationalMap1D::new(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn division_with_remainder() {
        let a = Poly::from_i64(&[-1, 0, 0, 1]);
        let b = Poly::from_i64(&[-1, 1]);
        let (quo, r) = a.divrem(&b);
        assert_eq!(quo, Poly::from_i64(&[1, 1, 1]));
        assert!(r.is_zero());
        let (_, r) = Poly::from_i64(&[1, 0, 1]).divrem(&b);
        assert_eq!(r, Poly::from_i64(&[2]));
    }

    #[test]
    fn gcd_finds_common_factor() {
        let f = &Poly::from_i64(&[-1, 1]) * &Poly::from_i64(&[2, 0, 1]);
        let g = &Poly::from_i64(&[-1, 1]) * &Poly::from_i64(&[3, 1]);
        assert_eq!(f.gcd(&g), Poly::from_i64(&[-1, 1]));
        assert_eq!(Poly::from_i64(&[1, 1]).gcd(&Poly::from_i64(&[2, 1])), Poly::one());
    }

    #[test]
    fn map_normalization() {
        let m = RationalMap1D::new(Poly::from_i64(&[0, 2, 2]), Poly::from_i64(&[4, 4])).unwrap();
        assert_eq!(m.numerator(), &Poly::from_coeffs(vec![q(0, 1), q(1, 2)]));
        assert_eq!(m.denominator(), &Poly::one());
        assert!(RationalMap1D::new(Poly::one(), Poly::zero()).is_err());
    }

    #[test]
    fn composition_and_budget() {
        let sq = RationalMap1D::new(Poly::from_i64(&[0, 0, 1]), Poly::from_i64(&[1, 1])).unwrap();
        assert_eq!(compose_maps(&sq, &RationalMap1D::identity()).unwrap(), sq);
        assert_eq!(compose_maps(&RationalMap1D::identity(), &sq).unwrap(), sq);
        let c = compose_maps(&sq, &sq).unwrap();
        let x = q(3, 7);
        assert_eq!(c.eval(&x), sq.eval(&sq.eval(&x).unwrap()));
        assert!(matches!(compose_maps_with_budget(&sq, &sq, 1), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn display() {
        assert_eq!(Poly::from_i64(&[1, -2, 0, 1]).to_string(), "x^3 - 2*x + 1");
        assert_eq!(Poly::zero().to_string(), "0");
    }
}
