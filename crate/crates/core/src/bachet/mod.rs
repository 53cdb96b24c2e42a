//! The Bachet duplication map on `y² − x³ = c` in exact rational arithmetic,
//! the commuting family `B_n` from division polynomials, and rational-point
//! chains.

mod curve;
mod division;
mod poly;
mod rational;

pub use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

pub use curve::{Curve, CurvePoint};
pub use division::{division_poly_map, MAX_MULTIPLIER};
pub use poly::{compose_maps, compose_maps_with_budget, rational_bits, Poly, RationalMap1D, DEFAULT_COMPOSE_BUDGET};
pub use rational::{format_rational, parse_rational, rational_serde};

use crate::error::{Error, Result};

/// Default cap on the total bit length of a chain.
pub const DEFAULT_CHAIN_BUDGET: u64 = 1_000_000;

fn int(v: i64) -> BigRational {
    BigRational::from_integer(v.into())
}

/// `B(x) = (x⁴ − 8cx) / (4(x³ + c))`; `None` at a pole.
pub fn bachet_x(x: &BigRational, c: &BigRational) -> Option<BigRational> {
    let x3 = x * x * x;
    let den = int(4) * (&x3 + c);
    if den.is_zero() {
        return None;
    }
    Some((&x3 * x - int(8) * c * x) / den)
}

/// The Bachet map as a reduced rational function of `x`.
pub fn bachet_map(c: &BigRational) -> Result<RationalMap1D> {
    let num = Poly::from_coeffs(vec![int(0), int(-8) * c, int(0), int(0), int(1)]);
    let den = Poly::from_coeffs(vec![int(4) * c, int(0), int(0), int(4)]);
    RationalMap1D::new(num, den)
}

/// `(x, y) ↦ ((x⁴ − 8cx)/(4y²), (−x⁶ − 20cx³ + 8c²)/(8y³))`.
///
/// The `x`-coordinate is that of `[2]P`; the `y`-coordinate is the negative
/// of the tangent-doubling value, so the image is `−[2]P`.
pub fn bachet_point(p: &CurvePoint, curve: &Curve) -> CurvePoint {
    let CurvePoint::Affine { x, y } = p else {
        return CurvePoint::Infinity;
    };
    if y.is_zero() {
        return CurvePoint::Infinity;
    }
    let c = curve.c();
    let x3 = x * x * x;
    let y2 = y * y;
    let xn = (&x3 * x - int(8) * c * x) / (int(4) * &y2);
    let yn = (-(&x3 * &x3) - int(20) * c * &x3 + int(8) * c * c) / (int(8) * y2 * y);
    CurvePoint::Affine { x: xn, y: yn }
}

/// One chain element with its height data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub point: CurvePoint,
    /// Bit lengths of numerator and denominator of `x` (zero at infinity).
    pub x_num_bits: u64,
    pub x_den_bits: u64,
}

impl ChainEntry {
    fn new(point: CurvePoint) -> Self {
        let (x_num_bits, x_den_bits) = point
            .x()
            .map_or((0, 0), |x| (x.numer().bits(), x.denom().bits()));
        Self { point, x_num_bits, x_den_bits }
    }

    fn total_bits(&self) -> u64 {
        match &self.point {
            CurvePoint::Infinity => 0,
            CurvePoint::Affine { x, y } => rational_bits(x) + rational_bits(y),
        }
    }
}

/// A chain `P₀, B(P₀), B²(P₀), …` on one curve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BachetChain {
    pub curve: Curve,
    pub entries: Vec<ChainEntry>,
}

impl BachetChain {
    pub fn points(&self) -> impl Iterator<Item = &CurvePoint> {
        self.entries.iter().map(|e| &e.point)
    }

    /// Exact JSON with rationals as `"p/q"` strings.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain serializes")
    }
}

pub fn chain(p0: &CurvePoint, curve: &Curve, k: usize) -> Result<BachetChain> {
    chain_with_budget(p0, curve, k, DEFAULT_CHAIN_BUDGET)
}

/// `k` successive Bachet images of `p0`; fails once the chain's total bit
/// length exceeds `budget`.
pub fn chain_with_budget(p0: &CurvePoint, curve: &Curve, k: usize, budget: u64) -> Result<BachetChain> {
    if let CurvePoint::Affine { x, y } = p0 {
        if !curve.contains(x, y) {
            return Err(Error::NotOnCurve);
        }
    }
    let mut entries = vec![ChainEntry::new(p0.clone())];
    let mut bits = entries[0].total_bits();
    for _ in 0..k {
        let next = ChainEntry::new(bachet_point(&entries.last().unwrap().point, curve));
        bits += next.total_bits();
        if bits > budget {
            return Err(Error::BudgetExceeded { bits, budget });
        }
        entries.push(next);
    }
    Ok(BachetChain { curve: curve.clone(), entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn bachet_x_values() {
        let c = int(-2);
        assert_eq!(bachet_x(&int(3), &c), Some(q("129/100")));
        assert_eq!(bachet_x(&q("129/100"), &c), Some(q("2340922881/58675600")));
        assert_eq!(bachet_x(&int(0), &int(5)), Some(int(0)));
        assert_eq!(bachet_x(&int(-1), &int(1)), None);
    }

    #[test]
    fn first_step_sign() {
        let curve = Curve::from_i64(-2).unwrap();
        let p = curve.point(int(3), int(5)).unwrap();
        let b = bachet_point(&p, &curve);
        assert_eq!(b, curve.point(q("129/100"), q("383/1000")).unwrap());
        assert_eq!(curve.double(&p), b.neg());
    }

    #[test]
    fn torsion_and_infinity() {
        let curve = Curve::from_i64(-8).unwrap();
        let t = curve.point(int(2), int(0)).unwrap();
        let ch = chain(&t, &curve, 3).unwrap();
        assert!(ch.points().skip(1).all(CurvePoint::is_infinity));
        assert!(bachet_point(&CurvePoint::Infinity, &curve).is_infinity());
        assert!(matches!(Curve::from_i64(0), Err(Error::SingularCurve)));
    }

    #[test]
    fn b2_is_bachet() {
        for c in [-2, 1, 3] {
            let c = int(c);
            assert_eq!(division_poly_map(2, &c).unwrap(), bachet_map(&c).unwrap());
        }
    }

    #[test]
    fn chain_budget() {
        let curve = Curve::from_i64(-2).unwrap();
        let p = curve.point(int(3), int(5)).unwrap();
        assert!(matches!(chain_with_budget(&p, &curve, 5, 200), Err(Error::BudgetExceeded { .. })));
        assert!(matches!(chain(&curve.point(int(3), int(5)).unwrap(), &Curve::from_i64(1).unwrap(), 1), Err(Error::NotOnCurve)));
    }
}
