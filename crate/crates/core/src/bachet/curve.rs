//! Exact chord-tangent arithmetic on `y² = x³ + c`.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::rational::{rational_serde, parse_rational};
use crate::error::{Error, Result};

/// A rational point, or the point at infinity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurvePoint {
    Infinity,
    Affine {
        #[serde(with = "rational_serde")]
        x: BigRational,
        #[serde(with = "rational_serde")]
        y: BigRational,
    },
}

impl CurvePoint {
    pub fn x(&self) -> Option<&BigRational> {
        match self {
            CurvePoint::Affine { x, .. } => Some(x),
            CurvePoint::Infinity => None,
        }
    }

    pub fn y(&self) -> Option<&BigRational> {
        match self {
            CurvePoint::Affine { y, .. } => Some(y),
            CurvePoint::Infinity => None,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, CurvePoint::Infinity)
    }

    pub fn neg(&self) -> CurvePoint {
        match self {
            CurvePoint::Affine { x, y } => CurvePoint::Affine { x: x.clone(), y: -y },
            CurvePoint::Infinity => CurvePoint::Infinity,
        }
    }

    /// Same `x` and `|y|`.
    pub fn eq_up_to_sign(&self, other: &CurvePoint) -> bool {
        match (self, other) {
            (CurvePoint::Infinity, CurvePoint::Infinity) => true,
            (CurvePoint::Affine { x, y }, CurvePoint::Affine { x: x2, y: y2 }) => x == x2 && y.abs() == y2.abs(),
            _ => false,
        }
    }
}

/// The curve `y² = x³ + c` with `c ≠ 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CurveRepr", into = "CurveRepr")]
pub struct Curve {
    c: BigRational,
}

#[derive(Serialize, Deserialize)]
struct CurveRepr {
    #[serde(with = "rational_serde")]
    c: BigRational,
}

impl TryFrom<CurveRepr> for Curve {
    type Error = Error;

    fn try_from(r: CurveRepr) -> Result<Self> {
        Curve::new(r.c)
    }
}

impl From<Curve> for CurveRepr {
    fn from(c: Curve) -> Self {
        CurveRepr { c: c.c }
    }
}

impl Curve {
    pub fn new(c: BigRational) -> Result<Self> {
        if c.is_zero() {
            return Err(Error::SingularCurve);
        }
        Ok(Self { c })
    }

    pub fn from_i64(c: i64) -> Result<Self> {
        Self::new(BigRational::from_integer(c.into()))
    }

    pub fn c(&self) -> &BigRational {
        &self.c
    }

    pub fn contains(&self, x: &BigRational, y: &BigRational) -> bool {
        y * y == x * x * x + &self.c
    }

    pub fn point(&self, x: BigRational, y: BigRational) -> Result<CurvePoint> {
        if !self.contains(&x, &y) {
            return Err(Error::NotOnCurve);
        }
        Ok(CurvePoint::Affine { x, y })
    }

    pub fn point_from_strs(&self, x: &str, y: &str) -> Result<CurvePoint> {
        self.point(parse_rational(x)?, parse_rational(y)?)
    }

    /// Chord-tangent sum.
    pub fn add(&self, p: &CurvePoint, q: &CurvePoint) -> CurvePoint {
        match (p, q) {
            (CurvePoint::Infinity, _) => q.clone(),
            (_, CurvePoint::Infinity) => p.clone(),
            (CurvePoint::Affine { x: x1, y: y1 }, CurvePoint::Affine { x: x2, y: y2 }) => {
                if x1 == x2 {
                    if y1 == y2 {
                        return self.double(p);
                    }
                    return CurvePoint::Infinity;
                }
                let s = (y2 - y1) / (x2 - x1);
                let x3 = &s * &s - x1 - x2;
                let y3 = s * (x1 - &x3) - y1;
                CurvePoint::Affine { x: x3, y: y3 }
            }
        }
    }

    /// Tangent doubling `[2]P`.
    pub fn double(&self, p: &CurvePoint) -> CurvePoint {
        match p {
            CurvePoint::Infinity => CurvePoint::Infinity,
            CurvePoint::Affine { y, .. } if y.is_zero() => CurvePoint::Infinity,
            CurvePoint::Affine { x, y } => {
                let three = BigRational::from_integer(3.into());
                let two = BigRational::from_integer(2.into());
                let s = three * x * x / (two * y);
                let x2 = &s * &s - x - x;
                let y2 = s * (x - &x2) - y;
                CurvePoint::Affine { x: x2, y: y2 }
            }
        }
    }

    /// `[n]P` by double-and-add.
    pub fn multiply(&self, p: &CurvePoint, n: u64) -> CurvePoint {
        let mut acc = CurvePoint::Infinity;
        let mut base = p.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add(&acc, &base);
            }
            base = self.double(&base);
            k >>= 1;
        }
        acc
    }
}
