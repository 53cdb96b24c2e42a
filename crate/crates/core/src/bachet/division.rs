//! Division polynomials of `y² = x³ + c` and the multiplication-by-`n` maps
//! on the `x`-line.

use num_rational::BigRational;
use num_traits::Zero;

use super::poly::{Poly, RationalMap1D};
use crate::error::{Error, Result};

/// Largest supported `n` for [`division_poly_map`].
pub const MAX_MULTIPLIER: u32 = 6;

/// `y^e · p(x)` with `e ∈ {0, 1}` after the reduction `y² → x³ + c`.
#[derive(Debug, Clone, PartialEq)]
struct YPoly {
    y: u32,
    p: Poly,
}

struct Reducer {
    /// `x³ + c`.
    rhs: Poly,
}

impl Reducer {
    fn new(c: &BigRational) -> Self {
        let mut coeffs = vec![BigRational::zero(); 4];
        coeffs[0] = c.clone();
        coeffs[3] = BigRational::from_integer(1.into());
        Self { rhs: Poly::from_coeffs(coeffs) }
    }

    fn normalize(&self, y: u32, p: Poly) -> YPoly {
        let p = if y >= 2 { &p * &self.rhs.pow(y / 2) } else { p };
        YPoly { y: y % 2, p }
    }

    fn mul(&self, a: &YPoly, b: &YPoly) -> YPoly {
        self.normalize(a.y + b.y, &a.p * &b.p)
    }

    fn sub(&self, a: &YPoly, b: &YPoly) -> YPoly {
        assert_eq!(a.y, b.y, "mixed y-parity in division polynomial recurrence");
        YPoly { y: a.y, p: &a.p - &b.p }
    }

    /// Exact division by `2y`.
    fn div_2y(&self, a: &YPoly) -> YPoly {
        let half = BigRational::new(1.into(), 2.into());
        if a.y == 1 {
            YPoly { y: 0, p: a.p.scale(&half) }
        } else {
            let q = a.p.exact_div(&self.rhs).expect("recurrence term divisible by x^3 + c");
            YPoly { y: 1, p: q.scale(&half) }
        }
    }
}

fn ints(c: &[i64]) -> Poly {
    Poly::from_i64(c)
}

/// `ψ₀, …, ψ_max` for `y² = x³ + c`.
fn division_polynomials(c: &BigRational, max: usize) -> Vec<YPoly> {
    let red = Reducer::new(c);
    let k = |v: i64| BigRational::from_integer(v.into()) * c;
    let c2 = c * c;
    let mut psi = vec![
        YPoly { y: 0, p: Poly::zero() },
        YPoly { y: 0, p: Poly::one() },
        YPoly { y: 1, p: ints(&[2]) },
        // 3x⁴ + 12cx
        YPoly { y: 0, p: Poly::from_coeffs(vec![BigRational::zero(), k(12), BigRational::zero(), BigRational::zero(), BigRational::from_integer(3.into())]) },
        // 4y(x⁶ + 20cx³ − 8c²)
        YPoly {
            y: 1,
            p: Poly::from_coeffs(vec![
                BigRational::from_integer((-32).into()) * &c2,
                BigRational::zero(),
                BigRational::zero(),
                k(80),
                BigRational::zero(),
                BigRational::zero(),
                BigRational::from_integer(4.into()),
            ]),
        },
    ];
    for n in 5..=max {
        let m = n / 2;
        let next = if n % 2 == 1 {
            // ψ_{2m+1} = ψ_{m+2} ψ_m³ − ψ_{m−1} ψ_{m+1}³
            let a = red.mul(&psi[m + 2], &red.mul(&psi[m], &red.mul(&psi[m], &psi[m])));
            let b = red.mul(&psi[m - 1], &red.mul(&psi[m + 1], &red.mul(&psi[m + 1], &psi[m + 1])));
            red.sub(&a, &b)
        } else {
            // ψ_{2m} = ψ_m / (2y) · (ψ_{m+2} ψ_{m−1}² − ψ_{m−2} ψ_{m+1}²)
            let a = red.mul(&psi[m + 2], &red.mul(&psi[m - 1], &psi[m - 1]));
            let b = red.mul(&psi[m - 2], &red.mul(&psi[m + 1], &psi[m + 1]));
            red.mul(&psi[m], &red.div_2y(&red.sub(&a, &b)))
        };
        psi.push(next);
    }
    psi.truncate(max + 1);
    psi
}

/// `B_n(x) = x − ψ_{n−1}ψ_{n+1} / ψ_n²`, the `x`-coordinate of `[n]P`.
pub fn division_poly_map(n: u32, c: &BigRational) -> Result<RationalMap1D> {
    if !(2..=MAX_MULTIPLIER).contains(&n) {
        return Err(Error::UnsupportedDegree(n));
    }
    if c.is_zero() {
        return Err(Error::SingularCurve);
    }
    let n = n as usize;
    let red = Reducer::new(c);
    let psi = division_polynomials(c, n + 1);
    let sq = red.mul(&psi[n], &psi[n]);
    let cross = red.mul(&psi[n - 1], &psi[n + 1]);
    debug_assert!(sq.y == 0 && cross.y == 0);
    let num = &(&Poly::x() * &sq.p) - &cross.p;
    RationalMap1D::new(num, sq.p)
}
