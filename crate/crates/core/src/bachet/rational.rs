//! Parsing and string serialization of exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serializer};

use crate::error::{Error, Result};

/// Parses `"p/q"`, an integer `"p"`, or a terminating decimal `"-1.25"`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let bad = || Error::ParseRational(s.to_string());
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let v = BigRational::new(n, scale);
        return Ok(if negative { -v } else { v });
    }
    Ok(BigRational::from_integer(t.parse().map_err(|_| bad())?))
}

/// Always `"p/q"` with `q > 0` in lowest terms (`q = 1` for integers).
pub fn format_rational(v: &BigRational) -> String {
    let d = if v.denom().is_one() { BigInt::one() } else { v.denom().clone() };
    format!("{}/{}", v.numer(), d)
}

/// `#[serde(with = "rational_serde")]` adapter.
pub mod rational_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(parse_rational("129/100").unwrap(), r(129, 100));
        assert_eq!(parse_rational("-6/4").unwrap(), r(-3, 2));
        assert_eq!(parse_rational(" 7 ").unwrap(), r(7, 1));
        assert_eq!(parse_rational("-1.25").unwrap(), r(-5, 4));
        for bad in ["1/0", "abc", "1.", "1/2/3", ""] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn format_round_trip() {
        for s in ["383/1000", "-2/1", "0/1", "2340922881/58675600"] {
            assert_eq!(format_rational(&parse_rational(s).unwrap()), s);
        }
    }
}
