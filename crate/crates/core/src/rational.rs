//! Exact rational helpers on top of `num-rational`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

pub type Rational = num_rational::BigRational;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn from_uints(num: &BigUint, den: &BigUint) -> Rational {
    Rational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

pub fn to_f64(r: &Rational) -> f64 {
    // Both parts can overflow f64 on their own for long enumerations.
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            let shift = r.denom().bits().saturating_sub(60) as usize;
            let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

/// `"num/den"`, the on-disk form of every exact value.
pub fn to_fraction_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_fraction(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Rational::new(n, d))
            }
        }
        None => s.parse::<BigInt>().ok().map(Rational::from_integer),
    }
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub fn pow(r: &Rational, e: u32) -> Rational {
    num_traits::pow(r.clone(), e as usize)
}

pub fn serialize_fraction<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&to_fraction_string(r))
}

pub fn serialize_fractions<S: Serializer>(rs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    let strings: Vec<String> = rs.iter().map(to_fraction_string).collect();
    strings.serialize(s)
}

pub fn serialize_opt_fraction<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    r.as_ref().map(to_fraction_string).serialize(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_string_is_canonical() {
        assert_eq!(to_fraction_string(&ratio(6, 8)), "3/4");
        assert_eq!(to_fraction_string(&ratio(2, -4)), "-1/2");
        assert_eq!(parse_fraction(" 279/65536 "), Some(ratio(279, 65536)));
        assert_eq!(parse_fraction("3"), Some(ratio(3, 1)));
        assert_eq!(parse_fraction("1/0"), None);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), BigUint::from(20u32));
        assert_eq!(binomial(4, 5), BigUint::zero());
        assert_eq!(binomial_u128(32, 16), 601_080_390);
    }

    #[test]
    fn to_f64_survives_huge_parts() {
        let big = num_traits::pow(BigInt::from(10), 400);
        let r = Rational::new(big.clone() + 1, big * 4);
        assert!((to_f64(&r) - 0.25).abs() < 1e-15);
    }
}
