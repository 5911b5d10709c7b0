//! Exact arithmetic in the quadratic field Q(√2).
//!
//! Every length, area and ledger amount in this crate is a [`Scalar`]:
//! a value `a + b·√2` with arbitrary-precision rational coefficients.
//! Arithmetic never rounds, and comparisons are decided algebraically,
//! so every packing invariant can be checked with zero tolerance.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

/// Exact number of the form `a + b·√2` with rational `a`, `b`.
#[derive(Clone, PartialEq, Eq)]
pub struct Scalar {
    a: BigRational,
    b: BigRational,
}

impl Scalar {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        Scalar { a, b }
    }

    pub fn zero() -> Self {
        Scalar::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::new(BigRational::one(), BigRational::zero())
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::new(BigRational::from_integer(n.into()), BigRational::zero())
    }

    /// Exact rational `n/d`. Panics if `d == 0`.
    pub fn ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        Scalar::new(
            BigRational::new(n.into(), d.into()),
            BigRational::zero(),
        )
    }

    /// `√2` itself.
    pub fn sqrt2() -> Self {
        Scalar::new(BigRational::zero(), BigRational::one())
    }

    /// Exact `2^k` for any integer `k` (negative exponents give fractions).
    pub fn pow2(k: i32) -> Self {
        Scalar::new(rational_pow2(k), BigRational::zero())
    }

    /// Exact `√2^k` for any integer `k`.
    ///
    /// Even exponents are rational (`2^(k/2)`); odd exponents carry a √2.
    pub fn sqrt2_pow(k: i32) -> Self {
        let m = k.div_euclid(2);
        if k.rem_euclid(2) == 0 {
            Scalar::new(rational_pow2(m), BigRational::zero())
        } else {
            Scalar::new(BigRational::zero(), rational_pow2(m))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.sign() == Ordering::Greater
    }

    pub fn is_negative(&self) -> bool {
        self.sign() == Ordering::Less
    }

    /// True when the √2 coefficient vanishes.
    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Rational part `a` (the full value when `is_rational`).
    pub fn rational_part(&self) -> &BigRational {
        &self.a
    }

    /// Coefficient of √2.
    pub fn sqrt2_part(&self) -> &BigRational {
        &self.b
    }

    /// Sign of `a + b√2`, decided exactly.
    ///
    /// With mixed signs of `a` and `b` the comparison reduces to `a²` vs
    /// `2b²`, which is a rational comparison.
    pub fn sign(&self) -> Ordering {
        let sa = rational_sign(&self.a);
        let sb = rational_sign(&self.b);
        match (sa, sb) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (Ordering::Greater, Ordering::Greater) => Ordering::Greater,
            (Ordering::Less, Ordering::Less) => Ordering::Less,
            (Ordering::Greater, Ordering::Less) | (Ordering::Less, Ordering::Greater) => {
                // a and -b√2 (or -a and b√2) are both positive here.
                let a2 = &self.a * &self.a;
                let b2 = &self.b * &self.b * BigRational::from_integer(2.into());
                match (a2.cmp(&b2), sa) {
                    (Ordering::Greater, s) => s,
                    (Ordering::Less, s) => s.reverse(),
                    (Ordering::Equal, _) => Ordering::Equal,
                }
            }
        }
    }

    pub fn square(&self) -> Scalar {
        self * self
    }

    pub fn min(self, other: Scalar) -> Scalar {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Scalar) -> Scalar {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Nearest `f64`, for rendering only. Never feeds back into geometry.
    pub fn to_f64(&self) -> f64 {
        self.a.to_f64().unwrap_or(f64::NAN)
            + self.b.to_f64().unwrap_or(f64::NAN) * std::f64::consts::SQRT_2
    }
}

fn rational_sign(r: &BigRational) -> Ordering {
    if r.is_zero() {
        Ordering::Equal
    } else if r.is_positive() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

fn rational_pow2(k: i32) -> BigRational {
    let one = BigInt::one();
    if k >= 0 {
        BigRational::from_integer(one << k as usize)
    } else {
        BigRational::new(one.clone(), one << (-k) as usize)
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.a == other.a && self.b == other.b {
            return Ordering::Equal;
        }
        (self - other).sign()
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
        impl $trait<Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Add<&Scalar> for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        Scalar::new(&self.a + &rhs.a, &self.b + &rhs.b)
    }
}

impl Sub<&Scalar> for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        Scalar::new(&self.a - &rhs.a, &self.b - &rhs.b)
    }
}

impl Mul<&Scalar> for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        // (a1 + b1√2)(a2 + b2√2) = a1a2 + 2b1b2 + (a1b2 + a2b1)√2
        let two = BigRational::from_integer(2.into());
        Scalar::new(
            &self.a * &rhs.a + two * &self.b * &rhs.b,
            &self.a * &rhs.b + &self.b * &rhs.a,
        )
    }
}

impl Div<&Scalar> for &Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        // Multiply by the conjugate: 1/(c + d√2) = (c - d√2)/(c² - 2d²).
        assert!(!rhs.is_zero(), "division by zero Scalar");
        let two = BigRational::from_integer(2.into());
        let norm = &rhs.a * &rhs.a - two * &rhs.b * &rhs.b;
        if norm.is_zero() {
            // c² = 2d² with (c, d) ≠ 0 would make √2 rational.
            unreachable!("nonzero Scalar with zero field norm");
        }
        let num = self * &Scalar::new(rhs.a.clone(), -rhs.b.clone());
        Scalar::new(num.a / &norm, num.b / &norm)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::new(-self.a, -self.b)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::new(-self.a.clone(), -self.b.clone())
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        self.a += &rhs.a;
        self.b += &rhs.b;
    }
}

impl AddAssign for Scalar {
    fn add_assign(&mut self, rhs: Scalar) {
        *self += &rhs;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        self.a -= &rhs.a;
        self.b -= &rhs.b;
    }
}

impl SubAssign for Scalar {
    fn sub_assign(&mut self, rhs: Scalar) {
        *self -= &rhs;
    }
}

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |mut acc, x| {
            acc += &x;
            acc
        })
    }
}

/// Textual form: `p/q` for rationals, `p/q+r/s*sqrt2` otherwise.
/// Integer denominators of 1 are omitted. Parsing is exact.
impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            return write!(f, "{}", self.a);
        }
        if self.b.is_negative() {
            write!(f, "{}-{}*sqrt2", self.a, -&self.b)
        } else {
            write!(f, "{}+{}*sqrt2", self.a, self.b)
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (~{})", self, self.to_f64())
    }
}

/// Error from parsing a [`Scalar`] text form.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid scalar `{input}`: {reason}")]
pub struct ParseScalarError {
    pub input: String,
    pub reason: String,
}

impl FromStr for Scalar {
    type Err = ParseScalarError;

    /// Accepts integers (`3`), fractions (`11/32`), exact decimals
    /// (`0.51`), a √2 multiple (`1/2*sqrt2`, `sqrt2`), and sums or
    /// differences of a rational and a √2 term.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ParseScalarError {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err("empty"));
        }
        // Split into at most two signed terms.
        let mut terms: Vec<(bool, &str)> = Vec::new();
        let bytes = compact.as_bytes();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if (c == '+' || c == '-') && i > start {
                terms.push((false, &compact[start..i]));
                start = i;
            }
            i += 1;
        }
        terms.push((false, &compact[start..]));
        if terms.len() > 2 {
            return Err(err("too many terms"));
        }
        let mut a = BigRational::zero();
        let mut b = BigRational::zero();
        let mut seen_rat = false;
        let mut seen_irr = false;
        for (_, raw) in terms {
            let (neg, body) = match raw.strip_prefix('-') {
                Some(rest) => (true, rest),
                None => (false, raw.strip_prefix('+').unwrap_or(raw)),
            };
            let (is_sqrt2, num_part) = match body.strip_suffix("*sqrt2") {
                Some(n) => (true, n),
                None if body == "sqrt2" => (true, "1"),
                None => (false, body),
            };
            let mut value = parse_rational(num_part).ok_or_else(|| err("bad rational"))?;
            if neg {
                value = -value;
            }
            if is_sqrt2 {
                if seen_irr {
                    return Err(err("duplicate sqrt2 term"));
                }
                seen_irr = true;
                b = value;
            } else {
                if seen_rat {
                    return Err(err("duplicate rational term"));
                }
                seen_rat = true;
                a = value;
            }
        }
        Ok(Scalar::new(a, b))
    }
}

fn parse_rational(s: &str) -> Option<BigRational> {
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.parse().ok()?;
        let d: BigInt = d.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let whole_int: BigInt = if whole.is_empty() {
            BigInt::zero()
        } else {
            whole.parse().ok()?
        };
        let frac_int: BigInt = frac.parse().ok()?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        return Some(
            BigRational::from_integer(whole_int)
                + BigRational::new(frac_int, scale),
        );
    }
    let n: BigInt = s.parse().ok()?;
    Some(BigRational::from_integer(n))
}

impl serde::Serialize for Scalar {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Scalar {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Scalar {
        Scalar::ratio(n, d)
    }

    #[test]
    fn cmp_examples() {
        assert_eq!(r(1, 2).cmp(&r(1, 2)), Ordering::Equal);
        assert_eq!(Scalar::sqrt2().cmp(&r(3, 2)), Ordering::Less);
        assert_eq!(r(7, 5).cmp(&Scalar::sqrt2()), Ordering::Less);
        assert_eq!(Scalar::sqrt2().cmp(&r(7, 5)), Ordering::Greater);
        assert_eq!(Scalar::sqrt2().cmp(&Scalar::sqrt2()), Ordering::Equal);
    }

    #[test]
    fn sign_mixed_cases() {
        // 3/2 - sqrt2 > 0 since 9/4 > 2
        let x = r(3, 2) - Scalar::sqrt2();
        assert!(x.is_positive());
        // 7/5 - sqrt2 < 0 since 49/25 < 2
        let y = r(7, 5) - Scalar::sqrt2();
        assert!(y.is_negative());
        // sqrt2 - 1 > 0
        assert!((Scalar::sqrt2() - Scalar::one()).is_positive());
        assert!((r(-3, 2) + Scalar::sqrt2()).is_negative());
    }

    #[test]
    fn sqrt2_pow_values() {
        assert_eq!(Scalar::sqrt2_pow(0), Scalar::one());
        assert_eq!(Scalar::sqrt2_pow(2), Scalar::from_int(2));
        assert_eq!(Scalar::sqrt2_pow(1), Scalar::sqrt2());
        assert_eq!(Scalar::sqrt2_pow(-2), r(1, 2));
        assert_eq!(Scalar::sqrt2_pow(-1), Scalar::sqrt2() / Scalar::from_int(2));
        assert_eq!(
            Scalar::sqrt2_pow(5),
            Scalar::from_int(4) * Scalar::sqrt2()
        );
        // sqrt2^k * sqrt2^k == 2^k
        for k in -6..=6 {
            assert_eq!(
                Scalar::sqrt2_pow(k).square(),
                Scalar::pow2(k),
                "k={k}"
            );
        }
    }

    #[test]
    fn parse_and_display_round_trip() {
        for text in [
            "11/32",
            "0",
            "1",
            "-3/7",
            "1/2+1/2*sqrt2",
            "1/2-1/2*sqrt2",
            "sqrt2",
            "-sqrt2",
            "3*sqrt2",
            "0.51",
            "2.125",
        ] {
            let v: Scalar = text.parse().unwrap();
            let back: Scalar = v.to_string().parse().unwrap();
            assert_eq!(v, back, "round trip of {text}");
        }
        assert_eq!("0.51".parse::<Scalar>().unwrap(), r(51, 100));
        assert_eq!(".5".parse::<Scalar>().unwrap(), r(1, 2));
        assert!("".parse::<Scalar>().is_err());
        assert!("1/0".parse::<Scalar>().is_err());
        assert!("nope".parse::<Scalar>().is_err());
        assert!("1+2".parse::<Scalar>().is_err());
        assert!("sqrt2+sqrt2".parse::<Scalar>().is_err());
    }

    fn arb_rational() -> impl Strategy<Value = BigRational> {
        (-2000i64..2000, 1i64..60).prop_map(|(n, d)| BigRational::new(n.into(), d.into()))
    }

    fn arb_scalar() -> impl Strategy<Value = Scalar> {
        (arb_rational(), arb_rational()).prop_map(|(a, b)| Scalar::new(a, b))
    }

    proptest! {
        #[test]
        fn field_laws(u in arb_scalar(), v in arb_scalar()) {
            prop_assert_eq!((&u + &v) - &v, u.clone());
            if !v.is_zero() {
                prop_assert_eq!((&u * &v) / &v, u.clone());
            }
        }

        #[test]
        fn order_is_consistent_with_f64(u in arb_scalar(), v in arb_scalar()) {
            let (fu, fv) = (u.to_f64(), v.to_f64());
            if (fu - fv).abs() > 1e-6 {
                prop_assert_eq!(u < v, fu < fv);
            }
        }

        #[test]
        fn display_round_trips(u in arb_scalar()) {
            let back: Scalar = u.to_string().parse().unwrap();
            prop_assert_eq!(u, back);
        }
    }
}
