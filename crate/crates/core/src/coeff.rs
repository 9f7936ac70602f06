//! Exact scalars over ℚ and prime fields.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoeffError {
    #[error("field mismatch: {left} vs {right}")]
    FieldMismatch { left: FieldSpec, right: FieldSpec },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("prime {0} is too large (must be below 2^31)")]
    PrimeTooLarge(u64),
    #[error("cannot parse scalar `{0}`")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FieldSpec {
    Rationals,
    PrimeField(u32),
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl FieldSpec {
    pub fn prime(p: u64) -> Result<Self, CoeffError> {
        if p >= 1 << 31 {
            return Err(CoeffError::PrimeTooLarge(p));
        }
        if !is_prime(p) {
            return Err(CoeffError::NotPrime(p));
        }
        Ok(FieldSpec::PrimeField(p as u32))
    }

    pub fn characteristic(&self) -> u32 {
        match self {
            FieldSpec::Rationals => 0,
            FieldSpec::PrimeField(p) => *p,
        }
    }

    pub fn is_char_zero(&self) -> bool {
        matches!(self, FieldSpec::Rationals)
    }

    pub fn zero(&self) -> Scalar {
        self.from_i64(0)
    }

    pub fn one(&self) -> Scalar {
        self.from_i64(1)
    }

    /// `(-1)^k`.
    pub fn sign(&self, negative: bool) -> Scalar {
        if negative {
            self.from_i64(-1)
        } else {
            self.one()
        }
    }

    pub fn from_i64(&self, v: i64) -> Scalar {
        match *self {
            FieldSpec::Rationals => Scalar::Rational(BigRational::from_integer(BigInt::from(v))),
            FieldSpec::PrimeField(p) => Scalar::Residue {
                value: v.rem_euclid(p as i64) as u32,
                p,
            },
        }
    }

    pub fn from_ratio(&self, num: &BigInt, den: &BigInt) -> Result<Scalar, CoeffError> {
        if den.is_zero() {
            return Err(CoeffError::DivisionByZero);
        }
        match *self {
            FieldSpec::Rationals => Ok(Scalar::Rational(BigRational::new(num.clone(), den.clone()))),
            FieldSpec::PrimeField(p) => {
                let pb = BigInt::from(p);
                let reduce = |x: &BigInt| -> u32 {
                    let r = x % &pb;
                    let r = if r.is_negative() { r + &pb } else { r };
                    r.to_u32().unwrap()
                };
                let d = reduce(den);
                if d == 0 {
                    return Err(CoeffError::DivisionByZero);
                }
                let n = Scalar::Residue { value: reduce(num), p };
                let d = Scalar::Residue { value: d, p };
                n.try_mul(&d.inv()?)
            }
        }
    }

    /// Parses `3`, `-2/5`, `0` in this field.
    pub fn parse_scalar(&self, text: &str) -> Result<Scalar, CoeffError> {
        let t = text.trim();
        let bad = || CoeffError::Parse(text.to_string());
        let (num, den) = match t.split_once('/') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (t, "1"),
        };
        let num = BigInt::from_str(num).map_err(|_| bad())?;
        let den = BigInt::from_str(den).map_err(|_| bad())?;
        self.from_ratio(&num, &den)
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Rationals => write!(f, "Q"),
            FieldSpec::PrimeField(p) => write!(f, "Fp {p}"),
        }
    }
}

impl FromStr for FieldSpec {
    type Err = CoeffError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some("Q"), None, None) => Ok(FieldSpec::Rationals),
            (Some("Fp"), Some(p), None) => {
                let p: u64 = p.parse().map_err(|_| CoeffError::Parse(s.to_string()))?;
                FieldSpec::prime(p)
            }
            _ => Err(CoeffError::Parse(s.to_string())),
        }
    }
}

/// A field element. Rationals are kept reduced by `num-rational`; residues lie in `[0, p)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Scalar {
    Rational(BigRational),
    Residue { value: u32, p: u32 },
}

fn modpow(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

impl Scalar {
    pub fn field(&self) -> FieldSpec {
        match self {
            Scalar::Rational(_) => FieldSpec::Rationals,
            Scalar::Residue { p, .. } => FieldSpec::PrimeField(*p),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Rational(q) => q.is_zero(),
            Scalar::Residue { value, .. } => *value == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Rational(q) => q.is_one(),
            Scalar::Residue { value, .. } => *value == 1,
        }
    }

    fn check(&self, other: &Scalar) -> Result<(), CoeffError> {
        let (l, r) = (self.field(), other.field());
        if l != r {
            return Err(CoeffError::FieldMismatch { left: l, right: r });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Scalar) -> Result<Scalar, CoeffError> {
        self.check(other)?;
        Ok(match (self, other) {
            (Scalar::Rational(a), Scalar::Rational(b)) => Scalar::Rational(a + b),
            (Scalar::Residue { value: a, p }, Scalar::Residue { value: b, .. }) => Scalar::Residue {
                value: ((*a as u64 + *b as u64) % *p as u64) as u32,
                p: *p,
            },
            _ => unreachable!(),
        })
    }

    pub fn try_sub(&self, other: &Scalar) -> Result<Scalar, CoeffError> {
        self.try_add(&other.neg())
    }

    pub fn try_mul(&self, other: &Scalar) -> Result<Scalar, CoeffError> {
        self.check(other)?;
        Ok(match (self, other) {
            (Scalar::Rational(a), Scalar::Rational(b)) => Scalar::Rational(a * b),
            (Scalar::Residue { value: a, p }, Scalar::Residue { value: b, .. }) => Scalar::Residue {
                value: ((*a as u64 * *b as u64) % *p as u64) as u32,
                p: *p,
            },
            _ => unreachable!(),
        })
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Rational(a) => Scalar::Rational(-a),
            Scalar::Residue { value, p } => Scalar::Residue {
                value: if *value == 0 { 0 } else { p - value },
                p: *p,
            },
        }
    }

    pub fn inv(&self) -> Result<Scalar, CoeffError> {
        if self.is_zero() {
            return Err(CoeffError::DivisionByZero);
        }
        Ok(match self {
            Scalar::Rational(a) => Scalar::Rational(a.recip()),
            Scalar::Residue { value, p } => Scalar::Residue {
                value: modpow(*value as u64, *p as u64 - 2, *p as u64) as u32,
                p: *p,
            },
        })
    }

    pub fn try_div(&self, other: &Scalar) -> Result<Scalar, CoeffError> {
        self.try_mul(&other.inv()?)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Rational(q) => {
                if q.denom().is_one() {
                    write!(f, "{}", q.numer())
                } else {
                    write!(f, "{}/{}", q.numer(), q.denom())
                }
            }
            Scalar::Residue { value, .. } => write!(f, "{value}"),
        }
    }
}

// Operator forms panic on mixed fields; every value inside one computation shares a field.
macro_rules! binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl std::ops::$tr<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                self.$f(rhs).expect("scalar operands from different fields")
            }
        }
        impl std::ops::$tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                (&self).$f(&rhs).expect("scalar operands from different fields")
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

impl std::ops::Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::neg(self)
    }
}

impl std::ops::Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::neg(&self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_sum() {
        let q = FieldSpec::Rationals;
        let a = q.parse_scalar("1/2").unwrap();
        let b = q.parse_scalar("1/3").unwrap();
        assert_eq!((&a + &b).to_string(), "5/6");
    }

    #[test]
    fn residue_ops() {
        let f3 = FieldSpec::prime(3).unwrap();
        assert_eq!(f3.from_i64(2) + f3.from_i64(2), f3.one());
        let f5 = FieldSpec::prime(5).unwrap();
        assert_eq!(f5.from_i64(2).inv().unwrap(), f5.from_i64(3));
        assert_eq!(f5.zero().neg(), f5.zero());
        assert_eq!(f5.from_i64(-1), f5.from_i64(4));
    }

    #[test]
    fn errors() {
        let f5 = FieldSpec::prime(5).unwrap();
        assert_eq!(f5.zero().inv(), Err(CoeffError::DivisionByZero));
        assert!(matches!(
            f5.one().try_add(&FieldSpec::Rationals.one()),
            Err(CoeffError::FieldMismatch { .. })
        ));
        assert_eq!(FieldSpec::prime(4), Err(CoeffError::NotPrime(4)));
        assert!(FieldSpec::prime(2147483659).is_err());
    }

    #[test]
    fn parse_field() {
        assert_eq!("Q".parse::<FieldSpec>().unwrap(), FieldSpec::Rationals);
        assert_eq!("Fp 7".parse::<FieldSpec>().unwrap(), FieldSpec::PrimeField(7));
        assert!("Fp 8".parse::<FieldSpec>().is_err());
        assert_eq!(FieldSpec::PrimeField(7).to_string(), "Fp 7");
    }

    #[test]
    fn ratio_mod_p() {
        let f7 = FieldSpec::prime(7).unwrap();
        assert_eq!(f7.parse_scalar("1/2").unwrap(), f7.from_i64(4));
        assert!(f7.parse_scalar("1/7").is_err());
    }
}
