//! Exact token quantities.
//!
//! Token supplies routinely exceed 10^30 base units, so amounts are backed by
//! arbitrary-precision integers. Amounts serialize as decimal strings; the
//! parser also accepts integral scientific notation such as `"2.67e18"`.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AmountError {
    #[error("invalid amount literal {0:?}")]
    Invalid(String),
    #[error("amount literal {0:?} is not an integer")]
    Fractional(String),
    #[error("amount does not fit in 256 bits")]
    Overflow,
}

/// A non-negative integer quantity in base units.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(BigUint);

/// A signed quantity in base units, used for gains and net flows.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedAmount(BigInt);

impl Amount {
    pub fn zero() -> Self {
        Amount(BigUint::zero())
    }

    pub fn from_big(v: BigUint) -> Self {
        Amount(v)
    }

    pub fn as_big(&self) -> &BigUint {
        &self.0
    }

    pub fn into_big(self) -> BigUint {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `10^exp`, handy for decimals scaling.
    pub fn pow10(exp: u32) -> Self {
        Amount(BigUint::from(10u32).pow(exp))
    }

    pub fn checked_sub(&self, rhs: &Amount) -> Option<Amount> {
        if self.0 >= rhs.0 {
            Some(Amount(&self.0 - &rhs.0))
        } else {
            None
        }
    }

    pub fn saturating_sub(&self, rhs: &Amount) -> Amount {
        self.checked_sub(rhs).unwrap_or_default()
    }

    pub fn to_signed(&self) -> SignedAmount {
        SignedAmount(BigInt::from_biguint(Sign::Plus, self.0.clone()))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::INFINITY)
    }

    /// Big-endian 32-byte word, as used in ABI payloads.
    pub fn to_word(&self) -> Result<[u8; 32], AmountError> {
        let bytes = self.0.to_bytes_be();
        if bytes.len() > 32 {
            return Err(AmountError::Overflow);
        }
        let mut word = [0u8; 32];
        if !self.0.is_zero() {
            word[32 - bytes.len()..].copy_from_slice(&bytes);
        }
        Ok(word)
    }

    pub fn from_word(word: &[u8]) -> Self {
        Amount(BigUint::from_bytes_be(word))
    }

    /// Renders with a decimal point, trimming trailing zeros: `2670000000000000000`
    /// with 18 decimals prints as `2.67`.
    pub fn to_units_string(&self, decimals: u32) -> String {
        let digits = self.0.to_str_radix(10);
        let d = decimals as usize;
        if d == 0 {
            return digits;
        }
        let padded = if digits.len() <= d {
            format!("{}{}", "0".repeat(d + 1 - digits.len()), digits)
        } else {
            digits
        };
        let (int, frac) = padded.split_at(padded.len() - d);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            int.to_string()
        } else {
            format!("{int}.{frac}")
        }
    }
}

impl SignedAmount {
    pub fn zero() -> Self {
        SignedAmount(BigInt::zero())
    }

    pub fn from_big(v: BigInt) -> Self {
        SignedAmount(v)
    }

    pub fn as_big(&self) -> &BigInt {
        &self.0
    }

    pub fn is_positive(&self) -> bool {
        self.0.sign() == Sign::Plus
    }

    pub fn is_negative(&self) -> bool {
        self.0.sign() == Sign::Minus
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn magnitude(&self) -> Amount {
        Amount(self.0.magnitude().clone())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn to_units_string(&self, decimals: u32) -> String {
        let body = self.magnitude().to_units_string(decimals);
        if self.is_negative() {
            format!("-{body}")
        } else {
            body
        }
    }
}

/// Parses `"123"`, `"20e18"`, `"2.67e18"` or `"0x1f"`.
fn parse_integer_literal(s: &str) -> Result<BigInt, AmountError> {
    let t = s.trim().replace('_', "");
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest.to_string()),
        None => (false, t.clone()),
    };
    let invalid = || AmountError::Invalid(s.to_string());
    let value: BigUint = if let Some(hex) = body.strip_prefix("0x") {
        if hex.is_empty() {
            return Err(invalid());
        }
        BigUint::parse_bytes(hex.as_bytes(), 16).ok_or_else(invalid)?
    } else {
        let (mantissa, exp) = match body.split_once(['e', 'E']) {
            Some((m, e)) => (m, e.parse::<u32>().map_err(|_| invalid())?),
            None => (body.as_str(), 0),
        };
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(invalid());
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(invalid());
        }
        let frac_trimmed = frac_part.trim_end_matches('0');
        if frac_trimmed.len() as u32 > exp {
            return Err(AmountError::Fractional(s.to_string()));
        }
        let digits = format!("{int_part}{frac_trimmed}");
        let base = if digits.is_empty() {
            BigUint::zero()
        } else {
            BigUint::parse_bytes(digits.as_bytes(), 10).ok_or_else(invalid)?
        };
        base * BigUint::from(10u32).pow(exp - frac_trimmed.len() as u32)
    };
    Ok(if neg {
        -BigInt::from(value)
    } else {
        BigInt::from(value)
    })
}

impl FromStr for Amount {
    type Err = AmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v = parse_integer_literal(s)?;
        match v.to_biguint() {
            Some(u) => Ok(Amount(u)),
            None if v.is_zero() => Ok(Amount::zero()),
            None => Err(AmountError::Invalid(s.to_string())),
        }
    }
}

impl FromStr for SignedAmount {
    type Err = AmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_integer_literal(s).map(SignedAmount)
    }
}

macro_rules! from_prim {
    ($($t:ty),*) => {$(
        impl From<$t> for Amount {
            fn from(v: $t) -> Self {
                Amount(BigUint::from(v))
            }
        }
    )*};
}
from_prim!(u8, u16, u32, u64, u128);

impl From<i128> for SignedAmount {
    fn from(v: i128) -> Self {
        SignedAmount(BigInt::from(v))
    }
}

impl From<Amount> for SignedAmount {
    fn from(v: Amount) -> Self {
        v.to_signed()
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Amount({})", self.0)
    }
}

impl fmt::Display for SignedAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for SignedAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SignedAmount({})", self.0)
    }
}

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        Amount(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Amount> for &'a Amount {
    type Output = Amount;
    fn add(self, rhs: &Amount) -> Amount {
        Amount(&self.0 + &rhs.0)
    }
}

impl AddAssign<&Amount> for Amount {
    fn add_assign(&mut self, rhs: &Amount) {
        self.0 += &rhs.0;
    }
}

impl AddAssign for Amount {
    fn add_assign(&mut self, rhs: Amount) {
        self.0 += rhs.0;
    }
}

impl<'a> Mul<&'a Amount> for &'a Amount {
    type Output = Amount;
    fn mul(self, rhs: &Amount) -> Amount {
        Amount(&self.0 * &rhs.0)
    }
}

impl Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Self {
        iter.fold(Amount::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Amount> for Amount {
    fn sum<I: Iterator<Item = &'a Amount>>(iter: I) -> Self {
        let mut acc = Amount::zero();
        for x in iter {
            acc += x;
        }
        acc
    }
}

impl Add for SignedAmount {
    type Output = SignedAmount;
    fn add(self, rhs: SignedAmount) -> SignedAmount {
        SignedAmount(self.0 + rhs.0)
    }
}

impl Sub for SignedAmount {
    type Output = SignedAmount;
    fn sub(self, rhs: SignedAmount) -> SignedAmount {
        SignedAmount(self.0 - rhs.0)
    }
}

impl Add<&Amount> for SignedAmount {
    type Output = SignedAmount;
    fn add(self, rhs: &Amount) -> SignedAmount {
        SignedAmount(self.0 + BigInt::from(rhs.0.clone()))
    }
}

impl Sub<&Amount> for SignedAmount {
    type Output = SignedAmount;
    fn sub(self, rhs: &Amount) -> SignedAmount {
        SignedAmount(self.0 - BigInt::from(rhs.0.clone()))
    }
}

impl AddAssign<&Amount> for SignedAmount {
    fn add_assign(&mut self, rhs: &Amount) {
        self.0 += BigInt::from(rhs.0.clone());
    }
}

impl Neg for SignedAmount {
    type Output = SignedAmount;
    fn neg(self) -> SignedAmount {
        SignedAmount(-self.0)
    }
}

impl Sum for SignedAmount {
    fn sum<I: Iterator<Item = SignedAmount>>(iter: I) -> Self {
        iter.fold(SignedAmount::zero(), |acc, x| acc + x)
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl Serialize for SignedAmount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

struct LiteralVisitor;

impl<'de> de::Visitor<'de> for LiteralVisitor {
    type Value = BigInt;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("an integer or an integer literal string")
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<BigInt, E> {
        Ok(BigInt::from(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<BigInt, E> {
        Ok(BigInt::from(v))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<BigInt, E> {
        parse_integer_literal(v).map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = d.deserialize_any(LiteralVisitor)?;
        v.to_biguint()
            .map(Amount)
            .ok_or_else(|| de::Error::custom("amount must be non-negative"))
    }
}

impl<'de> Deserialize<'de> for SignedAmount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(LiteralVisitor).map(SignedAmount)
    }
}
