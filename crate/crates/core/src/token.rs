// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Exact non-negative token amounts.

use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec::{Canonical, CodecError, Reader, Writer};

/// A non-negative exact rational amount of tokens.
///
/// Balances never go through floating point: shares are `f64`, but the product
/// `amount × share` converts the share to its exact binary rational first.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Token(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenError {
    #[error("token amounts cannot be negative: {0}")]
    Negative(String),
    #[error("cannot parse token amount `{0}`")]
    Parse(String),
    #[error("share {0} is not a finite value in [0, 1]")]
    Share(String),
}

impl Token {
    pub fn zero() -> Self {
        Token(BigRational::zero())
    }

    pub fn from_integer(v: u64) -> Self {
        Token(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_ratio(numer: u64, denom: u64) -> Self {
        assert!(denom != 0, "zero denominator");
        Token(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_rational(r: BigRational) -> Result<Self, TokenError> {
        if r.is_negative() {
            return Err(TokenError::Negative(r.to_string()));
        }
        Ok(Token(r))
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_sub(&self, other: &Token) -> Option<Token> {
        let d = &self.0 - &other.0;
        (!d.is_negative()).then_some(Token(d))
    }

    /// `self × share` with the share converted exactly to a rational.
    pub fn mul_share(&self, share: f64) -> Result<Token, TokenError> {
        if !share.is_finite() || !(0.0..=1.0).contains(&share) {
            return Err(TokenError::Share(share.to_string()));
        }
        let exact = BigRational::from_float(share).ok_or_else(|| TokenError::Share(share.to_string()))?;
        Ok(Token(&self.0 * exact))
    }

    /// `self × numer / denom`, exact.
    pub fn mul_ratio(&self, ratio: &BigRational) -> Result<Token, TokenError> {
        Token::from_rational(&self.0 * ratio)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal rendering rounded toward zero to `digits` fractional digits.
    pub fn to_decimal(&self, digits: u32) -> String {
        let scale = BigInt::from(10u32).pow(digits);
        let scaled = (&self.0 * BigRational::from_integer(scale.clone())).trunc().to_integer();
        let int = &scaled / &scale;
        let frac = &scaled % &scale;
        if digits == 0 {
            return int.to_string();
        }
        format!("{int}.{:0>width$}", frac.to_string(), width = digits as usize)
    }
}

impl fmt::Display for Token {
    /// Exact form: `n` for integers, `n/d` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Token({self})")
    }
}

impl FromStr for Token {
    type Err = TokenError;

    /// Accepts integers (`12`), decimals (`12.5`) and fractions (`25/2`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || TokenError::Parse(s.to_string());
        let value = if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            BigRational::new(n, d)
        } else if let Some((i, frac)) = t.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let i_part = if i.is_empty() { "0" } else { i };
            if !i_part.trim_start_matches(['-', '+']).bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let digits: BigInt = format!("{i_part}{frac}").parse().map_err(|_| err())?;
            BigRational::new(digits, BigInt::from(10u32).pow(frac.len() as u32))
        } else {
            BigRational::from_integer(t.parse::<BigInt>().map_err(|_| err())?)
        };
        Token::from_rational(value)
    }
}

impl Add for Token {
    type Output = Token;

    fn add(self, rhs: Token) -> Token {
        Token(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Token> for &'a Token {
    type Output = Token;

    fn add(self, rhs: &'a Token) -> Token {
        Token(&self.0 + &rhs.0)
    }
}

impl std::ops::AddAssign<&Token> for Token {
    fn add_assign(&mut self, rhs: &Token) {
        self.0 += &rhs.0;
    }
}

impl Sum for Token {
    fn sum<I: Iterator<Item = Token>>(iter: I) -> Token {
        iter.fold(Token::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Token> for Token {
    fn sum<I: Iterator<Item = &'a Token>>(iter: I) -> Token {
        iter.fold(Token::zero(), |mut a, b| {
            a += b;
            a
        })
    }
}

impl Serialize for Token {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Token::from_integer(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn put_bigint(w: &mut Writer, v: &BigInt) {
    let (sign, mag) = v.to_bytes_be();
    w.put_u8(match sign {
        Sign::Minus => 2,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    });
    w.put_bytes(if sign == Sign::NoSign { &[] } else { &mag });
}

fn get_bigint(r: &mut Reader<'_>) -> Result<BigInt, CodecError> {
    let sign = match r.get_u8()? {
        0 => Sign::NoSign,
        1 => Sign::Plus,
        2 => Sign::Minus,
        tag => return Err(CodecError::InvalidTag { what: "bigint sign", tag }),
    };
    let mag = r.get_bytes()?;
    let canonical = match sign {
        Sign::NoSign => mag.is_empty(),
        _ => !mag.is_empty() && mag[0] != 0,
    };
    if !canonical {
        return Err(CodecError::Invalid("non-canonical integer".into()));
    }
    Ok(BigInt::from_bytes_be(sign, &mag))
}

/// Encoded as reduced numerator then positive denominator.
impl Canonical for Token {
    fn encode_into(&self, w: &mut Writer) {
        put_bigint(w, self.0.numer());
        put_bigint(w, self.0.denom());
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let n = get_bigint(r)?;
        let d = get_bigint(r)?;
        if !d.is_positive() {
            return Err(CodecError::Invalid("denominator must be positive".into()));
        }
        let raw = BigRational::new_raw(n, d);
        let reduced = raw.reduced();
        if reduced.numer() != raw.numer() || reduced.denom() != raw.denom() {
            return Err(CodecError::Invalid("fraction not in lowest terms".into()));
        }
        Token::from_rational(raw).map_err(|e| CodecError::Invalid(e.to_string()))
    }
}
