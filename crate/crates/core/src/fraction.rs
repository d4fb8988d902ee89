//! Storage fractions such as `1/4` or `2/3`.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{param, Error, Result};

/// Non-negative rational number kept in lowest terms.
///
/// Serialized as the string `"a/b"` (or `"a"` when the denominator is 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(Ratio<u64>);

impl Fraction {
    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 {
            return Err(param("fraction with zero denominator"));
        }
        Ok(Fraction(Ratio::new(numer, denom)))
    }

    pub fn zero() -> Self {
        Fraction(Ratio::new(0, 1))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.numer() == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `self * k` when that is an integer.
    pub fn times_int(&self, k: u64) -> Option<u64> {
        let v = Ratio::from_integer(k) * self.0;
        v.is_integer().then(|| v.to_integer())
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }
}

impl From<Ratio<u64>> for Fraction {
    fn from(r: Ratio<u64>) -> Self {
        Fraction(r)
    }
}

impl std::ops::Add for Fraction {
    type Output = Fraction;
    fn add(self, rhs: Fraction) -> Fraction {
        Fraction(self.0 + rhs.0)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let n: u64 = n.parse().map_err(|_| param(format!("bad fraction {s:?}")))?;
        let d: u64 = d.parse().map_err(|_| param(format!("bad fraction {s:?}")))?;
        Fraction::new(n, d)
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand used throughout tests and examples. Panics on a zero denominator.
pub fn frac(numer: u64, denom: u64) -> Fraction {
    Fraction::new(numer, denom).expect("nonzero denominator")
}
