use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Positive rational number such as a fractional dilation (`1/4`) or a resize factor (`1/4`, `4`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rational(Ratio<u32>);

impl Rational {
    pub fn new(numer: u32, denom: u32) -> Result<Self, Error> {
        if numer == 0 || denom == 0 {
            return Err(Error::invalid(
                "rational",
                format!("{numer}/{denom} is not a positive rational"),
            ));
        }
        Ok(Self(Ratio::new(numer, denom)))
    }

    pub fn integer(v: u32) -> Self {
        Self::new(v, 1).expect("positive integer")
    }

    pub fn numer(&self) -> u32 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u32 {
        *self.0.denom()
    }

    pub fn recip(&self) -> Self {
        Self(self.0.recip())
    }

    pub fn is_integer(&self) -> bool {
        self.denom() == 1
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `floor(n · self)` in exact integer arithmetic.
    pub fn scale_floor(&self, n: usize) -> usize {
        n * self.numer() as usize / self.denom() as usize
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::invalid("rational", format!("cannot parse {s:?}"));
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => Rational::new(
                n.trim().parse().map_err(|_| bad())?,
                d.trim().parse().map_err(|_| bad())?,
            ),
            None => Rational::new(s.parse().map_err(|_| bad())?, 1),
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u32),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => Rational::new(v, 1).map_err(serde::de::Error::custom),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
