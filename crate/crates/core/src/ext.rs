//! Extended reals `ℝ ∪ {+∞}`.
//!
//! There is no `-∞` member. Anything that would produce it (a negative
//! multiple of `+∞`, NaN input) is an error.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

pub use ExtReal::{Finite, PosInf};

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Converts an `f64`; `+inf` maps to [`ExtReal::PosInf`], while NaN and
    /// `-inf` are rejected.
    pub fn from_f64(x: f64) -> Result<Self> {
        if x.is_nan() {
            Err(Error::NegativeInfinity("NaN is not an extended real"))
        } else if x == f64::INFINITY {
            Ok(PosInf)
        } else if x == f64::NEG_INFINITY {
            Err(Error::NegativeInfinity("conversion from f64"))
        } else {
            Ok(Finite(x))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, PosInf)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Finite(x) => Some(x),
            PosInf => None,
        }
    }

    /// `+∞` becomes `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            Finite(x) => x,
            PosInf => f64::INFINITY,
        }
    }

    /// Scalar multiple with the convex-analysis convention `0·(+∞) = 0`.
    pub fn scale(self, c: f64) -> Result<Self> {
        match self {
            Finite(x) => Ok(Finite(c * x)),
            PosInf if c > 0.0 => Ok(PosInf),
            PosInf if c == 0.0 => Ok(Finite(0.0)),
            PosInf => Err(Error::NegativeInfinity("negative multiple of +inf")),
        }
    }

    /// `self - c` for a finite `c`; saturates at `+∞`.
    pub fn sub_finite(self, c: f64) -> Self {
        match self {
            Finite(x) => Finite(x - c),
            PosInf => PosInf,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Equality with an absolute tolerance on finite values; `+∞` only equals `+∞`.
    pub fn approx_eq(self, other: Self, tol: f64) -> bool {
        match (self, other) {
            (Finite(a), Finite(b)) => (a - b).abs() <= tol,
            (PosInf, PosInf) => true,
            _ => false,
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (Finite(a), Finite(b)) => Finite(a + b),
            _ => PosInf,
        }
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: f64) -> ExtReal {
        match self {
            Finite(a) => Finite(a + rhs),
            PosInf => PosInf,
        }
    }
}

impl std::iter::Sum for ExtReal {
    fn sum<I: Iterator<Item = ExtReal>>(iter: I) -> Self {
        iter.fold(ExtReal::ZERO, |a, b| a + b)
    }
}

impl From<f64> for ExtReal {
    /// Panics on NaN or `-inf`; use [`ExtReal::from_f64`] for fallible input.
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x).expect("finite or +inf value")
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (Finite(_), PosInf) => Some(Ordering::Less),
            (PosInf, Finite(_)) => Some(Ordering::Greater),
            (PosInf, PosInf) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finite(x) => write!(f, "{x}"),
            PosInf => write!(f, "+inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Finite(x) => s.serialize_f64(*x),
            PosInf => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => ExtReal::from_f64(x).map_err(serde::de::Error::custom),
            Raw::Str(s) if s == "+inf" || s == "inf" => Ok(PosInf),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad extended real {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_times_infinity_is_zero() {
        assert_eq!(PosInf.scale(0.0).unwrap(), Finite(0.0));
        assert_eq!(PosInf.scale(3.0).unwrap(), PosInf);
        assert!(PosInf.scale(-1.0).is_err());
    }

    #[test]
    fn rejects_negative_infinity_and_nan() {
        assert!(ExtReal::from_f64(f64::NEG_INFINITY).is_err());
        assert!(ExtReal::from_f64(f64::NAN).is_err());
        assert_eq!(ExtReal::from_f64(f64::INFINITY).unwrap(), PosInf);
    }

    #[test]
    fn serde_uses_string_for_infinity() {
        assert_eq!(serde_json::to_string(&PosInf).unwrap(), "\"+inf\"");
        let back: ExtReal = serde_json::from_str("\"+inf\"").unwrap();
        assert_eq!(back, PosInf);
        let x: ExtReal = serde_json::from_str("2.5").unwrap();
        assert_eq!(x, Finite(2.5));
    }

    proptest! {
        #[test]
        fn saturating_addition(a in -1e300f64..1e300) {
            prop_assert_eq!(Finite(a) + PosInf, PosInf);
            prop_assert_eq!(PosInf + Finite(a), PosInf);
            prop_assert!(Finite(a) < PosInf);
        }
    }
}
