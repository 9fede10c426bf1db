//! Exact length scalars of the form `(num/den)·√root`.
//!
//! Every length constant in the built-in fractal specs has this shape (1/6,
//! √2/6, √2, √3, …). Keeping the rational part as integers buys two things
//! plain f64 fields cannot give:
//!
//! * scaling by an arbitrary positive f64 is exact — every finite f64 is a
//!   dyadic rational, so it is absorbed into `num/den` without rounding;
//! * ratios of two lengths cancel their common rational factor *before* any
//!   float rounding, so `(λa)/(λb)` evaluates to the bit-identical f64 as
//!   `a/b` for any λ. (Naively, `fl(7·⅙)/fl(7·√3) ≠ fl(⅙/√3)` — off by one
//!   ulp — which would leak into every downstream weighted bar sum.)

use crate::error::{Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactLen {
    num: i128,
    /// Positive; gcd(num, den) = 1.
    den: i128,
    /// Value is (num/den)·√root; 1 for rationals. Zero values normalize to
    /// num = 0, den = 1, root = 1.
    root: u64,
}

pub const ZERO: ExactLen = ExactLen { num: 0, den: 1, root: 1 };

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl ExactLen {
    pub const ZERO: ExactLen = ZERO;
    pub const ONE: ExactLen = ExactLen { num: 1, den: 1, root: 1 };

    fn reduced(num: i128, den: i128, root: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::argument("zero denominator"));
        }
        if num == 0 || root == 0 {
            return Ok(ZERO);
        }
        let sign = if (num < 0) != (den < 0) { -1 } else { 1 };
        let g = gcd(num, den);
        Ok(ExactLen {
            num: sign * (num.abs() / g),
            den: den.abs() / g,
            root: if root == 1 { 1 } else { root },
        })
    }

    pub fn rational(num: i128, den: i128) -> Self {
        Self::reduced(num, den, 1).expect("nonzero denominator")
    }

    /// `(num/den)·√root`.
    pub fn rational_sqrt(num: i128, den: i128, root: u64) -> Self {
        Self::reduced(num, den, root).expect("nonzero denominator")
    }

    pub fn sqrt_int(root: u64) -> Self {
        Self::reduced(1, 1, root).expect("nonzero denominator")
    }

    /// Exact dyadic decomposition of a finite f64. Fails for values whose
    /// binary exponent is too extreme for i128 (far outside any length scale
    /// this crate works at).
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::argument(format!("non-finite length {x}")));
        }
        if x == 0.0 {
            return Ok(ZERO);
        }
        let bits = x.abs().to_bits();
        let exp_bits = (bits >> 52) as i32;
        let (mut mantissa, mut exp) = if exp_bits == 0 {
            (bits & ((1 << 52) - 1), -1074)
        } else {
            ((bits & ((1 << 52) - 1)) | (1 << 52), exp_bits - 1075)
        };
        while mantissa & 1 == 0 {
            mantissa >>= 1;
            exp += 1;
        }
        let sign = if x < 0.0 { -1 } else { 1 };
        if exp >= 0 {
            if exp > 70 {
                return Err(Error::argument(format!("{x} too large for exact form")));
            }
            Ok(ExactLen { num: sign * ((mantissa as i128) << exp), den: 1, root: 1 })
        } else {
            if -exp > 120 {
                return Err(Error::argument(format!("{x} too small for exact form")));
            }
            Self::reduced(sign * mantissa as i128, 1i128 << (-exp), 1)
        }
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn value(self) -> f64 {
        if self.root == 1 {
            self.num as f64 / self.den as f64
        } else {
            self.num as f64 * (self.root as f64).sqrt() / self.den as f64
        }
    }

    /// Multiply by a positive finite factor, exactly.
    pub fn scale(self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::argument(format!("scale factor must be positive, got {lambda}")));
        }
        let l = Self::from_f64(lambda)?;
        // Cross-reduce before multiplying so builtin-scale products stay far
        // from i128 range.
        let g1 = gcd(self.num, l.den);
        let g2 = gcd(l.num, self.den);
        let num = (self.num / g1)
            .checked_mul(l.num / g2)
            .ok_or_else(|| Error::Range(format!("scale by {lambda} overflows exact form")))?;
        let den = (self.den / g2)
            .checked_mul(l.den / g1)
            .ok_or_else(|| Error::Range(format!("scale by {lambda} overflows exact form")))?;
        Self::reduced(num, den, self.root)
    }

    /// `self / other` as f64, with the common rational factor cancelled
    /// exactly: `a.scale(λ).ratio(b.scale(λ))` is bit-identical to
    /// `a.ratio(b)` for every valid λ.
    pub fn ratio(self, other: ExactLen) -> f64 {
        if other.num == 0 {
            return f64::NAN;
        }
        if self.num == 0 {
            return 0.0;
        }
        // (num·o.den)/(den·o.num), paired to cancel before multiplying.
        let g1 = gcd(self.num, other.num);
        let g2 = gcd(self.den, other.den);
        let a = (self.num / g1).checked_mul(other.den / g2);
        let b = (self.den / g2).checked_mul(other.num / g1);
        let q = match (a, b) {
            (Some(a), Some(b)) => a as f64 / b as f64,
            // Out of integer range: the exactness guarantee no longer holds,
            // but the value is still right to f64 accuracy.
            _ => (self.num as f64 / self.den as f64) / (other.num as f64 / other.den as f64),
        };
        if self.root == other.root {
            q
        } else {
            q * (self.root as f64 / other.root as f64).sqrt()
        }
    }
}

impl Serialize for ExactLen {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for ExactLen {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let x = f64::deserialize(deserializer)?;
        ExactLen::from_f64(x).map_err(|e| D::Error::custom(e.to_string()))
    }
}
