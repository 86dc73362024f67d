//! Scalar abstraction for monetary quantities and cascade parameters.
//!
//! Everything that carries a trade volume, a capacity or a cascade fraction
//! is generic over [`Scalar`]. `f64` is the workhorse; `f32` is supported for
//! memory-bound ensembles and [`Rational64`](crate::Rational64) gives exact
//! arithmetic where threshold comparisons must not depend on summation order.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

pub trait Scalar:
    Copy + PartialOrd + Num + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Parses a plain decimal literal such as `997000`, `-12.5` or `1.6`.
    fn parse_decimal(text: &str) -> Option<Self>;

    /// Whether the value is a finite real number.
    fn is_finite_value(self) -> bool;

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_f64_lossy(value: f64) -> Option<Self> {
        Self::from_f64(value)
    }

    fn from_count(count: u64) -> Self {
        Self::from_u64(count).expect("unit counts fit every supported scalar")
    }
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn parse_decimal(text: &str) -> Option<Self> {
                text.trim().parse::<$t>().ok().filter(|v| v.is_finite())
            }

            fn is_finite_value(self) -> bool {
                self.is_finite()
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

impl Scalar for Ratio<i64> {
    fn parse_decimal(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Some((num, den)) = text.split_once('/') {
            let num: i64 = num.trim().parse().ok()?;
            let den: i64 = den.trim().parse().ok()?;
            if den == 0 {
                return None;
            }
            return Some(Ratio::new(num, den));
        }
        let (negative, digits) = match text.as_bytes().first()? {
            b'-' => (true, &text[1..]),
            b'+' => (false, &text[1..]),
            _ => (false, text),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
            return None;
        }
        let mut numer: i64 = 0;
        for b in int_part.bytes().chain(frac_part.bytes()) {
            numer = numer.checked_mul(10)?.checked_add(i64::from(b - b'0'))?;
        }
        let denom = 10i64.checked_pow(frac_part.len() as u32)?;
        let value = Ratio::new(numer, denom);
        Some(if negative { -value } else { value })
    }

    fn is_finite_value(self) -> bool {
        true
    }
}
