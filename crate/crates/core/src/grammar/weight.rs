use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Serialize, Serializer};

/// An element of the tropical semiring restricted to non-negative rationals:
/// derivation weights add up, tree weights take the minimum. Kept exact so
/// that ties between decimal weights are real ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Weight(Ratio<u64>);

impl Weight {
    pub const ZERO: Weight = Weight(Ratio::new_raw(0, 1));

    pub fn from_integer(n: u64) -> Self {
        Weight(Ratio::from_integer(n))
    }

    pub fn new(numer: u64, denom: u64) -> Self {
        Weight(Ratio::new(numer, denom))
    }
}

impl Add for Weight {
    type Output = Weight;

    fn add(self, rhs: Weight) -> Weight {
        Weight(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Weight {
    fn sum<I: Iterator<Item = Weight>>(iter: I) -> Weight {
        iter.fold(Weight::ZERO, Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid weight `{0}`: expected a non-negative decimal number")]
pub struct WeightParseError(pub String);

impl FromStr for Weight {
    type Err = WeightParseError;

    /// Accepts `3`, `0.25`, `.5`, `2.`; at most 18 fractional digits.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || WeightParseError(s.to_owned());
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(err());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 18 {
            return Err(err());
        }
        let scale = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| err())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
        let numer = int
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(err)?;
        Ok(Weight(Ratio::new(numer, scale)))
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (numer, denom) = (*self.0.numer(), *self.0.denom());
        if denom == 1 {
            return write!(f, "{numer}");
        }
        // finite decimal iff the denominator only has factors 2 and 5
        let mut digits = 0u32;
        let mut d = denom;
        while d % 10 == 0 {
            d /= 10;
            digits += 1;
        }
        let (mut twos, mut fives) = (0u32, 0u32);
        while d % 2 == 0 {
            d /= 2;
            twos += 1;
        }
        while d % 5 == 0 {
            d /= 5;
            fives += 1;
        }
        if d != 1 {
            return write!(f, "{numer}/{denom}");
        }
        digits += twos.max(fives);
        let scale = 10u128.pow(digits);
        let scaled = numer as u128 * (scale / denom as u128);
        let int = scaled / scale;
        let frac = format!("{:0width$}", scaled % scale, width = digits as usize);
        write!(f, "{int}.{}", frac.trim_end_matches('0'))
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}
