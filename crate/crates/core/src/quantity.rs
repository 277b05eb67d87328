//! Fixed-point non-negative quantities.
//!
//! Capacities, demands, rates and latencies are real-valued in scenario files
//! but are held internally as integer counts of millionths. Addition and
//! subtraction are therefore exact, so reservation and release round trips
//! never drift and the auditor can check conservation with plain equality.

use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of raw units per whole unit.
pub const SCALE: i64 = 1_000_000;

/// Largest representable whole value (keeps sums far away from overflow).
pub const MAX_VALUE: f64 = 1.0e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantityError {
    #[error("value {0} is negative")]
    Negative(f64),
    #[error("value {0} is not finite")]
    NotFinite(f64),
    #[error("value {0} exceeds the supported maximum {MAX_VALUE}")]
    TooLarge(f64),
}

/// A non-negative real quantity with six fractional digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Quantity(i64);

impl Quantity {
    pub const ZERO: Quantity = Quantity(0);

    pub fn new(value: f64) -> Result<Self, QuantityError> {
        if !value.is_finite() {
            return Err(QuantityError::NotFinite(value));
        }
        if value < 0.0 {
            return Err(QuantityError::Negative(value));
        }
        if value > MAX_VALUE {
            return Err(QuantityError::TooLarge(value));
        }
        Ok(Quantity((value * SCALE as f64).round() as i64))
    }

    /// Panicking constructor for literals in tests and fixtures.
    pub fn of(value: f64) -> Self {
        Self::new(value).expect("invalid quantity literal")
    }

    pub const fn from_raw(raw: i64) -> Self {
        assert!(raw >= 0);
        Quantity(raw)
    }

    pub const fn raw(self) -> i64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_sub(self, rhs: Quantity) -> Option<Quantity> {
        let v = self.0 - rhs.0;
        (v >= 0).then_some(Quantity(v))
    }

    pub fn saturating_sub(self, rhs: Quantity) -> Quantity {
        Quantity((self.0 - rhs.0).max(0))
    }

    /// Exact product of two quantities.
    pub fn mul(self, rhs: Quantity) -> Cost {
        Cost(self.0 as i128 * rhs.0 as i128)
    }
}

impl Add for Quantity {
    type Output = Quantity;

    fn add(self, rhs: Quantity) -> Quantity {
        Quantity(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Quantity {
    fn sum<I: Iterator<Item = Quantity>>(iter: I) -> Self {
        iter.fold(Quantity::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Quantity::new(v).map_err(serde::de::Error::custom)
    }
}

/// Exact product of two quantities, in units of 1e-12.
///
/// Used for the placement objective (latency times rate) so that optimal
/// costs can be compared with zero tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cost(i128);

impl Cost {
    pub const ZERO: Cost = Cost(0);

    pub const fn raw(self) -> i128 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / (SCALE as f64 * SCALE as f64)
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Self {
        iter.fold(Cost::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

/// Bandwidth along a path: finite, or unbounded for a single-node path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bottleneck {
    Finite(Quantity),
    Unbounded,
}

impl Bottleneck {
    pub fn min(self, other: Bottleneck) -> Bottleneck {
        std::cmp::min(self, other)
    }

    pub fn admits(self, rate: Quantity) -> bool {
        match self {
            Bottleneck::Unbounded => true,
            Bottleneck::Finite(b) => rate <= b,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Bottleneck::Unbounded => f64::INFINITY,
            Bottleneck::Finite(b) => b.value(),
        }
    }
}

impl fmt::Display for Bottleneck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bottleneck::Unbounded => f.write_str("unbounded"),
            Bottleneck::Finite(q) => write!(f, "{q}"),
        }
    }
}

impl Serialize for Bottleneck {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Bottleneck::Unbounded => s.serialize_str("unbounded"),
            Bottleneck::Finite(q) => q.serialize(s),
        }
    }
}
