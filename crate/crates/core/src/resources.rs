//! Four-axis resource vectors shared by every controller.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantity::{Quantity, QuantityError};

/// The resource axes, in the fixed order used for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Compute,
    Memory,
    Storage,
    Bandwidth,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::Compute, Axis::Memory, Axis::Storage, Axis::Bandwidth];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Compute => "compute",
            Axis::Memory => "memory",
            Axis::Storage => "storage",
            Axis::Bandwidth => "bandwidth",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResourceError {
    #[error("subtraction would make {axis} negative")]
    Negative { axis: Axis },
    #[error("invalid {axis} component: {source}")]
    Component { axis: Axis, source: QuantityError },
}

/// Compute (abstract units), memory (MB), storage (MB) and bandwidth (Mbps).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceVector {
    pub compute: Quantity,
    pub memory: Quantity,
    pub storage: Quantity,
    pub bandwidth: Quantity,
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector {
        compute: Quantity::ZERO,
        memory: Quantity::ZERO,
        storage: Quantity::ZERO,
        bandwidth: Quantity::ZERO,
    };

    pub fn new(compute: f64, memory: f64, storage: f64, bandwidth: f64) -> Result<Self, ResourceError> {
        let q = |axis, v| Quantity::new(v).map_err(|source| ResourceError::Component { axis, source });
        Ok(ResourceVector {
            compute: q(Axis::Compute, compute)?,
            memory: q(Axis::Memory, memory)?,
            storage: q(Axis::Storage, storage)?,
            bandwidth: q(Axis::Bandwidth, bandwidth)?,
        })
    }

    /// Panicking constructor for literals.
    pub fn of(compute: f64, memory: f64, storage: f64, bandwidth: f64) -> Self {
        Self::new(compute, memory, storage, bandwidth).expect("invalid resource literal")
    }

    pub fn uniform(v: f64) -> Self {
        Self::of(v, v, v, v)
    }

    pub fn get(&self, axis: Axis) -> Quantity {
        match axis {
            Axis::Compute => self.compute,
            Axis::Memory => self.memory,
            Axis::Storage => self.storage,
            Axis::Bandwidth => self.bandwidth,
        }
    }

    fn map2(&self, other: &Self, f: impl Fn(Quantity, Quantity) -> Quantity) -> Self {
        ResourceVector {
            compute: f(self.compute, other.compute),
            memory: f(self.memory, other.memory),
            storage: f(self.storage, other.storage),
            bandwidth: f(self.bandwidth, other.bandwidth),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.map2(other, |a, b| a + b)
    }

    /// Component-wise subtraction; fails instead of clamping.
    pub fn sub(&self, other: &Self) -> Result<Self, ResourceError> {
        if let Some(axis) = self.first_shortfall(other) {
            return Err(ResourceError::Negative { axis });
        }
        Ok(self.map2(other, |a, b| a.checked_sub(b).expect("checked above")))
    }

    /// True iff every component of `self` is at most the matching one of `other`.
    pub fn leq(&self, other: &Self) -> bool {
        self.first_excess(other).is_none()
    }

    /// First axis (in [`Axis::ALL`] order) where `self` exceeds `other`.
    pub fn first_excess(&self, other: &Self) -> Option<Axis> {
        Axis::ALL.into_iter().find(|&a| self.get(a) > other.get(a))
    }

    fn first_shortfall(&self, other: &Self) -> Option<Axis> {
        other.first_excess(self)
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.compute, self.memory, self.storage, self.bandwidth)
    }
}

impl std::iter::Sum for ResourceVector {
    fn sum<I: Iterator<Item = ResourceVector>>(iter: I) -> Self {
        iter.fold(ResourceVector::ZERO, |a, b| a.add(&b))
    }
}

impl<'a> std::iter::Sum<&'a ResourceVector> for ResourceVector {
    fn sum<I: Iterator<Item = &'a ResourceVector>>(iter: I) -> Self {
        iter.fold(ResourceVector::ZERO, |a, b| a.add(b))
    }
}

/// Free-function forms matching the operation names used across the crate.
pub fn resource_add(a: &ResourceVector, b: &ResourceVector) -> ResourceVector {
    a.add(b)
}

pub fn resource_sub(a: &ResourceVector, b: &ResourceVector) -> Result<ResourceVector, ResourceError> {
    a.sub(b)
}

pub fn resource_leq(a: &ResourceVector, b: &ResourceVector) -> bool {
    a.leq(b)
}
