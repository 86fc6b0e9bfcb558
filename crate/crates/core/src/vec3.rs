//! Real 3-vectors and validated unit directions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `| |v| - 1 |` for direction vectors.
pub const UNIT_NORM_TOL: f64 = 1e-9;

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// A real 3-vector of unit Euclidean norm (within [`UNIT_NORM_TOL`]).
///
/// Directions of magnets and magnetic moments are all `UnitVector`s; the
/// constructor is the single place where the norm invariant is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct UnitVector([f64; 3]);

impl UnitVector {
    pub const X: UnitVector = UnitVector([1.0, 0.0, 0.0]);
    pub const Y: UnitVector = UnitVector([0.0, 1.0, 0.0]);
    pub const Z: UnitVector = UnitVector([0.0, 0.0, 1.0]);

    pub fn new(v: [f64; 3]) -> Result<Self> {
        let n = norm(v);
        if (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NotUnitVector(n));
        }
        Ok(UnitVector(v))
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(v: [f64; 3]) -> Result<Self> {
        let n = norm(v);
        if n < 1e-300 {
            return Err(Error::NotUnitVector(n));
        }
        Ok(UnitVector([v[0] / n, v[1] / n, v[2] / n]))
    }

    /// Direction at polar angle `theta` from +z in the xz-plane.
    pub fn polar(theta: f64) -> Self {
        UnitVector([theta.sin(), 0.0, theta.cos()])
    }

    pub fn as_array(self) -> [f64; 3] {
        self.0
    }

    pub fn dot(self, other: UnitVector) -> f64 {
        dot(self.0, other.0)
    }

    /// The six signed coordinate axes, in the order +x, -x, +y, -y, +z, -z.
    pub fn signed_axes() -> [UnitVector; 6] {
        [Self::X, -Self::X, Self::Y, -Self::Y, Self::Z, -Self::Z]
    }
}

impl std::ops::Neg for UnitVector {
    type Output = UnitVector;

    fn neg(self) -> UnitVector {
        UnitVector([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl<'de> Deserialize<'de> for UnitVector {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let v = <[f64; 3]>::deserialize(deserializer)?;
        UnitVector::new(v).map_err(serde::de::Error::custom)
    }
}
