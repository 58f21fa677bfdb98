//! Arithmetic on the circle `R/Z`: points, the standard metric, rotations,
//! counterclockwise arcs and the `⊕` sum of distances.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Reduces a real number into `[0, 1)`.
///
/// `x - floor(x)` can round up to exactly `1.0` for tiny negative inputs, which
/// is folded back to `0.0`.
#[inline]
pub fn wrap01(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point of the circle `R/Z`, stored as its coordinate in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct CirclePoint(f64);

impl CirclePoint {
    pub const ZERO: CirclePoint = CirclePoint(0.0);

    /// Builds a point from any real, reducing it mod 1.
    #[inline]
    pub fn new(x: f64) -> Self {
        CirclePoint(wrap01(x))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// The standard metric `d(x, y) = min(|y - x|, 1 - |y - x|)`.
    #[inline]
    pub fn dist(self, other: CirclePoint) -> CircleDistance {
        let delta = (other.0 - self.0).abs();
        CircleDistance(delta.min(1.0 - delta))
    }

    /// `R_s(x) = (x + s) mod 1`.
    #[inline]
    pub fn rotate(self, s: f64) -> CirclePoint {
        CirclePoint::new(self.0 + s)
    }

    /// Length of the counterclockwise arc from `self` to `other`, in `[0, 1)`.
    #[inline]
    pub fn ccw_to(self, other: CirclePoint) -> f64 {
        wrap01(other.0 - self.0)
    }
}

impl From<f64> for CirclePoint {
    fn from(x: f64) -> Self {
        CirclePoint::new(x)
    }
}

impl From<CirclePoint> for f64 {
    fn from(p: CirclePoint) -> f64 {
        p.0
    }
}

impl fmt::Display for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Free-function form of [`CirclePoint::dist`].
#[inline]
pub fn dist(x: CirclePoint, y: CirclePoint) -> CircleDistance {
    x.dist(y)
}

/// Free-function form of [`CirclePoint::rotate`].
#[inline]
pub fn rotate(x: CirclePoint, s: f64) -> CirclePoint {
    x.rotate(s)
}

/// A distance between two circle points, always in `[0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(into = "f64")]
pub struct CircleDistance(f64);

impl CircleDistance {
    pub const ZERO: CircleDistance = CircleDistance(0.0);
    pub const HALF: CircleDistance = CircleDistance(0.5);

    /// Clamps `s` into `[0, 1/2]`. Values outside the range indicate a caller
    /// bug, so they are clamped rather than wrapped.
    #[inline]
    pub fn new(s: f64) -> Self {
        debug_assert!(s.is_finite());
        CircleDistance(s.clamp(0.0, 0.5))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `s1 ⊕ s2 = min(s1 + s2, 1 - s1 - s2)`: the distance between the ends of
    /// two consecutive steps of lengths `s1` and `s2` taken in one direction.
    #[inline]
    pub fn oplus(self, other: CircleDistance) -> CircleDistance {
        let sum = self.0 + other.0;
        CircleDistance::new(sum.min(1.0 - sum))
    }
}

impl From<CircleDistance> for f64 {
    fn from(d: CircleDistance) -> f64 {
        d.0
    }
}

/// Free-function form of [`CircleDistance::oplus`].
#[inline]
pub fn dist_add(s1: CircleDistance, s2: CircleDistance) -> CircleDistance {
    s1.oplus(s2)
}

/// Counterclockwise arc `[start, start + length)`.
///
/// Containment is half-open. The closed intervals `[x, y]` used by the
/// measure-theoretic arguments only differ on endpoints, which carry no mass
/// for the nonatomic measures this crate works with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: CirclePoint,
    pub length: f64,
}

impl Arc {
    pub fn new(start: CirclePoint, length: f64) -> Self {
        Arc {
            start,
            length: length.clamp(0.0, 1.0),
        }
    }

    /// The counterclockwise arc `[x, y]`.
    pub fn between(x: CirclePoint, y: CirclePoint) -> Self {
        Arc::new(x, x.ccw_to(y))
    }

    pub fn end(&self) -> CirclePoint {
        self.start.rotate(self.length)
    }

    pub fn complement(&self) -> Arc {
        Arc::new(self.end(), 1.0 - self.length)
    }

    pub fn contains(&self, x: CirclePoint) -> bool {
        if self.length >= 1.0 {
            return true;
        }
        self.start.ccw_to(x) < self.length
    }
}

pub fn arc_complement(a: &Arc) -> Arc {
    a.complement()
}

pub fn arc_contains(a: &Arc, x: CirclePoint) -> bool {
    a.contains(x)
}
