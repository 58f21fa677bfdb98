use super::{IfsWithProbabilities, SymbolStream};
use crate::circle::{wrap01, CirclePoint};
use crate::homeo::{CircleMap, Orientation};
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Image lengths this close to 0 or 1 are resolved by continuity.
const ARC_EDGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitMode {
    /// `Z_n = f_{ω_n} ∘ ⋯ ∘ f_{ω_1}`
    Forward,
    /// `Ẑ_n = f_{ω_1} ∘ ⋯ ∘ f_{ω_n}`
    Reversed,
    /// `Z⁻_n = f_{ω_n}⁻¹ ∘ ⋯ ∘ f_{ω_1}⁻¹`
    InverseForward,
    /// `Ẑ⁻_n = f_{ω_1}⁻¹ ∘ ⋯ ∘ f_{ω_n}⁻¹`
    InverseReversed,
}

/// `points[k]` is the `k`-th iterate in the given mode, `points[0] = x`.
/// `symbols[k]` is `ω_{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub mode: OrbitMode,
    pub points: Vec<CirclePoint>,
    pub symbols: Vec<usize>,
}

#[derive(Serialize)]
struct TrajectoryRecord {
    n: usize,
    x: f64,
    symbol: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> CirclePoint {
        *self.points.last().expect("trajectory holds its start point")
    }

    /// One JSON object per point: `{"n", "x", "symbol"}`, where `symbol` is
    /// the map index applied to reach step `n` (null at `n = 0`).
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (n, x) in self.points.iter().enumerate() {
            let record = TrajectoryRecord {
                n,
                x: x.value(),
                symbol: n.checked_sub(1).map(|k| self.symbols[k]),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn forward_orbit(
    ifs: &IfsWithProbabilities,
    x: CirclePoint,
    omega: &SymbolStream,
    n: usize,
) -> Trajectory {
    let symbols = omega.symbols(n);
    let mut points = Vec::with_capacity(n + 1);
    let mut z = x.value();
    points.push(x);
    for &j in &symbols {
        z = ifs.apply(j, z);
        points.push(CirclePoint::new(z));
    }
    Trajectory {
        mode: OrbitMode::Forward,
        points,
        symbols,
    }
}

pub fn inverse_forward_orbit(
    ifs: &IfsWithProbabilities,
    x: CirclePoint,
    omega: &SymbolStream,
    n: usize,
) -> Trajectory {
    let symbols = omega.symbols(n);
    let mut points = Vec::with_capacity(n + 1);
    let mut z = x.value();
    points.push(x);
    for &j in &symbols {
        z = ifs.apply_inverse(j, z);
        points.push(CirclePoint::new(z));
    }
    Trajectory {
        mode: OrbitMode::InverseForward,
        points,
        symbols,
    }
}

/// Every prefix is recomposed from scratch, so this costs `O(n²)` map
/// evaluations; use [`reversed_point`] for a single horizon.
pub fn reversed_orbit(
    ifs: &IfsWithProbabilities,
    x: CirclePoint,
    omega: &SymbolStream,
    n: usize,
) -> Trajectory {
    let symbols = omega.symbols(n);
    let points = (0..=n)
        .map(|k| {
            let z = symbols[..k]
                .iter()
                .rev()
                .fold(x.value(), |z, &j| ifs.apply(j, z));
            CirclePoint::new(z)
        })
        .collect();
    Trajectory {
        mode: OrbitMode::Reversed,
        points,
        symbols,
    }
}

/// `O(n²)` like [`reversed_orbit`]; see [`inverse_reversed_point`].
pub fn inverse_reversed_orbit(
    ifs: &IfsWithProbabilities,
    x: CirclePoint,
    omega: &SymbolStream,
    n: usize,
) -> Trajectory {
    let symbols = omega.symbols(n);
    let points = (0..=n)
        .map(|k| {
            let z = symbols[..k]
                .iter()
                .rev()
                .fold(x.value(), |z, &j| ifs.apply_inverse(j, z));
            CirclePoint::new(z)
        })
        .collect();
    Trajectory {
        mode: OrbitMode::InverseReversed,
        points,
        symbols,
    }
}

/// `Z_n(x, ω)` without materializing the trajectory.
pub fn forward_point(
    ifs: &IfsWithProbabilities,
    x: CirclePoint,
    omega: &SymbolStream,
    n: usize,
) -> CirclePoint {
    let z = (0..n as u64).fold(x.value(), |z, k| ifs.apply(omega.symbol(k), z));
    CirclePoint::new(z)
}

/// `Ẑ_n(x, ω)`.
pub fn reversed_point(
    ifs: &IfsWithProbabilities,
    x: CirclePoint,
    omega: &SymbolStream,
    n: usize,
) -> CirclePoint {
    let z = (0..n as u64)
        .rev()
        .fold(x.value(), |z, k| ifs.apply(omega.symbol(k), z));
    CirclePoint::new(z)
}

/// `Ẑ⁻_n(x, ω) = (f_{ω_n} ∘ ⋯ ∘ f_{ω_1})⁻¹(x)`.
pub fn inverse_reversed_point(
    ifs: &IfsWithProbabilities,
    x: CirclePoint,
    omega: &SymbolStream,
    n: usize,
) -> CirclePoint {
    let z = (0..n as u64)
        .rev()
        .fold(x.value(), |z, k| ifs.apply_inverse(omega.symbol(k), z));
    CirclePoint::new(z)
}

/// Streaming forward iteration yielding `(n, Z_n, ω_n)` for `n = 0..=horizon`
/// in constant memory.
pub struct ForwardIter<'a> {
    ifs: &'a IfsWithProbabilities,
    omega: &'a SymbolStream,
    z: f64,
    k: usize,
    horizon: usize,
}

impl<'a> ForwardIter<'a> {
    pub fn new(
        ifs: &'a IfsWithProbabilities,
        x: CirclePoint,
        omega: &'a SymbolStream,
        horizon: usize,
    ) -> Self {
        ForwardIter {
            ifs,
            omega,
            z: x.value(),
            k: 0,
            horizon,
        }
    }
}

impl Iterator for ForwardIter<'_> {
    type Item = (usize, CirclePoint, Option<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.k > self.horizon {
            return None;
        }
        let item = if self.k == 0 {
            (0, CirclePoint::new(self.z), None)
        } else {
            let j = self.omega.symbol(self.k as u64 - 1);
            self.z = self.ifs.apply(j, self.z);
            (self.k, CirclePoint::new(self.z), Some(j))
        };
        self.k += 1;
        Some(item)
    }
}

/// Pushes the counterclockwise arc `[start, start + len]` through
/// `Z_n(·, ω)` and returns the image arc as `(start, len)`.
pub(crate) fn image_arc(
    ifs: &IfsWithProbabilities,
    start: f64,
    len: f64,
    omega: &SymbolStream,
    n: usize,
) -> (f64, f64) {
    let mut s = start;
    let mut e = wrap01(start + len);
    let mut len = len;
    for k in 0..n as u64 {
        let j = omega.symbol(k);
        let f = ifs.map(j);
        let (fs, fe) = (f.evaluate(s.into()).value(), f.evaluate(e.into()).value());
        (s, e) = match f.orientation() {
            Orientation::Preserving => (fs, fe),
            Orientation::Reversing => (fe, fs),
        };
        let raw = wrap01(e - s);
        len = if raw < ARC_EDGE || raw > 1.0 - ARC_EDGE {
            if len < 0.5 {
                if raw < 0.5 { raw } else { 0.0 }
            } else if raw > 0.5 {
                raw
            } else {
                1.0
            }
        } else {
            raw
        };
    }
    (s, len)
}

/// Length of `Z_n([0, y], ω)`.
pub fn interval_image_length(
    ifs: &IfsWithProbabilities,
    y: CirclePoint,
    omega: &SymbolStream,
    n: usize,
) -> f64 {
    image_arc(ifs, 0.0, y.value(), omega, n).1
}
