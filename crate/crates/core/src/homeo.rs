//! Circle homeomorphisms: a closed family of parametric maps with exact
//! forward and inverse evaluation and an orientation sign.
//!
//! Projective maps act on `S¹ = R/Z` through the identification of `x` with
//! the line through the origin at angle `πx`: a 2×2 matrix acts on the
//! direction vector `(cos πx, sin πx)` and the image angle is read mod `π`.

use crate::circle::{wrap01, CirclePoint};
use crate::error::{Error, Result};
use crate::grid;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc as Shared;

/// Minimum gap between consecutive piecewise-linear breakpoints and images.
pub const BREAKPOINT_MARGIN: f64 = 1e-9;

/// Below this distance from 0 or 1, lifted increments are snapped to the
/// nearest end of `[0, 1]` when rounding puts them on the wrong side.
const LIFT_EDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Preserving,
    Reversing,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Preserving => 1.0,
            Orientation::Reversing => -1.0,
        }
    }

    pub fn compose(self, other: Orientation) -> Orientation {
        if self == other {
            Orientation::Preserving
        } else {
            Orientation::Reversing
        }
    }
}

/// Anything that acts on the circle as a homeomorphism.
pub trait CircleMap {
    fn evaluate(&self, x: CirclePoint) -> CirclePoint;
    fn evaluate_inverse(&self, y: CirclePoint) -> CirclePoint;
    fn orientation(&self) -> Orientation;
}

impl<M: CircleMap + ?Sized> CircleMap for &M {
    fn evaluate(&self, x: CirclePoint) -> CirclePoint {
        (**self).evaluate(x)
    }
    fn evaluate_inverse(&self, y: CirclePoint) -> CirclePoint {
        (**self).evaluate_inverse(y)
    }
    fn orientation(&self) -> Orientation {
        (**self).orientation()
    }
}

/// Cyclic orientation of the images of `0, 1/3, 2/3`.
pub fn cyclic_orientation<M: CircleMap + ?Sized>(f: &M) -> Orientation {
    let a = f.evaluate(CirclePoint::new(0.0));
    let b = f.evaluate(CirclePoint::new(1.0 / 3.0));
    let c = f.evaluate(CirclePoint::new(2.0 / 3.0));
    if a.ccw_to(b) < a.ccw_to(c) {
        Orientation::Preserving
    } else {
        Orientation::Reversing
    }
}

/// `Φ(x) = μ([0, x])` for a nonatomic, fully supported grid measure, with its
/// inverse obtained by interpolating the CDF knots.
#[derive(Clone, PartialEq)]
pub struct CdfMap {
    knots: Shared<[f64]>,
}

impl CdfMap {
    /// Builds the map from CDF knot values `cdf[i] = μ([0, i/n])`. Every cell
    /// must carry positive mass.
    pub fn from_cdf(cdf: &[f64]) -> Result<Self> {
        if cdf.len() < 2 {
            return Err(Error::InvalidMeasure("CDF needs at least two knots".into()));
        }
        let n = cdf.len() - 1;
        if cdf[0] != 0.0 || (cdf[n] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "CDF must run from 0 to 1, got {} .. {}",
                cdf[0], cdf[n]
            )));
        }
        if let Some(i) = cdf.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::MetricDegenerate(format!(
                "CDF is not strictly increasing on cell {i} (gap in support)"
            )));
        }
        let mut knots = cdf.to_vec();
        knots[n] = 1.0;
        Ok(CdfMap {
            knots: knots.into(),
        })
    }

    pub fn identity(grid_size: usize) -> Self {
        let knots: Vec<f64> = (0..=grid_size)
            .map(|i| i as f64 / grid_size as f64)
            .collect();
        CdfMap {
            knots: knots.into(),
        }
    }

    pub fn grid_size(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `Φ(x)` as a real in `[0, 1]`.
    #[inline]
    pub fn cdf_at(&self, x: f64) -> f64 {
        grid::interpolate(&self.knots, x)
    }

    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        grid::invert_increasing(&self.knots, u)
    }

    #[inline]
    pub fn apply(&self, x: CirclePoint) -> CirclePoint {
        CirclePoint::new(self.cdf_at(x.value()))
    }

    #[inline]
    pub fn apply_inverse(&self, u: CirclePoint) -> CirclePoint {
        CirclePoint::new(self.quantile(u.value()))
    }

    /// `ρ(x, y) = min(μ([x, y]), μ([y, x]))`.
    #[inline]
    pub fn rho(&self, x: CirclePoint, y: CirclePoint) -> f64 {
        self.apply(x).dist(self.apply(y)).value()
    }
}

impl fmt::Debug for CdfMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CdfMap")
            .field("grid_size", &self.grid_size())
            .finish()
    }
}

impl CircleMap for CdfMap {
    fn evaluate(&self, x: CirclePoint) -> CirclePoint {
        self.apply(x)
    }
    fn evaluate_inverse(&self, y: CirclePoint) -> CirclePoint {
        self.apply_inverse(y)
    }
    fn orientation(&self) -> Orientation {
        Orientation::Preserving
    }
}

/// How a [`CdfMap`] conjugates its inner map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugationDirection {
    /// `Φ ∘ inner ∘ Φ⁻¹`
    Forward,
    /// `Φ⁻¹ ∘ inner ∘ Φ`
    Inverse,
}

/// Piecewise-linear circle homeomorphism through a cyclic list of
/// breakpoints, stored in lifted coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    /// Breakpoint abscissae, strictly increasing in `[0, 1)`, closed by
    /// `xs[0] + 1`.
    xs: Vec<f64>,
    /// Lifted images, strictly monotone, closed by `ys[0] ± 1`.
    ys: Vec<f64>,
    orientation: Orientation,
}

impl PiecewiseLinear {
    pub fn new(breakpoints: &[(f64, f64)], orientation: Orientation) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidHomeomorphism(
                "piecewise-linear map needs at least one breakpoint".into(),
            ));
        }
        let sign = orientation.sign();
        let mut xs = Vec::with_capacity(breakpoints.len() + 1);
        let mut ys = Vec::with_capacity(breakpoints.len() + 1);
        for (i, &(x, y)) in breakpoints.iter().enumerate() {
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::InvalidHomeomorphism("non-finite breakpoint".into()));
            }
            let x = wrap01(x);
            let y = wrap01(y);
            if let (Some(&px), Some(&py)) = (xs.last(), ys.last()) {
                if x - px < BREAKPOINT_MARGIN {
                    return Err(Error::InvalidHomeomorphism(format!(
                        "breakpoint abscissae must increase strictly (index {i})"
                    )));
                }
                let step = wrap01(sign * (y - py));
                if step < BREAKPOINT_MARGIN {
                    return Err(Error::InvalidHomeomorphism(format!(
                        "breakpoint images are not strictly monotone (index {i})"
                    )));
                }
                xs.push(x);
                ys.push(py + sign * step);
            } else {
                xs.push(x);
                ys.push(y);
            }
        }
        let x_close = xs[0] + 1.0;
        let y_close = ys[0] + sign;
        if x_close - xs[xs.len() - 1] < BREAKPOINT_MARGIN
            || sign * (y_close - ys[ys.len() - 1]) < BREAKPOINT_MARGIN
        {
            return Err(Error::InvalidHomeomorphism(
                "breakpoints wind more than once around the circle".into(),
            ));
        }
        xs.push(x_close);
        ys.push(y_close);
        Ok(PiecewiseLinear {
            xs,
            ys,
            orientation,
        })
    }

    pub fn breakpoints(&self) -> Vec<(f64, f64)> {
        self.xs[..self.xs.len() - 1]
            .iter()
            .zip(&self.ys)
            .map(|(&x, &y)| (x, wrap01(y)))
            .collect()
    }

    fn inverse(&self) -> PiecewiseLinear {
        let pairs: Vec<(f64, f64)> = self.breakpoints().into_iter().map(|(x, y)| (y, x)).collect();
        let mut pairs = pairs;
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        PiecewiseLinear::new(&pairs, self.orientation)
            .expect("inverse of a valid piecewise-linear map is valid")
    }

    /// Piecewise-linear interpolation along increasing `from` onto `to`.
    fn lerp(from: &[f64], to: &[f64], t: f64) -> f64 {
        let hi = from.partition_point(|&v| v <= t).clamp(1, from.len() - 1);
        let lo = hi - 1;
        let s = (t - from[lo]) / (from[hi] - from[lo]);
        to[lo] + s * (to[hi] - to[lo])
    }

    fn eval(&self, x: f64) -> f64 {
        let mut t = x;
        if t < self.xs[0] {
            t += 1.0;
        }
        wrap01(Self::lerp(&self.xs, &self.ys, t))
    }

    fn eval_inverse(&self, y: f64) -> f64 {
        let y0 = self.ys[0];
        match self.orientation {
            Orientation::Preserving => {
                let v = y0 + wrap01(y - y0);
                wrap01(Self::lerp(&self.ys, &self.xs, v))
            }
            Orientation::Reversing => {
                // ys decreasing: interpolate along the negated sequence
                let neg: Vec<f64> = self.ys.iter().map(|v| -v).collect();
                let v = y0 - wrap01(y0 - y);
                wrap01(Self::lerp(&neg, &self.xs, -v))
            }
        }
    }
}

/// Real projective action of an invertible 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projective {
    m: [f64; 4],
}

impl Projective {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !det.is_finite() || det == 0.0 {
            return Err(Error::InvalidHomeomorphism(format!(
                "projective matrix must be invertible (det = {det})"
            )));
        }
        Ok(Projective { m: [a, b, c, d] })
    }

    pub fn matrix(&self) -> [f64; 4] {
        self.m
    }

    pub fn det(&self) -> f64 {
        self.m[0] * self.m[3] - self.m[1] * self.m[2]
    }

    fn act(m: &[f64; 4], x: f64) -> f64 {
        let (s, c) = (PI * x).sin_cos();
        let u = m[0] * c + m[1] * s;
        let v = m[2] * c + m[3] * s;
        wrap01(v.atan2(u) / PI)
    }

    fn inverse_matrix(&self) -> [f64; 4] {
        let [a, b, c, d] = self.m;
        let det = self.det();
        [d / det, -b / det, -c / det, a / det]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Homeomorphism {
    Rotation(f64),
    Projective(Projective),
    PiecewiseLinear(PiecewiseLinear),
    /// `x ↦ -x mod 1`
    Flip,
    /// `x ↦ G(kx) / k`, where `G` is the lift of `base` with `G(0) ∈ [0, 1)`.
    /// Commutes with `R_{1/k}` (preserving) or conjugates it to `R_{-1/k}`
    /// (reversing), so the distance `1/k` is preserved.
    KLift { base: Box<Homeomorphism>, k: u32 },
    /// `x ↦ k·base(x/k) mod 1`, the factor of a map that preserves the
    /// distance `1/k` through `π(x) = kx mod 1`.
    KFactor { base: Box<Homeomorphism>, k: u32 },
    CdfConjugate {
        phi: CdfMap,
        inner: Box<Homeomorphism>,
        direction: ConjugationDirection,
    },
    /// Swaps forward and inverse evaluation.
    Inverse(Box<Homeomorphism>),
}

impl Homeomorphism {
    pub fn rotation(s: f64) -> Self {
        Homeomorphism::Rotation(s)
    }

    pub fn projective(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Projective::new(a, b, c, d).map(Homeomorphism::Projective)
    }

    pub fn piecewise_linear(breakpoints: &[(f64, f64)], orientation: Orientation) -> Result<Self> {
        PiecewiseLinear::new(breakpoints, orientation).map(Homeomorphism::PiecewiseLinear)
    }

    pub fn k_lift(base: Homeomorphism, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidHomeomorphism("KLift needs k >= 1".into()));
        }
        Ok(Homeomorphism::KLift {
            base: Box::new(base),
            k,
        })
    }

    pub fn k_factor(base: Homeomorphism, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidHomeomorphism("factor needs k >= 1".into()));
        }
        Ok(Homeomorphism::KFactor {
            base: Box::new(base),
            k,
        })
    }

    pub fn cdf_conjugate(phi: CdfMap, inner: Homeomorphism, direction: ConjugationDirection) -> Self {
        Homeomorphism::CdfConjugate {
            phi,
            inner: Box::new(inner),
            direction,
        }
    }

    /// The inverse map, in closed form where the family allows it.
    pub fn inverse(&self) -> Homeomorphism {
        match self {
            Homeomorphism::Rotation(s) => Homeomorphism::Rotation(-s),
            Homeomorphism::Projective(p) => Homeomorphism::Projective(Projective {
                m: p.inverse_matrix(),
            }),
            Homeomorphism::PiecewiseLinear(pl) => Homeomorphism::PiecewiseLinear(pl.inverse()),
            Homeomorphism::Flip => Homeomorphism::Flip,
            Homeomorphism::KFactor { base, k } => Homeomorphism::KFactor {
                base: Box::new(base.inverse()),
                k: *k,
            },
            Homeomorphism::CdfConjugate {
                phi,
                inner,
                direction,
            } => Homeomorphism::CdfConjugate {
                phi: phi.clone(),
                inner: Box::new(inner.inverse()),
                direction: *direction,
            },
            Homeomorphism::Inverse(inner) => (**inner).clone(),
            Homeomorphism::KLift { .. } => Homeomorphism::Inverse(Box::new(self.clone())),
        }
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self, Homeomorphism::Rotation(_))
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            Homeomorphism::Rotation(s) => wrap01(x + s),
            Homeomorphism::Projective(p) => Projective::act(&p.m, x),
            Homeomorphism::PiecewiseLinear(pl) => pl.eval(x),
            Homeomorphism::Flip => wrap01(-x),
            Homeomorphism::KLift { base, k } => {
                let k = *k as f64;
                wrap01(lift(base, k * x) / k)
            }
            Homeomorphism::KFactor { base, k } => {
                let k = *k as f64;
                wrap01(k * base.eval(x / k))
            }
            Homeomorphism::CdfConjugate {
                phi,
                inner,
                direction,
            } => match direction {
                ConjugationDirection::Forward => wrap01(phi.cdf_at(inner.eval(phi.quantile(x)))),
                ConjugationDirection::Inverse => wrap01(phi.quantile(inner.eval(phi.cdf_at(x)))),
            },
            Homeomorphism::Inverse(inner) => inner.eval_inverse(x),
        }
    }

    fn eval_inverse(&self, y: f64) -> f64 {
        match self {
            Homeomorphism::Rotation(s) => wrap01(y - s),
            Homeomorphism::Projective(p) => Projective::act(&p.inverse_matrix(), y),
            Homeomorphism::PiecewiseLinear(pl) => pl.eval_inverse(y),
            Homeomorphism::Flip => wrap01(-y),
            Homeomorphism::KLift { base, k } => {
                let k = *k as f64;
                wrap01(lift_inverse(base, k * y) / k)
            }
            Homeomorphism::KFactor { base, k } => {
                let k = *k as f64;
                wrap01(k * base.eval_inverse(y / k))
            }
            Homeomorphism::CdfConjugate {
                phi,
                inner,
                direction,
            } => match direction {
                ConjugationDirection::Forward => {
                    wrap01(phi.cdf_at(inner.eval_inverse(phi.quantile(y))))
                }
                ConjugationDirection::Inverse => {
                    wrap01(phi.quantile(inner.eval_inverse(phi.cdf_at(y))))
                }
            },
            Homeomorphism::Inverse(inner) => inner.eval(y),
        }
    }

    fn orient(&self) -> Orientation {
        match self {
            Homeomorphism::Rotation(_) => Orientation::Preserving,
            Homeomorphism::Projective(p) => {
                if p.det() > 0.0 {
                    Orientation::Preserving
                } else {
                    Orientation::Reversing
                }
            }
            Homeomorphism::PiecewiseLinear(pl) => pl.orientation,
            Homeomorphism::Flip => Orientation::Reversing,
            Homeomorphism::KLift { base, .. }
            | Homeomorphism::KFactor { base, .. }
            | Homeomorphism::Inverse(base) => base.orient(),
            Homeomorphism::CdfConjugate { inner, .. } => inner.orient(),
        }
    }
}

impl CircleMap for Homeomorphism {
    #[inline]
    fn evaluate(&self, x: CirclePoint) -> CirclePoint {
        CirclePoint::new(self.eval(x.value()))
    }
    #[inline]
    fn evaluate_inverse(&self, y: CirclePoint) -> CirclePoint {
        CirclePoint::new(self.eval_inverse(y.value()))
    }
    fn orientation(&self) -> Orientation {
        self.orient()
    }
}

/// Increment `σ·(g(u) - g(0))` of the lift of `g` over `[0, u]`, in `[0, 1]`
/// up to rounding at the ends.
fn unit_increment(g: &Homeomorphism, g0: f64, sign: f64, u: f64) -> f64 {
    let mut inc = wrap01(sign * (g.eval(u) - g0));
    if u < LIFT_EDGE && inc > 0.5 {
        inc -= 1.0;
    } else if u > 1.0 - LIFT_EDGE && inc < 0.5 {
        inc += 1.0;
    }
    inc
}

/// The lift `G: R → R` of `g` normalised by `G(0) = g(0) ∈ [0, 1)`, so
/// `G(t + 1) = G(t) ± 1`.
fn lift(g: &Homeomorphism, t: f64) -> f64 {
    let sign = g.orient().sign();
    let g0 = g.eval(0.0);
    let whole = t.floor();
    let frac = t - whole;
    let (whole, frac) = if frac >= 1.0 { (whole + 1.0, 0.0) } else { (whole, frac) };
    g0 + sign * (unit_increment(g, g0, sign, frac) + whole)
}

/// Solves `G(t) = v` for the lift of [`lift`].
fn lift_inverse(g: &Homeomorphism, v: f64) -> f64 {
    let sign = g.orient().sign();
    let g0 = g.eval(0.0);
    let w = sign * (v - g0);
    let whole = w.floor();
    let rem = w - whole;
    let mut u = g.eval_inverse(wrap01(g0 + sign * rem));
    let err = rem - unit_increment(g, g0, sign, u);
    if err > 0.5 {
        u += 1.0;
    } else if err < -0.5 {
        u -= 1.0;
    }
    whole + u
}

/// Serializable description of the parametric family members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HomeoDescriptor {
    Rotation {
        angle: f64,
    },
    Projective {
        matrix: [f64; 4],
    },
    PiecewiseLinear {
        breakpoints: Vec<[f64; 2]>,
        #[serde(default = "default_orientation")]
        orientation: i8,
    },
    Flip,
    Klift {
        base: Box<HomeoDescriptor>,
        k: u32,
    },
    Factor {
        base: Box<HomeoDescriptor>,
        k: u32,
    },
    Inverse {
        base: Box<HomeoDescriptor>,
    },
}

fn default_orientation() -> i8 {
    1
}

impl TryFrom<&HomeoDescriptor> for Homeomorphism {
    type Error = Error;

    fn try_from(desc: &HomeoDescriptor) -> Result<Self> {
        match desc {
            HomeoDescriptor::Rotation { angle } => {
                if !angle.is_finite() {
                    return Err(Error::InvalidHomeomorphism("rotation angle must be finite".into()));
                }
                Ok(Homeomorphism::Rotation(*angle))
            }
            HomeoDescriptor::Projective { matrix: [a, b, c, d] } => {
                Homeomorphism::projective(*a, *b, *c, *d)
            }
            HomeoDescriptor::PiecewiseLinear {
                breakpoints,
                orientation,
            } => {
                let orientation = match orientation {
                    1 => Orientation::Preserving,
                    -1 => Orientation::Reversing,
                    other => {
                        return Err(Error::InvalidHomeomorphism(format!(
                            "orientation must be 1 or -1, got {other}"
                        )))
                    }
                };
                let pairs: Vec<(f64, f64)> = breakpoints.iter().map(|[x, y]| (*x, *y)).collect();
                Homeomorphism::piecewise_linear(&pairs, orientation)
            }
            HomeoDescriptor::Flip => Ok(Homeomorphism::Flip),
            HomeoDescriptor::Klift { base, k } => {
                Homeomorphism::k_lift(Homeomorphism::try_from(base.as_ref())?, *k)
            }
            HomeoDescriptor::Factor { base, k } => {
                Homeomorphism::k_factor(Homeomorphism::try_from(base.as_ref())?, *k)
            }
            HomeoDescriptor::Inverse { base } => Ok(Homeomorphism::Inverse(Box::new(
                Homeomorphism::try_from(base.as_ref())?,
            ))),
        }
    }
}

impl Homeomorphism {
    /// Descriptor for the serializable family members; `None` for maps that
    /// carry a numerically computed CDF.
    pub fn descriptor(&self) -> Option<HomeoDescriptor> {
        Some(match self {
            Homeomorphism::Rotation(angle) => HomeoDescriptor::Rotation { angle: *angle },
            Homeomorphism::Projective(p) => HomeoDescriptor::Projective { matrix: p.m },
            Homeomorphism::PiecewiseLinear(pl) => HomeoDescriptor::PiecewiseLinear {
                breakpoints: pl.breakpoints().into_iter().map(|(x, y)| [x, y]).collect(),
                orientation: pl.orientation.sign() as i8,
            },
            Homeomorphism::Flip => HomeoDescriptor::Flip,
            Homeomorphism::KLift { base, k } => HomeoDescriptor::Klift {
                base: Box::new(base.descriptor()?),
                k: *k,
            },
            Homeomorphism::KFactor { base, k } => HomeoDescriptor::Factor {
                base: Box::new(base.descriptor()?),
                k: *k,
            },
            Homeomorphism::Inverse(base) => HomeoDescriptor::Inverse {
                base: Box::new(base.descriptor()?),
            },
            Homeomorphism::CdfConjugate { .. } => return None,
        })
    }
}
