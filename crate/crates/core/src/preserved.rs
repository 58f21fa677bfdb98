//! Distances preserved simultaneously by every map of an IFS, and the
//! quotient system obtained when `1/k` is among them.

use crate::circle::{wrap01, CircleDistance, CirclePoint};
use crate::error::{Error, Result};
use crate::homeo::{CdfMap, CircleMap, Homeomorphism};
use crate::ifs::IfsWithProbabilities;
use crate::measure::{support_and_atom_audit, GridMeasure};
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use std::io::{self, Write};

pub const DEFAULT_S_GRID: usize = 1024;
pub const DEFAULT_X_SAMPLES: usize = 512;
pub const DEFAULT_TOL_EUCLIDEAN: f64 = 1e-4;
pub const DEFAULT_TOL_RHO: f64 = 1e-3;
pub const K_MAX: u32 = 64;

/// Single-cell mass at or above which a grid measure counts as atomic.
pub const ATOM_THRESHOLD: f64 = 0.05;
/// Window width for the full-support check.
pub const SUPPORT_WINDOW: f64 = 1.0 / 64.0;

/// Fraction of the distance grid that must be preserved to call every
/// distance preserved.
const ALL_DISTANCES_FRACTION: f64 = 0.99;
const SEMICONJUGACY_TOL: f64 = 1e-8;
const SEMICONJUGACY_SAMPLES: usize = 1000;

/// A metric on the circle: the standard `d`, or `ρ(x, y) = d(Φ(x), Φ(y))`
/// for the CDF `Φ` of a nonatomic, fully supported measure.
#[derive(Debug, Clone)]
pub enum Metric {
    Euclidean,
    Rho(CdfMap),
}

impl Metric {
    /// Builds `ρ` from a grid measure, rejecting atomic or gappy measures.
    pub fn rho_of(mu: &GridMeasure) -> Result<Self> {
        let audit = support_and_atom_audit(mu, SUPPORT_WINDOW);
        if !audit.is_nonatomic(ATOM_THRESHOLD) {
            return Err(Error::MetricDegenerate(format!(
                "cell mass {} reaches the atom threshold {ATOM_THRESHOLD}",
                audit.max_cell_mass
            )));
        }
        if !audit.has_full_support() {
            return Err(Error::MetricDegenerate(format!(
                "a window of width {} carries no mass",
                audit.window
            )));
        }
        Ok(Metric::Rho(mu.cdf_map()?))
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean_d",
            Metric::Rho(_) => "rho_of(mu_minus)",
        }
    }

    #[inline]
    pub fn dist(&self, x: CirclePoint, y: CirclePoint) -> f64 {
        match self {
            Metric::Euclidean => x.dist(y).value(),
            Metric::Rho(phi) => phi.rho(x, y),
        }
    }

    /// The point at distance `s` counterclockwise from `x`.
    #[inline]
    pub fn point_at(&self, x: CirclePoint, s: f64) -> CirclePoint {
        match self {
            Metric::Euclidean => x.rotate(s),
            Metric::Rho(phi) => phi.apply_inverse(phi.apply(x).rotate(s)),
        }
    }
}

/// `E(s) = max_{j, x} |ρ(f_j x, f_j y_s(x)) - s|` over `x = i / x_samples`.
pub fn preservation_defect(
    ifs: &IfsWithProbabilities,
    metric: &Metric,
    s: CircleDistance,
    x_samples: usize,
) -> f64 {
    let s = s.value();
    let n = x_samples.max(1);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let x = CirclePoint::new(i as f64 / n as f64);
        let y = metric.point_at(x, s);
        for f in ifs.maps() {
            let d = metric.dist(f.evaluate(x), f.evaluate(y));
            worst = worst.max((d - s).abs());
        }
    }
    worst
}

/// Either `{0, 1/k, ..., ⌊k/2⌋/k}` or the whole interval `[0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreservedSet {
    Finite(u32),
    AllDistances,
}

impl PreservedSet {
    /// Elements of a finite set; empty for `AllDistances`.
    pub fn elements(&self) -> Vec<f64> {
        match *self {
            PreservedSet::Finite(k) => (0..=k / 2).map(|i| i as f64 / k as f64).collect(),
            PreservedSet::AllDistances => Vec::new(),
        }
    }
}

impl Serialize for PreservedSet {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PreservedSet::Finite(k) => ser.serialize_u32(*k),
            PreservedSet::AllDistances => ser.serialize_str("all"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PreservedDistanceReport {
    pub metric: &'static str,
    pub tol: f64,
    #[serde(rename = "k")]
    pub estimate: PreservedSet,
    pub s_grid: usize,
    pub x_samples: usize,
    pub oplus_closed: bool,
    /// `(s, E(s))` pairs; exported separately as CSV.
    #[serde(skip)]
    pub defect_curve: Vec<(f64, f64)>,
}

impl PreservedDistanceReport {
    pub fn write_defect_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "s,defect")?;
        for (s, e) in &self.defect_curve {
            writeln!(out, "{s},{e}")?;
        }
        Ok(())
    }
}

/// Samples the defect on `s = i / (2 s_grid)` and fits the preserved set.
pub fn estimate_l(
    ifs: &IfsWithProbabilities,
    metric: &Metric,
    s_grid: usize,
    x_samples: usize,
    tol: f64,
) -> Result<PreservedDistanceReport> {
    if s_grid < 2 {
        return Err(Error::InvalidArgument(format!("s_grid must be >= 2, got {s_grid}")));
    }
    let step = 0.5 / s_grid as f64;
    let defect = |s: f64| preservation_defect(ifs, metric, CircleDistance::new(s), x_samples);
    let defect_curve: Vec<(f64, f64)> = (0..=s_grid)
        .into_par_iter()
        .map(|i| {
            let s = i as f64 * step;
            (s, defect(s))
        })
        .collect();
    let low: Vec<f64> = defect_curve
        .iter()
        .filter(|(_, e)| *e < tol)
        .map(|(s, _)| *s)
        .collect();

    let report = |estimate, oplus_closed| PreservedDistanceReport {
        metric: metric.tag(),
        tol,
        estimate,
        s_grid,
        x_samples,
        oplus_closed,
        defect_curve: defect_curve.clone(),
    };

    if low.len() as f64 >= ALL_DISTANCES_FRACTION * defect_curve.len() as f64 {
        return Ok(report(PreservedSet::AllDistances, true));
    }

    let near_multiple = |s: f64, k: u32| {
        let nearest = (s * k as f64).round() / k as f64;
        (s - nearest).abs() <= 2.0 * step + 1e-12
    };
    // 1/m lies off the s grid for most m, so probe it directly
    let unit_preserved: Vec<bool> = (1..=K_MAX)
        .into_par_iter()
        .map(|m| defect(1.0 / m as f64) < tol)
        .collect();
    for k in 1..=K_MAX {
        let divisors_only = (1..=K_MAX).all(|m| !unit_preserved[m as usize - 1] || k % m == 0);
        if !divisors_only || !low.iter().all(|&s| near_multiple(s, k)) {
            continue;
        }
        if (0..=k / 2).all(|i| defect(i as f64 / k as f64) < tol) {
            let set = PreservedSet::Finite(k);
            let elements = set.elements();
            let closed = elements.iter().all(|&a| {
                elements.iter().all(|&b| {
                    let sum = CircleDistance::new(a).oplus(CircleDistance::new(b));
                    defect(sum.value()) < tol
                })
            });
            return Ok(report(set, closed));
        }
    }
    let mut offending: Vec<f64> = low.into_iter().filter(|&s| !near_multiple(s, 1)).collect();
    offending.extend(
        (2..=K_MAX)
            .filter(|&m| unit_preserved[m as usize - 1])
            .map(|m| 1.0 / m as f64),
    );
    Err(Error::StructureMismatch {
        k_max: K_MAX,
        offending,
    })
}

/// `f ↦ k·f(x/k) mod 1` for every map, after checking that `1/k` is
/// preserved in the standard metric.
pub fn factor_ifs(ifs: &IfsWithProbabilities, k: u32, tol: f64) -> Result<IfsWithProbabilities> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k == 1 {
        return Ok(ifs.clone());
    }
    let d = preservation_defect(
        ifs,
        &Metric::Euclidean,
        CircleDistance::new(1.0 / k as f64),
        DEFAULT_X_SAMPLES,
    );
    if !(d < tol) {
        return Err(Error::NotEquivariant { k, defect: d, tol });
    }
    let kf = k as f64;
    let factor = ifs.map_each(|f| match f {
        Homeomorphism::Rotation(s) => Homeomorphism::Rotation(wrap01(kf * s)),
        Homeomorphism::KLift { base, k: lk } if *lk == k => (**base).clone(),
        other => Homeomorphism::KFactor {
            base: Box::new(other.clone()),
            k,
        },
    })?;
    let project = |x: CirclePoint| CirclePoint::new(kf * x.value());
    for i in 0..SEMICONJUGACY_SAMPLES {
        let x = CirclePoint::new((i as f64 + 0.5) / SEMICONJUGACY_SAMPLES as f64);
        for (f, g) in ifs.maps().iter().zip(factor.maps()) {
            let defect = project(f.evaluate(x)).dist(g.evaluate(project(x))).value();
            if !(defect < SEMICONJUGACY_TOL) {
                return Err(Error::NotEquivariant {
                    k,
                    defect,
                    tol: SEMICONJUGACY_TOL,
                });
            }
        }
    }
    Ok(factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homeo::Orientation;

    fn rot(s: f64) -> Homeomorphism {
        Homeomorphism::rotation(s)
    }

    fn diag() -> Homeomorphism {
        Homeomorphism::projective(2.0, 0.0, 0.0, 0.5).unwrap()
    }

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    fn s_pair() -> IfsWithProbabilities {
        IfsWithProbabilities::uniform(vec![rot(2f64.sqrt() - 1.0), diag()]).unwrap()
    }

    fn k2() -> IfsWithProbabilities {
        s_pair()
            .map_each(|f| Homeomorphism::k_lift(f.clone(), 2).unwrap())
            .unwrap()
    }

    #[test]
    fn defect_examples() {
        let r = IfsWithProbabilities::uniform(vec![rot(0.1), rot(0.7)]).unwrap();
        assert!(preservation_defect(&r, &Metric::Euclidean, CircleDistance::new(0.3), 64) < 1e-12);
        let e = preservation_defect(&s_pair(), &Metric::Euclidean, CircleDistance::new(0.25), 512);
        // oracle at x = 0: the pair (0, 0.25) maps to (0, atan(1/4)/π)
        let at_zero = 0.25 - (0.25f64).atan() / std::f64::consts::PI;
        assert!(e >= at_zero - 1e-12 && e > 0.05);
        let half = preservation_defect(&k2(), &Metric::Euclidean, CircleDistance::new(0.5), 512);
        assert!(half < 1e-9);
    }

    #[test]
    fn estimate_examples() {
        let r = IfsWithProbabilities::uniform(vec![rot(2f64.sqrt() - 1.0), rot(golden())]).unwrap();
        let rep = estimate_l(&r, &Metric::Euclidean, 256, 128, 1e-4).unwrap();
        assert_eq!(rep.estimate, PreservedSet::AllDistances);
        let rep = estimate_l(&s_pair(), &Metric::Euclidean, 1024, 512, 1e-4).unwrap();
        assert_eq!(rep.estimate, PreservedSet::Finite(1));
        assert!(rep.defect_curve[1..].iter().all(|(_, e)| *e >= 1e-4));
        let rep = estimate_l(&k2(), &Metric::Euclidean, 1024, 512, 1e-4).unwrap();
        assert_eq!(rep.estimate, PreservedSet::Finite(2));
        assert!(rep.oplus_closed);
        assert_eq!(rep.estimate.elements(), vec![0.0, 0.5]);
    }

    #[test]
    fn estimate_detects_higher_k_and_agrees_with_inverse() {
        let k3 = s_pair()
            .map_each(|f| Homeomorphism::k_lift(f.clone(), 3).unwrap())
            .unwrap();
        let fwd = estimate_l(&k3, &Metric::Euclidean, 512, 256, 1e-4).unwrap();
        let inv = estimate_l(&k3.inverse_ifs(), &Metric::Euclidean, 512, 256, 1e-4).unwrap();
        assert_eq!(fwd.estimate, PreservedSet::Finite(3));
        assert_eq!(inv.estimate, fwd.estimate);
    }

    #[test]
    fn loose_tolerance_fits_no_lattice() {
        let err = estimate_l(&s_pair(), &Metric::Euclidean, 256, 64, 0.2).unwrap_err();
        let Error::StructureMismatch { k_max, offending } = err else {
            panic!("expected a structure mismatch");
        };
        assert_eq!(k_max, K_MAX);
        assert!(!offending.is_empty());
    }

    #[test]
    fn report_serialization() {
        let rep = estimate_l(&k2(), &Metric::Euclidean, 256, 128, 1e-4).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["k"], 2);
        assert_eq!(json["metric"], "euclidean_d");
        let r = IfsWithProbabilities::uniform(vec![rot(0.1)]).unwrap();
        let rep = estimate_l(&r, &Metric::Euclidean, 256, 16, 1e-4).unwrap();
        assert_eq!(serde_json::to_value(&rep).unwrap()["k"], "all");
        let mut buf = Vec::new();
        rep.write_defect_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("s,defect\n0,0\n"));
    }

    #[test]
    fn rho_metric_rejects_atoms() {
        let atom = GridMeasure::dirac(CirclePoint::new(0.3), 256).unwrap();
        assert!(matches!(Metric::rho_of(&atom), Err(Error::MetricDegenerate(_))));
        let leb = GridMeasure::lebesgue(256).unwrap();
        let rho = Metric::rho_of(&leb).unwrap();
        for (x, y) in [(0.1, 0.9), (0.3, 0.45), (0.0, 0.5)] {
            let (x, y) = (CirclePoint::new(x), CirclePoint::new(y));
            assert!((rho.dist(x, y) - x.dist(y).value()).abs() < 1e-12);
        }
    }

    #[test]
    fn factor_examples() {
        let k2 = k2();
        let factor = factor_ifs(&k2, 2, 1e-4).unwrap();
        for (g, f) in s_pair().maps().iter().zip(factor.maps()) {
            for i in 0..1000 {
                let x = CirclePoint::new(i as f64 / 1000.0);
                assert!(f.evaluate(x).dist(g.evaluate(x)).value() < 1e-8);
            }
        }
        let same = factor_ifs(&s_pair(), 1, 1e-4).unwrap();
        assert_eq!(same, s_pair());
        let r = IfsWithProbabilities::uniform(vec![rot(0.3)]).unwrap();
        let Homeomorphism::Rotation(a) = factor_ifs(&r, 3, 1e-4).unwrap().maps()[0] else {
            panic!("factor of a rotation is a rotation");
        };
        assert!((a - 0.9).abs() < 1e-12);
        assert!(matches!(factor_ifs(&s_pair(), 2, 1e-4), Err(Error::NotEquivariant { k: 2, .. })));
    }

    #[test]
    fn factor_of_generic_equivariant_map_uses_quotient_formula() {
        // the inverse of a lift is equivariant but not itself a lift
        let pl = Homeomorphism::piecewise_linear(
            &[(0.05, 0.9), (0.4, 0.6), (0.7, 0.1)],
            Orientation::Reversing,
        )
        .unwrap();
        let lifted = Homeomorphism::k_lift(pl.clone(), 2).unwrap().inverse();
        let ifs = IfsWithProbabilities::uniform(vec![lifted]).unwrap();
        let factor = factor_ifs(&ifs, 2, 1e-4).unwrap();
        let expected = pl.inverse();
        for i in 0..500 {
            let x = CirclePoint::new(i as f64 / 500.0);
            assert!(factor.map(0).evaluate(x).dist(expected.evaluate(x)).value() < 1e-9);
        }
    }
}
