use super::{pushforward, GridMeasure};
use crate::error::{Error, Result};
use crate::homeo::Homeomorphism;
use serde::{Deserialize, Serialize};

/// Circle `W₁`: `min_c ∫₀¹ |F_μ - F_ν - c|`. The optimal `c` is the median of
/// the piecewise-linear CDF difference, located by bisection, and the
/// integral is taken exactly.
pub fn wasserstein(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    if mu.grid_size() != nu.grid_size() {
        return Err(Error::InvalidArgument(format!(
            "grid sizes differ: {} vs {}",
            mu.grid_size(),
            nu.grid_size()
        )));
    }
    let diff: Vec<f64> = mu.cdf.iter().zip(&nu.cdf).map(|(a, b)| a - b).collect();
    let c = median(&diff);
    let h = 1.0 / mu.grid_size() as f64;
    let total: f64 = diff
        .windows(2)
        .map(|w| {
            let (u, v) = (w[0] - c, w[1] - c);
            if u * v >= 0.0 {
                0.5 * (u.abs() + v.abs())
            } else {
                (u * u + v * v) / (2.0 * (u.abs() + v.abs()))
            }
        })
        .sum();
    Ok(total * h)
}

/// Lebesgue median of the function linear between equally spaced knots.
fn median(knots: &[f64]) -> f64 {
    let (mut lo, mut hi) = knots
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let cells = (knots.len() - 1) as f64;
    for _ in 0..64 {
        let c = 0.5 * (lo + hi);
        if c <= lo || c >= hi {
            break;
        }
        // fraction of [0, 1] where the function lies below c
        let below: f64 = knots
            .windows(2)
            .map(|w| {
                let (a, b) = if w[0] <= w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
                if b <= c {
                    1.0
                } else if a >= c {
                    0.0
                } else {
                    (c - a) / (b - a)
                }
            })
            .sum::<f64>()
            / cells;
        if below < 0.5 {
            lo = c;
        } else {
            hi = c;
        }
    }
    0.5 * (lo + hi)
}

/// `W(μ, (R_s)_*μ)`.
pub fn s_invariance_defect(mu: &GridMeasure, s: f64) -> f64 {
    let rotated = pushforward(mu, &Homeomorphism::Rotation(s));
    wasserstein(mu, &rotated).expect("same grid")
}

/// Atom and support proxies for a grid measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureAudit {
    pub max_cell_mass: f64,
    pub min_window_mass: f64,
    /// Window width actually used, a whole number of cells.
    pub window: f64,
}

impl MeasureAudit {
    pub fn is_nonatomic(&self, atom_threshold: f64) -> bool {
        self.max_cell_mass < atom_threshold
    }

    pub fn has_full_support(&self) -> bool {
        self.min_window_mass > 0.0
    }
}

/// Largest single-cell mass and smallest mass of a circular window of
/// width `window` (rounded to whole cells, at least one).
pub fn support_and_atom_audit(mu: &GridMeasure, window: f64) -> MeasureAudit {
    let masses = mu.cell_masses();
    let g = masses.len();
    let cells = ((window * g as f64).round() as usize).clamp(1, g);
    let max_cell_mass = masses.iter().copied().fold(0.0, f64::max);
    let mut sum: f64 = masses[..cells].iter().sum();
    let mut min_window_mass = sum;
    for start in 1..g {
        sum += masses[(start + cells - 1) % g] - masses[start - 1];
        min_window_mass = min_window_mass.min(sum);
    }
    MeasureAudit {
        max_cell_mass,
        min_window_mass: min_window_mass.max(0.0),
        window: cells as f64 / g as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::CirclePoint;
    use proptest::prelude::*;

    const G: usize = 1024;

    #[test]
    fn wasserstein_examples() {
        let leb = GridMeasure::lebesgue(G).unwrap();
        assert_eq!(wasserstein(&leb, &leb).unwrap(), 0.0);
        let d0 = GridMeasure::dirac(CirclePoint::new(0.0), G).unwrap();
        let dh = GridMeasure::dirac(CirclePoint::new(0.5), G).unwrap();
        assert!((wasserstein(&d0, &dh).unwrap() - 0.5).abs() <= 1.0 / G as f64);
        let rotated = pushforward(&leb, &Homeomorphism::Rotation(0.2345));
        assert!(wasserstein(&leb, &rotated).unwrap() < 1e-12);
    }

    #[test]
    fn wasserstein_between_diracs_is_circle_distance() {
        for (a, b) in [(0.1, 0.3), (0.05, 0.95), (0.25, 0.75), (0.0, 0.125)] {
            let da = GridMeasure::dirac(CirclePoint::new(a), G).unwrap();
            let db = GridMeasure::dirac(CirclePoint::new(b), G).unwrap();
            let d = CirclePoint::new(a).dist(CirclePoint::new(b)).value();
            assert!((wasserstein(&da, &db).unwrap() - d).abs() <= 1.0 / G as f64);
        }
    }

    #[test]
    fn invariance_defect_examples() {
        let leb = GridMeasure::lebesgue(G).unwrap();
        assert!(s_invariance_defect(&leb, 0.37) < 1e-12);
        let d = GridMeasure::dirac(CirclePoint::new(0.2), G).unwrap();
        assert!((s_invariance_defect(&d, 0.5) - 0.5).abs() < 2.0 / G as f64);
    }

    #[test]
    fn audit_examples() {
        let leb = GridMeasure::lebesgue(G).unwrap();
        let a = support_and_atom_audit(&leb, 1.0 / 64.0);
        assert!((a.max_cell_mass - 1.0 / G as f64).abs() < 1e-15);
        assert!((a.min_window_mass - 1.0 / 64.0).abs() < 1e-12);
        let d = GridMeasure::dirac(CirclePoint::new(0.7), G).unwrap();
        let a = support_and_atom_audit(&d, 1.0 / 64.0);
        assert_eq!(a.max_cell_mass, 1.0);
        assert_eq!(a.min_window_mass, 0.0);
        assert!(!a.is_nonatomic(0.01));
    }

    proptest! {
        #[test]
        fn wasserstein_is_a_metric(
            a in prop::collection::vec(0.01..1.0f64, 64),
            b in prop::collection::vec(0.01..1.0f64, 64),
            c in prop::collection::vec(0.01..1.0f64, 64),
        ) {
            let [a, b, c] = [a, b, c].map(|m| GridMeasure::from_cell_masses(&m).unwrap());
            let ab = wasserstein(&a, &b).unwrap();
            prop_assert!((ab - wasserstein(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!(ab <= wasserstein(&a, &c).unwrap() + wasserstein(&c, &b).unwrap() + 1e-12);
            prop_assert!(ab <= 0.5 + 1e-12);
        }
    }
}
