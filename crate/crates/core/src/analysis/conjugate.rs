use super::AnalysisConfig;
use crate::circle::CirclePoint;
use crate::error::{Error, Result};
use crate::homeo::{CdfMap, CircleMap, ConjugationDirection, Homeomorphism};
use crate::ifs::{minimality_certificate, IfsWithProbabilities, MinimalityCertificate, SplitMix64};
use crate::measure::{invariant_measure, wasserstein, GridMeasure};
use crate::preserved::Metric;
use serde::{Deserialize, Serialize};

/// Below this Wasserstein distance to Lebesgue, `μ₋` is taken to be Lebesgue
/// and the conjugation is the identity.
const LEBESGUE_SNAP: f64 = 1e-12;

/// `(F, p)` together with `Φ₋`, the CDF of the stationary measure `μ₋` of
/// `(F⁻¹, p)`, and `G = {Φ₋ ∘ f_j ∘ Φ₋⁻¹}`.
#[derive(Debug, Clone)]
pub struct ConjugatedSystem {
    pub original: IfsWithProbabilities,
    pub mu_minus: GridMeasure,
    pub phi_minus: CdfMap,
    pub conjugated: IfsWithProbabilities,
    pub certificate: MinimalityCertificate,
    pub solver_iterations: usize,
    pub solver_residual: f64,
}

impl ConjugatedSystem {
    /// `ρ(x, y) = d(Φ₋(x), Φ₋(y))`.
    pub fn rho(&self) -> Metric {
        Metric::Rho(self.phi_minus.clone())
    }

    /// `max_j d(g_j(Φ₋ x), Φ₋(f_j x))` over `samples` equispaced points.
    pub fn conjugacy_defect(&self, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            let x = CirclePoint::new((i as f64 + 0.5) / samples as f64);
            for (f, g) in self.original.maps().iter().zip(self.conjugated.maps()) {
                let lhs = g.evaluate(self.phi_minus.apply(x));
                let rhs = self.phi_minus.apply(f.evaluate(x));
                worst = worst.max(lhs.dist(rhs).value());
            }
        }
        worst
    }
}

/// Solves for `μ₋`, audits it, and conjugates every map by its CDF.
pub fn conjugate_system(ifs: &IfsWithProbabilities, config: &AnalysisConfig) -> Result<ConjugatedSystem> {
    let certificate = minimality_certificate(ifs, config.certificate_grid);
    if !certificate.passes() {
        log::warn!(
            "minimality certificate failed at resolution {} (forward {}, backward {})",
            certificate.grid_size,
            certificate.forward,
            certificate.backward
        );
    }
    let solved = invariant_measure(
        &ifs.inverse_ifs(),
        config.grid_size,
        config.solver_tol,
        config.solver_max_iter,
    )?;
    let mut mu_minus = solved.measure;
    let lebesgue = GridMeasure::lebesgue(config.grid_size)?;
    let is_lebesgue = wasserstein(&mu_minus, &lebesgue)? < LEBESGUE_SNAP;
    if is_lebesgue {
        mu_minus = lebesgue;
    }
    let phi_minus = match Metric::rho_of(&mu_minus) {
        Ok(Metric::Rho(phi)) => phi,
        Ok(Metric::Euclidean) => unreachable!("rho_of builds a CDF metric"),
        Err(Error::MetricDegenerate(msg)) => return Err(Error::DegenerateConjugation(msg)),
        Err(e) => return Err(e),
    };
    let conjugated = if is_lebesgue {
        ifs.clone()
    } else {
        ifs.map_each(|f| {
            Homeomorphism::cdf_conjugate(phi_minus.clone(), f.clone(), ConjugationDirection::Forward)
        })?
    };
    Ok(ConjugatedSystem {
        original: ifs.clone(),
        mu_minus,
        phi_minus,
        conjugated,
        certificate,
        solver_iterations: solved.iterations,
        solver_residual: solved.residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonexpansiveAudit {
    /// `max (Σ_j p_j ρ(f_j x, f_j y) - ρ(x, y))` over the sampled pairs.
    pub max_defect: f64,
    /// Mean of `Σ_j p_j ρ(f_j x, f_j y) / ρ(x, y)`.
    pub mean_ratio: f64,
    pub pairs: usize,
}

/// One-step average expansion of `metric` over `pair_samples` uniform random
/// pairs.
pub fn nonexpansive_audit(
    ifs: &IfsWithProbabilities,
    metric: &Metric,
    pair_samples: usize,
    seed: u64,
) -> NonexpansiveAudit {
    let mut rng = SplitMix64::from_stream(seed, 0x4155_4449_5400);
    let mut max_defect = f64::NEG_INFINITY;
    let mut ratio_sum = 0.0;
    let mut counted = 0usize;
    for _ in 0..pair_samples {
        let x = CirclePoint::new(rng.next_f64());
        let y = CirclePoint::new(rng.next_f64());
        let before = metric.dist(x, y);
        let after: f64 = ifs
            .maps()
            .iter()
            .zip(ifs.probs())
            .map(|(f, p)| p * metric.dist(f.evaluate(x), f.evaluate(y)))
            .sum();
        max_defect = max_defect.max(after - before);
        if before > 0.0 {
            ratio_sum += after / before;
            counted += 1;
        }
    }
    NonexpansiveAudit {
        max_defect,
        mean_ratio: if counted > 0 { ratio_sum / counted as f64 } else { 1.0 },
        pairs: pair_samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> AnalysisConfig {
        AnalysisConfig {
            grid_size: 1024,
            ..AnalysisConfig::default()
        }
    }

    fn s_pair() -> IfsWithProbabilities {
        IfsWithProbabilities::uniform(vec![
            Homeomorphism::rotation(2f64.sqrt() - 1.0),
            Homeomorphism::projective(2.0, 0.0, 0.0, 0.5).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn isometries_conjugate_trivially() {
        let r = IfsWithProbabilities::uniform(vec![
            Homeomorphism::rotation(2f64.sqrt() - 1.0),
            Homeomorphism::rotation((5f64.sqrt() - 1.0) / 2.0),
        ])
        .unwrap();
        let c = conjugate_system(&r, &config()).unwrap();
        assert_eq!(c.mu_minus, GridMeasure::lebesgue(1024).unwrap());
        assert_eq!(c.conjugated, r);
        let rho = c.rho();
        for (x, y) in [(0.1, 0.9), (0.2, 0.35)] {
            let (x, y) = (CirclePoint::new(x), CirclePoint::new(y));
            assert!((rho.dist(x, y) - x.dist(y).value()).abs() < 1e-12);
        }
        let audit = nonexpansive_audit(&r, &Metric::Euclidean, 1000, 0);
        assert!(audit.max_defect.abs() < 1e-12);
        assert!((audit.mean_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pair_becomes_nonexpansive_after_conjugation() {
        // the residual defect is the interpolation error of Φ₋ at the cusp
        // of μ₋ over 1/2, which shrinks like grid_size^(-1/2)
        let mut defects = Vec::new();
        for grid_size in [1024, 4096] {
            let c = conjugate_system(&s_pair(), &AnalysisConfig { grid_size, ..config() }).unwrap();
            assert!(c.certificate.passes());
            assert!(c.conjugacy_defect(1000) < 1e-6);
            let conj = nonexpansive_audit(&c.conjugated, &Metric::Euclidean, 2000, 1);
            assert!(conj.mean_ratio < 1.0);
            let rho = c.rho();
            for (x, y) in [(0.1, 0.7), (0.45, 0.52), (0.9, 0.05)] {
                let (x, y) = (CirclePoint::new(x), CirclePoint::new(y));
                for (f, g) in c.original.maps().iter().zip(c.conjugated.maps()) {
                    let lhs = rho.dist(f.evaluate(x), f.evaluate(y));
                    let rhs = g.evaluate(c.phi_minus.apply(x)).dist(g.evaluate(c.phi_minus.apply(y)));
                    assert!((lhs - rhs.value()).abs() < 1e-9);
                }
            }
            defects.push(conj.max_defect);
        }
        let raw = nonexpansive_audit(&s_pair(), &Metric::Euclidean, 2000, 1);
        assert!(raw.max_defect > 0.01);
        assert!(defects[0] < raw.max_defect / 2.0, "{defects:?}");
        assert!(defects[1] < 0.6 * defects[0], "{defects:?}");
    }

    #[test]
    fn atomic_inverse_measure_is_degenerate() {
        // a single hyperbolic map: μ₋ collapses onto a fixed point
        let ifs = IfsWithProbabilities::uniform(vec![
            Homeomorphism::projective(2.0, 0.0, 0.0, 0.5).unwrap(),
        ])
        .unwrap();
        let err = conjugate_system(&ifs, &config()).unwrap_err();
        assert!(matches!(err, Error::DegenerateConjugation(_)), "{err:?}");
    }
}
