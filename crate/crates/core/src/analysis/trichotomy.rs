use super::conjugate::{conjugate_system, nonexpansive_audit, NonexpansiveAudit};
use super::sync::{sync_experiment, SynchronizationReport};
use super::AnalysisConfig;
use crate::circle::CirclePoint;
use crate::error::{Error, Result};
use crate::homeo::{CircleMap, ConjugationDirection, Homeomorphism, Orientation};
use crate::ifs::{IfsWithProbabilities, MinimalityCertificate};
use crate::measure::{pushforward, wasserstein, GridMeasure};
use crate::preserved::{estimate_l, factor_ifs, Metric, PreservedDistanceReport, PreservedSet};
use serde::Serialize;

const CHECK_SAMPLES: usize = 1000;
/// Largest share of coupled pairs allowed to end away from the fitted set.
const SYNC_UNASSIGNED_MAX: f64 = 0.01;

#[derive(Debug, Clone)]
pub enum TrichotomyLabel {
    Synchronization,
    /// `psi` has order `k` and commutes with every map.
    Factorization { k: u32, psi: Homeomorphism },
    /// `common_measure` is invariant under every map separately.
    Invariance { common_measure: GridMeasure },
}

impl TrichotomyLabel {
    pub fn name(&self) -> &'static str {
        match self {
            TrichotomyLabel::Synchronization => "synchronization",
            TrichotomyLabel::Factorization { .. } => "factorization",
            TrichotomyLabel::Invariance { .. } => "invariance",
        }
    }

    pub fn k(&self) -> Option<u32> {
        match self {
            TrichotomyLabel::Factorization { k, .. } => Some(*k),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Evidence {
    pub certificate: MinimalityCertificate,
    pub solver_iterations: usize,
    pub solver_residual: f64,
    pub conjugacy_defect: f64,
    pub audit: NonexpansiveAudit,
    pub preserved: PreservedDistanceReport,
    pub sync: SynchronizationReport,
    /// `max_x d(Ψ^k x, x)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_order_defect: Option<f64>,
    /// `max_{j,x} d(Ψ(f_j x), f_j(Ψ^{±1} x))`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_commutation_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<PreservedDistanceReport>,
    /// `W((f_j)_* μ, μ)` per map.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub invariance_residuals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrichotomyResult {
    #[serde(serialize_with = "serialize_label")]
    pub label: TrichotomyLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    pub seed: u64,
    pub evidence: Evidence,
}

fn serialize_label<S: serde::Serializer>(
    label: &TrichotomyLabel,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(label.name())
}

/// `max_x d(h(x), h'(x))` over equispaced sample points.
fn sup_distance(a: impl Fn(CirclePoint) -> CirclePoint, b: impl Fn(CirclePoint) -> CirclePoint) -> f64 {
    (0..CHECK_SAMPLES)
        .map(|i| {
            let x = CirclePoint::new((i as f64 + 0.5) / CHECK_SAMPLES as f64);
            a(x).dist(b(x)).value()
        })
        .fold(0.0, f64::max)
}

fn inconclusive(reason: String) -> Error {
    Error::Inconclusive(Box::new(Error::InvalidArgument(reason)))
}

/// Conjugates by `Φ₋`, fits the preserved set of `G` in the standard metric
/// and returns the matching case together with the checks that support it.
pub fn classify_trichotomy(ifs: &IfsWithProbabilities, config: &AnalysisConfig) -> Result<TrichotomyResult> {
    let conj = conjugate_system(ifs, config)?;
    let g = &conj.conjugated;
    let preserved = match estimate_l(g, &Metric::Euclidean, config.s_grid, config.x_samples, config.preserved_tol) {
        Ok(report) => report,
        Err(e @ Error::StructureMismatch { .. }) => return Err(Error::Inconclusive(Box::new(e))),
        Err(e) => return Err(e),
    };
    let audit = nonexpansive_audit(g, &Metric::Euclidean, config.audit_pairs, config.seed);
    let sync = sync_experiment(g, &Metric::Euclidean, preserved.estimate, &config.sync, config.seed);
    let mut evidence = Evidence {
        certificate: conj.certificate,
        solver_iterations: conj.solver_iterations,
        solver_residual: conj.solver_residual,
        conjugacy_defect: conj.conjugacy_defect(CHECK_SAMPLES),
        audit,
        preserved,
        sync,
        psi_order_defect: None,
        psi_commutation_defect: None,
        factor: None,
        invariance_residuals: Vec::new(),
    };
    let label = match evidence.preserved.estimate {
        PreservedSet::Finite(1) => {
            if evidence.sync.unassigned > SYNC_UNASSIGNED_MAX {
                return Err(inconclusive(format!(
                    "{} of coupled pairs did not synchronize",
                    evidence.sync.unassigned
                )));
            }
            TrichotomyLabel::Synchronization
        }
        PreservedSet::Finite(k) => {
            let psi = Homeomorphism::cdf_conjugate(
                conj.phi_minus.clone(),
                Homeomorphism::rotation(1.0 / k as f64),
                ConjugationDirection::Inverse,
            );
            let psi_inv = psi.inverse();
            let order = sup_distance(
                |x| (0..k).fold(x, |y, _| psi.evaluate(y)),
                |x| x,
            );
            let commutation = ifs
                .maps()
                .iter()
                .map(|f| {
                    let twisted = match f.orientation() {
                        Orientation::Preserving => &psi,
                        Orientation::Reversing => &psi_inv,
                    };
                    sup_distance(|x| psi.evaluate(f.evaluate(x)), |x| f.evaluate(twisted.evaluate(x)))
                })
                .fold(0.0, f64::max);
            evidence.psi_order_defect = Some(order);
            evidence.psi_commutation_defect = Some(commutation);
            if !(order < config.structure_tol && commutation < config.structure_tol) {
                return Err(inconclusive(format!(
                    "order-{k} map fails its checks (order {order:e}, commutation {commutation:e})"
                )));
            }
            let factor = factor_ifs(g, k, config.preserved_tol)?;
            let factor_report =
                estimate_l(&factor, &Metric::Euclidean, config.s_grid, config.x_samples, config.preserved_tol)
                    .map_err(|e| Error::Inconclusive(Box::new(e)))?;
            let factor_syncs = factor_report.estimate == PreservedSet::Finite(1);
            evidence.factor = Some(factor_report);
            if !factor_syncs {
                return Err(inconclusive(format!("the order-{k} factor does not synchronize")));
            }
            if evidence.sync.unassigned > SYNC_UNASSIGNED_MAX {
                return Err(inconclusive(format!(
                    "{} of coupled pairs ended away from the multiples of 1/{k}",
                    evidence.sync.unassigned
                )));
            }
            TrichotomyLabel::Factorization { k, psi }
        }
        PreservedSet::AllDistances => {
            // (Φ₋⁻¹)_* Lebesgue has CDF Φ₋, i.e. it is μ₋ itself
            let common = conj.mu_minus.clone();
            let residuals = ifs
                .maps()
                .iter()
                .map(|f| wasserstein(&pushforward(&common, f), &common))
                .collect::<Result<Vec<f64>>>()?;
            let worst = residuals.iter().copied().fold(0.0, f64::max);
            evidence.invariance_residuals = residuals;
            if !(worst < config.invariance_tol) {
                return Err(inconclusive(format!(
                    "common measure moves by {worst:e} under a single map"
                )));
            }
            TrichotomyLabel::Invariance { common_measure: common }
        }
    };
    Ok(TrichotomyResult {
        k: label.k(),
        label,
        seed: config.seed,
        evidence,
    })
}
