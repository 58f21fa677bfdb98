//! The classification pipeline: change of coordinates by the CDF of the
//! inverse system's stationary measure, synchronization experiments, the
//! synchronization / factorization / invariance trichotomy, and the
//! fiberwise limit measures of reversed inverse iterates.

mod conjugate;
mod fibers;
mod sync;
mod trichotomy;

pub use conjugate::{conjugate_system, nonexpansive_audit, ConjugatedSystem, NonexpansiveAudit};
pub use fibers::{
    estimate_hatz_minus, estimate_hatz_minus_adaptive, fiber_equivariance_defect, fiber_measure,
    mu_minus_from_fibers, FiberAverage, FiberConfig, FiberMeasure, HatZ,
};
pub use sync::{
    supermartingale_diagnostic, sync_experiment, ClassFraction, SupermartingaleReport,
    SyncConfig, SynchronizationReport,
};
pub use trichotomy::{classify_trichotomy, Evidence, TrichotomyLabel, TrichotomyResult};

use crate::measure::DEFAULT_GRID_SIZE;
use crate::preserved::{DEFAULT_S_GRID, DEFAULT_TOL_EUCLIDEAN, DEFAULT_X_SAMPLES};
use serde::{Deserialize, Serialize};

/// Numerical settings shared by the pipeline stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub seed: u64,
    pub grid_size: usize,
    /// Wasserstein step at which the stationary power iteration stops.
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub s_grid: usize,
    pub x_samples: usize,
    /// Defect tolerance for preserved distances in the standard metric.
    pub preserved_tol: f64,
    /// Tolerance for the order-`k` and commutation checks of `Ψ`.
    pub structure_tol: f64,
    /// Largest `W((f_j)_* μ, μ)` accepted for the common invariant measure.
    pub invariance_tol: f64,
    pub certificate_grid: usize,
    pub audit_pairs: usize,
    pub sync: SyncConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            seed: 0,
            grid_size: DEFAULT_GRID_SIZE,
            solver_tol: 1e-8,
            solver_max_iter: 20_000,
            s_grid: DEFAULT_S_GRID,
            x_samples: DEFAULT_X_SAMPLES,
            preserved_tol: DEFAULT_TOL_EUCLIDEAN,
            structure_tol: 1e-6,
            invariance_tol: 1e-5,
            certificate_grid: crate::ifs::DEFAULT_CERTIFICATE_GRID,
            audit_pairs: 10_000,
            sync: SyncConfig::default(),
        }
    }
}
