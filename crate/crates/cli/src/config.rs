use circlesync::analysis::{AnalysisConfig, FiberConfig, SyncConfig};
use circlesync::ifs::OrbitMode;
use circlesync::measure::DEFAULT_GRID_SIZE;
use circlesync::preserved::{
    DEFAULT_S_GRID, DEFAULT_TOL_EUCLIDEAN, DEFAULT_TOL_RHO, DEFAULT_X_SAMPLES,
};
use circlesync::{IfsDescriptor, IfsWithProbabilities};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    /// The standard circle distance.
    #[default]
    Euclidean,
    /// `ρ` built from the stationary measure of the inverse system.
    Rho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: 1e-8,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreservedSection {
    pub s_grid: usize,
    pub x_samples: usize,
    /// Defaults to the metric's own tolerance when absent.
    pub tol: Option<f64>,
}

impl Default for PreservedSection {
    fn default() -> Self {
        PreservedSection {
            s_grid: DEFAULT_S_GRID,
            x_samples: DEFAULT_X_SAMPLES,
            tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    pub structure_tol: f64,
    pub invariance_tol: f64,
    pub certificate_grid: usize,
    pub audit_pairs: usize,
}

impl Default for ClassifySection {
    fn default() -> Self {
        let a = AnalysisConfig::default();
        ClassifySection {
            structure_tol: a.structure_tol,
            invariance_tol: a.invariance_tol,
            certificate_grid: a.certificate_grid,
            audit_pairs: a.audit_pairs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FibersSection {
    /// Independent streams averaged into `μ₋`.
    pub seeds: usize,
    /// Number of atoms per fiber; detected from the preserved set when absent.
    pub k: Option<u32>,
    pub samples: usize,
    pub horizon: usize,
    pub cluster_tol: f64,
    pub contraction_tol: f64,
    pub sampler_tol: f64,
}

impl Default for FibersSection {
    fn default() -> Self {
        let f = FiberConfig::default();
        FibersSection {
            seeds: 100,
            k: None,
            samples: 200,
            horizon: f.horizon,
            cluster_tol: f.cluster_tol,
            contraction_tol: f.contraction_tol,
            sampler_tol: f.sampler_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub x: f64,
    pub n: usize,
    pub mode: OrbitMode,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            x: 0.0,
            n: 1000,
            mode: OrbitMode::Forward,
        }
    }
}

/// One experiment: the system, the seed, and every numerical setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ifs: IfsDescriptor,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub metric: MetricChoice,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub preserved: PreservedSection,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub sync: SyncConfig,
    #[serde(default)]
    pub fibers: FibersSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

fn default_grid() -> usize {
    DEFAULT_GRID_SIZE
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Builds the system and checks every setting; the message names the
    /// offending key.
    pub fn validate(&self) -> Result<IfsWithProbabilities, String> {
        let ifs = IfsWithProbabilities::try_from(&self.ifs).map_err(|e| format!("ifs: {e}"))?;
        if self.grid_size < 16 || !self.grid_size.is_power_of_two() {
            return Err(format!("grid_size: {} is not a power of two >= 16", self.grid_size));
        }
        let positive = [
            ("solver.tol", self.solver.tol),
            ("classify.structure_tol", self.classify.structure_tol),
            ("classify.invariance_tol", self.classify.invariance_tol),
            ("sync.cluster_tol", self.sync.cluster_tol),
            ("fibers.cluster_tol", self.fibers.cluster_tol),
            ("fibers.contraction_tol", self.fibers.contraction_tol),
            ("fibers.sampler_tol", self.fibers.sampler_tol),
            ("preserved.tol", self.preserved.tol.unwrap_or(1.0)),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{key}: must be a positive number, got {v}"));
            }
        }
        let counts = [
            ("solver.max_iter", self.solver.max_iter),
            ("preserved.s_grid", self.preserved.s_grid),
            ("preserved.x_samples", self.preserved.x_samples),
            ("classify.certificate_grid", self.classify.certificate_grid),
            ("classify.audit_pairs", self.classify.audit_pairs),
            ("sync.seeds", self.sync.seeds),
            ("sync.pairs", self.sync.pairs),
            ("fibers.seeds", self.fibers.seeds),
            ("fibers.samples", self.fibers.samples),
            ("fibers.horizon", self.fibers.horizon),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(format!("{key}: must be at least 1"));
            }
        }
        if self.fibers.k == Some(0) {
            return Err("fibers.k: must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.simulate.x) {
            return Err(format!("simulate.x: {} is outside [0, 1)", self.simulate.x));
        }
        Ok(ifs)
    }

    pub fn preserved_tol(&self, metric: MetricChoice) -> f64 {
        self.preserved.tol.unwrap_or(match metric {
            MetricChoice::Euclidean => DEFAULT_TOL_EUCLIDEAN,
            MetricChoice::Rho => DEFAULT_TOL_RHO,
        })
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            seed: self.seed,
            grid_size: self.grid_size,
            solver_tol: self.solver.tol,
            solver_max_iter: self.solver.max_iter,
            s_grid: self.preserved.s_grid,
            x_samples: self.preserved.x_samples,
            preserved_tol: self.preserved_tol(MetricChoice::Euclidean),
            structure_tol: self.classify.structure_tol,
            invariance_tol: self.classify.invariance_tol,
            certificate_grid: self.classify.certificate_grid,
            audit_pairs: self.classify.audit_pairs,
            sync: self.sync.clone(),
        }
    }

    pub fn fiber(&self) -> FiberConfig {
        FiberConfig {
            samples: self.fibers.samples,
            horizon: self.fibers.horizon,
            cluster_tol: self.fibers.cluster_tol,
            contraction_tol: self.fibers.contraction_tol,
            sampler_tol: self.fibers.sampler_tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"ifs": {"maps": [{"type": "rotation", "angle": 0.25}]}}"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let c: ExperimentConfig = serde_json::from_str(MINIMAL).unwrap();
        assert_eq!(c.grid_size, 4096);
        assert_eq!(c.seed, 0);
        assert_eq!(c.sync, SyncConfig::default());
        assert!(c.validate().is_ok());
        assert_eq!(c.preserved_tol(MetricChoice::Rho), DEFAULT_TOL_RHO);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = r#"{"ifs": {"maps": []}, "sedd": 3}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
        let nested = r#"{"ifs": {"maps": []}, "sync": {"seeds": 3, "horizn": 4}}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(nested).is_err());
    }

    #[test]
    fn validation_names_the_key() {
        let mut c: ExperimentConfig = serde_json::from_str(MINIMAL).unwrap();
        c.grid_size = 1000;
        assert!(c.validate().unwrap_err().starts_with("grid_size"));
        c.grid_size = 1024;
        c.fibers.seeds = 0;
        assert!(c.validate().unwrap_err().starts_with("fibers.seeds"));
        let bad_probs = r#"{"ifs": {"maps": [{"type": "flip"}], "probs": [0.5]}}"#;
        let c: ExperimentConfig = serde_json::from_str(bad_probs).unwrap();
        assert!(c.validate().unwrap_err().starts_with("ifs"));
    }

    #[test]
    fn resolved_config_round_trips() {
        let c: ExperimentConfig = serde_json::from_str(MINIMAL).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), c);
    }
}
