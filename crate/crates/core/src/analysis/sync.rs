use super::conjugate::nonexpansive_audit;
use crate::circle::CirclePoint;
use crate::homeo::CircleMap;
use crate::ifs::IfsWithProbabilities;
use crate::preserved::{Metric, PreservedSet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Auxiliary tag for the initial pair of each replica.
const PAIR_TAG: u64 = 0x5359_4e43;
/// Increments of the seed-averaged distance below this are rounding noise.
const INCREMENT_FLOOR: f64 = 1e-12;
const AUDIT_PAIRS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncConfig {
    pub horizon: usize,
    pub seeds: usize,
    pub pairs: usize,
    pub cluster_tol: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            horizon: 2000,
            seeds: 200,
            pairs: 1,
            cluster_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassFraction {
    pub value: f64,
    pub fraction: f64,
}

/// Paired-increment test of `E ρ_{m+1} ≤ E ρ_m` across replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermartingaleReport {
    pub replicas: usize,
    /// `ρ̄_m` for `m = 0..=horizon`.
    #[serde(skip)]
    pub means: Vec<f64>,
    /// `max_m (Δ̄_m - 2 SE_m)`, where `Δ_m = ρ_{m+1} - ρ_m` per replica.
    pub worst_excess: f64,
    /// Step at which `worst_excess` is attained.
    pub worst_step: usize,
    /// Steps with `Δ̄_m > 2 SE_m`, ignoring increments below rounding level.
    pub violations: usize,
}

impl SupermartingaleReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }

    fn from_paths(paths: &[Vec<f64>]) -> Self {
        let replicas = paths.len();
        let steps = paths.first().map_or(0, |p| p.len());
        let n = replicas as f64;
        let means: Vec<f64> = (0..steps)
            .map(|m| paths.iter().map(|p| p[m]).sum::<f64>() / n)
            .collect();
        let mut worst_excess = f64::NEG_INFINITY;
        let mut worst_step = 0;
        let mut violations = 0;
        for m in 0..steps.saturating_sub(1) {
            let inc: Vec<f64> = paths.iter().map(|p| p[m + 1] - p[m]).collect();
            let mean = inc.iter().sum::<f64>() / n;
            let var = if replicas > 1 {
                inc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let excess = mean - 2.0 * (var / n).sqrt();
            if excess > worst_excess {
                worst_excess = excess;
                worst_step = m;
            }
            if excess > 0.0 && mean > INCREMENT_FLOOR {
                violations += 1;
            }
        }
        SupermartingaleReport {
            replicas,
            means,
            worst_excess,
            worst_step,
            violations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynchronizationReport {
    pub metric: &'static str,
    pub preserved: PreservedSet,
    /// Terminal distances, replica-major.
    #[serde(skip)]
    pub limit_samples: Vec<f64>,
    /// Initial pairs matching `limit_samples`.
    #[serde(skip)]
    pub initial_pairs: Vec<(CirclePoint, CirclePoint)>,
    /// Share of samples within `cluster_tol` of each element of `L`.
    pub assignment: Vec<ClassFraction>,
    pub unassigned: f64,
    pub n_used: usize,
    pub seeds_used: usize,
    pub pairs_per_seed: usize,
    pub cluster_tol: f64,
    pub audit_max_defect: f64,
    pub supermartingale: SupermartingaleReport,
}

impl SynchronizationReport {
    pub fn write_samples_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "replica,pair,x,y,distance")?;
        let pairs = self.pairs_per_seed.max(1);
        for (i, (d, (x, y))) in self.limit_samples.iter().zip(&self.initial_pairs).enumerate() {
            writeln!(out, "{},{},{},{},{}", i / pairs, i % pairs, x.value(), y.value(), d)?;
        }
        Ok(())
    }
}

/// Distance path `ρ(Z_m^x, Z_m^y)` for `m = 0..=n`.
fn distance_path(
    ifs: &IfsWithProbabilities,
    metric: &Metric,
    x: CirclePoint,
    y: CirclePoint,
    omega: &crate::ifs::SymbolStream,
    n: usize,
) -> Vec<f64> {
    let (mut x, mut y) = (x, y);
    let mut path = Vec::with_capacity(n + 1);
    path.push(metric.dist(x, y));
    for k in 0..n as u64 {
        let f = ifs.map(omega.symbol(k));
        x = f.evaluate(x);
        y = f.evaluate(y);
        path.push(metric.dist(x, y));
    }
    path
}

/// Runs `seeds × pairs` coupled trajectory pairs to `horizon` and assigns
/// each terminal distance to the nearest element of `preserved`.
pub fn sync_experiment(
    ifs: &IfsWithProbabilities,
    metric: &Metric,
    preserved: PreservedSet,
    config: &SyncConfig,
    seed: u64,
) -> SynchronizationReport {
    let audit = nonexpansive_audit(ifs, metric, AUDIT_PAIRS, seed);
    let slack = match metric {
        Metric::Euclidean => INCREMENT_FLOOR,
        Metric::Rho(phi) => 5.0 / phi.grid_size() as f64,
    };
    if audit.max_defect > slack {
        log::warn!(
            "metric {} is not non-expansive on average (defect {:e})",
            metric.tag(),
            audit.max_defect
        );
    }
    let pairs = config.pairs.max(1);
    let runs: Vec<((CirclePoint, CirclePoint), Vec<f64>)> = (0..config.seeds as u64)
        .into_par_iter()
        .flat_map_iter(|replica| {
            let omega = ifs.symbol_stream(seed, replica);
            let mut rng = omega.auxiliary(PAIR_TAG);
            (0..pairs)
                .map(|_| {
                    let x = CirclePoint::new(rng.next_f64());
                    let y = CirclePoint::new(rng.next_f64());
                    ((x, y), distance_path(ifs, metric, x, y, &omega, config.horizon))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let supermartingale =
        SupermartingaleReport::from_paths(&runs.iter().map(|r| r.1.clone()).collect::<Vec<_>>());
    let limit_samples: Vec<f64> = runs.iter().map(|r| *r.1.last().unwrap()).collect();
    let initial_pairs = runs.iter().map(|r| r.0).collect();
    let total = limit_samples.len().max(1) as f64;
    let assignment: Vec<ClassFraction> = preserved
        .elements()
        .into_iter()
        .map(|value| ClassFraction {
            value,
            fraction: limit_samples
                .iter()
                .filter(|&&d| (d - value).abs() <= config.cluster_tol)
                .count() as f64
                / total,
        })
        .collect();
    let unassigned = 1.0 - assignment.iter().map(|c| c.fraction).sum::<f64>();
    SynchronizationReport {
        metric: metric.tag(),
        preserved,
        limit_samples,
        initial_pairs,
        assignment,
        unassigned: unassigned.max(0.0),
        n_used: config.horizon,
        seeds_used: config.seeds,
        pairs_per_seed: pairs,
        cluster_tol: config.cluster_tol,
        audit_max_defect: audit.max_defect,
        supermartingale,
    }
}

/// Supermartingale check for one fixed pair `(x, y)` over `replicas`
/// independent streams.
pub fn supermartingale_diagnostic(
    ifs: &IfsWithProbabilities,
    metric: &Metric,
    x: CirclePoint,
    y: CirclePoint,
    horizon: usize,
    replicas: usize,
    seed: u64,
) -> SupermartingaleReport {
    let paths: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|replica| distance_path(ifs, metric, x, y, &ifs.symbol_stream(seed, replica), horizon))
        .collect();
    SupermartingaleReport::from_paths(&paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homeo::Homeomorphism;

    fn s_pair() -> IfsWithProbabilities {
        IfsWithProbabilities::uniform(vec![
            Homeomorphism::rotation(2f64.sqrt() - 1.0),
            Homeomorphism::projective(2.0, 0.0, 0.0, 0.5).unwrap(),
        ])
        .unwrap()
    }

    fn small() -> SyncConfig {
        SyncConfig {
            horizon: 1000,
            seeds: 50,
            ..SyncConfig::default()
        }
    }

    #[test]
    fn rotation_keeps_every_distance() {
        let r = IfsWithProbabilities::uniform(vec![Homeomorphism::rotation(2f64.sqrt() - 1.0)]).unwrap();
        let rep = sync_experiment(&r, &Metric::Euclidean, PreservedSet::AllDistances, &small(), 3);
        assert!(rep.assignment.is_empty());
        assert_eq!(rep.unassigned, 1.0);
        for ((x, y), d) in rep.initial_pairs.iter().zip(&rep.limit_samples) {
            assert!((x.dist(*y).value() - d).abs() < 1e-9);
        }
        let spread = rep.limit_samples.iter().fold(0.0f64, |m, d| m.max(*d))
            - rep.limit_samples.iter().fold(1.0f64, |m, d| m.min(*d));
        assert!(spread > 0.2);
        assert!(rep.supermartingale.holds());
    }

    #[test]
    fn pair_synchronizes() {
        let rep = sync_experiment(&s_pair(), &Metric::Euclidean, PreservedSet::Finite(1), &small(), 0);
        assert_eq!(rep.limit_samples.len(), 50);
        let close = rep.limit_samples.iter().filter(|d| **d < 1e-4).count();
        assert!(close >= 49, "{close}");
        assert!(rep.assignment[0].fraction >= 0.98);
        assert!(rep.assignment.iter().map(|c| c.fraction).sum::<f64>() + rep.unassigned <= 1.0 + 1e-12);
    }

    #[test]
    fn experiment_is_deterministic() {
        let a = sync_experiment(&s_pair(), &Metric::Euclidean, PreservedSet::Finite(1), &small(), 9);
        let b = sync_experiment(&s_pair(), &Metric::Euclidean, PreservedSet::Finite(1), &small(), 9);
        assert_eq!(a.limit_samples, b.limit_samples);
        let mut csv = Vec::new();
        a.write_samples_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("replica,pair,x,y,distance\n"));
        assert_eq!(text.lines().count(), 51);
    }

    #[test]
    fn increment_test_flags_growth() {
        let growing: Vec<Vec<f64>> = (0..20).map(|i| vec![0.1, 0.2 + 1e-3 * i as f64]).collect();
        let rep = SupermartingaleReport::from_paths(&growing);
        assert_eq!(rep.violations, 1);
        let shrinking: Vec<Vec<f64>> = (0..20).map(|i| vec![0.3, 0.2 - 1e-3 * i as f64]).collect();
        assert!(SupermartingaleReport::from_paths(&shrinking).holds());
    }
}
