use crate::circle::{wrap01, CirclePoint};
use crate::error::{Error, Result};
use crate::homeo::CircleMap;
use crate::ifs::{image_arc, inverse_reversed_point, IfsWithProbabilities, SymbolStream};
use crate::measure::{s_invariance_defect, support_and_atom_audit, EmpiricalMeasure, GridMeasure};
use crate::preserved::{ATOM_THRESHOLD, SUPPORT_WINDOW};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Auxiliary tag for the sampler stream of a fiber.
const FIBER_TAG: u64 = 0x4649_4245_52;
const BISECTION_STEPS: usize = 64;
const MAX_HORIZON: usize = 1 << 16;
/// At least this share of the fibers must succeed.
const MIN_SUCCESS_FRACTION: f64 = 0.9;
/// Averages over fewer fibers are flagged as low confidence.
const LOW_CONFIDENCE_SEEDS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberConfig {
    pub samples: usize,
    pub horizon: usize,
    pub cluster_tol: f64,
    pub contraction_tol: f64,
    /// Largest `1/k`-invariance defect accepted for the sampling measure.
    pub sampler_tol: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig {
            samples: 1000,
            horizon: 2000,
            cluster_tol: 1e-3,
            contraction_tol: 1e-6,
            sampler_tol: 1e-3,
        }
    }
}

/// `k · sup{y : |Z_n([0, y], ω)| → 0}` and the per-period crossings it was
/// read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HatZ {
    pub point: CirclePoint,
    /// Crossing in `[i/k, (i+1)/k)` for each period `i`.
    pub crossings: Vec<f64>,
    pub k: u32,
    pub horizon: usize,
}

/// Bisection for the jump of `y ↦ |Z_n([0, y], ω)|` from `i/k` to
/// `(i+1)/k` inside each period.
pub fn estimate_hatz_minus(
    ifs: &IfsWithProbabilities,
    omega: &SymbolStream,
    n: usize,
    k: u32,
    contraction_tol: f64,
) -> Result<HatZ> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let kf = k as f64;
    let length = |y: f64| image_arc(ifs, 0.0, y, omega, n).1;
    let mut crossings = Vec::with_capacity(k as usize);
    for i in 0..k {
        let base = i as f64 / kf;
        let threshold = (i as f64 + 0.5) / kf;
        let (mut lo, mut hi) = (base, (i as f64 + 1.0) / kf);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if length(mid) < threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let excess = length(lo) - base;
        if !(excess < contraction_tol) {
            return Err(Error::NoContraction {
                horizon: n,
                min_length: excess,
            });
        }
        crossings.push(lo);
    }
    Ok(HatZ {
        point: CirclePoint::new(kf * crossings[0]),
        crossings,
        k,
        horizon: n,
    })
}

/// Doubles the horizon from `n0` until consecutive estimates agree within
/// `cluster_tol`, up to `2¹⁶` steps.
pub fn estimate_hatz_minus_adaptive(
    ifs: &IfsWithProbabilities,
    omega: &SymbolStream,
    n0: usize,
    k: u32,
    config: &FiberConfig,
) -> Result<HatZ> {
    let mut n = n0.max(1);
    let mut prev = estimate_hatz_minus(ifs, omega, n, k, config.contraction_tol);
    while n < MAX_HORIZON {
        n = (2 * n).min(MAX_HORIZON);
        let cur = estimate_hatz_minus(ifs, omega, n, k, config.contraction_tol);
        if let (Ok(a), Ok(b)) = (&prev, &cur) {
            if a.point.dist(b.point).value() < config.cluster_tol {
                return cur;
            }
        }
        prev = cur;
    }
    if prev.is_ok() {
        log::warn!("hat-Z estimate still moving at horizon {n}");
    }
    prev
}

/// Empirical limit law of `Ẑ⁻_n(X, ω)` with `X ~ m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberMeasure {
    pub seed: u64,
    pub stream_id: u64,
    pub offset: u64,
    pub k: u32,
    pub horizon: usize,
    pub samples: usize,
    /// Cluster centers in increasing order with their sample shares.
    pub atoms: Vec<(CirclePoint, f64)>,
    pub hatz_minus: CirclePoint,
    /// Consecutive atoms are `1/k ± cluster_tol` apart.
    pub spacing_ok: bool,
    /// Every share is within three binomial standard errors of `1/k`.
    pub weights_ok: bool,
}

/// Groups sorted circle points separated by gaps of at most `tol`. Returns
/// `(center, count)` in increasing order of center.
fn cluster(points: &mut [f64], tol: f64) -> Vec<(f64, usize)> {
    points.sort_by(f64::total_cmp);
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    // start after the largest gap so no cluster straddles the cut
    let (mut cut, mut widest) = (0, 1.0 - points[n - 1] + points[0]);
    for i in 1..n {
        let gap = points[i] - points[i - 1];
        if gap > widest {
            widest = gap;
            cut = i;
        }
    }
    let mut clusters = Vec::new();
    let mut anchor = points[cut];
    let (mut offset_sum, mut count) = (0.0, 0usize);
    let mut prev = anchor;
    for step in 0..n {
        let x = points[(cut + step) % n];
        let gap = wrap01(x - prev);
        if step > 0 && gap > tol {
            clusters.push((wrap01(anchor + offset_sum / count as f64), count));
            anchor = x;
            offset_sum = 0.0;
            count = 0;
        }
        offset_sum += wrap01(x - anchor + 0.5) - 0.5;
        count += 1;
        prev = x;
    }
    clusters.push((wrap01(anchor + offset_sum / count as f64), count));
    clusters.sort_by(|a, b| a.0.total_cmp(&b.0));
    clusters
}

fn check_sampler(m: &GridMeasure, k: u32, tol: f64) -> Result<()> {
    let audit = support_and_atom_audit(m, SUPPORT_WINDOW);
    if !audit.is_nonatomic(ATOM_THRESHOLD) || !audit.has_full_support() {
        return Err(Error::InvalidSampler(format!(
            "sampling measure is atomic or gappy (max cell {}, min window {})",
            audit.max_cell_mass, audit.min_window_mass
        )));
    }
    let defect = s_invariance_defect(m, 1.0 / k as f64);
    if !(defect < tol) {
        return Err(Error::InvalidSampler(format!(
            "sampling measure moves by {defect:e} under rotation by 1/{k}"
        )));
    }
    Ok(())
}

fn fiber_unchecked(
    ifs: &IfsWithProbabilities,
    omega: &SymbolStream,
    m: &GridMeasure,
    k: u32,
    config: &FiberConfig,
) -> Result<FiberMeasure> {
    let mut rng = omega.auxiliary(FIBER_TAG);
    let mut terminal: Vec<f64> = (0..config.samples)
        .map(|_| {
            let x = m.quantile(rng.next_f64());
            inverse_reversed_point(ifs, x, omega, config.horizon).value()
        })
        .collect();
    let clusters = cluster(&mut terminal, config.cluster_tol);
    if clusters.len() != k as usize {
        return Err(Error::ClusterCountMismatch {
            expected: k as usize,
            found: clusters.len(),
        });
    }
    let kf = k as f64;
    let total = config.samples as f64;
    let atoms: Vec<(CirclePoint, f64)> = clusters
        .iter()
        .map(|&(c, count)| (CirclePoint::new(c), count as f64 / total))
        .collect();
    let spacing_ok = (0..atoms.len()).all(|i| {
        let next = atoms[(i + 1) % atoms.len()].0;
        let gap = if k == 1 { 1.0 } else { atoms[i].0.ccw_to(next) };
        (gap - 1.0 / kf).abs() <= config.cluster_tol
    });
    let sigma = ((1.0 / kf) * (1.0 - 1.0 / kf) / total).sqrt();
    let weights_ok = atoms.iter().all(|(_, w)| (w - 1.0 / kf).abs() <= 3.0 * sigma + 1e-12);
    Ok(FiberMeasure {
        seed: omega.seed(),
        stream_id: omega.stream_id(),
        offset: omega.offset(),
        k,
        horizon: config.horizon,
        samples: config.samples,
        hatz_minus: CirclePoint::new(kf * atoms[0].0.value()),
        atoms,
        spacing_ok,
        weights_ok,
    })
}

/// Pushes `samples` draws from `m` through `Ẑ⁻_n(·, ω)` and clusters the
/// terminal points into the expected `k` atoms.
pub fn fiber_measure(
    ifs: &IfsWithProbabilities,
    omega: &SymbolStream,
    m: &GridMeasure,
    k: u32,
    config: &FiberConfig,
) -> Result<FiberMeasure> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    check_sampler(m, k, config.sampler_tol)?;
    fiber_unchecked(ifs, omega, m, k, config)
}

/// `max` over the atoms of `ω` of the distance to the nearest atom of
/// `(f_{ω₁}⁻¹)_* μ_{σω}`.
pub fn fiber_equivariance_defect(
    ifs: &IfsWithProbabilities,
    omega: &SymbolStream,
    m: &GridMeasure,
    k: u32,
    config: &FiberConfig,
) -> Result<f64> {
    let here = fiber_measure(ifs, omega, m, k, config)?;
    let shifted = fiber_measure(ifs, &omega.shift(), m, k, config)?;
    let back = ifs.inverse_map(omega.symbol(0));
    let pulled: Vec<CirclePoint> = shifted.atoms.iter().map(|(a, _)| back.evaluate(*a)).collect();
    Ok(here
        .atoms
        .iter()
        .map(|(a, _)| pulled.iter().map(|b| a.dist(*b).value()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberAverage {
    #[serde(skip)]
    pub measure: GridMeasure,
    #[serde(skip)]
    pub fibers: Vec<FiberMeasure>,
    /// Stream ids whose fiber failed, with the error name.
    pub failed: Vec<(u64, &'static str)>,
    pub total: usize,
    pub low_confidence: bool,
}

/// Average of the fiber measures over `seeds` independent streams, binned on
/// a grid of `grid_size` cells.
pub fn mu_minus_from_fibers(
    ifs: &IfsWithProbabilities,
    m: &GridMeasure,
    k: u32,
    seeds: usize,
    grid_size: usize,
    config: &FiberConfig,
    seed: u64,
) -> Result<FiberAverage> {
    if k == 0 || seeds == 0 {
        return Err(Error::InvalidArgument("k and seeds must be >= 1".into()));
    }
    check_sampler(m, k, config.sampler_tol)?;
    let outcomes: Vec<(u64, Result<FiberMeasure>)> = (0..seeds as u64)
        .into_par_iter()
        .map(|id| (id, fiber_unchecked(ifs, &ifs.symbol_stream(seed, id), m, k, config)))
        .collect();
    let mut fibers = Vec::with_capacity(seeds);
    let mut failed = Vec::new();
    for (id, outcome) in outcomes {
        match outcome {
            Ok(f) => fibers.push(f),
            Err(e) => {
                log::warn!("fiber {id} failed: {e}");
                failed.push((id, e.name()));
            }
        }
    }
    if (fibers.len() as f64) < MIN_SUCCESS_FRACTION * seeds as f64 {
        return Err(Error::TooManyFailedFibers {
            failed: failed.len(),
            total: seeds,
        });
    }
    let share = 1.0 / fibers.len() as f64;
    let atoms: Vec<(CirclePoint, f64)> = fibers
        .iter()
        .flat_map(|f| f.atoms.iter().map(move |&(a, w)| (a, w * share)))
        .collect();
    let measure = EmpiricalMeasure::new(atoms)?.to_grid(grid_size)?;
    Ok(FiberAverage {
        measure,
        low_confidence: fibers.len() < LOW_CONFIDENCE_SEEDS,
        fibers,
        failed,
        total: seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homeo::Homeomorphism;
    use crate::ifs::interval_image_length;

    fn s_pair() -> IfsWithProbabilities {
        IfsWithProbabilities::uniform(vec![
            Homeomorphism::rotation(2f64.sqrt() - 1.0),
            Homeomorphism::projective(2.0, 0.0, 0.0, 0.5).unwrap(),
        ])
        .unwrap()
    }

    fn k2() -> IfsWithProbabilities {
        s_pair()
            .map_each(|f| Homeomorphism::k_lift(f.clone(), 2).unwrap())
            .unwrap()
    }

    fn small() -> FiberConfig {
        FiberConfig {
            samples: 200,
            ..FiberConfig::default()
        }
    }

    #[test]
    fn clusters_respect_the_wrap() {
        let mut pts = vec![0.9995, 0.0002, 0.0004, 0.5, 0.5003];
        let c = cluster(&mut pts, 1e-3);
        assert_eq!(c.len(), 2);
        assert!(c[0].0 < 1e-3 || c[0].0 > 0.999);
        assert_eq!(c[0].1, 3);
        assert!((c[1].0 - 0.50015).abs() < 1e-9);
    }

    #[test]
    fn hatz_matches_a_grid_scan() {
        let ifs = s_pair();
        let omega = ifs.symbol_stream(7, 0);
        let z = estimate_hatz_minus(&ifs, &omega, 2000, 1, 1e-6).unwrap();
        let p = z.point.value();
        // oracle: first grid point whose image is long
        let jump = (1..1024)
            .map(|i| i as f64 / 1024.0)
            .find(|&y| interval_image_length(&ifs, CirclePoint::new(y), &omega, 2000) > 0.5)
            .unwrap();
        assert!(p <= jump && p > jump - 1.0 / 1024.0, "{p} vs {jump}");
        let eps = 1e-9;
        assert!(interval_image_length(&ifs, CirclePoint::new(p - eps), &omega, 2000) < 1e-6);
        assert!(interval_image_length(&ifs, CirclePoint::new(p + eps), &omega, 2000) > 1.0 - 1e-3);
    }

    #[test]
    fn hatz_periods_differ_by_half() {
        let ifs = k2();
        let z = estimate_hatz_minus(&ifs, &ifs.symbol_stream(3, 1), 2000, 2, 1e-6).unwrap();
        assert!((z.crossings[1] - z.crossings[0] - 0.5).abs() < 1e-9, "{:?}", z.crossings);
        assert!((z.point.value() - wrap01(2.0 * z.crossings[0])).abs() < 1e-15);
    }

    #[test]
    fn rotations_do_not_contract() {
        let r = IfsWithProbabilities::uniform(vec![Homeomorphism::rotation(0.3), Homeomorphism::rotation(0.1)])
            .unwrap();
        let err = estimate_hatz_minus(&r, &r.symbol_stream(0, 0), 2000, 1, 1e-6).unwrap_err();
        assert!(matches!(err, Error::NoContraction { .. }));
        let err = estimate_hatz_minus_adaptive(&r, &r.symbol_stream(0, 0), 2000, 1, &small()).unwrap_err();
        assert!(matches!(err, Error::NoContraction { .. }));
    }

    #[test]
    fn pair_fiber_is_one_atom_at_hatz() {
        let ifs = s_pair();
        let omega = ifs.symbol_stream(11, 4);
        let leb = GridMeasure::lebesgue(1024).unwrap();
        let f = fiber_measure(&ifs, &omega, &leb, 1, &small()).unwrap();
        assert_eq!(f.atoms.len(), 1);
        assert_eq!(f.atoms[0].1, 1.0);
        assert!(f.spacing_ok && f.weights_ok);
        let z = estimate_hatz_minus(&ifs, &omega, 2000, 1, 1e-6).unwrap();
        assert!(f.hatz_minus.dist(z.point).value() < 1e-3);
    }

    #[test]
    fn doubled_fiber_has_two_antipodal_atoms() {
        let ifs = k2();
        let leb = GridMeasure::lebesgue(1024).unwrap();
        let omega = ifs.symbol_stream(5, 2);
        let f = fiber_measure(&ifs, &omega, &leb, 2, &small()).unwrap();
        assert_eq!(f.atoms.len(), 2);
        assert!((f.atoms[0].0.dist(f.atoms[1].0).value() - 0.5).abs() < 1e-3);
        assert!(f.spacing_ok);
        assert!(fiber_equivariance_defect(&ifs, &omega, &leb, 2, &small()).unwrap() < 1e-3);
        let err = fiber_measure(&ifs, &omega, &leb, 1, &small()).unwrap_err();
        assert!(matches!(err, Error::ClusterCountMismatch { expected: 1, found: 2 }));
    }

    #[test]
    fn atomic_sampler_is_rejected() {
        let ifs = s_pair();
        let dirac = GridMeasure::dirac(CirclePoint::new(0.3), 1024).unwrap();
        let err = fiber_measure(&ifs, &ifs.symbol_stream(0, 0), &dirac, 1, &small()).unwrap_err();
        assert!(matches!(err, Error::InvalidSampler(_)));
    }

    #[test]
    fn single_fiber_average_is_low_confidence() {
        let ifs = k2();
        let leb = GridMeasure::lebesgue(1024).unwrap();
        let avg = mu_minus_from_fibers(&ifs, &leb, 2, 1, 1024, &small(), 0).unwrap();
        assert!(avg.low_confidence);
        assert!(avg.failed.is_empty());
        let heavy = avg.measure.cell_masses().into_iter().filter(|m| *m > 0.1).count();
        assert_eq!(heavy, 2);
    }
}
