use super::{cell_of, clamp_monotone, wasserstein, EmpiricalMeasure, GridFunction, GridMeasure};
use crate::circle::{wrap01, CirclePoint};
use crate::error::{Error, Result};
use crate::homeo::{CircleMap, Orientation};
use crate::ifs::{IfsWithProbabilities, SymbolStream};
use std::collections::VecDeque;

/// Preimage arc lengths this close to 0 or 1 are snapped by continuity.
const ARC_EDGE: f64 = 1e-9;
const CESARO_WINDOW: usize = 32;

/// Preimages `f⁻¹([0, y_i])` of the knot arcs, as counterclockwise arcs
/// anchored at `f⁻¹(0)`.
#[derive(Debug, Clone)]
struct PreimageArcs {
    anchor: f64,
    /// Counterclockwise length from the anchor for preserving maps, clockwise
    /// for reversing ones.
    lengths: Vec<f64>,
    orientation: Orientation,
}

impl PreimageArcs {
    fn new<M: CircleMap + ?Sized>(f: &M, grid_size: usize) -> Self {
        let orientation = f.orientation();
        let anchor = f.evaluate_inverse(CirclePoint::ZERO).value();
        let half = grid_size / 2;
        let lengths = (0..=grid_size)
            .map(|i| {
                if i == 0 {
                    return 0.0;
                }
                if i == grid_size {
                    return 1.0;
                }
                let b = f
                    .evaluate_inverse(CirclePoint::new(i as f64 / grid_size as f64))
                    .value();
                let len = match orientation {
                    Orientation::Preserving => wrap01(b - anchor),
                    Orientation::Reversing => wrap01(anchor - b),
                };
                if i <= half && len > 1.0 - ARC_EDGE {
                    0.0
                } else if i >= half && len < ARC_EDGE {
                    1.0
                } else {
                    len
                }
            })
            .collect();
        PreimageArcs {
            anchor,
            lengths,
            orientation,
        }
    }

    #[inline]
    fn mass(&self, mu: &GridMeasure, i: usize) -> f64 {
        let len = self.lengths[i];
        match self.orientation {
            Orientation::Preserving => mu.lifted_cdf(self.anchor + len) - mu.lifted_cdf(self.anchor),
            Orientation::Reversing => mu.lifted_cdf(self.anchor) - mu.lifted_cdf(self.anchor - len),
        }
    }
}

/// The pair `(T_*, T)` on a fixed grid, with the map preimages and images of
/// the knots computed once.
///
/// For a reversing `f` the preimage of `[0, y]` is the arc from `f⁻¹(y)`
/// counterclockwise to `f⁻¹(0)`, so `F_new(y) = F̃(f⁻¹(0)) - F̃(f⁻¹(0) - ℓ)`
/// with `ℓ` the length of that arc and `F̃` the lifted CDF.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    grid_size: usize,
    probs: Vec<f64>,
    preimages: Vec<PreimageArcs>,
    images: Vec<Vec<f64>>,
}

impl TransferOperator {
    pub fn new(ifs: &IfsWithProbabilities, grid_size: usize) -> Result<Self> {
        GridMeasure::lebesgue(grid_size)?;
        let preimages = ifs
            .maps()
            .iter()
            .map(|f| PreimageArcs::new(f, grid_size))
            .collect();
        let images = ifs
            .maps()
            .iter()
            .map(|f| {
                (0..=grid_size)
                    .map(|i| f.evaluate(CirclePoint::new(i as f64 / grid_size as f64)).value())
                    .collect()
            })
            .collect();
        Ok(TransferOperator {
            grid_size,
            probs: ifs.probs().to_vec(),
            preimages,
            images,
        })
    }

    fn single<M: CircleMap + ?Sized>(f: &M, grid_size: usize) -> Self {
        TransferOperator {
            grid_size,
            probs: vec![1.0],
            preimages: vec![PreimageArcs::new(f, grid_size)],
            images: Vec::new(),
        }
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// `T_*μ = Σ p_j (f_j)_* μ`.
    pub fn apply(&self, mu: &GridMeasure) -> Result<GridMeasure> {
        if mu.grid_size() != self.grid_size {
            return Err(Error::InvalidArgument(format!(
                "measure grid {} does not match operator grid {}",
                mu.grid_size(),
                self.grid_size
            )));
        }
        let mut cdf: Vec<f64> = (0..=self.grid_size)
            .map(|i| {
                self.probs
                    .iter()
                    .zip(&self.preimages)
                    .map(|(p, arcs)| p * arcs.mass(mu, i))
                    .sum()
            })
            .collect();
        cdf[0] = 0.0;
        cdf[self.grid_size] = 1.0;
        debug_assert!(cdf.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        clamp_monotone(&mut cdf);
        Ok(GridMeasure { cdf })
    }

    /// `Th(x_i) = Σ p_j h(f_j(x_i))`.
    pub fn apply_dual(&self, h: &GridFunction) -> Result<GridFunction> {
        if h.grid_size() != self.grid_size {
            return Err(Error::InvalidArgument("grid sizes differ".into()));
        }
        let values = (0..=self.grid_size)
            .map(|i| {
                self.probs
                    .iter()
                    .zip(&self.images)
                    .map(|(p, img)| p * h.evaluate(CirclePoint::new(img[i])))
                    .sum()
            })
            .collect();
        GridFunction::new(values)
    }
}

/// `f_*μ(E) = μ(f⁻¹(E))`.
pub fn pushforward<M: CircleMap + ?Sized>(mu: &GridMeasure, f: &M) -> GridMeasure {
    TransferOperator::single(f, mu.grid_size())
        .apply(mu)
        .expect("operator built on the measure's grid")
}

pub fn transfer_apply(ifs: &IfsWithProbabilities, mu: &GridMeasure) -> Result<GridMeasure> {
    TransferOperator::new(ifs, mu.grid_size())?.apply(mu)
}

pub fn transfer_dual_apply(ifs: &IfsWithProbabilities, h: &GridFunction) -> Result<GridFunction> {
    TransferOperator::new(ifs, h.grid_size())?.apply_dual(h)
}

/// Outcome of the stationary power iteration.
#[derive(Debug, Clone)]
pub struct Stationary {
    pub measure: GridMeasure,
    pub iterations: usize,
    /// `W(T_*μ, μ)` for the returned `μ`.
    pub residual: f64,
    /// The returned measure is the average of the last iterates.
    pub averaged: bool,
    pub converged: bool,
}

/// Power iteration `μ ← T_*μ` from Lebesgue. Returns the last iterate even
/// when `max_iter` is exhausted.
pub fn solve_stationary(
    ifs: &IfsWithProbabilities,
    grid_size: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Stationary> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let op = TransferOperator::new(ifs, grid_size)?;
    let mut mu = GridMeasure::lebesgue(grid_size)?;
    let mut recent: VecDeque<GridMeasure> = VecDeque::with_capacity(CESARO_WINDOW);
    let mut steps = Vec::with_capacity(max_iter.min(1 << 16));
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        let next = op.apply(&mu)?;
        residual = wasserstein(&next, &mu)?;
        steps.push(residual);
        if residual < tol {
            log::debug!("stationary solver converged after {iter} iterations ({residual:e})");
            return Ok(Stationary {
                measure: next,
                iterations: iter,
                residual,
                averaged: false,
                converged: true,
            });
        }
        if recent.len() == CESARO_WINDOW {
            recent.pop_front();
        }
        recent.push_back(next.clone());
        mu = next;

        let stagnating = iter >= 2 * CESARO_WINDOW
            && iter % CESARO_WINDOW == 0
            && residual > 0.5 * steps[iter - 1 - CESARO_WINDOW];
        if stagnating {
            let avg = cesaro_average(&recent)?;
            let avg_residual = wasserstein(&op.apply(&avg)?, &avg)?;
            log::debug!("solver stagnating at step {residual:e}; averaged residual {avg_residual:e}");
            if avg_residual < tol {
                return Ok(Stationary {
                    measure: avg,
                    iterations: iter,
                    residual: avg_residual,
                    averaged: true,
                    converged: true,
                });
            }
        }
    }
    Ok(Stationary {
        measure: mu,
        iterations: max_iter,
        residual,
        averaged: false,
        converged: false,
    })
}

fn cesaro_average(measures: &VecDeque<GridMeasure>) -> Result<GridMeasure> {
    let n = measures.len() as f64;
    let len = measures[0].cdf.len();
    let cdf = (0..len)
        .map(|i| measures.iter().map(|m| m.cdf[i]).sum::<f64>() / n)
        .collect();
    GridMeasure::from_cdf(cdf)
}

/// Stationary measure of `(F, p)`; `NonConvergence` when `max_iter` runs out.
pub fn invariant_measure(
    ifs: &IfsWithProbabilities,
    grid_size: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Stationary> {
    let out = solve_stationary(ifs, grid_size, tol, max_iter)?;
    if out.converged {
        Ok(out)
    } else {
        log::warn!(
            "stationary solver stopped at {} iterations with residual {:e}",
            out.iterations,
            out.residual
        );
        Err(Error::NonConvergence {
            iterations: out.iterations,
            residual: out.residual,
        })
    }
}

/// `μ_n^x = (1/n) Σ_{k<n} δ_{Z_k(x, ω)}`.
pub fn empirical_measure(
    ifs: &IfsWithProbabilities,
    x: CirclePoint,
    omega: &SymbolStream,
    n: usize,
) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument("empirical measure needs n >= 1".into()));
    }
    let mut points = Vec::with_capacity(n);
    let mut z = x.value();
    for k in 0..n as u64 {
        points.push(CirclePoint::new(z));
        z = ifs.apply(omega.symbol(k), z);
    }
    EmpiricalMeasure::uniform(&points)
}

/// [`empirical_measure`] binned on the fly, in constant memory.
pub fn empirical_grid_measure(
    ifs: &IfsWithProbabilities,
    x: CirclePoint,
    omega: &SymbolStream,
    n: usize,
    grid_size: usize,
) -> Result<GridMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument("empirical measure needs n >= 1".into()));
    }
    GridMeasure::lebesgue(grid_size)?;
    let mut counts = vec![0.0; grid_size];
    let mut z = x.value();
    for k in 0..n as u64 {
        counts[cell_of(z, grid_size)] += 1.0;
        z = ifs.apply(omega.symbol(k), z);
    }
    GridMeasure::from_cell_masses(&counts)
}
