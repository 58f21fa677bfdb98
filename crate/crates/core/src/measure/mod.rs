//! Probability measures on the circle represented by CDF values on a uniform
//! knot grid, plus finitely supported empirical measures.

mod diagnostics;
mod transfer;

pub use diagnostics::{
    s_invariance_defect, support_and_atom_audit, wasserstein, MeasureAudit,
};
pub use transfer::{
    empirical_grid_measure, empirical_measure, invariant_measure, pushforward, solve_stationary,
    transfer_apply, transfer_dual_apply, Stationary, TransferOperator,
};

use crate::circle::{wrap01, CirclePoint};
use crate::error::{Error, Result};
use crate::grid;
use crate::homeo::CdfMap;
use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Write};

pub const DEFAULT_GRID_SIZE: usize = 4096;

/// Tolerance on total mass and on CDF monotonicity violations.
const MASS_TOL: f64 = 1e-9;

/// `cdf[i] = μ([0, i / grid_size])`; between knots the CDF is linear, i.e.
/// mass is spread uniformly inside each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    cdf: Vec<f64>,
}

fn check_grid_size(grid_size: usize) -> Result<()> {
    if grid_size < 2 || !grid_size.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "grid size must be a power of two >= 2, got {grid_size}"
        )));
    }
    Ok(())
}

impl GridMeasure {
    pub fn lebesgue(grid_size: usize) -> Result<Self> {
        check_grid_size(grid_size)?;
        Ok(GridMeasure {
            cdf: (0..=grid_size).map(|i| i as f64 / grid_size as f64).collect(),
        })
    }

    /// Validates and normalizes knot values: endpoints are pinned to 0 and 1
    /// and rounding-level decreases are flattened.
    pub fn from_cdf(mut cdf: Vec<f64>) -> Result<Self> {
        check_grid_size(cdf.len().saturating_sub(1))?;
        if cdf.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite CDF value".into()));
        }
        let n = cdf.len() - 1;
        if cdf[0].abs() > MASS_TOL || (cdf[n] - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!(
                "CDF must run from 0 to 1, got {} .. {}",
                cdf[0], cdf[n]
            )));
        }
        if let Some(i) = cdf.windows(2).position(|w| w[1] < w[0] - MASS_TOL) {
            return Err(Error::InvalidMeasure(format!("CDF decreases at knot {}", i + 1)));
        }
        cdf[0] = 0.0;
        cdf[n] = 1.0;
        clamp_monotone(&mut cdf);
        Ok(GridMeasure { cdf })
    }

    /// Builds a measure from per-cell masses (normalized to total 1).
    pub fn from_cell_masses(masses: &[f64]) -> Result<Self> {
        check_grid_size(masses.len())?;
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidMeasure("cell masses must be finite and >= 0".into()));
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }
        let mut cdf = Vec::with_capacity(masses.len() + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for m in masses {
            acc += m;
            cdf.push(acc / total);
        }
        *cdf.last_mut().expect("non-empty") = 1.0;
        clamp_monotone(&mut cdf);
        Ok(GridMeasure { cdf })
    }

    /// `δ_x` binned into the cell containing `x`.
    pub fn dirac(x: CirclePoint, grid_size: usize) -> Result<Self> {
        EmpiricalMeasure::new(vec![(x, 1.0)])?.to_grid(grid_size)
    }

    pub fn grid_size(&self) -> usize {
        self.cdf.len() - 1
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// `μ([0, x])` for `x ∈ [0, 1]`.
    #[inline]
    pub fn cdf_at(&self, x: f64) -> f64 {
        grid::interpolate(&self.cdf, x)
    }

    /// Lifted CDF `F̃(t) = ⌊t⌋ + F(t mod 1)`, continuous and increasing on R.
    #[inline]
    pub(crate) fn lifted_cdf(&self, t: f64) -> f64 {
        let whole = t.floor();
        whole + self.cdf_at(t - whole)
    }

    /// Mass of the counterclockwise arc `[start, start + len]`, `len ∈ [0, 1]`.
    pub fn arc_mass(&self, start: CirclePoint, len: f64) -> f64 {
        let s = start.value();
        self.lifted_cdf(s + len) - self.lifted_cdf(s)
    }

    pub fn cell_masses(&self) -> Vec<f64> {
        self.cdf.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Smallest `x` with `μ([0, x]) >= u`.
    pub fn quantile(&self, u: f64) -> CirclePoint {
        CirclePoint::new(grid::invert_increasing(&self.cdf, u))
    }

    /// `∫ h dμ` with `h` linear between knots.
    pub fn integrate(&self, h: &GridFunction) -> Result<f64> {
        if h.grid_size() != self.grid_size() {
            return Err(Error::InvalidArgument("grid sizes differ".into()));
        }
        Ok(self
            .cdf
            .windows(2)
            .zip(h.values.windows(2))
            .map(|(c, v)| (c[1] - c[0]) * 0.5 * (v[0] + v[1]))
            .sum())
    }

    /// `Φ(x) = μ([0, x])` as a homeomorphism; fails unless every cell carries
    /// mass.
    pub fn cdf_map(&self) -> Result<CdfMap> {
        CdfMap::from_cdf(&self.cdf)
    }

    /// Writes `knot,cdf` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "knot,cdf")?;
        let n = self.grid_size() as f64;
        for (i, c) in self.cdf.iter().enumerate() {
            writeln!(out, "{},{}", i as f64 / n, c)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut knots = Vec::new();
        let mut cdf = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidMeasure(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("knot")) {
                continue;
            }
            let bad = || Error::InvalidMeasure(format!("malformed CSV line {}: {line}", lineno + 1));
            let (k, c) = line.split_once(',').ok_or_else(bad)?;
            knots.push(k.trim().parse::<f64>().map_err(|_| bad())?);
            cdf.push(c.trim().parse::<f64>().map_err(|_| bad())?);
        }
        let n = cdf.len().saturating_sub(1);
        for (i, k) in knots.iter().enumerate() {
            if (k - i as f64 / n as f64).abs() > 1e-12 {
                return Err(Error::InvalidMeasure(format!("knot {i} is off the uniform grid")));
            }
        }
        GridMeasure::from_cdf(cdf)
    }
}

/// Running maximum, so rounding never produces negative cell masses.
fn clamp_monotone(cdf: &mut [f64]) {
    let mut hi: f64 = 0.0;
    for c in cdf.iter_mut() {
        hi = hi.max(c.clamp(0.0, 1.0));
        *c = hi;
    }
}

/// Finitely many weighted atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    atoms: Vec<(CirclePoint, f64)>,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<(CirclePoint, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("empirical measure needs an atom".into()));
        }
        if atoms.iter().any(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidMeasure("atom weights must be positive".into()));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(EmpiricalMeasure { atoms })
    }

    /// Equal weights `1 / len`.
    pub fn uniform(points: &[CirclePoint]) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        EmpiricalMeasure::new(points.iter().map(|&p| (p, w)).collect())
    }

    pub fn atoms(&self) -> &[(CirclePoint, f64)] {
        &self.atoms
    }

    /// Bins each atom into the cell containing it.
    pub fn to_grid(&self, grid_size: usize) -> Result<GridMeasure> {
        check_grid_size(grid_size)?;
        let mut masses = vec![0.0; grid_size];
        for (x, w) in &self.atoms {
            masses[cell_of(x.value(), grid_size)] += w;
        }
        GridMeasure::from_cell_masses(&masses)
    }

    /// One `{"x", "weight"}` object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        #[derive(Serialize)]
        struct Atom {
            x: f64,
            weight: f64,
        }
        for (x, w) in &self.atoms {
            serde_json::to_writer(&mut out, &Atom { x: x.value(), weight: *w })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn cell_of(x: f64, grid_size: usize) -> usize {
    ((wrap01(x) * grid_size as f64) as usize).min(grid_size - 1)
}

/// Values of a test function at the knots `i / grid_size`, `i = 0..=grid_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "grid function needs at least two finite values".into(),
            ));
        }
        Ok(GridFunction { values })
    }

    pub fn from_fn(grid_size: usize, h: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new((0..=grid_size).map(|i| h(i as f64 / grid_size as f64)).collect())
    }

    pub fn constant(grid_size: usize, c: f64) -> Result<Self> {
        GridFunction::new(vec![c; grid_size + 1])
    }

    pub fn grid_size(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn evaluate(&self, x: CirclePoint) -> f64 {
        grid::interpolate(&self.values, x.value())
    }

    /// `max h - min h`.
    pub fn oscillation(&self) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }
}
