//! Piecewise-linear interpolation on the uniform knot grid `i / n`, `i = 0..=n`.

/// Linear interpolation of knot values at `x ∈ [0, 1]`.
#[inline]
pub(crate) fn interpolate(knots: &[f64], x: f64) -> f64 {
    let cells = knots.len() - 1;
    let scaled = x * cells as f64;
    if scaled <= 0.0 {
        return knots[0];
    }
    if scaled >= cells as f64 {
        return knots[cells];
    }
    let i = scaled.floor() as usize;
    let i = i.min(cells - 1);
    let t = scaled - i as f64;
    knots[i] + t * (knots[i + 1] - knots[i])
}

/// Inverse of [`interpolate`] for strictly increasing knot values, returning
/// the `x ∈ [0, 1]` whose interpolated value is `u`.
#[inline]
pub(crate) fn invert_increasing(knots: &[f64], u: f64) -> f64 {
    let cells = knots.len() - 1;
    if u <= knots[0] {
        return 0.0;
    }
    if u >= knots[cells] {
        return 1.0;
    }
    // first knot strictly above u, in 1..=cells
    let hi = knots.partition_point(|&v| v <= u).clamp(1, cells);
    let lo = hi - 1;
    let span = knots[hi] - knots[lo];
    let t = if span > 0.0 { (u - knots[lo]) / span } else { 0.0 };
    (lo as f64 + t) / cells as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_round_trip() {
        let knots: Vec<f64> = (0..=8).map(|i| (i as f64 / 8.0).powi(2)).collect();
        for j in 0..100 {
            let x = j as f64 / 100.0;
            let u = interpolate(&knots, x);
            assert!((invert_increasing(&knots, u) - x).abs() < 1e-14);
        }
        assert_eq!(interpolate(&knots, 1.0), 1.0);
        assert_eq!(invert_increasing(&knots, 0.0), 0.0);
    }
}
