//! Best-effort root estimates inside the collapse guard.
//!
//! Near 4|g| = ω the truncated roots drift slowly with the order L. Roots at
//! the top few ladder orders are extrapolated polynomially in 1/L to
//! 1/L = 0. Nothing here is certified.

use crate::gfunction::SeriesSettings;
use crate::model::{DerivedParams, ModelParams, Sector};

use super::{SectorSolver, SolverOptions, SpectrumError};

/// Ladder orders used for one extrapolation.
const EXTRAPOLATION_ORDERS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub orders: Vec<usize>,
    /// Root found at each order, aligned with `orders`.
    pub roots: Vec<f64>,
    /// Value at 1/L = 0, absent when fewer than two orders produced a root.
    pub estimate: Option<f64>,
}

/// Polynomial through (x_i, y_i) evaluated at x = 0.
pub fn neville_at_zero(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.is_empty() || xs.len() != ys.len() {
        return None;
    }
    let mut table = ys.to_vec();
    for level in 1..xs.len() {
        for i in 0..xs.len() - level {
            let (near, far) = (xs[i], xs[i + level]);
            table[i] = (far * table[i] - near * table[i + 1]) / (far - near);
        }
    }
    Some(table[0])
}

/// Follows the root near `energy` over the top ladder orders and extrapolates
/// it in 1/L.
pub fn extrapolate_root(
    params: &ModelParams,
    derived: &DerivedParams,
    sector: Sector,
    energy: f64,
    options: &SolverOptions,
) -> Result<Extrapolation, SpectrumError> {
    let ladder = options.series.ladder(sector);
    let orders: Vec<usize> = ladder.iter().rev().take(EXTRAPOLATION_ORDERS).rev().copied().collect();
    let step = options.scan_step(params);
    let mut used = Vec::new();
    let mut roots = Vec::new();
    for &order in &orders {
        let settings = SeriesSettings { max_order: order, min_order: order.saturating_sub(16).max(4), ..options.series };
        let solver = SectorSolver::new(params, derived, sector, options, settings)?;
        if let Some(record) = solver.locate_near(energy, step, 6)? {
            used.push(order);
            roots.push(record.energy);
        }
    }
    let xs: Vec<f64> = used.iter().map(|l| 1.0 / *l as f64).collect();
    let estimate = if roots.len() >= 2 { neville_at_zero(&xs, &roots) } else { None };
    Ok(Extrapolation { orders: used, roots, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neville_is_exact_for_polynomials() {
        let xs = [0.5, 0.25, 0.125, 0.1];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x + 5.0 * x * x * x).collect();
        assert!((neville_at_zero(&xs, &ys).unwrap() - 3.0).abs() < 1e-12);
        assert!(neville_at_zero(&[], &[]).is_none());
    }
}
