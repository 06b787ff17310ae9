//! Independent ground truth: dense diagonalization in a truncated Fock
//! basis, the closed-form g = 0 and ω₀ = 0 spectra, Juddian points and the
//! small-g ground-state coefficients.
//!
//! Everything here runs in plain `f64` and does not touch the G-function
//! machinery.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{ModelParams, Sector};

/// Smallest boson cutoff accepted by [`oracle_diagonalize`].
pub const MIN_CUTOFF: usize = 20;

/// Number of low-lying eigenvalues covered by the cutoff error estimate.
pub const CUTOFF_CHECK_LEVELS: usize = 10;

/// Discriminant magnitude below which the N = 4 quadratic has a double root.
pub const DISCRIMINANT_GUARD: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("boson cutoff {0} is below the minimum of {MIN_CUTOFF}")]
    CutoffTooSmall(usize),
    #[error("the g = 0 spectrum needs g = 0, got {0}")]
    NonZeroCoupling(f64),
    #[error("the degenerate spectrum needs omega0 = 0, got {0}")]
    NonZeroOmega0(f64),
    #[error("Juddian constraints are known for N = 2, 3, 4 only, got {0}")]
    UnsupportedJuddianOrder(u32),
    #[error("omega must be finite and positive, got {0}")]
    InvalidOmega(f64),
}

/// Sorted eigenvalues of the truncated Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpectrum {
    pub params: ModelParams,
    pub n_max: usize,
    pub eigenvalues: Vec<f64>,
    /// Largest shift among the lowest [`CUTOFF_CHECK_LEVELS`] eigenvalues
    /// between cutoffs n_max and n_max/2.
    pub cutoff_error_estimate: f64,
}

fn truncated_eigenvalues(params: &ModelParams, n_max: usize) -> Vec<f64> {
    let size = 2 * (n_max + 1);
    // Index 2n is spin up (+ω₀/2), 2n+1 spin down, both with n bosons.
    let mut h = DMatrix::<f64>::zeros(size, size);
    for n in 0..=n_max {
        let bosons = params.omega() * n as f64;
        h[(2 * n, 2 * n)] = bosons + params.omega0() / 2.0;
        h[(2 * n + 1, 2 * n + 1)] = bosons - params.omega0() / 2.0;
        if n + 2 <= n_max {
            // σx(b†² + b²) with the coupling written as 2g σx.
            let element = 2.0 * params.g() * (((n + 1) * (n + 2)) as f64).sqrt();
            for (row, col) in [(2 * n, 2 * (n + 2) + 1), (2 * n + 1, 2 * (n + 2))] {
                h[(row, col)] = element;
                h[(col, row)] = element;
            }
        }
    }
    let mut values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Diagonalizes the Hamiltonian in {↑, ↓} ⊗ {|0⟩, …, |n_max⟩}.
pub fn oracle_diagonalize(params: &ModelParams, n_max: usize) -> Result<OracleSpectrum, ReferenceError> {
    if n_max < MIN_CUTOFF {
        return Err(ReferenceError::CutoffTooSmall(n_max));
    }
    let eigenvalues = truncated_eigenvalues(params, n_max);
    let coarse = truncated_eigenvalues(params, n_max / 2);
    let cutoff_error_estimate = eigenvalues
        .iter()
        .zip(&coarse)
        .take(CUTOFF_CHECK_LEVELS)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(OracleSpectrum { params: *params, n_max, eigenvalues, cutoff_error_estimate })
}

/// Lowest `count` levels of each sector at g = 0.
///
/// A sector holds spin-down states with n ≡ a (mod 4) and spin-up states
/// with n ≡ a + 2 (mod 4), where a is 0 for G₋, 2 for G₊, 1 for G₋ᵢ and 3
/// for Gᵢ. Coincident entries are kept.
pub fn reference_g0(params: &ModelParams, count: usize) -> Result<BTreeMap<Sector, Vec<f64>>, ReferenceError> {
    if params.g() != 0.0 {
        return Err(ReferenceError::NonZeroCoupling(params.g()));
    }
    let (omega0, omega) = (params.omega0(), params.omega());
    let mut out = BTreeMap::new();
    for sector in Sector::ALL {
        let down_residue = match sector {
            Sector::Minus => 0,
            Sector::MinusI => 1,
            Sector::Plus => 2,
            Sector::PlusI => 3,
        };
        let mut levels = Vec::with_capacity(2 * count);
        // The lowest `count` levels lie among the first `count` of each spin.
        for k in 0..count {
            let down = down_residue + 4 * k;
            let up = (down_residue + 2) % 4 + 4 * k;
            levels.push(-omega0 / 2.0 + omega * down as f64);
            levels.push(omega0 / 2.0 + omega * up as f64);
        }
        levels.sort_by(f64::total_cmp);
        levels.truncate(count);
        out.insert(sector, levels);
    }
    Ok(out)
}

/// ε_n = −ω/2 + (n + ½)Ωω for n < `count`, each listed twice.
pub fn reference_omega0_zero(params: &ModelParams, count: usize) -> Result<Vec<f64>, ReferenceError> {
    if params.omega0() != 0.0 {
        return Err(ReferenceError::NonZeroOmega0(params.omega0()));
    }
    let omega = params.omega();
    let omega_big = params.omega_big();
    Ok((0..count)
        .flat_map(|n| {
            let e = -omega / 2.0 + (n as f64 + 0.5) * omega_big * omega;
            [e, e]
        })
        .collect())
}

/// A coupling where an exactly known level of quasi-exact type exists and
/// two sectors cross.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JuddianPoint {
    pub n: u32,
    /// Ω at the crossing.
    pub omega_big: f64,
    /// Positive coupling; −g gives the same energy.
    pub g: f64,
    pub energy: f64,
}

/// Admissible Juddian points of order N for (ω₀, ω), ascending in g.
pub fn juddian_points(omega0: f64, omega: f64, n: u32) -> Result<Vec<JuddianPoint>, ReferenceError> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(ReferenceError::InvalidOmega(omega));
    }
    let r = omega0 * omega0 / (4.0 * omega * omega);
    let squares: Vec<f64> = match n {
        2 => vec![(2.0 + r) / 6.0],
        3 => vec![(6.0 + r) / 10.0],
        4 => {
            // 280x² − (240 + 34r)x + (24 + 14r + r²) = 0 with x = Ω².
            let (a, b, c) = (280.0, -(240.0 + 34.0 * r), 24.0 + 14.0 * r + r * r);
            let discriminant = b * b - 4.0 * a * c;
            if discriminant < -DISCRIMINANT_GUARD {
                Vec::new()
            } else if discriminant.abs() <= DISCRIMINANT_GUARD {
                vec![-b / (2.0 * a)]
            } else {
                let root = discriminant.sqrt();
                // Citardauq form for the smaller root avoids cancellation.
                let large = (-b + root) / (2.0 * a);
                vec![c / (a * large), large]
            }
        }
        other => return Err(ReferenceError::UnsupportedJuddianOrder(other)),
    };
    let mut points: Vec<JuddianPoint> = squares
        .into_iter()
        .filter(|x| *x > 0.0 && *x < 1.0)
        .map(|x| {
            let omega_big = x.sqrt();
            JuddianPoint {
                n,
                omega_big,
                g: omega / 4.0 * (1.0 - x).sqrt(),
                energy: -omega / 2.0 + (f64::from(n) + 0.5) * omega_big * omega,
            }
        })
        .collect();
    points.sort_by(|a, b| a.g.total_cmp(&b.g));
    Ok(points)
}

/// Coefficients (a, b) of the small-g ground state E₀ ≈ a + b g².
pub fn smallg_ground_state(params: &ModelParams) -> (f64, f64) {
    let (omega0, omega) = (params.omega0(), params.omega());
    (-omega0 / 2.0, -8.0 / (2.0 * omega + omega0))
}

/// Least-squares coefficients c_j of y ≈ Σ_{j<terms} c_j g^(2j).
///
/// Returns `None` when there are fewer samples than terms or the design
/// matrix is rank deficient.
pub fn fit_even_powers(gs: &[f64], ys: &[f64], terms: usize) -> Option<Vec<f64>> {
    if terms == 0 || gs.len() != ys.len() || gs.len() < terms {
        return None;
    }
    let design = DMatrix::from_fn(gs.len(), terms, |i, j| gs[i].powi(2 * j as i32));
    if design.rank(1e-14) < terms {
        return None;
    }
    let rhs = DVector::from_column_slice(ys);
    let solution = design.svd(true, true).solve(&rhs, 1e-14).ok()?;
    Some(solution.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(omega0: f64, omega: f64, g: f64) -> ModelParams {
        ModelParams::new(omega0, omega, g).unwrap()
    }

    #[test]
    fn free_oracle_is_the_union_of_ladders() {
        let oracle = oracle_diagonalize(&params(1.0, 2.0, 0.0), 50).unwrap();
        assert_eq!(oracle.eigenvalues.len(), 102);
        for (got, want) in oracle.eigenvalues.iter().zip([-0.5, 0.5, 1.5, 2.5, 3.5, 4.5]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!(oracle.cutoff_error_estimate < 1e-12);
    }

    #[test]
    fn even_fit_recovers_polynomial() {
        let gs = [0.01f64, 0.02, 0.03, 0.04];
        let ys: Vec<f64> = gs.iter().map(|g| 0.5 - 2.0 * g * g + 30.0 * g.powi(4)).collect();
        let c = fit_even_powers(&gs, &ys, 3).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-8 && (c[2] - 30.0).abs() < 1e-4, "{c:?}");
        assert_eq!(fit_even_powers(&gs[..2], &ys[..2], 3), None);
        assert_eq!(fit_even_powers(&[0.1, 0.1, 0.1], &[1.0, 1.0, 1.0], 2), None);
    }

    #[test]
    fn cutoff_floor() {
        assert_eq!(oracle_diagonalize(&params(1.0, 2.0, 0.1), 10), Err(ReferenceError::CutoffTooSmall(10)));
    }

    #[test]
    fn g0_sector_ladders() {
        let ladders = reference_g0(&params(1.0, 2.0, 0.0), 3).unwrap();
        assert_eq!(ladders[&Sector::Minus], vec![-0.5, 4.5, 7.5]);
        assert_eq!(ladders[&Sector::Plus], vec![0.5, 3.5, 8.5]);
        assert_eq!(ladders[&Sector::MinusI], vec![1.5, 6.5, 9.5]);
        assert_eq!(ladders[&Sector::PlusI], vec![2.5, 5.5, 10.5]);
        let accidental = reference_g0(&params(2.0, 1.0, 0.0), 3).unwrap();
        assert_eq!(accidental[&Sector::Minus], vec![-1.0, 3.0, 3.0]);
        assert!(reference_g0(&params(2.0, 1.0, 0.1), 3).is_err());
    }

    #[test]
    fn degenerate_ladder_without_splitting() {
        let levels = reference_omega0_zero(&params(0.0, 1.0, 0.2), 3).unwrap();
        let expected = [-0.2, -0.2, 0.4, 0.4, 1.0, 1.0];
        for (got, want) in levels.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(reference_omega0_zero(&params(0.0, 1.0, 0.0), 2).unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
        assert!(reference_omega0_zero(&params(0.5, 1.0, 0.2), 2).is_err());
    }

    #[test]
    fn juddian_points_for_unit_splitting() {
        let two = juddian_points(1.0, 2.0, 2).unwrap();
        assert_eq!(two.len(), 1);
        assert!((two[0].omega_big.powi(2) - 0.34375).abs() < 1e-15);
        assert!((two[0].g - 0.405046).abs() < 1e-6);
        assert!((two[0].energy - 1.93151).abs() < 1e-5);
        let three = juddian_points(1.0, 2.0, 3).unwrap();
        assert!((three[0].omega_big.powi(2) - 0.60625).abs() < 1e-15);
        assert!((three[0].g - 0.313748).abs() < 1e-6);
        assert!((three[0].energy - 4.45035).abs() < 1e-5);
        assert_eq!(juddian_points(1.0, 2.0, 4).unwrap().len(), 2);
        assert!(juddian_points(1.0, 2.0, 5).is_err());
    }

    #[test]
    fn small_g_coefficients() {
        assert_eq!(smallg_ground_state(&params(1.0, 2.0, 0.0)), (-0.5, -1.6));
        assert_eq!(smallg_ground_state(&params(0.0, 1.0, 0.0)), (0.0, -4.0));
        assert_eq!(smallg_ground_state(&params(2.0, 1.0, 0.0)), (-1.0, -2.0));
    }
}
