//! The four real G-functions G₊, G₋, Gᵢ, G₋ᵢ on the real z axis.
//!
//! With S_Q(z) = Σ Q_n zⁿ and the phased sum S_K(z) = Σ K_n (iz)ⁿ (times i for
//! odd sectors), which is real for a fixed parity:
//!
//! ```text
//! G₊  = e^{κz²} S_K − e^{−κz²} S_Q      G₋  = e^{κz²} S_K + e^{−κz²} S_Q
//! Gᵢ  = e^{κz²} S_K + e^{−κz²} S_Q      G₋ᵢ = e^{κz²} S_K − e^{−κz²} S_Q
//! ```
//!
//! At large z the truncated sums do not converge in the order L; the value is
//! dominated by its last terms and only its sign carries information. Both
//! regimes are reported through [`Convergence`].

use rug::Float;
use thiserror::Error;

use crate::model::{DerivedParams, ModelParams, Parity, Sector};
use crate::precision::{self, PrecisionError};
use crate::series::{self, Recurrence, SeriesCoeffs, SeriesError};

/// Smallest truncation order accepted by the evaluator.
pub const MIN_EVAL_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GError {
    #[error("G-functions are undefined at g = 0; use the reference spectrum")]
    ZeroCoupling,
    #[error("evaluation point z must be finite and positive, got {0}")]
    InvalidZ(f64),
    #[error("energy must be finite, got {0}")]
    InvalidEnergy(f64),
    #[error("truncation order {0} is below the minimum of {MIN_EVAL_ORDER}")]
    OrderTooSmall(usize),
    #[error("invalid series settings: {0}")]
    InvalidSettings(String),
    #[error("non-finite term at index {index} (sector {sector}, E = {energy}, z = {z})")]
    NonFinite { sector: Sector, energy: f64, z: f64, index: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Precision(#[from] PrecisionError),
}

/// Truncation ladder and stopping rule for adaptive evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSettings {
    /// Relative change between ladder orders that counts as summed.
    pub tol_series: f64,
    /// Largest truncation order L_max.
    pub max_order: usize,
    /// Step ΔL between ladder orders; must be even.
    pub order_step: usize,
    /// Lowest order on the ladder.
    pub min_order: usize,
}

impl Default for SeriesSettings {
    fn default() -> Self {
        Self { tol_series: 1e-20, max_order: 200, order_step: 8, min_order: 12 }
    }
}

impl SeriesSettings {
    pub fn validate(&self) -> Result<(), GError> {
        if !(self.tol_series > 0.0 && self.tol_series.is_finite()) {
            return Err(GError::InvalidSettings(format!("tol_series must be positive, got {}", self.tol_series)));
        }
        if self.order_step == 0 || !self.order_step.is_multiple_of(2) {
            return Err(GError::InvalidSettings(format!("order_step must be even and positive, got {}", self.order_step)));
        }
        if self.min_order < MIN_EVAL_ORDER {
            return Err(GError::OrderTooSmall(self.min_order));
        }
        if self.max_order < self.min_order + 1 {
            return Err(GError::InvalidSettings(format!(
                "max_order {} must exceed min_order {}",
                self.max_order, self.min_order
            )));
        }
        Ok(())
    }

    /// Ascending truncation orders used for `sector`, anchored at the top.
    ///
    /// Orders are the highest indices of the sector's parity, so for odd
    /// sectors and an even `max_order` the ladder ends at `max_order − 1`.
    /// A fixed even step keeps the phase (−1)^{L/2} of the leading term fixed
    /// along the ladder.
    pub fn ladder(&self, sector: Sector) -> Vec<usize> {
        let top = series::top_index(sector, self.max_order);
        let floor = self.min_order.max(series::min_order(sector));
        let mut orders = vec![top];
        let mut order = top;
        while order >= floor + self.order_step {
            order -= self.order_step;
            orders.push(order);
        }
        orders.reverse();
        orders
    }
}

/// How an evaluation's value relates to the untruncated G.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Convergence {
    /// Relative change between successive ladder orders fell below tol_series.
    Summed,
    /// The value does not settle, but its sign agreed over the last three
    /// ladder orders.
    SignStable,
    /// Single fixed-order evaluation.
    Unchecked,
    /// Neither criterion was met at L_max.
    Unconverged,
}

impl Convergence {
    pub fn is_converged(self) -> bool {
        matches!(self, Convergence::Summed | Convergence::SignStable)
    }

    pub fn name(self) -> &'static str {
        match self {
            Convergence::Summed => "summed",
            Convergence::SignStable => "sign_stable",
            Convergence::Unchecked => "unchecked",
            Convergence::Unconverged => "unconverged",
        }
    }
}

/// Sign of G at one ladder order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LadderStep {
    pub order: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GEvaluation {
    pub sector: Sector,
    pub energy: f64,
    pub z: f64,
    /// Truncation order of `value`.
    pub order: usize,
    pub value: Float,
    /// Largest magnitude among the prefactor-weighted terms, for relative
    /// comparisons.
    pub scale: Float,
    pub convergence: Convergence,
    /// Signs along the ladder, ascending in order. Single-order evaluations
    /// carry one entry.
    pub ladder: Vec<LadderStep>,
}

impl GEvaluation {
    pub fn converged(&self) -> bool {
        self.convergence.is_converged()
    }

    /// Sign of the value, with 0 for an exact zero.
    pub fn sign(&self) -> i8 {
        sign_of(&self.value)
    }

    /// |value| / scale as a double.
    pub fn relative_magnitude(&self) -> f64 {
        if self.scale.is_zero() {
            return 0.0;
        }
        (Float::with_val(precision::bits(), self.value.abs_ref()) / &self.scale).to_f64()
    }
}

fn sign_of(value: &Float) -> i8 {
    match value.cmp0() {
        Some(std::cmp::Ordering::Greater) => 1,
        Some(std::cmp::Ordering::Less) => -1,
        _ => 0,
    }
}

/// Per-z tables: phased powers for the K sum, plain powers for the Q sum and
/// the two Gaussian prefactors.
#[derive(Debug, Clone)]
struct ZTable {
    z: f64,
    k_powers: Vec<Float>,
    q_powers: Vec<Float>,
    grow: Float,
    decay: Float,
}

/// Evaluates one sector's G at several z for many energies.
///
/// Parameter-dependent work (recurrence table, z-power tables, prefactors)
/// is done once; each energy then costs one recurrence pass plus prefix
/// sums. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct SectorEvaluator {
    sector: Sector,
    settings: SeriesSettings,
    recurrence: Recurrence<Float>,
    tables: Vec<ZTable>,
}

impl SectorEvaluator {
    pub fn new(
        params: &ModelParams,
        derived: &DerivedParams,
        sector: Sector,
        z_values: &[f64],
        settings: SeriesSettings,
    ) -> Result<Self, GError> {
        settings.validate()?;
        if params.g() == 0.0 {
            return Err(GError::ZeroCoupling);
        }
        let top = series::top_index(sector, settings.max_order);
        let recurrence = Recurrence::new(params, derived, top)?;
        let tables = z_values
            .iter()
            .map(|&z| z_table(derived, sector, z, top))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { sector, settings, recurrence, tables })
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn settings(&self) -> &SeriesSettings {
        &self.settings
    }

    pub fn z_values(&self) -> Vec<f64> {
        self.tables.iter().map(|t| t.z).collect()
    }

    /// Coefficients at `energy` up to the top of the ladder.
    pub fn coefficients(&self, energy: f64) -> Result<SeriesCoeffs<Float>, GError> {
        if !energy.is_finite() {
            return Err(GError::InvalidEnergy(energy));
        }
        Ok(self.recurrence.coefficients(self.sector, &precision::float(energy))?)
    }

    /// Adaptive evaluation at every configured z.
    pub fn eval(&self, energy: f64) -> Result<Vec<GEvaluation>, GError> {
        let coeffs = self.coefficients(energy)?;
        let ladder = self.settings.ladder(self.sector);
        self.tables
            .iter()
            .map(|table| self.assemble(&coeffs, table, &ladder))
            .collect()
    }

    /// Signs at every configured z, the input of bracketing.
    pub fn signs(&self, energy: f64) -> Result<Vec<i8>, GError> {
        Ok(self.eval(energy)?.iter().map(GEvaluation::sign).collect())
    }

    fn assemble(&self, coeffs: &SeriesCoeffs<Float>, table: &ZTable, ladder: &[usize]) -> Result<GEvaluation, GError> {
        let bits = precision::bits();
        let q_sign: i32 = match self.sector {
            Sector::Minus | Sector::PlusI => 1,
            Sector::Plus | Sector::MinusI => -1,
        };
        let fail = |index| GError::NonFinite { sector: self.sector, energy: coeffs.energy.to_f64(), z: table.z, index };

        let mut sum_k = precision::float(0);
        let mut sum_q = precision::float(0);
        let mut scale = precision::float(0);
        let mut values: Vec<(usize, Float)> = Vec::with_capacity(ladder.len());
        let mut floors: Vec<Float> = Vec::with_capacity(ladder.len());
        let mut rungs = ladder.iter().peekable();
        let mut n = self.sector.start_index();
        while let Some(&&target) = rungs.peek() {
            let term_k = Float::with_val(bits, &coeffs.k[n] * &table.k_powers[n]);
            let term_q = Float::with_val(bits, &coeffs.q[n] * &table.q_powers[n]);
            let weighted_k = Float::with_val(bits, term_k.abs_ref()) * &table.grow;
            let weighted_q = Float::with_val(bits, term_q.abs_ref()) * &table.decay;
            if !weighted_k.is_finite() || !weighted_q.is_finite() {
                return Err(fail(n));
            }
            scale = scale.max(&weighted_k).max(&weighted_q);
            sum_k += term_k;
            sum_q += term_q;
            if n == target {
                let mut value = Float::with_val(bits, &sum_k * &table.grow);
                let damped = Float::with_val(bits, &sum_q * &table.decay);
                if q_sign > 0 {
                    value += damped;
                } else {
                    value -= damped;
                }
                if !value.is_finite() {
                    return Err(fail(n));
                }
                values.push((n, value));
                floors.push(Float::with_val(bits, &scale * series::underflow_floor()));
                rungs.next();
            }
            n += 2;
        }

        let steps: Vec<LadderStep> = values.iter().map(|(order, v)| LadderStep { order: *order, sign: sign_of(v) }).collect();
        let mut summed_at = None;
        for (pair, floor) in values.windows(2).zip(&floors[1..]) {
            let change = Float::with_val(bits, &pair[1].1 - &pair[0].1).abs();
            let reference = Float::with_val(bits, pair[1].1.abs_ref()).max(floor);
            if change <= reference * self.settings.tol_series {
                summed_at = Some(pair[1].0);
                break;
            }
        }
        let (order, value, convergence) = match summed_at {
            Some(order) => {
                let value = values.iter().find(|(o, _)| *o == order).map(|(_, v)| v.clone()).expect("ladder order");
                (order, value, Convergence::Summed)
            }
            None => {
                let last = values.len();
                let tail = &steps[last.saturating_sub(3)..];
                let stable = tail.len() == 3 && tail[0].sign != 0 && tail.iter().all(|s| s.sign == tail[0].sign);
                let (order, value) = values.pop().expect("non-empty ladder");
                (order, value, if stable { Convergence::SignStable } else { Convergence::Unconverged })
            }
        };
        Ok(GEvaluation {
            sector: self.sector,
            energy: coeffs.energy.to_f64(),
            z: table.z,
            order,
            value,
            scale,
            convergence,
            ladder: steps,
        })
    }
}

fn z_table(derived: &DerivedParams, sector: Sector, z: f64, top: usize) -> Result<ZTable, GError> {
    if !(z.is_finite() && z > 0.0) {
        return Err(GError::InvalidZ(z));
    }
    let bits = precision::bits();
    let z_big = precision::float(z);
    let mut k_powers = Vec::with_capacity(top + 1);
    let mut q_powers = Vec::with_capacity(top + 1);
    let mut power = precision::float(1);
    for n in 0..=top {
        // Real part of (iz)ⁿ for even n, and of i·(iz)ⁿ for odd n.
        let phase_exponent = match sector.parity() {
            Parity::Even => n / 2,
            Parity::Odd => n.div_ceil(2),
        };
        let phased = if phase_exponent % 2 == 0 { power.clone() } else { -power.clone() };
        k_powers.push(phased);
        q_powers.push(power.clone());
        power *= &z_big;
    }
    let exponent = Float::with_val(bits, z_big.square_ref()) * &derived.kappa;
    let grow = Float::with_val(bits, exponent.exp_ref());
    let decay = Float::with_val(bits, (-exponent).exp_ref());
    if !grow.is_finite() || grow.is_zero() || !decay.is_finite() || decay.is_zero() {
        return Err(GError::NonFinite { sector, energy: f64::NAN, z, index: 0 });
    }
    Ok(ZTable { z, k_powers, q_powers, grow, decay })
}

fn check_point(params: &ModelParams, energy: f64, z: f64) -> Result<(), GError> {
    if params.g() == 0.0 {
        return Err(GError::ZeroCoupling);
    }
    if !energy.is_finite() {
        return Err(GError::InvalidEnergy(energy));
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(GError::InvalidZ(z));
    }
    Ok(())
}

/// G at a single truncation order.
pub fn eval_g(
    params: &ModelParams,
    derived: &DerivedParams,
    sector: Sector,
    energy: f64,
    z: f64,
    order: usize,
) -> Result<GEvaluation, GError> {
    check_point(params, energy, z)?;
    if order < MIN_EVAL_ORDER {
        return Err(GError::OrderTooSmall(order));
    }
    let top = series::top_index(sector, order);
    let recurrence = Recurrence::new(params, derived, top)?;
    let coeffs = recurrence.coefficients(sector, &precision::float(energy))?;
    let table = z_table(derived, sector, z, top)?;
    let evaluator = SectorEvaluator {
        sector,
        settings: SeriesSettings { max_order: top, min_order: top, ..SeriesSettings::default() },
        recurrence,
        tables: Vec::new(),
    };
    let mut evaluation = evaluator.assemble(&coeffs, &table, &[top])?;
    evaluation.convergence = Convergence::Unchecked;
    Ok(evaluation)
}

/// G along the truncation ladder of `settings`, stopping once summed.
pub fn eval_g_adaptive(
    params: &ModelParams,
    derived: &DerivedParams,
    sector: Sector,
    energy: f64,
    z: f64,
    settings: &SeriesSettings,
) -> Result<GEvaluation, GError> {
    check_point(params, energy, z)?;
    let evaluator = SectorEvaluator::new(params, derived, sector, &[z], *settings)?;
    Ok(evaluator.eval(energy)?.pop().expect("one z value"))
}

/// Unnormalized Bargmann samples ψ₁ = (φ₁+φ₂)/2 and ψ₂ = (φ₁−φ₂)/2 with
/// φ₁(z) = e^{−κz²} Σ Q_n zⁿ and φ₂(z) = e^{−κz²} Σ K_n zⁿ, truncated at
/// `settings.max_order`.
pub fn reconstruct_psi(
    params: &ModelParams,
    derived: &DerivedParams,
    sector: Sector,
    energy: f64,
    z_grid: &[f64],
    settings: &SeriesSettings,
) -> Result<(Vec<Float>, Vec<Float>), GError> {
    check_point(params, energy, 1.0)?;
    settings.validate()?;
    let bits = precision::bits();
    let top = series::top_index(sector, settings.max_order);
    let coeffs = series::compute_coefficients(params, derived, sector, energy, top)?;
    let mut psi1 = Vec::with_capacity(z_grid.len());
    let mut psi2 = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        if !z.is_finite() {
            return Err(GError::InvalidZ(z));
        }
        let z_big = precision::float(z);
        let mut sum_q = precision::float(0);
        let mut sum_k = precision::float(0);
        let mut power = precision::float(1);
        for n in 0..=top {
            sum_q += Float::with_val(bits, &coeffs.q[n] * &power);
            sum_k += Float::with_val(bits, &coeffs.k[n] * &power);
            power *= &z_big;
        }
        let prefactor = (-(Float::with_val(bits, z_big.square_ref()) * &derived.kappa)).exp();
        let phi1 = Float::with_val(bits, &sum_q * &prefactor);
        let phi2 = Float::with_val(bits, &sum_k * &prefactor);
        if !phi1.is_finite() || !phi2.is_finite() {
            return Err(GError::NonFinite { sector, energy, z, index: top });
        }
        psi1.push(Float::with_val(bits, &phi1 + &phi2) / 2u32);
        psi2.push(Float::with_val(bits, &phi1 - &phi2) / 2u32);
    }
    Ok((psi1, psi2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive;

    fn params(omega0: f64, omega: f64, g: f64) -> ModelParams {
        ModelParams::new(omega0, omega, g).unwrap()
    }

    #[test]
    fn ladder_is_anchored_at_top() {
        let s = SeriesSettings::default();
        let even = s.ladder(Sector::Plus);
        assert_eq!(even.last(), Some(&200));
        assert_eq!(even[even.len() - 2], 192);
        assert!(even[0] >= 12 && even[0] < 20);
        let odd = s.ladder(Sector::MinusI);
        assert_eq!(odd.last(), Some(&199));
        assert!(odd.iter().all(|l| l % 2 == 1));
    }

    #[test]
    fn settings_reject_odd_step() {
        let s = SeriesSettings { order_step: 3, ..SeriesSettings::default() };
        assert!(s.validate().is_err());
    }

    #[test]
    fn ground_state_is_a_root_at_moderate_z() {
        // E = ε₀ = −0.2 for ω₀ = 0, ω = 1, g = 0.2.
        let p = params(0.0, 1.0, 0.2);
        let d = derive(&p);
        for z in [1.0, 2.0] {
            let e = eval_g_adaptive(&p, &d, Sector::Minus, -0.2, z, &SeriesSettings::default()).unwrap();
            assert_eq!(e.convergence, Convergence::Summed, "z = {z}");
            assert!(e.relative_magnitude() < 1e-30, "z = {z}: {}", e.relative_magnitude());
        }
    }

    #[test]
    fn root_shows_as_sign_change_at_large_z() {
        let p = params(0.0, 1.0, 0.2);
        let d = derive(&p);
        let ev = SectorEvaluator::new(&p, &d, Sector::Minus, &[100.0, 1000.0], SeriesSettings::default()).unwrap();
        let below = ev.signs(-0.2 - 1e-6).unwrap();
        let above = ev.signs(-0.2 + 1e-6).unwrap();
        for (b, a) in below.iter().zip(&above) {
            assert_eq!(*b, -*a);
        }
    }

    #[test]
    fn zero_coupling_and_bad_z_are_rejected() {
        let p = params(1.0, 2.0, 0.0);
        assert_eq!(eval_g(&p, &derive(&p), Sector::Plus, 0.0, 10.0, 20).unwrap_err(), GError::ZeroCoupling);
        let p = params(1.0, 2.0, 0.1);
        assert!(matches!(eval_g(&p, &derive(&p), Sector::Plus, 0.0, -1.0, 20), Err(GError::InvalidZ(_))));
        assert!(matches!(eval_g(&p, &derive(&p), Sector::Plus, 0.0, 1.0, 3), Err(GError::OrderTooSmall(3))));
    }

    #[test]
    fn plus_and_minus_agree_in_magnitude_without_splitting() {
        let p = params(0.0, 1.0, 0.2);
        let d = derive(&p);
        let plus = eval_g(&p, &d, Sector::Plus, 0.37, 10.0, 60).unwrap();
        let minus = eval_g(&p, &d, Sector::Minus, 0.37, 10.0, 60).unwrap();
        let sum = Float::with_val(precision::bits(), &plus.value + &minus.value);
        assert!(sum.abs() <= plus.value.clone().abs() * 1e-60);
    }

    #[test]
    fn psi_at_origin_follows_seeds() {
        let p = params(0.0, 1.0, 0.2);
        let (psi1, psi2) = reconstruct_psi(&p, &derive(&p), Sector::Minus, -0.2, &[0.0], &SeriesSettings::default()).unwrap();
        assert!(psi1[0].is_zero());
        assert_eq!(psi2[0], 1);
    }

    #[test]
    fn psi_sum_is_gaussian_when_q_terminates() {
        let p = params(0.0, 1.0, 0.2);
        let (psi1, psi2) = reconstruct_psi(&p, &derive(&p), Sector::Minus, -0.2, &[1.0], &SeriesSettings::default()).unwrap();
        let sum = Float::with_val(precision::bits(), &psi1[0] + &psi2[0]).to_f64();
        assert!((sum - (-0.25f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn overflow_is_reported_with_index() {
        let p = params(0.0, 1.0, 0.2);
        let err = eval_g(&p, &derive(&p), Sector::Plus, 0.0, 1e200, 20).unwrap_err();
        assert!(matches!(err, GError::NonFinite { .. }), "{err}");
    }
}
