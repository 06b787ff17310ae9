//! Coefficients Q_n(E), K_n(E) of the expansions of ψ̄₁ and ψ̄₂.
//!
//! The recurrence couples indices n−2, n and n+2 only, so a sector seeded at
//! index 0 (or 1) fills the even (or odd) entries and leaves the rest exactly
//! zero. Two number types are supported: working-precision [`Float`] for the
//! solver and exact [`Rational`] for tests that need exact cancellation.

use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use rug::{Float, Integer, Rational};
use thiserror::Error;

use crate::model::{sector_seeds, DerivedParams, ModelParams, Sector};
use crate::precision::{self, PrecisionError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("the recurrence divides by 2g; g = 0 must be served by the reference spectrum")]
    ZeroCoupling,
    #[error("order {order} is too small for sector {sector}: need at least {min}")]
    OrderTooSmall { sector: Sector, order: usize, min: usize },
    #[error("kappa is irrational for these parameters: omega^2 - 16 g^2 = {radicand} is not a rational square")]
    IrrationalKappa { radicand: String },
    #[error("eigenfunctions are not normalizable: 4|g| must be below omega")]
    NotNormalizable,
    #[error("closed-form check needs omega0 = 0, got {0}")]
    NonZeroOmega0(f64),
    #[error(transparent)]
    Precision(#[from] PrecisionError),
}

/// Number type the recurrence can run in.
pub trait Scalar:
    Clone
    + PartialEq<i32>
    + Neg<Output = Self>
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
    + for<'a> DivAssign<&'a Self>
    + Send
    + Sync
{
    fn integer(value: i64) -> Self;

    fn is_exact_zero(&self) -> bool {
        *self == 0
    }
}

impl Scalar for Float {
    fn integer(value: i64) -> Self {
        precision::float(value)
    }
}

impl Scalar for Rational {
    fn integer(value: i64) -> Self {
        Rational::from(value)
    }
}

/// Truncated coefficient arrays for one (parameters, sector, energy).
///
/// Both arrays hold every index 0..=order, including the structural zeros of
/// the opposite parity.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoeffs<T> {
    pub sector: Sector,
    pub energy: T,
    pub order: usize,
    pub q: Vec<T>,
    pub k: Vec<T>,
}

/// Highest index with the sector's parity not exceeding `order`.
pub fn top_index(sector: Sector, order: usize) -> usize {
    if order % 2 == sector.start_index() {
        order
    } else {
        order - 1
    }
}

/// Smallest order accepted for a sector: seed index plus one step.
pub fn min_order(sector: Sector) -> usize {
    sector.start_index() + 2
}

/// Parameter-only part of the recurrence, precomputed up to a fixed order.
///
/// With r_n = 1/(2g(n+2)(n+1)) the two updates read
///
/// ```text
/// Q[n+2] = −((ωΩ n − 4gκ − E) r_n Q[n] + (ω₀/2) r_n K[n])
/// K[n+2] =  ((ω+8gκ)n + 4gκ − E) r_n K[n] − 4ωκ r_n K[n−2] + (ω₀/2) r_n Q[n]
/// ```
///
/// where ω − 8gκ has been written as ωΩ only in this comment.
#[derive(Debug, Clone)]
pub struct Recurrence<T> {
    order: usize,
    reciprocal: Vec<T>,
    q_diagonal: Vec<T>,
    k_diagonal: Vec<T>,
    cross: Vec<T>,
    back: Vec<T>,
}

impl<T: Scalar> Recurrence<T> {
    fn from_parts(omega0: &T, omega: &T, g: &T, kappa: &T, order: usize) -> Result<Self, SeriesError> {
        if g.is_exact_zero() {
            return Err(SeriesError::ZeroCoupling);
        }
        let prod = |a: &T, b: &T| {
            let mut out = a.clone();
            out *= b;
            out
        };
        let g_kappa = prod(g, kappa);
        let eight_g_kappa = prod(&g_kappa, &T::integer(8));
        let four_g_kappa = prod(&g_kappa, &T::integer(4));
        let mut q_slope = omega.clone();
        q_slope -= &eight_g_kappa;
        let mut k_slope = omega.clone();
        k_slope += &eight_g_kappa;
        let mut half_omega0 = omega0.clone();
        half_omega0 /= &T::integer(2);
        let back_coupling = prod(&prod(omega, kappa), &T::integer(4));

        let steps = order.saturating_sub(1);
        let mut reciprocal = Vec::with_capacity(steps);
        let mut q_diagonal = Vec::with_capacity(steps);
        let mut k_diagonal = Vec::with_capacity(steps);
        let mut cross = Vec::with_capacity(steps);
        let mut back = Vec::with_capacity(steps);
        for n in 0..steps {
            let denominator = ((n + 2) * (n + 1)) as i64;
            let mut r = T::integer(1);
            r /= &prod(g, &T::integer(2 * denominator));
            let n_t = T::integer(n as i64);

            let mut qd = prod(&q_slope, &n_t);
            qd -= &four_g_kappa;
            qd *= &r;
            let mut kd = prod(&k_slope, &n_t);
            kd += &four_g_kappa;
            kd *= &r;

            cross.push(prod(&half_omega0, &r));
            back.push(prod(&back_coupling, &r));
            q_diagonal.push(qd);
            k_diagonal.push(kd);
            reciprocal.push(r);
        }
        Ok(Self { order, reciprocal, q_diagonal, k_diagonal, cross, back })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Runs the recurrence for one sector and trial energy.
    pub fn coefficients(&self, sector: Sector, energy: &T) -> Result<SeriesCoeffs<T>, SeriesError> {
        let min = min_order(sector);
        if self.order < min {
            return Err(SeriesError::OrderTooSmall { sector, order: self.order, min });
        }
        let seeds = sector_seeds(sector);
        let zero = T::integer(0);
        let mut q = vec![zero.clone(); self.order + 1];
        let mut k = vec![zero.clone(); self.order + 1];
        let start = seeds.start_index;
        q[start] = T::integer(seeds.q as i64);
        k[start] = T::integer(seeds.k as i64);

        let mut n = start;
        while n + 2 <= self.order {
            let mut shift = energy.clone();
            shift *= &self.reciprocal[n];

            let mut q_factor = self.q_diagonal[n].clone();
            q_factor -= &shift;
            q_factor *= &q[n];
            let mut q_cross = self.cross[n].clone();
            q_cross *= &k[n];
            q_factor += &q_cross;

            let mut k_next = self.k_diagonal[n].clone();
            k_next -= &shift;
            k_next *= &k[n];
            if n >= 2 {
                let mut previous = self.back[n].clone();
                previous *= &k[n - 2];
                k_next -= &previous;
            }
            let mut k_cross = self.cross[n].clone();
            k_cross *= &q[n];
            k_next += &k_cross;

            q[n + 2] = -q_factor;
            k[n + 2] = k_next;
            n += 2;
        }
        Ok(SeriesCoeffs { sector, energy: energy.clone(), order: self.order, q, k })
    }
}

impl Recurrence<Float> {
    /// Working-precision recurrence table for `params` up to `order`.
    pub fn new(params: &ModelParams, derived: &DerivedParams, order: usize) -> Result<Self, SeriesError> {
        let omega0 = precision::decimal_float(params.omega0())?;
        let omega = precision::decimal_float(params.omega())?;
        let g = precision::decimal_float(params.g())?;
        Self::from_parts(&omega0, &omega, &g, &derived.kappa, order)
    }
}

impl Recurrence<Rational> {
    /// Exact recurrence table; requires κ to be rational.
    pub fn exact(params: &ExactParams, order: usize) -> Result<Self, SeriesError> {
        Self::from_parts(&params.omega0, &params.omega, &params.g, &params.kappa, order)
    }
}

/// Parameters for exact-rational runs of the recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactParams {
    pub omega0: Rational,
    pub omega: Rational,
    pub g: Rational,
    pub kappa: Rational,
}

impl ExactParams {
    /// Builds exact parameters when √(ω² − 16g²) is rational.
    pub fn new(omega0: Rational, omega: Rational, g: Rational) -> Result<Self, SeriesError> {
        if g == 0 {
            return Err(SeriesError::ZeroCoupling);
        }
        let radicand = Rational::from(omega.square_ref()) - Rational::from(g.square_ref()) * 16u32;
        if radicand <= 0 || omega <= 0 {
            return Err(SeriesError::NotNormalizable);
        }
        let root = rational_sqrt(&radicand)
            .ok_or_else(|| SeriesError::IrrationalKappa { radicand: radicand.to_string() })?;
        let kappa = Rational::from(&g * 2u32) / (Rational::from(&omega + &root));
        Ok(Self { omega0, omega, g, kappa })
    }

    /// Reads `params` as exact decimals.
    pub fn from_model(params: &ModelParams) -> Result<Self, SeriesError> {
        Self::new(
            precision::decimal(params.omega0())?,
            precision::decimal(params.omega())?,
            precision::decimal(params.g())?,
        )
    }
}

fn rational_sqrt(value: &Rational) -> Option<Rational> {
    let (num, den) = value.clone().into_numer_denom();
    if num.is_perfect_square() && den.is_perfect_square() {
        Some(Rational::from((num.sqrt(), den.sqrt())))
    } else {
        None
    }
}

/// Working-precision coefficients for a single energy.
pub fn compute_coefficients(
    params: &ModelParams,
    derived: &DerivedParams,
    sector: Sector,
    energy: f64,
    order: usize,
) -> Result<SeriesCoeffs<Float>, SeriesError> {
    let min = min_order(sector);
    if order < min {
        return Err(SeriesError::OrderTooSmall { sector, order, min });
    }
    Recurrence::new(params, derived, order)?.coefficients(sector, &precision::float(energy))
}

/// Exact coefficients for rational parameters and energy.
pub fn exact_coefficients(
    params: &ExactParams,
    sector: Sector,
    energy: &Rational,
    order: usize,
) -> Result<SeriesCoeffs<Rational>, SeriesError> {
    Recurrence::exact(params, order)?.coefficients(sector, energy)
}

/// One same-parity ratio c[n+2]/c[n].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRatio {
    pub n: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatioDiagnostic {
    pub q: Vec<TailRatio>,
    pub k: Vec<TailRatio>,
    /// Indices n whose ratio was omitted because c[n] or c[n+2] sits below
    /// the underflow floor.
    pub skipped_q: Vec<usize>,
    pub skipped_k: Vec<usize>,
}

/// Relative floor below which coefficients are treated as noise:
/// 10^(−bits/4) of the largest magnitude in the array.
pub fn underflow_floor() -> f64 {
    10f64.powf(-(precision::bits() as f64) / 4.0)
}

/// Consecutive same-parity ratios Q[n+2]/Q[n] and K[n+2]/K[n].
pub fn coefficient_ratio_diagnostic(coeffs: &SeriesCoeffs<Float>) -> RatioDiagnostic {
    let start = coeffs.sector.start_index();
    let (q, skipped_q) = ratios(&coeffs.q, start);
    let (k, skipped_k) = ratios(&coeffs.k, start);
    RatioDiagnostic { q, k, skipped_q, skipped_k }
}

fn ratios(values: &[Float], start: usize) -> (Vec<TailRatio>, Vec<usize>) {
    let largest = values
        .iter()
        .skip(start)
        .step_by(2)
        .map(|v| Float::with_val(precision::bits(), v.abs_ref()))
        .fold(precision::float(0), |acc, v| if v > acc { v } else { acc });
    let floor = largest * underflow_floor();
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    let mut n = start;
    while n + 2 < values.len() {
        let (lower, upper) = (&values[n], &values[n + 2]);
        if lower.is_zero() || upper.is_zero() || lower.as_abs().lt(&floor) || upper.as_abs().lt(&floor) {
            skipped.push(n);
        } else {
            let ratio = Float::with_val(precision::bits(), upper / lower).to_f64();
            out.push(TailRatio { n, ratio });
        }
        n += 2;
    }
    (out, skipped)
}

/// Least-squares exponent p in |ratio| ∝ n^(−p) over ratios with n ≥ `n_min`.
pub fn fit_decay_exponent(ratios: &[TailRatio], n_min: usize) -> Option<f64> {
    let points: Vec<(f64, f64)> = ratios
        .iter()
        .filter(|r| r.n >= n_min && r.n > 0 && r.ratio != 0.0)
        .map(|r| ((r.n as f64).ln(), r.ratio.abs().ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let count = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    Some(-sxy / sxx)
}

/// Maximum relative deviation between recurrence Q[2k] and the ω₀ = 0 product
///
/// Q[2k] = ∏_{j<k} (E − ε_{2j}) / ((2g)^k (2k)!),  ε_n = −ω/2 + (n + ½)Ωω,
///
/// over k = 1..=k_max. Entries where the product vanishes are compared on the
/// scale of the largest product instead.
pub fn q_closed_form_check(params: &ModelParams, energy: f64, k_max: usize) -> Result<f64, SeriesError> {
    if params.omega0() != 0.0 {
        return Err(SeriesError::NonZeroOmega0(params.omega0()));
    }
    if params.g() == 0.0 {
        return Err(SeriesError::ZeroCoupling);
    }
    let derived = crate::model::derive(params);
    let coeffs = compute_coefficients(params, &derived, Sector::Plus, energy, 2 * k_max.max(1))?;

    let bits = precision::bits();
    let omega = precision::decimal_float(params.omega())?;
    let g = precision::decimal_float(params.g())?;
    let e = precision::float(energy);
    let two_g = Float::with_val(bits, &g * 2u32);
    let level = |n: usize| -> Float {
        let half = Float::with_val(bits, &omega / 2u32);
        let mut step = Float::with_val(bits, &derived.omega_big * &omega);
        step *= Float::with_val(bits, n as f64 + 0.5);
        step - half
    };

    let mut closed = Vec::with_capacity(k_max);
    let mut numerator = precision::float(1);
    let mut denominator = precision::float(1);
    for k in 1..=k_max {
        numerator *= Float::with_val(bits, &e - level(2 * k - 2));
        denominator *= &two_g;
        denominator *= Float::with_val(bits, Integer::from((2 * k - 1) * (2 * k)));
        closed.push(Float::with_val(bits, &numerator / &denominator));
    }
    let scale = closed
        .iter()
        .map(|c| Float::with_val(bits, c.abs_ref()))
        .fold(precision::float(0), |acc, v| if v > acc { v } else { acc });

    let mut worst = 0.0f64;
    for (k, expected) in closed.iter().enumerate() {
        let got = &coeffs.q[2 * (k + 1)];
        let diff = Float::with_val(bits, got - expected).abs();
        let reference = if expected.is_zero() { scale.clone() } else { Float::with_val(bits, expected.abs_ref()) };
        if reference.is_zero() {
            continue;
        }
        worst = worst.max((diff / reference).to_f64());
    }
    Ok(worst)
}
