//! Working precision for the big-float arithmetic shared by the series,
//! G-function and spectrum layers.
//!
//! The precision is a process-wide setting read whenever a new [`Float`] is
//! created. Changing it while other threads are evaluating is allowed but
//! mixes precisions between in-flight evaluations; set it once at startup.

use std::sync::atomic::{AtomicU32, Ordering};

use rug::{Float, Integer, Rational};
use thiserror::Error;

/// Default mantissa width in bits.
pub const DEFAULT_BITS: u32 = 256;

/// Smallest accepted mantissa width.
pub const MIN_BITS: u32 = 64;

static WORKING_BITS: AtomicU32 = AtomicU32::new(DEFAULT_BITS);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrecisionError {
    #[error("precision of {0} bits is below the minimum of {MIN_BITS}")]
    TooSmall(u32),
    #[error("precision of {0} bits exceeds what MPFR supports")]
    TooLarge(u32),
    #[error("cannot represent non-finite value {0} exactly")]
    NonFinite(f64),
}

/// Current working precision in bits.
pub fn bits() -> u32 {
    WORKING_BITS.load(Ordering::Relaxed)
}

/// Sets the working precision used by every subsequent evaluation.
pub fn set_bits(bits: u32) -> Result<(), PrecisionError> {
    if bits < MIN_BITS {
        return Err(PrecisionError::TooSmall(bits));
    }
    if bits > rug::float::prec_max() {
        return Err(PrecisionError::TooLarge(bits));
    }
    WORKING_BITS.store(bits, Ordering::Relaxed);
    Ok(())
}

/// Creates a float at the working precision.
pub fn float<T>(value: T) -> Float
where
    Float: rug::Assign<T>,
{
    Float::with_val(bits(), value)
}

/// The rational number written by the shortest decimal that round-trips `x`.
///
/// Model parameters typed as `0.3` mean three tenths, not the nearest binary
/// double; the series layer works from these exact decimals.
pub fn decimal(x: f64) -> Result<Rational, PrecisionError> {
    if !x.is_finite() {
        return Err(PrecisionError::NonFinite(x));
    }
    if x == 0.0 {
        return Ok(Rational::new());
    }
    // `{:e}` prints the shortest round-trip mantissa, e.g. "-4.05046e-1".
    let text = format!("{x:e}");
    let (mantissa, exponent) = text.split_once('e').expect("exponent marker");
    let mut exponent: i64 = exponent.parse().expect("integer exponent");
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa),
    };
    let digits: String = match mantissa.split_once('.') {
        Some((int, frac)) => {
            exponent -= frac.len() as i64;
            format!("{int}{frac}")
        }
        None => mantissa.to_owned(),
    };
    let mut value = Rational::from(digits.parse::<Integer>().expect("decimal digits"));
    let scale = Rational::from(Integer::from(Integer::u_pow_u(10, exponent.unsigned_abs() as u32)));
    if exponent >= 0 {
        value *= scale;
    } else {
        value /= scale;
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

/// `x` interpreted as its shortest decimal, rounded to the working precision.
pub fn decimal_float(x: f64) -> Result<Float, PrecisionError> {
    Ok(float(&decimal(x)?))
}
