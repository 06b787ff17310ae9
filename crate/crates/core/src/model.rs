//! Hamiltonian parameters, the four symmetry sectors and the derived
//! squeezing quantities κ and Ω.

use std::fmt;
use std::str::FromStr;

use rug::Float;
use thiserror::Error;

use crate::precision::{self, PrecisionError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter {name} is not finite ({value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("omega must be positive, got {0}")]
    NonPositiveOmega(f64),
    #[error("eigenfunctions are not normalizable: 4|g| = {four_g} must be below omega = {omega}")]
    NotNormalizable { four_g: f64, omega: f64 },
    #[error(transparent)]
    Precision(#[from] PrecisionError),
}

/// The triple (ω₀, ω, g) of the two-photon Rabi Hamiltonian.
///
/// Construction enforces ω > 0 and 4|g| < ω. Values are carried as `f64`;
/// the high-precision layers read them as their shortest decimal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    omega0: f64,
    omega: f64,
    g: f64,
}

impl ModelParams {
    pub fn new(omega0: f64, omega: f64, g: f64) -> Result<Self, ModelError> {
        for (name, value) in [("omega0", omega0), ("omega", omega), ("g", g)] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { name, value });
            }
        }
        if omega <= 0.0 {
            return Err(ModelError::NonPositiveOmega(omega));
        }
        // Compare exactly in decimal so that e.g. g = 0.25, omega = 1 is
        // rejected rather than slipping through binary rounding.
        let four_g = precision::decimal(g)?.abs() * 4u32;
        if four_g >= precision::decimal(omega)? {
            return Err(ModelError::NotNormalizable { four_g: 4.0 * g.abs(), omega });
        }
        Ok(Self { omega0, omega, g })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    /// Same ω₀ and ω with a different coupling.
    pub fn with_g(&self, g: f64) -> Result<Self, ModelError> {
        Self::new(self.omega0, self.omega, g)
    }

    /// Same parameters with g → −g.
    pub fn mirrored(&self) -> Self {
        Self { g: -self.g, ..*self }
    }

    /// 4|g|/ω, which must stay below one.
    pub fn coupling_ratio(&self) -> f64 {
        4.0 * self.g.abs() / self.omega
    }

    /// Ω = √(1 − 16g²/ω²) in double precision.
    pub fn omega_big(&self) -> f64 {
        let r = self.coupling_ratio();
        ((1.0 - r) * (1.0 + r)).sqrt()
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "omega0={}, omega={}, g={}", self.omega0, self.omega, self.g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

/// Symmetry sector labelled by c ∈ {−1, +1, −i, +i}.
///
/// Variants are declared in ladder order (G₋, G₊, G₋ᵢ, Gᵢ) so that the
/// derived ordering lists the ground-state sector first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sector {
    Minus,
    Plus,
    MinusI,
    PlusI,
}

/// Starting values of the coefficient recurrence for one sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectorSeeds {
    pub q: i32,
    pub k: i32,
    pub start_index: usize,
}

impl Sector {
    pub const ALL: [Sector; 4] = [Sector::Minus, Sector::Plus, Sector::MinusI, Sector::PlusI];

    pub fn parity(self) -> Parity {
        match self {
            Sector::Plus | Sector::Minus => Parity::Even,
            Sector::PlusI | Sector::MinusI => Parity::Odd,
        }
    }

    pub fn seeds(self) -> SectorSeeds {
        sector_seeds(self)
    }

    /// Lowest coefficient index allowed by the sector's parity.
    pub fn start_index(self) -> usize {
        match self.parity() {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    /// Short machine-readable name used in CSV/JSON output.
    pub fn name(self) -> &'static str {
        match self {
            Sector::Plus => "plus",
            Sector::Minus => "minus",
            Sector::PlusI => "plus_i",
            Sector::MinusI => "minus_i",
        }
    }

    /// The symmetry parameter c as text.
    pub fn symmetry_value(self) -> &'static str {
        match self {
            Sector::Plus => "+1",
            Sector::Minus => "-1",
            Sector::PlusI => "+i",
            Sector::MinusI => "-i",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown sector `{0}` (expected plus, minus, plus_i or minus_i)")]
pub struct ParseSectorError(String);

impl FromStr for Sector {
    type Err = ParseSectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plus" | "+" | "+1" | "1" => Ok(Sector::Plus),
            "minus" | "-" | "-1" => Ok(Sector::Minus),
            "plus_i" | "plusi" | "i" | "+i" => Ok(Sector::PlusI),
            "minus_i" | "minusi" | "-i" => Ok(Sector::MinusI),
            _ => Err(ParseSectorError(s.to_owned())),
        }
    }
}

/// Seeds of the recurrence: (Q, K) at index 0 for c = ±1 and at index 1 for
/// c = ±i, with K carrying the sign of c.
pub fn sector_seeds(sector: Sector) -> SectorSeeds {
    let k = match sector {
        Sector::Plus | Sector::PlusI => 1,
        Sector::Minus | Sector::MinusI => -1,
    };
    SectorSeeds { q: 1, k, start_index: sector.start_index() }
}

/// κ and Ω at the working precision.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    /// Squeezing parameter of the e^(−κz²) prefactor; odd in g.
    pub kappa: Float,
    /// Ω = √(1 − 16g²/ω²), in (0, 1].
    pub omega_big: Float,
}

impl DerivedParams {
    pub fn kappa_f64(&self) -> f64 {
        self.kappa.to_f64()
    }

    pub fn omega_big_f64(&self) -> f64 {
        self.omega_big.to_f64()
    }
}

/// κ from the branch that stays finite as g → 0, and Ω from its radical.
///
/// κ is evaluated as 2g / (ω + √(ω² − 16g²)), algebraically equal to
/// (ω − √(ω² − 16g²)) / 8g but free of cancellation and exactly 0 at g = 0.
pub fn derive(params: &ModelParams) -> DerivedParams {
    let omega = precision::decimal_float(params.omega).expect("validated finite");
    let g = precision::decimal_float(params.g).expect("validated finite");
    let four_g = Float::with_val(precision::bits(), &g * 4u32);
    let radicand = Float::with_val(precision::bits(), omega.square_ref()) - four_g.square();
    let root = radicand.sqrt();
    let kappa = Float::with_val(precision::bits(), &g * 2u32) / (Float::with_val(precision::bits(), &omega + &root));
    let omega_big = root / &omega;
    DerivedParams { kappa, omega_big }
}

/// Ω through κ: 1 − 8gκ/ω. Used to cross-check [`derive`].
pub fn omega_big_via_kappa(params: &ModelParams, derived: &DerivedParams) -> Float {
    let omega = precision::decimal_float(params.omega).expect("validated finite");
    let g = precision::decimal_float(params.g).expect("validated finite");
    let eight_g_kappa = Float::with_val(precision::bits(), &g * &derived.kappa) * 8u32;
    Float::with_val(precision::bits(), 1) - eight_g_kappa / omega
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizability_bound_is_enforced() {
        assert!(ModelParams::new(1.0, 1.0, 0.3).is_err());
        assert!(matches!(
            ModelParams::new(0.0, 1.0, 0.25),
            Err(ModelError::NotNormalizable { .. })
        ));
        assert!(matches!(
            ModelParams::new(0.0, 1.0, -0.25),
            Err(ModelError::NotNormalizable { .. })
        ));
        assert!(matches!(ModelParams::new(0.0, 0.0, 0.0), Err(ModelError::NonPositiveOmega(_))));
        assert!(matches!(ModelParams::new(f64::NAN, 1.0, 0.0), Err(ModelError::NonFinite { .. })));
        assert!(ModelParams::new(1.0, 2.0, 0.26).is_ok());
        assert!(ModelParams::new(3.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn derived_values_at_pythagorean_point() {
        let d = derive(&ModelParams::new(0.3, 1.0, 0.2).unwrap());
        assert!((d.kappa_f64() - 0.25).abs() < 1e-15);
        assert!((d.omega_big_f64() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_is_exact() {
        let d = derive(&ModelParams::new(1.0, 1.0, 0.0).unwrap());
        assert!(d.kappa.is_zero());
        assert_eq!(d.omega_big, 1);
    }

    #[test]
    fn juddian_coupling_gives_expected_omega_big() {
        let d = derive(&ModelParams::new(1.0, 2.0, 0.405046).unwrap());
        let omega_sq = d.omega_big_f64().powi(2);
        assert!((omega_sq - 0.34375).abs() < 1e-5, "{omega_sq}");
    }

    #[test]
    fn seeds_follow_sector_table() {
        let table = [
            (Sector::Plus, (1, 1, 0)),
            (Sector::Minus, (1, -1, 0)),
            (Sector::PlusI, (1, 1, 1)),
            (Sector::MinusI, (1, -1, 1)),
        ];
        for (sector, (q, k, start)) in table {
            let s = sector_seeds(sector);
            assert_eq!((s.q, s.k, s.start_index), (q, k, start), "{sector}");
            assert_eq!(sector.parity() == Parity::Even, start == 0);
        }
    }

    #[test]
    fn sector_names_round_trip() {
        for s in Sector::ALL {
            assert_eq!(s.name().parse::<Sector>().unwrap(), s);
            assert_eq!(s.symmetry_value().parse::<Sector>().unwrap(), s);
        }
        assert!("zero".parse::<Sector>().is_err());
    }

    #[test]
    fn kappa_near_collapse_stays_finite() {
        let p = ModelParams::new(0.0, 1.0, 0.2499999).unwrap();
        let d = derive(&p);
        assert!(d.omega_big_f64() > 0.0 && d.omega_big_f64() < 1e-3);
        let limit = 1.0 / (8.0 * 0.2499999);
        assert!((d.kappa_f64() - limit).abs() < 2e-3);
    }

    proptest::proptest! {
        #[test]
        fn kappa_is_odd_and_omega_big_even(omega in 0.1f64..5.0, ratio in 0.0f64..0.99, omega0 in -3.0f64..3.0) {
            let g = ratio * omega / 4.0;
            let plus = derive(&ModelParams::new(omega0, omega, g).unwrap());
            let minus = derive(&ModelParams::new(omega0, omega, -g).unwrap());
            proptest::prop_assert_eq!(&plus.kappa, &Float::with_val(precision::bits(), -&minus.kappa));
            proptest::prop_assert_eq!(&plus.omega_big, &minus.omega_big);
        }

        #[test]
        fn kappa_solves_its_quadratic(omega in 0.1f64..5.0, ratio in 0.01f64..0.99) {
            // 4gκ² − ωκ + g = 0, and Ω = 1 − 8gκ/ω.
            let p = ModelParams::new(0.0, omega, ratio * omega / 4.0).unwrap();
            let d = derive(&p);
            let (k, g) = (d.kappa_f64(), p.g());
            proptest::prop_assert!((4.0 * g * k * k - omega * k + g).abs() <= 1e-14 * omega.max(1.0));
            let via = omega_big_via_kappa(&p, &d).to_f64();
            proptest::prop_assert!((via - d.omega_big_f64()).abs() <= 1e-12 / d.omega_big_f64().max(1e-3));
        }
    }
}
