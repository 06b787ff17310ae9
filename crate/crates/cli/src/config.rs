//! Command-line arguments. Every flag can also come from a `RABI2_*`
//! environment variable; flags win over the environment, which wins over
//! the built-in defaults.

use clap::{Args, Parser, Subcommand, ValueEnum};
use rabi2::gfunction::SeriesSettings;
use rabi2::model::{ModelParams, Sector};
use rabi2::spectrum::SolverOptions;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "rabi2", version, about = "Exact spectrum of the two-photon Rabi model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roots of the four sector G-functions in an energy window.
    Spectrum(SpectrumArgs),
    /// Spectra over a range of couplings, with tracked curves and crossings.
    Sweep(SweepArgs),
    /// G-function values on a uniform energy grid.
    Gtrace(GtraceArgs),
    /// Couplings and energies of the Juddian (exact isolated) solutions.
    Juddian(JuddianArgs),
    /// Eigenvalues from dense diagonalization in a truncated Fock basis.
    Oracle(OracleArgs),
    /// Cross-checks of the solver against its invariants.
    Check(CheckArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Sweep(_) => "sweep",
            Command::Gtrace(_) => "gtrace",
            Command::Juddian(_) => "juddian",
            Command::Oracle(_) => "oracle",
            Command::Check(_) => "check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Qubit splitting ω₀.
    #[arg(long, env = "RABI2_OMEGA0", default_value_t = 0.0, allow_negative_numbers = true)]
    pub omega0: f64,
    /// Oscillator frequency ω.
    #[arg(long, env = "RABI2_OMEGA", default_value_t = 1.0, allow_negative_numbers = true)]
    pub omega: f64,
    /// Two-photon coupling g; requires 4|g| < ω.
    #[arg(long, env = "RABI2_G", default_value_t = 0.0, allow_negative_numbers = true)]
    pub g: f64,
}

impl ModelArgs {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.omega0, self.omega, self.g).map_err(|e| CliError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WindowArgs {
    /// Lower end of the energy window [default: the spectral lower bound].
    #[arg(long, env = "RABI2_EMIN", allow_negative_numbers = true)]
    pub emin: Option<f64>,
    /// Upper end of the energy window [default: emin + 4ω].
    #[arg(long, env = "RABI2_EMAX", allow_negative_numbers = true)]
    pub emax: Option<f64>,
}

impl WindowArgs {
    pub fn window(&self, params: &ModelParams) -> (f64, f64) {
        let emin = self.emin.unwrap_or_else(|| rabi2::spectrum::spectral_lower_bound(params));
        let emax = self.emax.unwrap_or(emin + 4.0 * params.omega());
        (emin, emax)
    }
}

/// Numerical settings shared by every solver-backed subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct RunConfig {
    /// Working precision of the series evaluation, in bits.
    #[arg(long, env = "RABI2_PRECISION_BITS", default_value_t = rabi2::precision::DEFAULT_BITS)]
    pub precision_bits: u32,
    /// Evaluation points z, comma separated.
    #[arg(long = "z", env = "RABI2_Z", value_delimiter = ',', default_values_t = [100.0, 1000.0])]
    pub z_points: Vec<f64>,
    /// Largest truncation order of the series.
    #[arg(long = "lmax", env = "RABI2_LMAX", default_value_t = 200)]
    pub l_max: usize,
    /// Final bracket width of each root.
    #[arg(long, env = "RABI2_TOL_ROOT", default_value_t = 1e-10)]
    pub tol_root: f64,
    /// Relative change between truncation orders accepted as converged.
    #[arg(long, env = "RABI2_TOL_SERIES", default_value_t = 1e-20)]
    pub tol_series: f64,
    /// Scan grid points per level spacing.
    #[arg(long, env = "RABI2_SCAN_DENSITY", default_value_t = 200)]
    pub scan_density: usize,
    /// Refuse couplings with 4|g|/ω ≥ 1 − collapse_guard.
    #[arg(long, env = "RABI2_COLLAPSE_GUARD", default_value_t = 0.05)]
    pub collapse_guard: f64,
    /// Solve inside the collapse guard anyway; results are not certified.
    #[arg(long, env = "RABI2_ALLOW_COLLAPSE")]
    pub allow_collapse: bool,
    #[arg(long, env = "RABI2_FORMAT", value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads [default: all cores].
    #[arg(long, env = "RABI2_JOBS")]
    pub jobs: Option<usize>,
}

impl RunConfig {
    /// Checks the settings and applies the working precision.
    pub fn apply(&self) -> Result<SolverOptions, CliError> {
        let invalid = |msg: String| Err(CliError::Invalid(msg));
        rabi2::precision::set_bits(self.precision_bits).map_err(|e| CliError::Invalid(e.to_string()))?;
        if self.z_points.is_empty() {
            return invalid("at least one z value is required".into());
        }
        let mut sorted = self.z_points.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return invalid(format!("z values must be distinct, got {:?}", self.z_points));
        }
        if self.jobs == Some(0) {
            return invalid("jobs must be at least 1".into());
        }
        if self.tol_series.is_nan() || self.tol_series <= 0.0 {
            return invalid(format!("tol_series must be positive, got {}", self.tol_series));
        }
        let options = SolverOptions {
            series: SeriesSettings { tol_series: self.tol_series, max_order: self.l_max, ..SeriesSettings::default() },
            z_values: self.z_points.clone(),
            scan_density: self.scan_density,
            tol_root: self.tol_root,
            collapse_guard: self.collapse_guard,
            allow_collapse: self.allow_collapse,
            ..SolverOptions::default()
        };
        options.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(options)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Qubit splitting ω₀.
    #[arg(long, env = "RABI2_OMEGA0", default_value_t = 0.0, allow_negative_numbers = true)]
    pub omega0: f64,
    /// Oscillator frequency ω.
    #[arg(long, env = "RABI2_OMEGA", default_value_t = 1.0, allow_negative_numbers = true)]
    pub omega: f64,
    #[arg(long, env = "RABI2_G_MIN", default_value_t = 0.0, allow_negative_numbers = true)]
    pub g_min: f64,
    #[arg(long, env = "RABI2_G_MAX", allow_negative_numbers = true)]
    pub g_max: f64,
    /// Number of couplings, evenly spaced from g-min to g-max inclusive.
    #[arg(long, env = "RABI2_STEPS", default_value_t = 24)]
    pub steps: usize,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub run: RunConfig,
}

impl SweepArgs {
    pub fn couplings(&self) -> Result<Vec<f64>, CliError> {
        if !(self.g_min.is_finite() && self.g_max.is_finite()) || self.g_max < self.g_min {
            return Err(CliError::Invalid(format!("need finite g-min <= g-max, got [{}, {}]", self.g_min, self.g_max)));
        }
        match self.steps {
            0 => Err(CliError::Invalid("steps must be at least 1".into())),
            1 => Ok(vec![self.g_min]),
            n => {
                let width = self.g_max - self.g_min;
                Ok((0..n).map(|i| self.g_min + width * i as f64 / (n - 1) as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GtraceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// plus, minus, plus_i (or i) and minus_i.
    #[arg(long, env = "RABI2_SECTOR", value_parser = parse_sector)]
    #[serde(serialize_with = "sector_name")]
    pub sector: Sector,
    /// Number of energies, including both window ends.
    #[arg(long, env = "RABI2_SAMPLES", default_value_t = 41)]
    pub samples: usize,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub run: RunConfig,
}

fn parse_sector(s: &str) -> Result<Sector, String> {
    s.parse().map_err(|e: rabi2::model::ParseSectorError| e.to_string())
}

fn sector_name<S: serde::Serializer>(sector: &Sector, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(sector.name())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct JuddianArgs {
    #[arg(long, env = "RABI2_OMEGA0", default_value_t = 0.0, allow_negative_numbers = true)]
    pub omega0: f64,
    #[arg(long, env = "RABI2_OMEGA", default_value_t = 1.0, allow_negative_numbers = true)]
    pub omega: f64,
    /// Orders N, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3, 4])]
    pub n: Vec<u32>,
    #[arg(long, env = "RABI2_FORMAT", value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Boson cutoff of the truncated basis.
    #[arg(long, env = "RABI2_NMAX", default_value_t = 400)]
    pub nmax: usize,
    /// Number of lowest eigenvalues to print.
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    /// Also solve the G-functions and print the difference per level.
    #[arg(long)]
    pub compare: bool,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Boson cutoff of the reference diagonalization.
    #[arg(long, env = "RABI2_NMAX", default_value_t = 400)]
    pub nmax: usize,
    #[command(flatten)]
    pub run: RunConfig,
}
