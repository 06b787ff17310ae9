//! Roots of the G-functions in an energy window.
//!
//! Each sector is scanned on a uniform grid, sign changes at the largest z
//! are refined by bisection, and every bracket is checked at all configured
//! z values. Results are never silently dropped: doubtful roots carry flags
//! and show up as [`Anomaly`] entries.

mod extrapolate;
mod sweep;

use std::collections::BTreeMap;

use rayon::prelude::*;
use rug::Float;
use thiserror::Error;

use crate::gfunction::{Convergence, GError, GEvaluation, SectorEvaluator, SeriesSettings};
use crate::model::{derive, DerivedParams, ModelError, ModelParams, Sector};
use crate::precision;
use crate::reference;

pub use extrapolate::{extrapolate_root, neville_at_zero, Extrapolation};
pub use sweep::{sweep, CrossingEvent, Curve, CurvePoint, SweepPoint, SweepResult};

/// Grid samples below this relative |G| are searched for touching roots.
const TANGENTIAL_PREFILTER: f64 = 1e-2;

/// Upper limit on grid points per sector scan.
pub const MAX_GRID_POINTS: usize = 4_000_000;

/// Chunks of width ω tried by [`ground_state`] before giving up.
pub const GROUND_STATE_CHUNKS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("the G-function solver needs g != 0; g = 0 is served by the reference spectrum")]
    ZeroCoupling,
    #[error("invalid energy window ({emin}, {emax})")]
    InvalidWindow { emin: f64, emax: f64 },
    #[error("4|g|/omega = {ratio} is at or above the collapse guard limit {limit}; enable collapse mode for uncertified estimates")]
    CollapseGuard { ratio: f64, limit: f64 },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("scan of ({emin}, {emax}) needs {points} grid points, above the limit of {MAX_GRID_POINTS}")]
    GridTooLarge { emin: f64, emax: f64, points: usize },
    #[error("evaluation failed at E = {energy}: {source}")]
    Evaluation { energy: f64, source: GError },
    #[error("no root of G_minus found below E = {searched_to}")]
    NoGroundState { searched_to: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    G(#[from] GError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub series: SeriesSettings,
    /// Evaluation points; the largest one drives bracketing.
    pub z_values: Vec<f64>,
    /// Grid points per min(ω, ωΩ).
    pub scan_density: usize,
    /// Final bracket width, in energy units.
    pub tol_root: f64,
    /// Relative |G| below which a touching minimum counts as a root.
    pub residual_floor: f64,
    /// Couplings with 4|g|/ω ≥ 1 − collapse_guard are refused.
    pub collapse_guard: f64,
    /// Solve inside the guard anyway and attach 1/L extrapolations.
    pub allow_collapse: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            series: SeriesSettings::default(),
            z_values: vec![100.0, 1000.0],
            scan_density: 200,
            tol_root: 1e-10,
            residual_floor: 1e-8,
            collapse_guard: 0.05,
            allow_collapse: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SpectrumError> {
        self.series.validate()?;
        let bad = |msg: String| Err(SpectrumError::InvalidOptions(msg));
        if self.z_values.is_empty() {
            return bad("at least one z value is required".into());
        }
        if let Some(z) = self.z_values.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return bad(format!("z values must be finite and positive, got {z}"));
        }
        if self.scan_density < 2 {
            return bad(format!("scan_density must be at least 2, got {}", self.scan_density));
        }
        if !(self.tol_root > 0.0 && self.tol_root.is_finite()) {
            return bad(format!("tol_root must be positive, got {}", self.tol_root));
        }
        if !(self.residual_floor >= 0.0 && self.residual_floor.is_finite()) {
            return bad(format!("residual_floor must be non-negative, got {}", self.residual_floor));
        }
        if !(0.0..1.0).contains(&self.collapse_guard) {
            return bad(format!("collapse_guard must lie in [0, 1), got {}", self.collapse_guard));
        }
        Ok(())
    }

    /// Refuses couplings inside the collapse guard unless collapse mode is on.
    /// Returns whether the point lies inside the guard.
    pub fn check_collapse(&self, params: &ModelParams) -> Result<bool, SpectrumError> {
        let limit = 1.0 - self.collapse_guard;
        let ratio = params.coupling_ratio();
        let inside = ratio >= limit;
        if inside && !self.allow_collapse {
            return Err(SpectrumError::CollapseGuard { ratio, limit });
        }
        Ok(inside)
    }

    /// Grid step min(ω, ωΩ)/scan_density.
    pub fn scan_step(&self, params: &ModelParams) -> f64 {
        params.omega().min(params.omega() * params.omega_big()) / self.scan_density as f64
    }

    fn primary_z(&self) -> usize {
        self.z_values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("validated non-empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootRecord {
    pub sector: Sector,
    /// 1-based position within the sector, counted from the window's lower
    /// edge.
    pub index: usize,
    pub energy: f64,
    /// |G(E)|·(b−a)/|G(b)−G(a)| at the largest z: the distance to the root
    /// implied by linear interpolation across the bracket. For tangential
    /// roots this is the relative |G| at the minimum instead.
    pub residual: f64,
    /// Smallest ladder order from which the bracket's sign change persists.
    pub order_used: usize,
    pub z_checked: Vec<f64>,
    pub bracket: (f64, f64),
    /// The sign change persists over at least the last three ladder orders.
    pub stable_in_order: bool,
    /// Bracket endpoints have opposite signs at every z.
    pub z_consistent: bool,
    /// Found as a touching minimum of |G| rather than a sign change.
    pub tangential: bool,
    /// Extrapolation in 1/L, only inside the collapse guard. Not certified.
    pub extrapolated: Option<f64>,
}

impl RootRecord {
    /// Passes every acceptance check.
    pub fn accepted(&self) -> bool {
        self.z_consistent && self.stable_in_order && !self.tangential
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergedLevel {
    pub energy: f64,
    pub sector: Sector,
    pub index: usize,
}

/// Something suspicious that did not stop the computation.
#[derive(Debug, Clone, PartialEq)]
pub enum Anomaly {
    /// The lowest level of a window that reaches below every eigenvalue does
    /// not belong to G₋.
    GroundStateSector { sector: Sector, energy: f64 },
    ZInconsistent { sector: Sector, energy: f64 },
    OrderUnstable { sector: Sector, energy: f64 },
    TangentialRoot { sector: Sector, energy: f64 },
    /// Grid samples whose evaluation met neither convergence criterion.
    UnconvergedSamples { sector: Sector, count: usize },
    /// Results inside the collapse guard; not certified.
    CollapseRegime { ratio: f64 },
}

impl Anomaly {
    pub fn describe(&self) -> String {
        match self {
            Anomaly::GroundStateSector { sector, energy } => {
                format!("lowest level {energy} belongs to {sector}, expected minus")
            }
            Anomaly::ZInconsistent { sector, energy } => format!("{sector} root {energy} is not consistent across z"),
            Anomaly::OrderUnstable { sector, energy } => {
                format!("{sector} root {energy} is not stable over the last ladder orders")
            }
            Anomaly::TangentialRoot { sector, energy } => format!("{sector} has a touching root near {energy}"),
            Anomaly::UnconvergedSamples { sector, count } => {
                format!("{count} grid samples of {sector} did not converge")
            }
            Anomaly::CollapseRegime { ratio } => format!("4|g|/omega = {ratio} lies inside the collapse guard"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub params: ModelParams,
    pub window: (f64, f64),
    pub per_sector: BTreeMap<Sector, Vec<RootRecord>>,
    /// All roots sorted by energy; near-coincident levels are listed in
    /// sector order.
    pub merged: Vec<MergedLevel>,
    pub anomalies: Vec<Anomaly>,
}

impl SpectrumResult {
    pub fn energies(&self) -> Vec<f64> {
        self.merged.iter().map(|m| m.energy).collect()
    }

    pub fn records(&self) -> impl Iterator<Item = &RootRecord> {
        self.per_sector.values().flatten()
    }
}

/// Per-sample data kept from the scan.
#[derive(Debug, Clone)]
struct Sample {
    energy: f64,
    signs: Vec<i8>,
    relative: f64,
    unconverged: bool,
}

/// Grid scanner and bisector for one sector.
pub(crate) struct SectorSolver<'a> {
    evaluator: SectorEvaluator,
    options: &'a SolverOptions,
    primary: usize,
}

fn normalized(sign: i8) -> i8 {
    if sign < 0 {
        -1
    } else {
        1
    }
}

impl<'a> SectorSolver<'a> {
    pub(crate) fn new(
        params: &ModelParams,
        derived: &DerivedParams,
        sector: Sector,
        options: &'a SolverOptions,
        series: SeriesSettings,
    ) -> Result<Self, SpectrumError> {
        let evaluator = SectorEvaluator::new(params, derived, sector, &options.z_values, series)?;
        Ok(Self { evaluator, options, primary: options.primary_z() })
    }

    fn eval(&self, energy: f64) -> Result<Vec<GEvaluation>, SpectrumError> {
        self.evaluator.eval(energy).map_err(|source| SpectrumError::Evaluation { energy, source })
    }

    fn signs(&self, energy: f64) -> Result<Vec<i8>, SpectrumError> {
        Ok(self.eval(energy)?.iter().map(|e| normalized(e.sign())).collect())
    }

    fn sample(&self, energy: f64) -> Result<Sample, SpectrumError> {
        let evals = self.eval(energy)?;
        let main = &evals[self.primary];
        Ok(Sample {
            energy,
            signs: evals.iter().map(|e| normalized(e.sign())).collect(),
            relative: main.relative_magnitude(),
            unconverged: main.convergence == Convergence::Unconverged,
        })
    }

    fn scan(&self, emin: f64, emax: f64, step: f64) -> Result<Vec<Sample>, SpectrumError> {
        let intervals = ((emax - emin) / step).ceil().max(1.0);
        if intervals >= MAX_GRID_POINTS as f64 {
            return Err(SpectrumError::GridTooLarge { emin, emax, points: intervals as usize + 1 });
        }
        let intervals = intervals as usize;
        (0..=intervals)
            .into_par_iter()
            .map(|k| {
                let energy = if k == intervals { emax } else { emin + (emax - emin) * k as f64 / intervals as f64 };
                self.sample(energy)
            })
            .collect()
    }

    /// Bisects a primary-z sign change down to `tol_root`.
    pub(crate) fn refine(&self, mut a: f64, mut b: f64) -> Result<RootRecord, SpectrumError> {
        let mut sa = self.signs(a)?;
        let mut sb = self.signs(b)?;
        let mut z_consistent = true;
        while b - a > self.options.tol_root {
            let m = a + (b - a) / 2.0;
            if m <= a || m >= b {
                break;
            }
            let sm = self.signs(m)?;
            let flips: Vec<bool> = sm.iter().zip(&sa).map(|(x, y)| x != y).collect();
            if flips.iter().any(|f| *f != flips[self.primary]) {
                z_consistent = false;
                break;
            }
            if flips[self.primary] {
                b = m;
                sb = sm;
            } else {
                a = m;
                sa = sm;
            }
        }
        z_consistent &= sa.iter().zip(&sb).all(|(x, y)| x != y);

        let energy = a + (b - a) / 2.0;
        let at_a = self.eval(a)?;
        let at_b = self.eval(b)?;
        let at_mid = self.eval(energy)?;
        let (ga, gb, gm) = (&at_a[self.primary], &at_b[self.primary], &at_mid[self.primary]);
        let bits = precision::bits();
        let jump = Float::with_val(bits, &gb.value - &ga.value).abs();
        let residual = if jump.is_zero() {
            b - a
        } else {
            (Float::with_val(bits, gm.value.abs_ref()) * (b - a) / jump).to_f64()
        };

        let persistent = ga
            .ladder
            .iter()
            .zip(&gb.ladder)
            .rev()
            .take_while(|(x, y)| normalized(x.sign) != normalized(y.sign))
            .count();
        let order_used = if persistent == 0 { ga.order } else { ga.ladder[ga.ladder.len() - persistent].order };
        let both_summed = ga.convergence == Convergence::Summed && gb.convergence == Convergence::Summed;
        let stable_in_order = both_summed || persistent >= 3.min(ga.ladder.len());

        Ok(RootRecord {
            sector: self.evaluator.sector(),
            index: 0,
            energy,
            residual,
            order_used,
            z_checked: self.options.z_values.clone(),
            bracket: (a, b),
            stable_in_order,
            z_consistent,
            tangential: false,
            extrapolated: None,
        })
    }

    /// Root nearest to `guess`, bracketing within ±`half_width` and widening
    /// the search up to `expansions` times.
    pub(crate) fn locate_near(
        &self,
        guess: f64,
        half_width: f64,
        expansions: usize,
    ) -> Result<Option<RootRecord>, SpectrumError> {
        let p = self.primary;
        let centre = self.signs(guess)?[p];
        let mut width = half_width;
        for _ in 0..=expansions {
            let below = self.signs(guess - width)?[p];
            let above = self.signs(guess + width)?[p];
            match (below != centre, above != centre) {
                (true, true) => {
                    // Both sides flip: take the closer root.
                    let low = self.refine(guess - width, guess)?;
                    let high = self.refine(guess, guess + width)?;
                    let nearer = if (low.energy - guess).abs() <= (high.energy - guess).abs() { low } else { high };
                    return Ok(Some(nearer));
                }
                (true, false) => return Ok(Some(self.refine(guess - width, guess)?)),
                (false, true) => return Ok(Some(self.refine(guess, guess + width)?)),
                (false, false) => width *= 2.0,
            }
        }
        Ok(None)
    }

    /// Golden-section search for a touching root between two grid points.
    fn probe_minimum(&self, left: &Sample, centre: &Sample, right: &Sample) -> Result<Vec<RootRecord>, SpectrumError> {
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let reference = centre.signs[self.primary];
        let (mut a, mut b) = (left.energy, right.energy);
        let mut best = (centre.relative, centre.energy);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = self.sample(c)?;
        let mut fd = self.sample(d)?;
        for _ in 0..80 {
            for probe in [&fc, &fd] {
                if probe.signs[self.primary] != reference {
                    // Two sign changes hidden inside one grid step.
                    let mut roots = vec![self.refine(left.energy, probe.energy)?];
                    roots.push(self.refine(probe.energy, right.energy)?);
                    return Ok(roots);
                }
                if probe.relative < best.0 {
                    best = (probe.relative, probe.energy);
                }
            }
            if b - a <= self.options.tol_root {
                break;
            }
            if fc.relative < fd.relative {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = self.sample(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = self.sample(d)?;
            }
        }
        if best.0 >= self.options.residual_floor {
            return Ok(Vec::new());
        }
        let evals = self.eval(best.1)?;
        Ok(vec![RootRecord {
            sector: self.evaluator.sector(),
            index: 0,
            energy: best.1,
            residual: best.0,
            order_used: evals[self.primary].order,
            z_checked: self.options.z_values.clone(),
            bracket: (a, b),
            stable_in_order: evals[self.primary].converged(),
            z_consistent: evals.iter().all(|e| e.relative_magnitude() < self.options.residual_floor),
            tangential: true,
            extrapolated: None,
        }])
    }

    /// All roots in [emin, emax] plus the number of unconverged samples.
    fn roots(&self, emin: f64, emax: f64, step: f64) -> Result<(Vec<RootRecord>, usize), SpectrumError> {
        let samples = self.scan(emin, emax, step)?;
        let unconverged = samples.iter().filter(|s| s.unconverged).count();
        let p = self.primary;
        let flips: Vec<bool> = samples.windows(2).map(|w| w[0].signs[p] != w[1].signs[p]).collect();

        let brackets: Vec<(f64, f64)> = samples
            .windows(2)
            .zip(&flips)
            .filter(|(_, flip)| **flip)
            .map(|(w, _)| (w[0].energy, w[1].energy))
            .collect();
        let mut records: Vec<RootRecord> =
            brackets.into_par_iter().map(|(a, b)| self.refine(a, b)).collect::<Result<_, _>>()?;

        let minima: Vec<usize> = (1..samples.len().saturating_sub(1))
            .filter(|&k| {
                !flips[k - 1]
                    && !flips[k]
                    && samples[k].relative < TANGENTIAL_PREFILTER
                    && samples[k].relative < samples[k - 1].relative
                    && samples[k].relative <= samples[k + 1].relative
            })
            .collect();
        for k in minima {
            records.extend(self.probe_minimum(&samples[k - 1], &samples[k], &samples[k + 1])?);
        }

        records.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        records.dedup_by(|later, earlier| (later.energy - earlier.energy).abs() <= self.options.tol_root);
        for (i, record) in records.iter_mut().enumerate() {
            record.index = i + 1;
        }
        Ok((records, unconverged))
    }
}

fn check_window(window: (f64, f64)) -> Result<(), SpectrumError> {
    let (emin, emax) = window;
    if !(emin.is_finite() && emax.is_finite() && emin < emax) {
        return Err(SpectrumError::InvalidWindow { emin, emax });
    }
    Ok(())
}

/// Roots of one sector's G in `window`, sorted and indexed from 1.
pub fn find_roots(
    params: &ModelParams,
    sector: Sector,
    window: (f64, f64),
    options: &SolverOptions,
) -> Result<Vec<RootRecord>, SpectrumError> {
    Ok(find_roots_counted(params, sector, window, options)?.0)
}

fn find_roots_counted(
    params: &ModelParams,
    sector: Sector,
    window: (f64, f64),
    options: &SolverOptions,
) -> Result<(Vec<RootRecord>, usize), SpectrumError> {
    options.validate()?;
    check_window(window)?;
    if params.g() == 0.0 {
        return Err(SpectrumError::ZeroCoupling);
    }
    let collapse = options.check_collapse(params)?;
    let derived = derive(params);
    let solver = SectorSolver::new(params, &derived, sector, options, options.series)?;
    let (mut records, unconverged) = solver.roots(window.0, window.1, options.scan_step(params))?;
    if collapse {
        for record in &mut records {
            record.extrapolated = extrapolate_root(params, &derived, sector, record.energy, options)
                .ok()
                .and_then(|x| x.estimate);
        }
    }
    Ok((records, unconverged))
}

fn g0_records(params: &ModelParams, window: (f64, f64)) -> BTreeMap<Sector, Vec<RootRecord>> {
    let span = window.1 + params.omega0().abs() / 2.0;
    let count = (span / params.omega()).ceil().max(0.0) as usize + 4;
    let ladders = reference::reference_g0(params, count).expect("g = 0 checked");
    ladders
        .into_iter()
        .map(|(sector, levels)| {
            let records = levels
                .into_iter()
                .filter(|e| *e >= window.0 && *e <= window.1)
                .enumerate()
                .map(|(i, energy)| RootRecord {
                    sector,
                    index: i + 1,
                    energy,
                    residual: 0.0,
                    order_used: 0,
                    z_checked: Vec::new(),
                    bracket: (energy, energy),
                    stable_in_order: true,
                    z_consistent: true,
                    tangential: false,
                    extrapolated: None,
                })
                .collect();
            (sector, records)
        })
        .collect()
}

/// Every eigenvalue lies at or above this energy.
pub fn spectral_lower_bound(params: &ModelParams) -> f64 {
    -params.omega0().abs() / 2.0 - params.omega() / 2.0
}

/// Roots of all four sectors in `window`, merged and checked.
///
/// At g = 0 the levels come from the closed-form ladders.
pub fn spectrum(params: &ModelParams, window: (f64, f64), options: &SolverOptions) -> Result<SpectrumResult, SpectrumError> {
    options.validate()?;
    check_window(window)?;
    let mut anomalies = Vec::new();
    let per_sector = if params.g() == 0.0 {
        g0_records(params, window)
    } else {
        if options.check_collapse(params)? {
            anomalies.push(Anomaly::CollapseRegime { ratio: params.coupling_ratio() });
        }
        let mut map = BTreeMap::new();
        for sector in Sector::ALL {
            let (records, unconverged) = find_roots_counted(params, sector, window, options)?;
            if unconverged > 0 {
                anomalies.push(Anomaly::UnconvergedSamples { sector, count: unconverged });
            }
            map.insert(sector, records);
        }
        map
    };

    for record in per_sector.values().flatten() {
        let (sector, energy) = (record.sector, record.energy);
        if !record.z_consistent {
            anomalies.push(Anomaly::ZInconsistent { sector, energy });
        }
        if !record.stable_in_order {
            anomalies.push(Anomaly::OrderUnstable { sector, energy });
        }
        if record.tangential {
            anomalies.push(Anomaly::TangentialRoot { sector, energy });
        }
    }

    let merged = merge(&per_sector, 4.0 * options.tol_root);
    if window.0 <= spectral_lower_bound(params) {
        if let Some(first) = merged.first() {
            if first.sector != Sector::Minus {
                anomalies.push(Anomaly::GroundStateSector { sector: first.sector, energy: first.energy });
            }
        }
    }
    Ok(SpectrumResult { params: *params, window, per_sector, merged, anomalies })
}

fn merge(per_sector: &BTreeMap<Sector, Vec<RootRecord>>, cluster: f64) -> Vec<MergedLevel> {
    let mut merged: Vec<MergedLevel> = per_sector
        .values()
        .flatten()
        .map(|r| MergedLevel { energy: r.energy, sector: r.sector, index: r.index })
        .collect();
    merged.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.sector.cmp(&b.sector)));
    let mut start = 0;
    while start < merged.len() {
        let mut end = start + 1;
        while end < merged.len() && merged[end].energy - merged[end - 1].energy <= cluster {
            end += 1;
        }
        merged[start..end].sort_by_key(|m| m.sector);
        start = end;
    }
    merged
}

/// Lowest root of G₋, scanning upward in chunks of width ω from below the
/// spectral lower bound.
pub fn ground_state(params: &ModelParams, options: &SolverOptions) -> Result<RootRecord, SpectrumError> {
    options.validate()?;
    if params.g() == 0.0 {
        let window = (spectral_lower_bound(params) - params.omega(), params.omega0().abs() + 4.0 * params.omega());
        let records = g0_records(params, window);
        return records[&Sector::Minus]
            .first()
            .cloned()
            .ok_or(SpectrumError::NoGroundState { searched_to: window.1 });
    }
    let omega = params.omega();
    let start = spectral_lower_bound(params) - omega / 2.0;
    for chunk in 0..GROUND_STATE_CHUNKS {
        let lower = start + omega * chunk as f64;
        let roots = find_roots(params, Sector::Minus, (lower, lower + omega), options)?;
        if let Some(first) = roots.into_iter().next() {
            return Ok(RootRecord { index: 1, ..first });
        }
    }
    Err(SpectrumError::NoGroundState { searched_to: start + omega * GROUND_STATE_CHUNKS as f64 })
}
