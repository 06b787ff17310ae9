//! The invariant suite behind `rabi2 check`.

use rabi2::gfunction::eval_g;
use rabi2::model::{derive, ModelParams, Parity, Sector};
use rabi2::reference::{fit_even_powers, oracle_diagonalize, smallg_ground_state};
use rabi2::series::{coefficient_ratio_diagnostic, compute_coefficients, min_order};
use rabi2::spectrum::{ground_state, spectral_lower_bound, spectrum, SolverOptions, SpectrumResult};

use crate::commands::Report;
use crate::config::CheckArgs;
use crate::output::{Cell, Table};
use crate::CliError;

/// Levels compared against the reference diagonalization.
const LEVELS: usize = 8;

/// Window growths tried while collecting the lowest levels.
const MAX_WIDENINGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "skip",
        }
    }
}

struct Finding {
    name: &'static str,
    status: Status,
    measured: Option<f64>,
    tolerance: Option<f64>,
    detail: String,
}

impl Finding {
    fn measured(name: &'static str, measured: f64, tolerance: f64, detail: String) -> Self {
        let status = if measured <= tolerance { Status::Pass } else { Status::Fail };
        Self { name, status, measured: Some(measured), tolerance: Some(tolerance), detail }
    }

    fn skip(name: &'static str, why: &str) -> Self {
        Self { name, status: Status::Skip, measured: None, tolerance: None, detail: why.to_owned() }
    }

    fn fail(name: &'static str, why: String) -> Self {
        Self { name, status: Status::Fail, measured: None, tolerance: None, detail: why }
    }
}

/// Spectrum from the lower bound up to just past the `count` lowest levels.
fn lowest(params: &ModelParams, count: usize, options: &SolverOptions) -> Result<SpectrumResult, CliError> {
    let lower = spectral_lower_bound(params);
    let mut upper = lower + 3.0 * params.omega();
    for _ in 0..MAX_WIDENINGS {
        let result = spectrum(params, (lower, upper), options)?;
        if result.merged.len() > count {
            return Ok(result);
        }
        upper += 2.0 * params.omega();
    }
    Err(CliError::Internal(format!("fewer than {count} levels below E = {upper}")))
}

/// Largest distance from an accepted root of `a` to the nearest root of the
/// same sector in `b`.
fn max_shift(a: &SpectrumResult, b: &SpectrumResult) -> f64 {
    a.records()
        .filter(|r| r.accepted())
        .map(|r| {
            b.per_sector[&r.sector].iter().map(|o| (o.energy - r.energy).abs()).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn oracle_equivalence(args: &CheckArgs, params: &ModelParams, levels: &SpectrumResult) -> Result<Finding, CliError> {
    let oracle = oracle_diagonalize(params, args.nmax).map_err(|e| CliError::Invalid(e.to_string()))?;
    let energies = levels.energies();
    let worst = energies.iter().zip(&oracle.eigenvalues).take(LEVELS).map(|(e, o)| (e - o).abs()).fold(0.0, f64::max);
    let unmatched = energies.iter().filter(|e| !oracle.eigenvalues.iter().any(|o| (o - *e).abs() < 1e-6)).count();
    let measured = if unmatched > 0 { f64::INFINITY } else { worst };
    Ok(Finding::measured(
        "oracle_equivalence",
        measured,
        1e-6,
        format!(
            "lowest {LEVELS} levels vs n_max = {} (cutoff estimate {:.1e}); {unmatched} unmatched roots",
            args.nmax, oracle.cutoff_error_estimate
        ),
    ))
}

fn z_independence(params: &ModelParams, window: (f64, f64), options: &SolverOptions) -> Finding {
    const NAME: &str = "z_independence";
    let z_min = options.z_values.iter().copied().fold(f64::INFINITY, f64::min);
    let z_max = options.z_values.iter().copied().fold(0.0, f64::max);
    if z_min == z_max {
        return Finding::skip(NAME, "needs at least two z values");
    }
    let at = |z: f64| spectrum(params, window, &SolverOptions { z_values: vec![z], ..options.clone() });
    match (at(z_min), at(z_max)) {
        (Ok(a), Ok(b)) => {
            let shift = max_shift(&a, &b).max(max_shift(&b, &a));
            Finding::measured(NAME, shift, options.tol_root, format!("roots at z = {z_min} vs z = {z_max}"))
        }
        (Err(e), _) | (_, Err(e)) => Finding::fail(NAME, e.to_string()),
    }
}

fn order_independence(
    params: &ModelParams,
    window: (f64, f64),
    options: &SolverOptions,
    full: &SpectrumResult,
) -> Finding {
    const NAME: &str = "order_independence";
    let half = options.series.max_order / 2;
    if half < options.series.min_order.max(min_order(Sector::PlusI)) {
        return Finding::skip(NAME, "truncation order too small to halve");
    }
    let halved = SolverOptions { series: rabi2::gfunction::SeriesSettings { max_order: half, ..options.series }, ..options.clone() };
    match spectrum(params, window, &halved) {
        Ok(result) => {
            let accepted = result.records().filter(|r| r.accepted()).count();
            // Roots that are no longer converged at the lower order are not compared.
            let shift = if accepted > 0 { max_shift(&result, full) } else { f64::INFINITY };
            Finding::measured(
                NAME,
                shift,
                1e-8f64.max(options.tol_root),
                format!("L_max = {half} vs {}; {accepted} of {} roots accepted", options.series.max_order, full.merged.len()),
            )
        }
        Err(e) => Finding::fail(NAME, e.to_string()),
    }
}

fn mirror_symmetry(params: &ModelParams, window: (f64, f64), options: &SolverOptions, full: &SpectrumResult) -> Finding {
    const NAME: &str = "mirror_symmetry";
    match spectrum(&params.mirrored(), window, options) {
        Ok(mirror) if mirror.merged.len() == full.merged.len() => {
            let worst = mirror.energies().iter().zip(full.energies()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Finding::measured(NAME, worst, 2.0 * options.tol_root, format!("spectrum at g = {}", -params.g()))
        }
        Ok(mirror) => Finding::fail(NAME, format!("{} levels at -g vs {}", mirror.merged.len(), full.merged.len())),
        Err(e) => Finding::fail(NAME, e.to_string()),
    }
}

fn parity_purity(params: &ModelParams, options: &SolverOptions) -> Finding {
    const NAME: &str = "parity_purity";
    let derived = derive(params);
    let order = options.series.max_order;
    let mut violations = 0usize;
    for sector in Sector::ALL {
        for k in 0..6 {
            let energy = spectral_lower_bound(params) + 0.5 * params.omega() * f64::from(k);
            let c = match compute_coefficients(params, &derived, sector, energy, order) {
                Ok(c) => c,
                Err(e) => return Finding::fail(NAME, e.to_string()),
            };
            let seeds = sector.seeds();
            let off = match sector.parity() {
                Parity::Even => 1,
                Parity::Odd => 0,
            };
            let seeded = c.q[seeds.start_index] == seeds.q && c.k[seeds.start_index] == seeds.k;
            let pure = (off..=order).step_by(2).all(|n| c.q[n].is_zero() && c.k[n].is_zero());
            violations += usize::from(!(seeded && pure));
        }
    }
    Finding::measured(NAME, violations as f64, 0.0, format!("4 sectors x 6 energies up to order {order}"))
}

/// Tail ratios settle at n·|c_{n+2}/c_n| → ω/2|g| for K, and for Q too once
/// the splitting couples it to K; without splitting Q follows ωΩ/2|g|.
fn ratio_decay(params: &ModelParams, energy: f64, options: &SolverOptions) -> Finding {
    const NAME: &str = "ratio_decay";
    const TAIL: usize = 5;
    let derived = derive(params);
    let order = options.series.max_order;
    let k_limit = params.omega() / (2.0 * params.g().abs());
    let q_limit = if params.omega0() == 0.0 { k_limit * params.omega_big() } else { k_limit };
    let mut worst = 0.0f64;
    for sector in [Sector::Plus, Sector::PlusI] {
        let c = match compute_coefficients(params, &derived, sector, energy, order) {
            Ok(c) => c,
            Err(e) => return Finding::fail(NAME, e.to_string()),
        };
        let diagnostic = coefficient_ratio_diagnostic(&c);
        for (ratios, limit) in [(&diagnostic.q, q_limit), (&diagnostic.k, k_limit)] {
            // Ratios stop where coefficients fall below the underflow floor.
            let tail = &ratios[ratios.len().saturating_sub(TAIL)..];
            if tail.len() < TAIL {
                return Finding::fail(NAME, format!("fewer than {TAIL} ratios above the underflow floor"));
            }
            let mean = tail.iter().map(|r| r.n as f64 * r.ratio.abs()).sum::<f64>() / TAIL as f64;
            worst = worst.max((mean / limit - 1.0).abs());
        }
    }
    Finding::measured(
        NAME,
        worst,
        0.2,
        format!("relative deviation of n|c(n+2)/c(n)| from its limit, last {TAIL} ratios at E = {energy:.6}"),
    )
}

/// E ≈ a + b g² + c g⁴ over g ∈ {0.01, …, 0.04}·ω, compared with the
/// perturbative a and b.
fn small_g_law(params: &ModelParams, options: &SolverOptions) -> Vec<Finding> {
    // The splitting's sign does not change the spectrum.
    let omega0 = params.omega0().abs();
    let omega = params.omega();
    let gs: Vec<f64> = [0.01, 0.02, 0.03, 0.04].iter().map(|f| f * omega).collect();
    let mut energies = Vec::new();
    for g in &gs {
        let point = ModelParams::new(omega0, omega, *g).expect("small coupling is valid");
        match ground_state(&point, options) {
            Ok(root) => energies.push(root.energy),
            Err(e) => return vec![Finding::fail("small_g_intercept", e.to_string())],
        }
    }
    let Some(fit) = fit_even_powers(&gs, &energies, 3) else {
        return vec![Finding::fail("small_g_intercept", "fit failed".into())];
    };
    let (a, b) = smallg_ground_state(&ModelParams::new(omega0, omega, 0.0).expect("valid"));
    vec![
        Finding::measured("small_g_intercept", (fit[0] - a).abs(), 1e-6, format!("fitted {:.9} vs {a:.9}", fit[0])),
        Finding::measured(
            "small_g_curvature",
            ((fit[1] - b) / b).abs(),
            0.01,
            format!("fitted {:.6} vs {b:.6} (relative)", fit[1]),
        ),
    ]
}

/// Without splitting, G₊ = −G₋ and G₊ᵢ = −G₋ᵢ, so every level is doubly
/// degenerate.
fn degeneracy(params: &ModelParams, options: &SolverOptions, levels: &SpectrumResult) -> Vec<Finding> {
    let derived = derive(params);
    let mut mismatches = 0usize;
    for k in 0..8 {
        let energy = spectral_lower_bound(params) + 0.37 * params.omega() * f64::from(k);
        for &z in &options.z_values {
            for (a, b) in [(Sector::Plus, Sector::Minus), (Sector::PlusI, Sector::MinusI)] {
                let pair = eval_g(params, &derived, a, energy, z, options.series.max_order)
                    .and_then(|va| Ok((va, eval_g(params, &derived, b, energy, z, options.series.max_order)?)));
                match pair {
                    Ok((va, vb)) if va.value == -vb.value.clone() => {}
                    Ok(_) => mismatches += 1,
                    Err(e) => return vec![Finding::fail("sector_pair_relation", e.to_string())],
                }
            }
        }
    }
    let energies = levels.energies();
    let gap = energies.chunks_exact(2).take(LEVELS / 2).map(|p| (p[1] - p[0]).abs()).fold(0.0, f64::max);
    vec![
        Finding::measured(
            "sector_pair_relation",
            mismatches as f64,
            0.0,
            "G_plus = -G_minus and G_plus_i = -G_minus_i at 8 energies".into(),
        ),
        Finding::measured("degeneracy", gap, 2.0 * options.tol_root, format!("pairs among the lowest {LEVELS} levels")),
    ]
}

pub fn check(args: &CheckArgs) -> Result<Report, CliError> {
    let options = args.run.apply()?;
    let params = args.model.params()?;
    options.check_collapse(&params)?;

    let levels = lowest(&params, LEVELS, &options)?;
    let window = levels.window;
    let mut findings = vec![oracle_equivalence(args, &params, &levels)?];

    if params.g() == 0.0 {
        for name in ["z_independence", "order_independence", "parity_purity", "ratio_decay"] {
            findings.push(Finding::skip(name, "needs g != 0"));
        }
    } else {
        findings.push(z_independence(&params, window, &options));
        findings.push(order_independence(&params, window, &options, &levels));
        findings.push(parity_purity(&params, &options));
        let energies = levels.energies();
        let probe = energies
            .iter()
            .find(|e| **e > energies[0] + 1e-6)
            .map_or(energies[0] + 0.25 * params.omega(), |next| (energies[0] + next) / 2.0);
        findings.push(ratio_decay(&params, probe, &options));
    }
    findings.push(mirror_symmetry(&params, window, &options, &levels));
    findings.extend(small_g_law(&params, &options));
    if params.omega0() == 0.0 && params.g() != 0.0 {
        findings.extend(degeneracy(&params, &options, &levels));
    }

    let mut table =
        Table::new(&["omega0", "omega", "g", "invariant", "status", "measured", "tolerance", "detail"]);
    for f in &findings {
        table.push(vec![
            params.omega0().into(),
            params.omega().into(),
            params.g().into(),
            f.name.into(),
            f.status.name().into(),
            Cell::opt_real(f.measured),
            Cell::opt_real(f.tolerance),
            Cell::text(f.detail.clone()),
        ]);
    }
    let failing: Vec<&str> = findings.iter().filter(|f| f.status == Status::Fail).map(|f| f.name).collect();
    let mut report = Report::ok(table, args.run.format, args);
    if !failing.is_empty() {
        report.status = Err(CliError::CheckFailed(failing.join(", ")));
    }
    Ok(report)
}
