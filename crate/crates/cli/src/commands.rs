use rabi2::gfunction::SectorEvaluator;
use rabi2::model::{derive, ModelParams};
use rabi2::reference::{juddian_points, oracle_diagonalize};
use rabi2::spectrum::{self, SpectrumResult};
use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, GtraceArgs, JuddianArgs, OracleArgs, SpectrumArgs, SweepArgs};
use crate::output::{Cell, Table};
use crate::CliError;

/// A finished table plus the exit status to report after printing it.
pub struct Report {
    pub table: Table,
    pub format: Format,
    pub config: Value,
    pub status: Result<(), CliError>,
}

impl Report {
    pub fn ok<C: Serialize>(table: Table, format: Format, config: &C) -> Self {
        Self { table, format, config: serde_json::to_value(config).expect("config serializes"), status: Ok(()) }
    }
}

fn echo(params: &ModelParams) -> [Cell; 3] {
    [params.omega0().into(), params.omega().into(), params.g().into()]
}

fn warn_anomalies(result: &SpectrumResult) {
    for anomaly in &result.anomalies {
        eprintln!("warning: g = {}: {}", result.params.g(), anomaly.describe());
    }
    for record in result.records() {
        if let Some(estimate) = record.extrapolated {
            eprintln!("note: {} root {} extrapolates to {estimate} (not certified)", record.sector, record.energy);
        }
    }
}

pub fn spectrum(args: &SpectrumArgs) -> Result<Report, CliError> {
    let options = args.run.apply()?;
    let params = args.model.params()?;
    let result = spectrum::spectrum(&params, args.window.window(&params), &options)?;
    warn_anomalies(&result);

    let mut table = Table::new(&["omega0", "omega", "g", "sector", "index", "energy", "residual", "order_used"]);
    for level in &result.merged {
        let record = &result.per_sector[&level.sector][level.index - 1];
        let mut row = echo(&params).to_vec();
        row.extend([
            record.sector.name().into(),
            record.index.into(),
            record.energy.into(),
            record.residual.into(),
            record.order_used.into(),
        ]);
        table.push(row);
    }
    Ok(Report::ok(table, args.run.format, args))
}

pub fn sweep(args: &SweepArgs) -> Result<Report, CliError> {
    let options = args.run.apply()?;
    let base = ModelParams::new(args.omega0, args.omega, 0.0).map_err(|e| CliError::Invalid(e.to_string()))?;
    let couplings = args.couplings()?;
    let window = args.window.window(&base);
    let result = spectrum::sweep(&base, &couplings, window, &options);

    let mut table = Table::new(&[
        "omega0", "omega", "g", "kind", "sector", "index", "curve", "energy", "sector_b", "curve_b", "refined",
    ]);
    let mut succeeded = 0usize;
    for (step, point) in result.points.iter().enumerate() {
        let spectrum = match &point.result {
            Ok(s) => s,
            Err(e) => {
                eprintln!("warning: g = {}: {e}", point.g);
                continue;
            }
        };
        succeeded += 1;
        warn_anomalies(spectrum);
        for level in &spectrum.merged {
            let curve = result.curves.iter().find(|c| {
                c.sector == level.sector && c.points.iter().any(|p| p.step == step && p.energy == level.energy)
            });
            table.push(vec![
                args.omega0.into(),
                args.omega.into(),
                point.g.into(),
                "level".into(),
                level.sector.name().into(),
                level.index.into(),
                curve.map_or(Cell::Empty, |c| c.id.into()),
                level.energy.into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
            ]);
        }
    }
    for crossing in &result.crossings {
        table.push(vec![
            args.omega0.into(),
            args.omega.into(),
            crossing.g.into(),
            "crossing".into(),
            crossing.sector_a.name().into(),
            Cell::Empty,
            crossing.curve_a.into(),
            crossing.energy.into(),
            crossing.sector_b.name().into(),
            crossing.curve_b.into(),
            crossing.refined.into(),
        ]);
    }

    let total = result.points.len();
    let mut report = Report::ok(table, args.run.format, args);
    if succeeded * 10 < total * 9 {
        report.status = Err(CliError::Internal(format!("only {succeeded} of {total} couplings succeeded")));
    }
    Ok(report)
}

pub fn gtrace(args: &GtraceArgs) -> Result<Report, CliError> {
    let options = args.run.apply()?;
    let params = args.model.params()?;
    options.check_collapse(&params)?;
    if params.g() == 0.0 {
        return Err(CliError::Invalid("G-functions need g != 0".into()));
    }
    let (emin, emax) = args.window.window(&params);
    if !(emin.is_finite() && emax.is_finite() && emin <= emax) {
        return Err(CliError::Invalid(format!("invalid energy window ({emin}, {emax})")));
    }
    if args.samples < 2 && emin != emax {
        return Err(CliError::Invalid("samples must be at least 2".into()));
    }
    let derived = derive(&params);
    let evaluator = SectorEvaluator::new(&params, &derived, args.sector, &options.z_values, options.series)
        .map_err(|e| CliError::Invalid(e.to_string()))?;

    let mut table = Table::new(&[
        "omega0",
        "omega",
        "g",
        "sector",
        "z",
        "energy",
        "value",
        "sign",
        "relative_magnitude",
        "order",
        "convergence",
    ]);
    let last = args.samples.saturating_sub(1).max(1) as f64;
    for i in 0..args.samples.max(1) {
        let energy = emin + (emax - emin) * i as f64 / last;
        let evaluations = evaluator.eval(energy).map_err(|e| CliError::Internal(e.to_string()))?;
        for e in evaluations {
            let mut row = echo(&params).to_vec();
            row.extend([
                args.sector.name().into(),
                e.z.into(),
                energy.into(),
                // Values at large z overflow f64; keep them in full range.
                Cell::text(format!("{:.15e}", e.value)),
                Cell::Int(i64::from(e.sign())),
                e.relative_magnitude().into(),
                e.order.into(),
                e.convergence.name().into(),
            ]);
            table.push(row);
        }
    }
    Ok(Report::ok(table, args.run.format, args))
}

pub fn juddian(args: &JuddianArgs) -> Result<Report, CliError> {
    let mut table = Table::new(&["omega0", "omega", "g", "n", "omega_big", "energy"]);
    for &n in &args.n {
        let points = juddian_points(args.omega0, args.omega, n).map_err(|e| CliError::Invalid(e.to_string()))?;
        for point in points {
            table.push(vec![
                args.omega0.into(),
                args.omega.into(),
                point.g.into(),
                point.n.into(),
                point.omega_big.into(),
                point.energy.into(),
            ]);
        }
    }
    Ok(Report::ok(table, args.format, args))
}

pub fn oracle(args: &OracleArgs) -> Result<Report, CliError> {
    let params = args.model.params()?;
    let options = args.run.apply()?;
    let oracle = oracle_diagonalize(&params, args.nmax).map_err(|e| CliError::Invalid(e.to_string()))?;
    let count = args.count.min(oracle.eigenvalues.len());
    if count == 0 {
        return Err(CliError::Invalid("count must be at least 1".into()));
    }
    let levels = &oracle.eigenvalues[..count];

    let matched = if args.compare {
        // Stop the window halfway to the next distinct level.
        let top = levels[count - 1];
        let next = oracle.eigenvalues[count..].iter().find(|e| **e > top + 1e-6).copied();
        let emax = next.map_or(top + 0.1 * params.omega(), |n| (top + n) / 2.0);
        let window = (spectrum::spectral_lower_bound(&params), emax);
        let result = spectrum::spectrum(&params, window, &options)?;
        warn_anomalies(&result);
        Some(result.merged)
    } else {
        None
    };

    let mut columns = vec!["omega0", "omega", "g", "index", "energy", "cutoff_error_estimate"];
    if matched.is_some() {
        columns.extend(["sector", "g_energy", "difference"]);
    }
    let mut table = Table::new(&columns);
    for (i, energy) in levels.iter().enumerate() {
        let mut row = echo(&params).to_vec();
        row.extend([(i + 1).into(), (*energy).into(), oracle.cutoff_error_estimate.into()]);
        if let Some(merged) = &matched {
            match merged.get(i) {
                Some(level) => row.extend([
                    level.sector.name().into(),
                    level.energy.into(),
                    (level.energy - energy).into(),
                ]),
                None => row.extend([Cell::Empty, Cell::Empty, Cell::Empty]),
            }
        }
        table.push(row);
    }
    Ok(Report::ok(table, args.run.format, args))
}
