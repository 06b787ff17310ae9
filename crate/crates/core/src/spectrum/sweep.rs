//! Spectra along a list of couplings, with curve tracking and crossing
//! detection between sectors.

use rayon::prelude::*;

use crate::model::{derive, ModelParams, Sector};

use super::{spectrum, SectorSolver, SolverOptions, SpectrumError, SpectrumResult};

/// Bisection steps in g when refining a crossing.
const CROSSING_STEPS: usize = 48;

/// Crossing refinement stops once the g bracket is this narrow.
const CROSSING_TOL_G: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub g: f64,
    pub result: Result<SpectrumResult, SpectrumError>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Position in the sweep's g list.
    pub step: usize,
    pub g: f64,
    pub energy: f64,
}

/// One continuously tracked root of a single sector.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub id: usize,
    pub sector: Sector,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    fn at_step(&self, step: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.step == step)
    }

    /// Linear extrapolation from the last two points and the tolerated jump.
    fn predict(&self, g: f64, floor: f64) -> (f64, f64) {
        let last = self.points.last().expect("curves are never empty");
        match self.points.len() {
            1 => (last.energy, floor),
            n => {
                let prev = &self.points[n - 2];
                let slope = (last.energy - prev.energy) / (last.g - prev.g);
                let delta = slope * (g - last.g);
                (last.energy + delta, (3.0 * delta.abs()).max(floor))
            }
        }
    }
}

/// Two curves of different sectors exchanging order between adjacent
/// couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    pub curve_a: usize,
    pub sector_a: Sector,
    pub curve_b: usize,
    pub sector_b: Sector,
    pub g: f64,
    pub energy: f64,
    /// Located by bisection in g; otherwise linearly interpolated.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub curves: Vec<Curve>,
    pub crossings: Vec<CrossingEvent>,
}

/// Spectra for each coupling in `g_values`, in the given order.
///
/// Points are solved in parallel on the current rayon pool; results keep
/// the order of `g_values`.
///
/// Failed points are recorded and skipped by the tracker. Within a sector,
/// roots are matched to curves greedily by distance to a linear prediction;
/// a match must lie within three times the predicted change, floored at
/// half the local level scale min(ω, ωΩ).
pub fn sweep(base: &ModelParams, g_values: &[f64], window: (f64, f64), options: &SolverOptions) -> SweepResult {
    let points: Vec<SweepPoint> = g_values
        .par_iter()
        .map(|&g| SweepPoint {
            g,
            result: base.with_g(g).map_err(SpectrumError::from).and_then(|p| spectrum(&p, window, options)),
        })
        .collect();

    let mut curves: Vec<Curve> = Vec::new();
    for sector in Sector::ALL {
        let mut active: Vec<usize> = Vec::new();
        for (step, point) in points.iter().enumerate() {
            let Ok(result) = &point.result else { continue };
            let floor = 0.5 * result.params.omega() * result.params.omega_big().min(1.0);
            let energies: Vec<f64> = result.per_sector[&sector].iter().map(|r| r.energy).collect();

            let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
            for &curve in &active {
                let (prediction, jump) = curves[curve].predict(point.g, floor);
                for (root, energy) in energies.iter().enumerate() {
                    let distance = (energy - prediction).abs();
                    if distance <= jump {
                        candidates.push((distance, curve, root));
                    }
                }
            }
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut curve_taken = vec![false; curves.len()];
            let mut root_taken = vec![false; energies.len()];
            for (_, curve, root) in candidates {
                if !curve_taken[curve] && !root_taken[root] {
                    curve_taken[curve] = true;
                    root_taken[root] = true;
                    curves[curve].points.push(CurvePoint { step, g: point.g, energy: energies[root] });
                }
            }
            active.retain(|c| curve_taken[*c]);
            for (_, energy) in energies.iter().enumerate().filter(|(r, _)| !root_taken[*r]) {
                let id = curves.len();
                curves.push(Curve { id, sector, points: vec![CurvePoint { step, g: point.g, energy: *energy }] });
                active.push(id);
            }
        }
    }

    let successful: Vec<usize> = points.iter().enumerate().filter(|(_, p)| p.result.is_ok()).map(|(i, _)| i).collect();
    let mut crossings = Vec::new();
    for (i, a) in curves.iter().enumerate() {
        for b in curves.iter().skip(i + 1).filter(|b| b.sector != a.sector) {
            for pair in successful.windows(2) {
                let (Some(a0), Some(b0), Some(a1), Some(b1)) =
                    (a.at_step(pair[0]), b.at_step(pair[0]), a.at_step(pair[1]), b.at_step(pair[1]))
                else {
                    continue;
                };
                let degenerate = 1e3 * options.tol_root;
                let (d0, d1) = (a0.energy - b0.energy, a1.energy - b1.energy);
                if d0.abs() <= degenerate || d1.abs() <= degenerate || (d0 < 0.0) == (d1 < 0.0) {
                    continue;
                }
                crossings.push(refine_crossing(base, a, b, (a0, b0), (a1, b1), options));
            }
        }
    }
    crossings.sort_by(|x, y| x.g.total_cmp(&y.g).then(x.energy.total_cmp(&y.energy)));
    SweepResult { points, curves, crossings }
}

type Pair<'a> = (&'a CurvePoint, &'a CurvePoint);

fn refine_crossing(
    base: &ModelParams,
    a: &Curve,
    b: &Curve,
    start: Pair<'_>,
    end: Pair<'_>,
    options: &SolverOptions,
) -> CrossingEvent {
    let linear = || {
        let (d0, d1) = (start.0.energy - start.1.energy, end.0.energy - end.1.energy);
        let t = d0 / (d0 - d1);
        let g = start.0.g + t * (end.0.g - start.0.g);
        let energy = start.0.energy + t * (end.0.energy - start.0.energy);
        (g, energy)
    };
    let event = |(g, energy), refined| CrossingEvent {
        curve_a: a.id,
        sector_a: a.sector,
        curve_b: b.id,
        sector_b: b.sector,
        g,
        energy,
        refined,
    };

    // Each side of the g bracket is described by (g, E_a, E_b).
    let mut low = (start.0.g, start.0.energy, start.1.energy);
    let mut high = (end.0.g, end.0.energy, end.1.energy);
    if low.0 > high.0 {
        std::mem::swap(&mut low, &mut high);
    }
    let low_sign = low.1 < low.2;
    for _ in 0..CROSSING_STEPS {
        if high.0 - low.0 <= CROSSING_TOL_G {
            break;
        }
        let g = low.0 + (high.0 - low.0) / 2.0;
        let t = (g - low.0) / (high.0 - low.0);
        let guess_a = low.1 + t * (high.1 - low.1);
        let guess_b = low.2 + t * (high.2 - low.2);
        let Some((ea, eb)) = track_pair(base, g, (a.sector, guess_a), (b.sector, guess_b), options) else {
            return event(linear(), false);
        };
        if (ea < eb) == low_sign {
            low = (g, ea, eb);
        } else {
            high = (g, ea, eb);
        }
    }
    let g = low.0 + (high.0 - low.0) / 2.0;
    let energy = (low.1 + low.2 + high.1 + high.2) / 4.0;
    event((g, energy), true)
}

fn track_pair(
    base: &ModelParams,
    g: f64,
    a: (Sector, f64),
    b: (Sector, f64),
    options: &SolverOptions,
) -> Option<(f64, f64)> {
    let params = base.with_g(g).ok()?;
    let derived = derive(&params);
    let step = 2.0 * options.scan_step(&params);
    let locate = |(sector, guess): (Sector, f64)| -> Option<f64> {
        let solver = SectorSolver::new(&params, &derived, sector, options, options.series).ok()?;
        solver.locate_near(guess, step, 4).ok().flatten().map(|r| r.energy)
    };
    Some((locate(a)?, locate(b)?))
}
