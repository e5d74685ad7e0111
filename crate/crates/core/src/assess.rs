//! Evaluation of a placement: coverage with and without the RIS, and average
//! sum rate over fresh user draws for a fixed, random or absent RIS.
//!
//! All draws use a dedicated stream level so that metrics never share random
//! numbers with the placement search, and every mode and transmit power sees
//! the same users and fading (common random numbers).

use rand::Rng;
use rayon::prelude::*;

use crate::beamform;
use crate::channel::{db_to_linear, sample_channels};
use crate::geom::{coverage, point_in_obstacle, CoverageMap, GeomError, Point2};
use crate::placement::{accepted_draws, PlacementError};
use crate::rng::{Purpose, StreamKey};
use crate::scenario::Scenario;

/// Stream level reserved for metric evaluation.
pub const ASSESS_LEVEL: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RisMode {
    None,
    Fixed(Point2),
    /// A fresh uniform position in the cell (outside obstacles) per user draw.
    Random,
}

impl RisMode {
    pub fn label(&self) -> &'static str {
        match self {
            RisMode::None => "none",
            RisMode::Fixed(_) => "optimal",
            RisMode::Random => "random",
        }
    }
}

pub fn coverage_map(scenario: &Scenario, ris: Option<Point2>) -> Result<CoverageMap, GeomError> {
    coverage(
        &scenario.cell,
        scenario.bs,
        &scenario.obstacles,
        ris,
        scenario.placement.grid_resolution,
    )
}

/// Coverage fractions without and with the RIS at `ris`.
pub fn coverage_gain(scenario: &Scenario, ris: Point2) -> Result<(f64, f64), GeomError> {
    Ok((coverage_map(scenario, None)?.fraction, coverage_map(scenario, Some(ris))?.fraction))
}

fn random_ris(scenario: &Scenario, key: StreamKey) -> Point2 {
    let mut rng = key.rng(Purpose::RandomRis);
    let c = scenario.cell;
    loop {
        let r = c.radius * rng.random::<f64>().sqrt();
        let a = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let p = Point2::new(c.center.x + r * a.cos(), c.center.y + r * a.sin());
        if !point_in_obstacle(p, &scenario.obstacles) && p != scenario.bs {
            return p;
        }
    }
}

/// Per-draw sum rates of `mode` at each transmit power (dBm). Returns one
/// vector of `draws` rates per power.
pub fn rate_draws(
    scenario: &Scenario,
    mode: RisMode,
    powers_dbm: &[f64],
    draws: usize,
) -> Result<Vec<Vec<f64>>, PlacementError> {
    let key = StreamKey::new(scenario.seed).level(ASSESS_LEVEL);
    let users = accepted_draws(scenario, key, draws)?;
    let noise = scenario.rf.noise_power_mw();
    let per_draw = users
        .par_iter()
        .map(|(i, users)| {
            let inst = key.instantiation(*i);
            let ris = match mode {
                RisMode::None => None,
                RisMode::Fixed(p) => Some(p),
                RisMode::Random => Some(random_ris(scenario, inst)),
            };
            let cs = sample_channels(scenario, ris, users, inst.candidate(0))?;
            powers_dbm
                .iter()
                .map(|&p| {
                    let state = beamform::solve_with(&cs, db_to_linear(p), noise, &scenario.solver)?;
                    Ok(beamform::state_wsr(&state, &cs, noise))
                })
                .collect::<Result<Vec<f64>, PlacementError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..powers_dbm.len())
        .map(|j| per_draw.iter().map(|rates| rates[j]).collect())
        .collect())
}

/// Average sum rate (bps/Hz) at the scenario transmit power.
pub fn average_wsr(scenario: &Scenario, mode: RisMode, draws: usize) -> Result<f64, PlacementError> {
    let p = crate::channel::linear_to_db(scenario.rf.p_max_mw);
    let rates = rate_draws(scenario, mode, &[p], draws)?;
    Ok(mean(&rates[0]))
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p_dbm: f64,
    pub mode: &'static str,
    pub average_wsr: f64,
    pub draws: usize,
}

/// Average sum rate per (power, mode), rows ordered by power then mode.
pub fn sweep_power(
    scenario: &Scenario,
    modes: &[RisMode],
    powers_dbm: &[f64],
    draws: usize,
) -> Result<Vec<SweepRow>, PlacementError> {
    let per_mode = modes
        .iter()
        .map(|m| rate_draws(scenario, *m, powers_dbm, draws))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(modes.len() * powers_dbm.len());
    for (j, &p) in powers_dbm.iter().enumerate() {
        for (m, rates) in modes.iter().zip(&per_mode) {
            rows.push(SweepRow {
                p_dbm: p,
                mode: m.label(),
                average_wsr: mean(&rates[j]),
                draws: rates[j].len(),
            });
        }
    }
    Ok(rows)
}

/// Metrics reported for a final RIS position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementMetrics {
    pub coverage_before: f64,
    pub coverage_after: f64,
    pub average_wsr: f64,
    pub average_wsr_no_ris: f64,
    pub draws: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum AssessError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

/// Coverage and average sum rate for the RIS at `center`, over
/// `scenario.placement.instantiations` draws.
pub fn placement_metrics(scenario: &Scenario, center: Point2) -> Result<PlacementMetrics, AssessError> {
    let (before, after) = coverage_gain(scenario, center)?;
    let draws = scenario.placement.instantiations;
    Ok(PlacementMetrics {
        coverage_before: before,
        coverage_after: after,
        average_wsr: average_wsr(scenario, RisMode::Fixed(center), draws)?,
        average_wsr_no_ris: average_wsr(scenario, RisMode::None, draws)?,
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPEN: &str = r#"
seed = 4
bs = [0.0, 0.0]

[cell]
center = [10.0, 0.0]
radius = 5.0

[users]
kind = "homogeneous"
density = 0.05

[rf]
f_c_ghz = 2.4
bandwidth_hz = 10000000.0
noise_figure_db = 5.0
p_max_dbm = 0.0
t1_db = 10.0
t2_db = 10.0
m = 4
n = 8

[placement]
t = 4
n_inst = 3
d_start = 2.0
d_p = 1.0
grid_resolution = 0.5

[solver]
max_iters = 40
w_steps = 5
"#;

    const WALL: &str = r#"
[[obstacles]]
kind = "wall"
center = [5.0, 0.0]
length = 2.0
orientation = 1.5707963267948966

[[obstacles]]
kind = "circle"
center = [11.0, 3.0]
radius = 1.0
"#;

    fn open() -> Scenario {
        Scenario::from_toml(OPEN).unwrap()
    }

    fn walled() -> Scenario {
        Scenario::from_toml(&format!("{OPEN}{WALL}")).unwrap()
    }

    #[test]
    fn labels() {
        assert_eq!(RisMode::None.label(), "none");
        assert_eq!(RisMode::Fixed(Point2::new(0.0, 0.0)).label(), "optimal");
        assert_eq!(RisMode::Random.label(), "random");
    }

    #[test]
    fn open_cell_is_fully_covered() {
        assert_eq!(coverage_gain(&open(), Point2::new(10.0, 0.0)).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn ris_outside_cell_is_an_error() {
        assert!(coverage_gain(&open(), Point2::new(30.0, 0.0)).is_err());
    }

    #[test]
    fn random_positions_avoid_obstacles() {
        let s = walled();
        for i in 0..500 {
            let p = random_ris(&s, StreamKey::new(1).instantiation(i));
            assert!(s.cell.contains(p));
            assert!(!point_in_obstacle(p, &s.obstacles));
        }
    }

    #[test]
    fn hidden_ris_changes_nothing() {
        // the wall hides (7, 0) from the BS, so the RIS contributes no path
        let s = walled();
        let hidden = average_wsr(&s, RisMode::Fixed(Point2::new(7.0, 0.0)), 3).unwrap();
        let none = average_wsr(&s, RisMode::None, 3).unwrap();
        assert_eq!(hidden, none);
    }

    #[test]
    fn sweep_rows_follow_power_then_mode() {
        let s = open();
        let modes = [RisMode::Fixed(Point2::new(10.0, -4.0)), RisMode::None];
        let rows = sweep_power(&s, &modes, &[-10.0, 10.0], 2).unwrap();
        let keys: Vec<(f64, &str)> = rows.iter().map(|r| (r.p_dbm, r.mode)).collect();
        assert_eq!(keys, [(-10.0, "optimal"), (-10.0, "none"), (10.0, "optimal"), (10.0, "none")]);
        assert!(rows.iter().all(|r| r.draws == 2 && r.average_wsr > 0.0));
        assert!(rows[3].average_wsr > rows[1].average_wsr);
        // same draws for each power: a one-power call reproduces the column
        let single = rate_draws(&s, RisMode::None, &[10.0], 2).unwrap();
        assert_eq!(mean(&single[0]), rows[3].average_wsr);
    }

    #[test]
    fn metrics_are_deterministic() {
        let s = walled();
        let a = placement_metrics(&s, Point2::new(10.0, -3.0)).unwrap();
        assert_eq!(a, placement_metrics(&s, Point2::new(10.0, -3.0)).unwrap());
        assert!(a.coverage_after >= a.coverage_before);
        assert!(a.coverage_before < 1.0);
        assert_eq!(a.draws, 3);
    }

    #[test]
    fn mean_of_nothing_is_zero() {
        assert_eq!(mean(&[]), 0.0);
        assert_eq!(mean(&[1.0, 2.0]), 1.5);
    }
}
