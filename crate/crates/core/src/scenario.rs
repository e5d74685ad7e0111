//! Scenario files.
//!
//! A scenario is a TOML document describing the cell, the BS, the obstacles,
//! the user model, the radio parameters and the search and solver settings.
//! [`ScenarioFile`] mirrors the document one to one (dB values, tagged
//! obstacle and user kinds); [`Scenario`] is the validated form in internal
//! units.
//!
//! ```toml
//! seed = 1
//! bs = [80.0, 30.0]
//!
//! [cell]
//! center = [100.0, 40.0]
//! radius = 20.0
//!
//! [[obstacles]]
//! kind = "circle"
//! center = [95.0, 45.0]
//! radius = 2.0
//!
//! [[obstacles]]
//! kind = "wall"
//! center = [92.0, 47.0]
//! length = 18.0
//! orientation = 1.5707963267948966
//!
//! [users]
//! kind = "homogeneous"
//! density = 0.009
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamform::{AuxUpdate, Extrapolation, SolverConfig};
use crate::channel::{db_to_linear, RfParams};
use crate::geom::{Cell, Obstacle, Point2};
use crate::placement::{Hotspot, PlacementConfig, UserModel};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error{}: {message}", line_suffix(*.line))]
    Parse { line: Option<usize>, message: String },
    #[error("invalid {field}{}: {message}", line_suffix(*.line))]
    Validation {
        field: String,
        line: Option<usize>,
        message: String,
    },
    #[error("cannot serialize scenario: {0}")]
    Emit(String),
    #[error("unknown bundled scenario {0:?}")]
    UnknownBundled(String),
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRecord {
    pub center: Point2,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleRecord {
    Circle {
        center: Point2,
        radius: f64,
    },
    /// `orientation` in radians from the +x axis.
    Wall {
        center: Point2,
        length: f64,
        orientation: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HotspotRecord {
    pub center: Point2,
    pub radius: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UsersRecord {
    /// Uniform over `region`, or over the cell when absent.
    Homogeneous {
        density: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        region: Option<CellRecord>,
    },
    Hotspots { hotspots: Vec<HotspotRecord> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfRecord {
    pub f_c_ghz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub p_max_dbm: f64,
    /// Rician factor of the BS-RIS leg in dB.
    pub t1_db: f64,
    /// Rician factor of the RIS-user legs in dB.
    pub t2_db: f64,
    /// BS antennas.
    pub m: usize,
    /// RIS elements.
    pub n: usize,
    /// Element spacing in wavelengths.
    #[serde(default = "half")]
    pub spacing: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementRecord {
    /// Candidates per instantiation.
    pub t: usize,
    pub n_inst: usize,
    pub d_start: f64,
    pub d_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default = "default_resolution")]
    pub grid_resolution: f64,
}

fn default_resolution() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverRecord {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub extrapolation: Extrapolation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa0: Option<f64>,
    pub backtrack_factor: f64,
    pub aux_update: AuxUpdate,
    pub w_steps: usize,
}

impl Default for SolverRecord {
    fn default() -> Self {
        SolverConfig::default().into()
    }
}

impl From<SolverConfig> for SolverRecord {
    fn from(c: SolverConfig) -> Self {
        Self {
            max_iters: c.max_iters,
            rel_tol: c.rel_tol,
            extrapolation: c.extrapolation,
            kappa0: c.kappa0,
            backtrack_factor: c.backtrack_factor,
            aux_update: c.aux_update,
            w_steps: c.w_steps,
        }
    }
}

/// On-disk scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Run seed. TOML integers are signed, so seeds above `i64::MAX` cannot
    /// be written.
    pub seed: u64,
    pub bs: Point2,
    pub cell: CellRecord,
    #[serde(default)]
    pub obstacles: Vec<ObstacleRecord>,
    pub users: UsersRecord,
    pub rf: RfRecord,
    pub placement: PlacementRecord,
    #[serde(default)]
    pub solver: SolverRecord,
}

/// Validated scenario in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub seed: u64,
    pub bs: Point2,
    pub cell: Cell,
    pub obstacles: Vec<Obstacle>,
    pub users: UserModel,
    pub rf: RfParams,
    pub placement: PlacementConfig,
    pub solver: SolverConfig,
}

const BUNDLED: [(&str, &str); 4] = [
    ("scenario1", include_str!("../scenarios/scenario1.toml")),
    ("scenario2", include_str!("../scenarios/scenario2.toml")),
    ("scenario3", include_str!("../scenarios/scenario3.toml")),
    ("scenario4", include_str!("../scenarios/scenario4.toml")),
];

/// Names of the scenarios shipped with the crate.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Source text of a bundled scenario.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ScenarioFile {
    /// Parses TOML without validating values.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(self).map_err(|e| ScenarioError::Emit(e.to_string()))
    }

    /// Checks every value and converts to internal units. Errors carry the
    /// dotted path of the offending field.
    pub fn validate(&self) -> Result<Scenario, ScenarioError> {
        self.validate_located(None)
    }

    fn validate_located(&self, source: Option<&str>) -> Result<Scenario, ScenarioError> {
        let fail = |field: String, message: &str| ScenarioError::Validation {
            line: source.and_then(|s| locate(s, &field)),
            field,
            message: message.to_string(),
        };
        let finite_point = |p: Point2, field: &str| {
            if p.is_finite() {
                Ok(())
            } else {
                Err(fail(field.to_string(), "coordinates must be finite"))
            }
        };
        let positive = |v: f64, field: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(fail(field.to_string(), "must be a positive finite number"))
            }
        };
        let finite = |v: f64, field: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(fail(field.to_string(), "must be finite"))
            }
        };

        finite_point(self.bs, "bs")?;
        finite_point(self.cell.center, "cell.center")?;
        positive(self.cell.radius, "cell.radius")?;
        let cell = Cell::new(self.cell.center, self.cell.radius);

        let mut obstacles = Vec::with_capacity(self.obstacles.len());
        for (i, o) in self.obstacles.iter().enumerate() {
            match *o {
                ObstacleRecord::Circle { center, radius } => {
                    finite_point(center, &format!("obstacles[{i}].center"))?;
                    positive(radius, &format!("obstacles[{i}].radius"))?;
                    obstacles.push(Obstacle::circle(center, radius));
                }
                ObstacleRecord::Wall {
                    center,
                    length,
                    orientation,
                } => {
                    finite_point(center, &format!("obstacles[{i}].center"))?;
                    positive(length, &format!("obstacles[{i}].length"))?;
                    finite(orientation, &format!("obstacles[{i}].orientation"))?;
                    obstacles.push(Obstacle::wall(center, length, orientation));
                }
            }
        }

        let density_ok = |d: f64, field: &str| {
            if d.is_finite() && d >= 0.0 {
                Ok(())
            } else {
                Err(fail(field.to_string(), "must be a non-negative finite number"))
            }
        };
        let users = match &self.users {
            UsersRecord::Homogeneous { density, region } => {
                density_ok(*density, "users.density")?;
                let region = match region {
                    Some(r) => {
                        finite_point(r.center, "users.region.center")?;
                        positive(r.radius, "users.region.radius")?;
                        Cell::new(r.center, r.radius)
                    }
                    None => cell,
                };
                UserModel::Homogeneous {
                    density: *density,
                    region,
                }
            }
            UsersRecord::Hotspots { hotspots } => {
                let mut out = Vec::with_capacity(hotspots.len());
                for (j, h) in hotspots.iter().enumerate() {
                    finite_point(h.center, &format!("users.hotspots[{j}].center"))?;
                    positive(h.radius, &format!("users.hotspots[{j}].radius"))?;
                    density_ok(h.density, &format!("users.hotspots[{j}].density"))?;
                    if h.center.distance(cell.center) + h.radius > cell.radius * (1.0 + 1e-9) {
                        return Err(fail(format!("users.hotspots[{j}]"), "hotspot must lie inside the cell"));
                    }
                    out.push(Hotspot {
                        region: Cell::new(h.center, h.radius),
                        density: h.density,
                    });
                }
                UserModel::Hotspots(out)
            }
        };

        let rf = &self.rf;
        positive(rf.f_c_ghz, "rf.f_c_ghz")?;
        positive(rf.bandwidth_hz, "rf.bandwidth_hz")?;
        finite(rf.noise_figure_db, "rf.noise_figure_db")?;
        finite(rf.p_max_dbm, "rf.p_max_dbm")?;
        finite(rf.t1_db, "rf.t1_db")?;
        finite(rf.t2_db, "rf.t2_db")?;
        if rf.m == 0 {
            return Err(fail("rf.m".into(), "need at least one BS antenna"));
        }
        if rf.n == 0 {
            return Err(fail("rf.n".into(), "need at least one RIS element"));
        }
        positive(rf.spacing, "rf.spacing")?;
        let rf_params = RfParams {
            carrier_ghz: rf.f_c_ghz,
            bandwidth_hz: rf.bandwidth_hz,
            noise_figure_db: rf.noise_figure_db,
            p_max_mw: db_to_linear(rf.p_max_dbm),
            rician_bs_ris: db_to_linear(rf.t1_db),
            rician_ris_user: db_to_linear(rf.t2_db),
            bs_antennas: rf.m,
            ris_elements: rf.n,
            spacing: rf.spacing,
        };

        let pl = &self.placement;
        if pl.t == 0 {
            return Err(fail("placement.t".into(), "need at least one candidate"));
        }
        if pl.n_inst == 0 {
            return Err(fail("placement.n_inst".into(), "need at least one instantiation"));
        }
        positive(pl.d_start, "placement.d_start")?;
        positive(pl.d_p, "placement.d_p")?;
        if let Some(r) = pl.r {
            positive(r, "placement.r")?;
        }
        positive(pl.grid_resolution, "placement.grid_resolution")?;
        if pl.grid_resolution > 2.0 * cell.radius {
            return Err(fail("placement.grid_resolution".into(), "larger than the cell diameter"));
        }

        let s = &self.solver;
        if s.max_iters == 0 {
            return Err(fail("solver.max_iters".into(), "must be at least 1"));
        }
        positive(s.rel_tol, "solver.rel_tol")?;
        if !(s.backtrack_factor.is_finite() && s.backtrack_factor > 1.0) {
            return Err(fail("solver.backtrack_factor".into(), "must be greater than 1"));
        }
        if s.w_steps == 0 {
            return Err(fail("solver.w_steps".into(), "must be at least 1"));
        }
        if let Some(k) = s.kappa0 {
            positive(k, "solver.kappa0")?;
        }
        if let Extrapolation::Fixed(e) = s.extrapolation {
            if !(e.is_finite() && (0.0..1.0).contains(&e)) {
                return Err(fail("solver.extrapolation".into(), "fixed momentum must lie in [0, 1)"));
            }
        }

        Ok(Scenario {
            name: self.name.clone(),
            seed: self.seed,
            bs: self.bs,
            cell,
            obstacles,
            users,
            rf: rf_params,
            placement: PlacementConfig {
                candidates: pl.t,
                instantiations: pl.n_inst,
                d_start: pl.d_start,
                d_p: pl.d_p,
                radius: pl.r,
                grid_resolution: pl.grid_resolution,
            },
            solver: SolverConfig {
                max_iters: s.max_iters,
                rel_tol: s.rel_tol,
                extrapolation: s.extrapolation,
                kappa0: s.kappa0,
                backtrack_factor: s.backtrack_factor,
                aux_update: s.aux_update,
                w_steps: s.w_steps,
            },
        })
    }
}

impl Scenario {
    /// Parses and validates; validation errors point at the source line.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        ScenarioFile::parse(text)?.validate_located(Some(text))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn bundled(name: &str) -> Result<Self, ScenarioError> {
        let text = bundled_source(name).ok_or_else(|| ScenarioError::UnknownBundled(name.to_string()))?;
        Self::from_toml(text)
    }

    /// Bundled name or filesystem path.
    pub fn resolve(name_or_path: &str) -> Result<Self, ScenarioError> {
        match bundled_source(name_or_path) {
            Some(text) => Self::from_toml(text),
            None => Self::load(name_or_path),
        }
    }
}

/// Line of the entry for a dotted field path such as `obstacles[2].radius`.
/// Falls back to the enclosing table when the key itself is absent.
fn locate(source: &str, field: &str) -> Option<usize> {
    let mut target = field.to_string();
    loop {
        if let Some(line) = locate_exact(source, &target) {
            return Some(line);
        }
        let cut = target.rfind(['.', '['])?;
        target.truncate(cut);
        if target.is_empty() {
            return None;
        }
    }
}

fn locate_exact(source: &str, field: &str) -> Option<usize> {
    use std::collections::HashMap;
    let mut counters: HashMap<String, usize> = HashMap::new();
    let mut table = String::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with("[[") {
            let name = line.trim_start_matches("[[").split("]]").next().unwrap_or("").trim().to_string();
            let n = counters.entry(name.clone()).or_insert(0);
            table = format!("{name}[{n}]");
            *n += 1;
            // nested arrays restart when their parent advances
            counters.retain(|k, _| !k.starts_with(&format!("{name}.")));
        } else if line.starts_with('[') {
            table = line.trim_start_matches('[').split(']').next().unwrap_or("").trim().to_string();
        } else if let Some((key, _)) = line.split_once('=') {
            let key = key.trim().trim_matches('"');
            let path = if table.is_empty() {
                key.to_string()
            } else {
                format!("{table}.{key}")
            };
            if path == field {
                return Some(idx + 1);
            }
            continue;
        } else {
            continue;
        }
        if table == field {
            return Some(idx + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
bs = [0.0, 0.0]

[cell]
center = [30.0, 0.0]
radius = 10.0

[[obstacles]]
kind = "circle"
center = [30.0, 5.0]
radius = 1.0

[[obstacles]]
kind = "wall"
center = [25.0, 0.0]
length = 4.0
orientation = 1.0

[users]
kind = "homogeneous"
density = 0.01

[rf]
f_c_ghz = 2.4
bandwidth_hz = 1e7
noise_figure_db = 10.0
p_max_dbm = 0.0
t1_db = 3.0
t2_db = 3.0
m = 4
n = 8

[placement]
t = 8
n_inst = 4
d_start = 2.0
d_p = 1.0
"#;

    #[test]
    fn minimal_parses_with_defaults() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.obstacles.len(), 2);
        assert_eq!(s.rf.spacing, 0.5);
        assert_eq!(s.placement.grid_resolution, 0.1);
        assert_eq!(s.solver, SolverConfig::default());
        assert!((s.rf.rician_bs_ris - 1.995262).abs() < 1e-6);
        assert_eq!(s.rf.p_max_mw, 1.0);
        match s.users {
            UserModel::Homogeneous { region, .. } => assert_eq!(region, s.cell),
            _ => panic!("wrong user model"),
        }
    }

    #[test]
    fn negative_radius_reports_field_and_line() {
        let text = MINIMAL.replace("radius = 1.0", "radius = -1.0");
        match Scenario::from_toml(&text) {
            Err(ScenarioError::Validation { field, line, .. }) => {
                assert_eq!(field, "obstacles[0].radius");
                assert_eq!(line, Some(12));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn second_obstacle_is_located() {
        let text = MINIMAL.replace("length = 4.0", "length = 0.0");
        match Scenario::from_toml(&text) {
            Err(ScenarioError::Validation { field, line, .. }) => {
                assert_eq!(field, "obstacles[1].length");
                assert_eq!(line, Some(17));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_line() {
        let text = MINIMAL.replace("m = 4", "m = = 4");
        match Scenario::from_toml(&text) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, Some(31)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let text = MINIMAL.replace("m = 4", "m = 4\nmm = 3");
        assert!(matches!(Scenario::from_toml(&text), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn zero_elements_rejected() {
        let text = MINIMAL.replace("n = 8", "n = 0");
        assert!(matches!(
            Scenario::from_toml(&text),
            Err(ScenarioError::Validation { ref field, .. }) if field == "rf.n"
        ));
    }

    #[test]
    fn hotspot_outside_cell_rejected() {
        let text = MINIMAL.replace(
            "kind = \"homogeneous\"\ndensity = 0.01",
            "kind = \"hotspots\"\n[[users.hotspots]]\ncenter = [39.0, 0.0]\nradius = 3.0\ndensity = 0.1",
        );
        match Scenario::from_toml(&text) {
            Err(ScenarioError::Validation { field, line, .. }) => {
                assert_eq!(field, "users.hotspots[0]");
                assert_eq!(line, Some(22));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn emit_parse_round_trip() {
        let file = ScenarioFile::parse(MINIMAL).unwrap();
        let again = ScenarioFile::parse(&file.to_toml().unwrap()).unwrap();
        assert_eq!(file, again);
    }

    #[test]
    fn bundled_scenarios_validate() {
        for name in bundled_names() {
            let s = Scenario::bundled(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            let file = ScenarioFile::parse(bundled_source(name).unwrap()).unwrap();
            assert_eq!(ScenarioFile::parse(&file.to_toml().unwrap()).unwrap(), file);
            assert_eq!(s.rf.bs_antennas, 16);
            assert_eq!(s.rf.ris_elements, 32);
        }
        assert!(matches!(Scenario::bundled("nope"), Err(ScenarioError::UnknownBundled(_))));
    }
}
