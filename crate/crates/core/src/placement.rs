//! Outer placement search.
//!
//! 1. Users are drawn from a Poisson point process (homogeneous or a set of
//!    hotspot discs).
//! 2. For each user draw, a candidate set of RIS positions is built inside a
//!    search circle, cycling through its four quadrants. Candidates must see
//!    the BS, sit in its far field, lie in the cell and avoid obstacles.
//! 3. Every candidate is scored by the min-SINR of the jointly optimized
//!    beamformer; the best candidate of each draw joins the solution set.
//! 4. The solution set is quantized on a lattice, the most populated cell is
//!    searched again with a halved step, until the requested precision.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::beamform::{self, SolveError};
use crate::channel::{sample_channels, ChannelError};
use crate::geom::{point_in_obstacle, segment_blocked, Cell, Obstacle, Point2};
use crate::rng::{Purpose, StreamKey};
use crate::scenario::Scenario;

/// Below this estimated acceptance rate, rejection sampling is refused.
pub const MIN_ACCEPTANCE: f64 = 1e-3;

/// Consecutive rejected draws after which a quadrant is declared infeasible.
pub const QUADRANT_DRAW_LIMIT: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlacementError {
    #[error("user region is almost entirely covered by obstacles or outside the cell (acceptance ≈ {acceptance:.2e})")]
    RejectionOverflow { acceptance: f64 },
    #[error("no quadrant of the search circle centered at ({x}, {y}) admits a candidate")]
    InfeasibleQuadrants { x: f64, y: f64 },
    #[error("no non-empty user draw in {draws} attempts")]
    NoUsers { draws: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid refinement parameters: {0}")]
    InvalidSteps(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hotspot {
    pub region: Cell,
    /// Users per square meter.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UserModel {
    Homogeneous { density: f64, region: Cell },
    Hotspots(Vec<Hotspot>),
}

impl UserModel {
    pub fn regions(&self) -> Vec<Hotspot> {
        match self {
            UserModel::Homogeneous { density, region } => vec![Hotspot {
                region: *region,
                density: *density,
            }],
            UserModel::Hotspots(h) => h.clone(),
        }
    }

    /// Expected number of users before obstacle rejection.
    pub fn expected_users(&self) -> f64 {
        self.regions().iter().map(|h| h.density * h.region.area()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementConfig {
    /// Candidates per instantiation (`T`).
    pub candidates: usize,
    /// Accepted (non-empty) user draws per solution set.
    pub instantiations: usize,
    pub d_start: f64,
    pub d_p: f64,
    /// Refinement circle radius; `None` uses the current quantization step.
    pub radius: Option<f64>,
    pub grid_resolution: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            candidates: 40,
            instantiations: 50,
            d_start: 2.0,
            d_p: 1.0,
            radius: None,
            grid_resolution: 0.1,
        }
    }
}

fn uniform_in_disc<R: Rng>(rng: &mut R, c: &Cell) -> Point2 {
    let r = c.radius * rng.random::<f64>().sqrt();
    let a = 2.0 * PI * rng.random::<f64>();
    Point2::new(c.center.x + r * a.cos(), c.center.y + r * a.sin())
}

/// Share of `region` that is inside `cell` and free of obstacles, estimated
/// on a 100 x 100 lattice.
fn acceptance_estimate(region: &Cell, cell: &Cell, obstacles: &[Obstacle]) -> f64 {
    const STEPS: usize = 100;
    let step = 2.0 * region.radius / STEPS as f64;
    let (mut inside, mut ok) = (0usize, 0usize);
    for i in 0..STEPS {
        for j in 0..STEPS {
            let p = Point2::new(
                region.center.x - region.radius + (i as f64 + 0.5) * step,
                region.center.y - region.radius + (j as f64 + 0.5) * step,
            );
            if !region.contains(p) {
                continue;
            }
            inside += 1;
            if cell.contains(p) && !point_in_obstacle(p, obstacles) {
                ok += 1;
            }
        }
    }
    if inside == 0 {
        0.0
    } else {
        ok as f64 / inside as f64
    }
}

/// One PPP draw: Poisson counts per region, positions uniform in the region,
/// redrawn until inside the cell and outside every obstacle.
pub fn sample_users(
    model: &UserModel,
    cell: &Cell,
    obstacles: &[Obstacle],
    key: StreamKey,
) -> Result<Vec<Point2>, PlacementError> {
    let mut rng = key.rng(Purpose::Users);
    let mut users = Vec::new();
    for hotspot in model.regions() {
        let mean = hotspot.density * hotspot.region.area();
        if !(mean > 0.0) {
            continue;
        }
        let count = Poisson::new(mean).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
        if count == 0 {
            continue;
        }
        let acceptance = acceptance_estimate(&hotspot.region, cell, obstacles);
        if acceptance < MIN_ACCEPTANCE {
            return Err(PlacementError::RejectionOverflow { acceptance });
        }
        let limit = (100.0 / acceptance).ceil() as usize * 100;
        for _ in 0..count {
            let mut tries = 0;
            let p = loop {
                let p = uniform_in_disc(&mut rng, &hotspot.region);
                if cell.contains(p) && !point_in_obstacle(p, obstacles) {
                    break p;
                }
                tries += 1;
                if tries > limit {
                    return Err(PlacementError::RejectionOverflow { acceptance });
                }
            };
            users.push(p);
        }
    }
    Ok(users)
}

/// Candidate RIS positions for one instantiation.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub points: Vec<Point2>,
    /// Quadrant (0..4, counter-clockwise from +x,+y) each point was drawn in.
    pub quadrants: Vec<u8>,
    pub search_circle: Cell,
    /// Quadrants abandoned after [`QUADRANT_DRAW_LIMIT`] straight rejections.
    pub skipped_quadrants: Vec<u8>,
}

fn uniform_in_quadrant<R: Rng>(rng: &mut R, c: &Cell, quadrant: u8) -> Point2 {
    let r = c.radius * rng.random::<f64>().sqrt();
    let a = (quadrant as f64 + rng.random::<f64>()) * PI / 2.0;
    Point2::new(c.center.x + r * a.cos(), c.center.y + r * a.sin())
}

/// Whether `q` may host the RIS: inside the cell, outside obstacles, in the
/// BS far field and in line of sight of the BS.
pub fn candidate_ok(q: Point2, bs: Point2, obstacles: &[Obstacle], cell: &Cell, d_ff: f64) -> bool {
    cell.contains(q) && q.distance(bs) >= d_ff && !point_in_obstacle(q, obstacles) && !segment_blocked(bs, q, obstacles)
}

/// Draws `count` accepted candidates, candidate `i` in quadrant `i mod 4` of
/// `circle`. Quadrants that never accept are dropped and the remaining ones
/// share the count in the same cyclic order.
pub fn build_candidate_set(
    bs: Point2,
    obstacles: &[Obstacle],
    cell: &Cell,
    circle: &Cell,
    count: usize,
    d_ff: f64,
    key: StreamKey,
) -> Result<CandidateSet, PlacementError> {
    let mut rng = key.rng(Purpose::Candidates);
    let mut active: Vec<u8> = vec![0, 1, 2, 3];
    let mut skipped = Vec::new();
    let mut points = Vec::with_capacity(count);
    let mut quadrants = Vec::with_capacity(count);
    let mut cursor = 0usize;
    while points.len() < count {
        if active.is_empty() {
            return Err(PlacementError::InfeasibleQuadrants {
                x: circle.center.x,
                y: circle.center.y,
            });
        }
        let slot = cursor % active.len();
        let quadrant = active[slot];
        let mut accepted = None;
        for _ in 0..QUADRANT_DRAW_LIMIT {
            let q = uniform_in_quadrant(&mut rng, circle, quadrant);
            if candidate_ok(q, bs, obstacles, cell, d_ff) {
                accepted = Some(q);
                break;
            }
        }
        match accepted {
            Some(q) => {
                points.push(q);
                quadrants.push(quadrant);
                cursor = slot + 1;
            }
            None => {
                active.remove(slot);
                skipped.push(quadrant);
                cursor = slot;
            }
        }
    }
    skipped.sort_unstable();
    Ok(CandidateSet {
        points,
        quadrants,
        search_circle: *circle,
        skipped_quadrants: skipped,
    })
}

/// Score of one candidate under one user draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub min_sinr: f64,
    pub wsr: f64,
}

/// Samples channels with the RIS at `q` and solves the joint beamforming
/// problem. An empty user set scores `+∞` (no user constrains the minimum).
pub fn evaluate_candidate(
    q: Point2,
    users: &[Point2],
    scenario: &Scenario,
    key: StreamKey,
) -> Result<CandidateScore, PlacementError> {
    if users.is_empty() {
        return Ok(CandidateScore {
            min_sinr: f64::INFINITY,
            wsr: 0.0,
        });
    }
    let cs = sample_channels(scenario, Some(q), users, key)?;
    let state = beamform::solve(&cs, &scenario.rf, &scenario.solver)?;
    let noise = scenario.rf.noise_power_mw();
    Ok(CandidateScore {
        min_sinr: beamform::min_sinr(&cs, &state, noise),
        wsr: beamform::state_wsr(&state, &cs, noise),
    })
}

/// Best candidate of one instantiation.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub point: Point2,
    pub instantiation: u64,
    pub candidate: usize,
    pub min_sinr: f64,
    pub wsr: f64,
    pub users: usize,
    /// The instantiation's full candidate set and per-candidate min-SINR.
    pub candidates: Vec<Point2>,
    pub candidate_min_sinr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub level: u64,
    pub search_circle: Cell,
    pub solutions: Vec<Solution>,
}

impl SolutionSet {
    pub fn points(&self) -> Vec<Point2> {
        self.solutions.iter().map(|s| s.point).collect()
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }
}

/// Ordering used to pick the best candidate: higher min-SINR, then closer to
/// the search-circle center, then lexicographically smaller.
fn better(a: (Point2, f64), b: (Point2, f64), center: Point2) -> bool {
    match a.1.total_cmp(&b.1) {
        Ordering::Greater => return true,
        Ordering::Less => return false,
        Ordering::Equal => {}
    }
    match a.0.distance(center).total_cmp(&b.0.distance(center)) {
        Ordering::Less => return true,
        Ordering::Greater => return false,
        Ordering::Equal => {}
    }
    (a.0.x, a.0.y) < (b.0.x, b.0.y)
}

/// Index of the winning candidate under the tie rules above.
pub fn best_candidate(points: &[Point2], scores: &[f64], center: Point2) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..points.len() {
        best = match best {
            Some(b) if !better((points[i], scores[i]), (points[b], scores[b]), center) => Some(b),
            _ => Some(i),
        };
    }
    best
}

/// Builds a solution set of `scenario.placement.instantiations` accepted user
/// draws on `circle`. Draws with no users are skipped. The per-instantiation
/// work runs in parallel; results keep instantiation order.
pub fn build_solution_set(scenario: &Scenario, circle: &Cell, level: u64) -> Result<SolutionSet, PlacementError> {
    let cfg = &scenario.placement;
    let key = StreamKey::new(scenario.seed).level(level);
    let draws = accepted_draws(scenario, key, cfg.instantiations)?;
    let d_ff = scenario.rf.far_field_distance();

    let solutions = draws
        .par_iter()
        .map(|(i, users)| {
            let inst = key.instantiation(*i);
            let cands = build_candidate_set(
                scenario.bs,
                &scenario.obstacles,
                &scenario.cell,
                circle,
                cfg.candidates,
                d_ff,
                inst,
            )?;
            let scores = cands
                .points
                .iter()
                .enumerate()
                .map(|(j, &q)| evaluate_candidate(q, users, scenario, inst.candidate(j as u64)))
                .collect::<Result<Vec<_>, _>>()?;
            let min_sinr: Vec<f64> = scores.iter().map(|s| s.min_sinr).collect();
            let best = best_candidate(&cands.points, &min_sinr, circle.center).ok_or(PlacementError::EmptyInput)?;
            Ok(Solution {
                point: cands.points[best],
                instantiation: *i,
                candidate: best,
                min_sinr: scores[best].min_sinr,
                wsr: scores[best].wsr,
                users: users.len(),
                candidates: cands.points,
                candidate_min_sinr: min_sinr,
            })
        })
        .collect::<Result<Vec<_>, PlacementError>>()?;

    Ok(SolutionSet {
        level,
        search_circle: *circle,
        solutions,
    })
}

/// The first `count` non-empty user draws of `key`, with their instantiation
/// indices.
pub fn accepted_draws(
    scenario: &Scenario,
    key: StreamKey,
    count: usize,
) -> Result<Vec<(u64, Vec<Point2>)>, PlacementError> {
    let limit = 100 * count + 100;
    let mut out = Vec::with_capacity(count);
    let mut i = 0u64;
    while out.len() < count {
        if i as usize >= limit {
            return Err(PlacementError::NoUsers { draws: limit });
        }
        let users = sample_users(&scenario.users, &scenario.cell, &scenario.obstacles, key.instantiation(i))?;
        if !users.is_empty() {
            out.push((i, users));
        }
        i += 1;
    }
    Ok(out)
}

/// Rounds each coordinate to the nearest multiple of `d`, halves away from zero.
pub fn quantize(points: &[Point2], d: f64) -> Vec<Point2> {
    points
        .iter()
        .map(|p| Point2::new((p.x / d).round() * d + 0.0, (p.y / d).round() * d + 0.0))
        .collect()
}

/// Distinct points with their multiplicities, sorted by `(x, y)`.
pub fn frequencies(points: &[Point2]) -> Vec<(Point2, usize)> {
    let mut sorted: Vec<Point2> = points.iter().map(|p| Point2::new(p.x + 0.0, p.y + 0.0)).collect();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut out: Vec<(Point2, usize)> = Vec::new();
    for p in sorted {
        match out.last_mut() {
            Some((q, n)) if *q == p => *n += 1,
            _ => out.push((p, 1)),
        }
    }
    out
}

/// Most frequent point; ties go to the lexicographically smallest.
pub fn mode_cell(points: &[Point2]) -> Result<Point2, PlacementError> {
    let freq = frequencies(points);
    let mut best: Option<(Point2, usize)> = None;
    for (p, n) in freq {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((p, n));
        }
    }
    best.map(|(p, _)| p).ok_or(PlacementError::EmptyInput)
}

/// One quantize-and-refine pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementLevel {
    pub step: f64,
    pub mode: Point2,
    /// Circle the quantized solution set was built on.
    pub circle: Cell,
    pub solutions: SolutionSet,
    pub frequencies: Vec<(Point2, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    pub center: Point2,
    pub side: f64,
    pub levels: Vec<RefinementLevel>,
    /// Lattice counts of the final quantization at step `side`.
    pub final_frequencies: Vec<(Point2, usize)>,
    /// Solution set the center was quantized from.
    pub final_set: SolutionSet,
}

impl PlacementResult {
    /// Half-open square `[x - s/2, x + s/2) x [y - s/2, y + s/2)`.
    pub fn region(&self) -> (f64, f64, f64, f64) {
        let h = self.side / 2.0;
        (self.center.x - h, self.center.x + h, self.center.y - h, self.center.y + h)
    }
}

/// Number of refinement passes for the given steps: the step halves while it
/// stays at or above `d_p`.
pub fn level_count(d_start: f64, d_p: f64) -> usize {
    let mut d = d_start;
    let mut n = 0;
    while d >= d_p {
        n += 1;
        d /= 2.0;
    }
    n
}

/// Most frequent lattice point that can host the RIS. Falls back to the best
/// scoring solution when every populated cell is blocked.
pub fn final_center(scenario: &Scenario, set: &SolutionSet, d_p: f64) -> Result<(Point2, Vec<(Point2, usize)>), PlacementError> {
    if set.is_empty() {
        return Err(PlacementError::EmptyInput);
    }
    let freq = frequencies(&quantize(&set.points(), d_p));
    let mut best: Option<(Point2, usize)> = None;
    for &(p, n) in &freq {
        let usable = scenario.cell.contains(p) && !point_in_obstacle(p, &scenario.obstacles);
        if usable && best.is_none_or(|(_, m)| n > m) {
            best = Some((p, n));
        }
    }
    let center = match best {
        Some((p, _)) => p,
        None => {
            let pts = set.points();
            let scores: Vec<f64> = set.solutions.iter().map(|s| s.min_sinr).collect();
            pts[best_candidate(&pts, &scores, set.search_circle.center).unwrap_or(0)]
        }
    };
    Ok((center, freq))
}

/// Quantize, take the mode, rebuild the solution set on a circle around it,
/// halve the step; repeat while the step is at least `d_p`. The last pass
/// does not rebuild: its solution set, quantized at `d_p`, gives the center.
pub fn recursive_refine(
    scenario: &Scenario,
    initial: SolutionSet,
    d_start: f64,
    d_p: f64,
    radius: Option<f64>,
) -> Result<PlacementResult, PlacementError> {
    if !(d_p > 0.0) || !(d_start > 0.0) {
        return Err(PlacementError::InvalidSteps(format!("d_start = {d_start}, d_p = {d_p}")));
    }
    if radius.is_some_and(|r| !(r > 0.0)) {
        return Err(PlacementError::InvalidSteps("refinement radius must be positive".into()));
    }
    let mut levels = Vec::new();
    let mut current = initial;
    let mut d = d_start;
    while d >= d_p {
        let quantized = quantize(&current.points(), d);
        let mode = mode_cell(&quantized)?;
        let next = d / 2.0;
        let rebuild = next >= d_p;
        let circle = Cell::new(mode, radius.unwrap_or(d));
        let refined = if rebuild {
            Some(build_solution_set(scenario, &circle, current.level + 1)?)
        } else {
            None
        };
        levels.push(RefinementLevel {
            step: d,
            mode,
            circle: current.search_circle,
            frequencies: frequencies(&quantized),
            solutions: current.clone(),
        });
        match refined {
            Some(s) => current = s,
            None => break,
        }
        d = next;
    }
    let (center, final_frequencies) = final_center(scenario, &current, d_p)?;
    Ok(PlacementResult {
        center,
        side: d_p,
        levels,
        final_frequencies,
        final_set: current,
    })
}

/// Full search: a solution set over the whole cell, then recursive refinement.
pub fn place(scenario: &Scenario) -> Result<PlacementResult, PlacementError> {
    let cfg = &scenario.placement;
    let initial = build_solution_set(scenario, &scenario.cell, 1)?;
    recursive_refine(scenario, initial, cfg.d_start, cfg.d_p, cfg.radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Obstacle;
    use approx::assert_abs_diff_eq;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(&[p(3.7, -1.2)], 2.0), vec![p(4.0, -2.0)]);
        let ints = [p(3.0, -2.0), p(0.0, 7.0)];
        assert_eq!(quantize(&ints, 1.0), ints.to_vec());
        // 1/2 = 0.5 rounds away from zero
        assert_eq!(quantize(&[p(1.0, 1.0)], 2.0), vec![p(2.0, 2.0)]);
        assert_eq!(quantize(&[p(-1.0, -1.0)], 2.0), vec![p(-2.0, -2.0)]);
        // no negative zero
        let z = quantize(&[p(-0.3, 0.2)], 2.0)[0];
        assert!(z.x.is_sign_positive());
    }

    #[test]
    fn mode_examples() {
        assert_eq!(mode_cell(&[p(0.0, 0.0), p(0.0, 0.0), p(2.0, 2.0)]).unwrap(), p(0.0, 0.0));
        assert_eq!(mode_cell(&[p(2.0, 0.0), p(0.0, 4.0), p(0.0, 2.0)]).unwrap(), p(0.0, 2.0));
        assert_eq!(mode_cell(&[]), Err(PlacementError::EmptyInput));
    }

    #[test]
    fn mode_matches_counting_oracle() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let pts: Vec<Point2> = (0..rng.random_range(1..60))
                .map(|_| p(rng.random_range(-3..3) as f64, rng.random_range(-3..3) as f64))
                .collect();
            let mut best = (p(0.0, 0.0), 0usize);
            for x in -3..3 {
                for y in -3..3 {
                    let c = p(x as f64, y as f64);
                    let n = pts.iter().filter(|q| **q == c).count();
                    if n > best.1 {
                        best = (c, n);
                    }
                }
            }
            assert_eq!(mode_cell(&pts).unwrap(), best.0);
        }
    }

    #[test]
    fn level_counts() {
        assert_eq!(level_count(2.0, 1.0), 2);
        assert_eq!(level_count(8.0, 1.0), 4);
        assert_eq!(level_count(0.5, 1.0), 0);
        assert_eq!(level_count(3.0, 1.0), 2);
    }

    #[test]
    fn tie_break_prefers_center_then_lexicographic() {
        let pts = [p(3.0, 0.0), p(1.0, 0.0), p(-1.0, 0.0), p(0.0, 5.0)];
        let scores = [1.0, 1.0, 1.0, 0.5];
        assert_eq!(best_candidate(&pts, &scores, p(0.0, 0.0)), Some(2));
        let scores = [1.0, 1.0, 1.0, 2.0];
        assert_eq!(best_candidate(&pts, &scores, p(0.0, 0.0)), Some(3));
        assert_eq!(best_candidate(&[], &[], p(0.0, 0.0)), None);
    }

    #[test]
    fn zero_density_draws_nobody() {
        let cell = Cell::new(p(0.0, 0.0), 20.0);
        let model = UserModel::Homogeneous {
            density: 0.0,
            region: cell,
        };
        assert!(sample_users(&model, &cell, &[], StreamKey::new(1)).unwrap().is_empty());
    }

    #[test]
    fn users_avoid_obstacles_and_stay_in_cell() {
        let cell = Cell::new(p(0.0, 0.0), 10.0);
        let obstacles = [Obstacle::circle(p(2.0, 0.0), 4.0)];
        let model = UserModel::Hotspots(vec![Hotspot {
            region: Cell::new(p(3.0, 0.0), 6.0),
            density: 0.3,
        }]);
        for i in 0..20 {
            let users = sample_users(&model, &cell, &obstacles, StreamKey::new(9).instantiation(i)).unwrap();
            assert!(!users.is_empty());
            for u in users {
                assert!(cell.contains(u));
                assert!(!point_in_obstacle(u, &obstacles));
            }
        }
    }

    #[test]
    fn buried_region_overflows() {
        let cell = Cell::new(p(0.0, 0.0), 10.0);
        let obstacles = [Obstacle::circle(p(0.0, 0.0), 20.0)];
        let model = UserModel::Homogeneous {
            density: 1.0,
            region: cell,
        };
        assert!(matches!(
            sample_users(&model, &cell, &obstacles, StreamKey::new(1)),
            Err(PlacementError::RejectionOverflow { .. })
        ));
    }

    #[test]
    fn expected_users_of_paper_density() {
        let cell = Cell::new(p(100.0, 40.0), 20.0);
        let model = UserModel::Homogeneous {
            density: 0.009,
            region: cell,
        };
        assert_abs_diff_eq!(model.expected_users(), 11.3097, epsilon = 1e-4);
    }

    #[test]
    fn candidates_cycle_quadrants() {
        let cell = Cell::new(p(0.0, 0.0), 10.0);
        let set = build_candidate_set(p(-30.0, 0.0), &[], &cell, &cell, 40, 0.0, StreamKey::new(2)).unwrap();
        assert_eq!(set.points.len(), 40);
        for q in 0..4u8 {
            assert_eq!(set.quadrants.iter().filter(|&&x| x == q).count(), 10);
        }
        for (pt, q) in set.points.iter().zip(&set.quadrants) {
            let d = *pt - cell.center;
            let expected = match (d.x >= 0.0, d.y >= 0.0) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            };
            assert_eq!(*q, expected);
        }
        assert!(set.skipped_quadrants.is_empty());
    }

    #[test]
    fn candidates_respect_far_field() {
        let cell = Cell::new(p(100.0, 40.0), 20.0);
        let bs = p(80.0, 30.0);
        let set = build_candidate_set(bs, &[], &cell, &cell, 40, 14.0625, StreamKey::new(5)).unwrap();
        let nearest = set.points.iter().map(|q| q.distance(bs)).fold(f64::MAX, f64::min);
        assert!(nearest >= 14.0625);
    }

    #[test]
    fn walled_off_circle_is_infeasible() {
        let cell = Cell::new(p(0.0, 0.0), 10.0);
        let wall = [Obstacle::wall(p(-12.0, 0.0), 200.0, PI / 2.0)];
        let err = build_candidate_set(p(-20.0, 0.0), &wall, &cell, &cell, 4, 0.0, StreamKey::new(1)).unwrap_err();
        assert!(matches!(err, PlacementError::InfeasibleQuadrants { .. }));
    }

    #[test]
    fn half_walled_circle_rebalances() {
        // wall along the x axis hides quadrants 2 and 3 from a BS above
        let cell = Cell::new(p(0.0, 0.0), 10.0);
        let wall = [Obstacle::wall(p(0.0, 0.0), 200.0, 0.0)];
        let set = build_candidate_set(p(0.0, 30.0), &wall, &Cell::new(p(0.0, 0.0), 40.0), &cell, 8, 0.0, StreamKey::new(1))
            .unwrap();
        assert_eq!(set.skipped_quadrants, vec![2, 3]);
        assert_eq!(set.points.len(), 8);
        assert_eq!(set.quadrants.iter().filter(|&&q| q == 0).count(), 4);
    }
}
