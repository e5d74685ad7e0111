#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use risplace::beamform::FpState;
use risplace::channel::ChannelSet;
use risplace::{Scenario, C64};

/// Open cell of radius 5 m at (10, 0), BS at the origin, small arrays.
pub const TOY: &str = r#"
name = "toy"
seed = 11
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
n_inst = 4
d_start = 2.0
d_p = 1.0
grid_resolution = 0.5

[solver]
max_iters = 60
rel_tol = 0.0001
extrapolation = "nesterov"
backtrack_factor = 2.0
aux_update = "joint"
w_steps = 5
"#;

pub fn toy() -> Scenario {
    Scenario::from_toml(TOY).unwrap()
}

/// The toy scenario with `obstacles` (TOML array-of-tables text) appended.
pub fn toy_with(obstacles: &str) -> Scenario {
    Scenario::from_toml(&format!("{TOY}\n{obstacles}")).unwrap()
}

pub fn gaussian(rng: &mut ChaCha8Rng, scale: f64) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * (scale * std::f64::consts::FRAC_1_SQRT_2)
}

/// Rayleigh links with unit-order gains, for a noise power of 1.
pub fn random_set(seed: u64, m: usize, n: usize, k: usize) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let direct = (0..k).map(|_| DVector::from_fn(m, |_, _| gaussian(&mut rng, 1.0))).collect();
    let bs_ris = DMatrix::from_fn(n, m, |_, _| gaussian(&mut rng, 0.5));
    let ris_user = (0..k).map(|_| DVector::from_fn(n, |_, _| gaussian(&mut rng, 0.5))).collect();
    ChannelSet::new(direct, bs_ris, ris_user).unwrap()
}

/// Random beamformer at 80% of `p_max`, random phases and auxiliaries.
pub fn random_state(seed: u64, cs: &ChannelSet, p_max: f64) -> FpState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut w = DMatrix::from_fn(cs.antennas(), cs.users(), |_, _| gaussian(&mut rng, 1.0));
    w *= C64::from((p_max / w.norm_squared()).sqrt() * 0.8);
    let phases = (0..cs.elements()).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut s = FpState::new(w, phases);
    for j in 0..cs.users() {
        s.alpha[j] = rng.random_range(0.0..3.0);
        s.beta[j] = gaussian(&mut rng, 0.5);
    }
    s
}

use risplace::geom::{Obstacle, Point2};

pub const SAMPLE_STEP: f64 = 1e-3;
pub const TANGENCY_BAND: f64 = 1e-9;

fn seg_dist(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.x - a.x - t * dx).hypot(p.y - a.y - t * dy)
}

fn wall_ends(center: Point2, length: f64, orientation: f64) -> (Point2, Point2) {
    let (s, c) = orientation.sin_cos();
    let h = length / 2.0;
    (
        Point2::new(center.x - h * c, center.y - h * s),
        Point2::new(center.x + h * c, center.y + h * s),
    )
}

/// Blockage by walking the segment in 1 mm steps. Circles are solid disks;
/// walls are thickened to half a step so a crossing cannot slip between
/// samples. `None` when the scene sits where sampling cannot decide: a
/// circle within the tangency band (or a chord shorter than one step), or a
/// segment endpoint within one step of a wall or the wall's ends.
pub fn sampled_blocked(a: Point2, b: Point2, obstacles: &[Obstacle]) -> Option<bool> {
    for o in obstacles {
        match o {
            Obstacle::Circle(c) => {
                let gap = seg_dist(c.center, a, b) - c.radius;
                let chord_band = SAMPLE_STEP * SAMPLE_STEP / (8.0 * c.radius);
                if gap.abs() <= TANGENCY_BAND || (gap < 0.0 && -gap <= chord_band) {
                    return None;
                }
            }
            Obstacle::Wall(w) => {
                let (p, q) = wall_ends(w.center, w.length, w.orientation);
                let near = seg_dist(p, a, b).min(seg_dist(q, a, b)).min(seg_dist(a, p, q)).min(seg_dist(b, p, q));
                if near < SAMPLE_STEP {
                    return None;
                }
            }
        }
    }
    let len = a.distance(b);
    let n = (len / SAMPLE_STEP).ceil().max(1.0) as usize;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let s = Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        for o in obstacles {
            let hit = match o {
                Obstacle::Circle(c) => s.distance(c.center) <= c.radius,
                Obstacle::Wall(w) => {
                    let (p, q) = wall_ends(w.center, w.length, w.orientation);
                    seg_dist(s, p, q) <= SAMPLE_STEP / 2.0
                }
            };
            if hit {
                return Some(true);
            }
        }
    }
    Some(false)
}

/// A random scene in a 10 m box: one segment and one to three obstacles.
pub fn random_scene(rng: &mut ChaCha8Rng) -> (Point2, Point2, Vec<Obstacle>) {
    let pt = |rng: &mut ChaCha8Rng| Point2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
    let a = pt(rng);
    let b = pt(rng);
    let count = rng.random_range(1..=3);
    let obstacles = (0..count)
        .map(|_| {
            let c = pt(rng);
            if rng.random_bool(0.5) {
                Obstacle::circle(c, rng.random_range(0.1..2.0))
            } else {
                Obstacle::wall(c, rng.random_range(0.2..5.0), rng.random_range(0.0..std::f64::consts::PI))
            }
        })
        .collect();
    (a, b, obstacles)
}
