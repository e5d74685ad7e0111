//! Planar geometry kernel: obstacles, line-of-sight blockage, far-field
//! distance and grid coverage.
//!
//! Obstacles are treated as opaque: a link whose segment touches a circle or
//! crosses a wall is blocked outright. Walls have zero thickness.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance under which a point counts as lying on a wall.
pub const WALL_TOLERANCE: f64 = 1e-6;

/// Relative tolerance of the orientation predicate.
pub const ORIENT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("grid resolution {resolution} m exceeds the cell diameter {diameter} m")]
    EmptyGrid { resolution: f64, diameter: f64 },
    #[error("every grid point lies inside an obstacle")]
    NoFreePoints,
    #[error("point ({x}, {y}) lies outside the cell")]
    OutsideCell { x: f64, y: f64 },
}

/// A position in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

/// Circular obstacle such as a pillar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point2,
    pub radius: f64,
}

/// Straight wall of zero thickness, parameterized by its midpoint, length
/// and orientation in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub center: Point2,
    pub length: f64,
    pub orientation: f64,
}

impl Wall {
    /// Builds a wall, folding the orientation into `[0, π)`.
    pub fn new(center: Point2, length: f64, orientation: f64) -> Self {
        let mut orientation = orientation.rem_euclid(PI);
        if orientation >= PI {
            orientation = 0.0;
        }
        Self {
            center,
            length,
            orientation,
        }
    }

    pub fn endpoints(&self) -> (Point2, Point2) {
        wall_endpoints(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle {
    Circle(Circle),
    Wall(Wall),
}

impl Obstacle {
    pub fn circle(center: Point2, radius: f64) -> Self {
        Obstacle::Circle(Circle { center, radius })
    }

    pub fn wall(center: Point2, length: f64, orientation: f64) -> Self {
        Obstacle::Wall(Wall::new(center, length, orientation))
    }

    /// Whether the closed segment `a`–`b` touches this obstacle.
    pub fn blocks(&self, a: Point2, b: Point2) -> bool {
        match self {
            Obstacle::Circle(c) => segment_hits_circle(a, b, c),
            Obstacle::Wall(w) => {
                let (p, q) = w.endpoints();
                segments_intersect(a, b, p, q)
            }
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        match self {
            Obstacle::Circle(c) => p.distance(c.center) <= c.radius,
            Obstacle::Wall(w) => {
                let (a, b) = w.endpoints();
                point_segment_distance(p, a, b) <= WALL_TOLERANCE
            }
        }
    }
}

/// Circular cell (or any circular region: search circles and hotspots reuse it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: Point2,
    pub radius: f64,
}

impl Cell {
    pub fn new(center: Point2, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.distance(self.center) <= self.radius
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }
}

/// Evaluated coverage grid.
#[derive(Debug, Clone)]
pub struct CoverageMap {
    pub resolution: f64,
    pub points: Vec<(Point2, bool)>,
    pub fraction: f64,
}

impl CoverageMap {
    pub fn covered_count(&self) -> usize {
        self.points.iter().filter(|(_, c)| *c).count()
    }
}

pub fn wall_endpoints(w: &Wall) -> (Point2, Point2) {
    let half = w.length / 2.0;
    let dir = Point2::new(w.orientation.cos(), w.orientation.sin());
    (w.center - dir * half, w.center + dir * half)
}

/// Sign of the turn `a -> b -> c`: `1` counter-clockwise, `-1` clockwise,
/// `0` when collinear within [`ORIENT_EPS`] relative to the operand lengths.
pub fn orientation(a: Point2, b: Point2, c: Point2) -> i8 {
    let u = b - a;
    let v = c - a;
    let det = u.cross(v);
    let scale = u.norm() * v.norm();
    if det.abs() <= ORIENT_EPS * scale {
        0
    } else if det > 0.0 {
        1
    } else {
        -1
    }
}

fn on_segment_collinear(p: Point2, a: Point2, b: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment intersection; collinear overlap counts.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let o1 = orientation(a, b, c);
    let o2 = orientation(a, b, d);
    let o3 = orientation(c, d, a);
    let o4 = orientation(c, d, b);

    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && on_segment_collinear(c, a, b))
        || (o2 == 0 && on_segment_collinear(d, a, b))
        || (o3 == 0 && on_segment_collinear(a, c, d))
        || (o4 == 0 && on_segment_collinear(b, c, d))
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Closest-point test; tangency counts as a hit.
fn segment_hits_circle(a: Point2, b: Point2, c: &Circle) -> bool {
    point_segment_distance(c.center, a, b) <= c.radius
}

pub fn segment_blocked(a: Point2, b: Point2, obstacles: &[Obstacle]) -> bool {
    obstacles.iter().any(|o| o.blocks(a, b))
}

pub fn point_in_obstacle(p: Point2, obstacles: &[Obstacle]) -> bool {
    obstacles.iter().any(|o| o.contains(p))
}

/// Far-field boundary `2 D² / λ` of an `m`-element uniform linear array with
/// element `spacing` (meters). A single antenna has no aperture.
pub fn fraunhofer_distance(m: usize, wavelength: f64, spacing: f64) -> f64 {
    if m <= 1 {
        return 0.0;
    }
    let aperture = (m - 1) as f64 * spacing;
    2.0 * aperture * aperture / wavelength
}

/// Lattice points of the cell at step `resolution`, anchored on the cell
/// center, that fall outside every obstacle. Row-major in (x, y).
pub fn grid_points(cell: &Cell, obstacles: &[Obstacle], resolution: f64) -> Result<Vec<Point2>, GeomError> {
    if !(resolution > 0.0) || resolution > 2.0 * cell.radius {
        return Err(GeomError::EmptyGrid {
            resolution,
            diameter: 2.0 * cell.radius,
        });
    }
    let n = (cell.radius / resolution).floor() as i64;
    let r2 = cell.radius * cell.radius * (1.0 + 1e-12);
    let mut out = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let dx = i as f64 * resolution;
            let dy = j as f64 * resolution;
            if dx * dx + dy * dy > r2 {
                continue;
            }
            let p = Point2::new(cell.center.x + dx, cell.center.y + dy);
            if !point_in_obstacle(p, obstacles) {
                out.push(p);
            }
        }
    }
    if out.is_empty() {
        return Err(GeomError::NoFreePoints);
    }
    Ok(out)
}

/// Fraction of free grid points that see the BS directly or through the RIS.
pub fn coverage(
    cell: &Cell,
    bs: Point2,
    obstacles: &[Obstacle],
    ris: Option<Point2>,
    resolution: f64,
) -> Result<CoverageMap, GeomError> {
    if let Some(r) = ris {
        if !cell.contains(r) {
            return Err(GeomError::OutsideCell { x: r.x, y: r.y });
        }
    }
    let grid = grid_points(cell, obstacles, resolution)?;
    let ris_fed = ris.filter(|&r| !segment_blocked(bs, r, obstacles));

    let points: Vec<(Point2, bool)> = grid
        .into_iter()
        .map(|p| {
            let direct = !segment_blocked(bs, p, obstacles);
            let reflected = ris_fed.is_some_and(|r| r != p && !segment_blocked(r, p, obstacles));
            (p, direct || reflected)
        })
        .collect();
    let covered = points.iter().filter(|(_, c)| *c).count();
    let fraction = covered as f64 / points.len() as f64;
    Ok(CoverageMap {
        resolution,
        points,
        fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn wall_endpoint_examples() {
        let (a, b) = wall_endpoints(&Wall::new(p(0.0, 0.0), 2.0, 0.0));
        assert_eq!((a, b), (p(-1.0, 0.0), p(1.0, 0.0)));

        let (a, b) = wall_endpoints(&Wall::new(p(0.0, 0.0), 2.0, PI / 2.0));
        assert_abs_diff_eq!(a.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.y, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.y, 1.0, epsilon = 1e-15);

        let (a, b) = wall_endpoints(&Wall::new(p(1.0, 1.0), 2.0 * 2f64.sqrt(), PI / 4.0));
        assert_abs_diff_eq!(a.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.y, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn wall_orientation_is_folded() {
        let w = Wall::new(p(0.0, 0.0), 1.0, -PI / 4.0);
        assert_abs_diff_eq!(w.orientation, 3.0 * PI / 4.0, epsilon = 1e-15);
        let w = Wall::new(p(0.0, 0.0), 1.0, PI);
        assert_eq!(w.orientation, 0.0);
    }

    #[test]
    fn segment_blocked_examples() {
        assert!(!segment_blocked(p(0.0, 0.0), p(10.0, 0.0), &[]));
        let pillar = [Obstacle::circle(p(5.0, 0.0), 1.0)];
        assert!(segment_blocked(p(0.0, 0.0), p(10.0, 0.0), &pillar));
        // wall from (5, 0.5) to (5, 2.5) stops short of the x-axis
        let wall = [Obstacle::wall(p(5.0, 1.5), 2.0, PI / 2.0)];
        assert!(!segment_blocked(p(0.0, 0.0), p(10.0, 0.0), &wall));
        let longer = [Obstacle::wall(p(5.0, 1.5), 4.0, PI / 2.0)];
        assert!(segment_blocked(p(0.0, 0.0), p(10.0, 0.0), &longer));
    }

    #[test]
    fn tangent_circle_blocks() {
        let c = [Obstacle::circle(p(5.0, 1.0), 1.0)];
        assert!(segment_blocked(p(0.0, 0.0), p(10.0, 0.0), &c));
        let c = [Obstacle::circle(p(5.0, 1.0 + 1e-9), 1.0)];
        assert!(!segment_blocked(p(0.0, 0.0), p(10.0, 0.0), &c));
    }

    #[test]
    fn collinear_wall_overlap_blocks() {
        let wall = [Obstacle::wall(p(5.0, 0.0), 2.0, 0.0)];
        assert!(segment_blocked(p(0.0, 0.0), p(10.0, 0.0), &wall));
        let apart = [Obstacle::wall(p(15.0, 0.0), 2.0, 0.0)];
        assert!(!segment_blocked(p(0.0, 0.0), p(10.0, 0.0), &apart));
    }

    #[test]
    fn point_in_obstacle_examples() {
        assert!(point_in_obstacle(p(5.0, 0.0), &[Obstacle::circle(p(5.0, 0.0), 1.0)]));
        assert!(!point_in_obstacle(p(0.0, 0.0), &[]));
        let wall = [Obstacle::wall(p(5.0, 1.5), 2.0, PI / 2.0)];
        assert!(point_in_obstacle(p(5.0, 0.5), &wall));
        assert!(!point_in_obstacle(p(5.0, 0.49), &wall));
    }

    #[test]
    fn fraunhofer_examples() {
        assert_eq!(fraunhofer_distance(1, 0.125, 0.0625), 0.0);
        assert_abs_diff_eq!(fraunhofer_distance(16, 0.125, 0.0625), 14.0625, epsilon = 1e-12);
        assert_abs_diff_eq!(fraunhofer_distance(2, 1.0, 0.5), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn coverage_without_obstacles_is_full() {
        let cell = Cell::new(p(0.0, 0.0), 5.0);
        let map = coverage(&cell, p(-7.0, 0.0), &[], None, 0.5).unwrap();
        assert_eq!(map.fraction, 1.0);
    }

    #[test]
    fn coverage_behind_long_wall_is_zero() {
        let cell = Cell::new(p(0.0, 0.0), 5.0);
        let wall = [Obstacle::wall(p(-6.0, 0.0), 100.0, PI / 2.0)];
        let map = coverage(&cell, p(-7.0, 0.0), &wall, None, 0.5).unwrap();
        assert_eq!(map.fraction, 0.0);
    }

    #[test]
    fn coverage_grid_size_on_paper_cell() {
        let cell = Cell::new(p(100.0, 40.0), 20.0);
        let pts = grid_points(&cell, &[], 0.1).unwrap();
        // integer lattice points with i² + j² ≤ 200²
        let mut expected = 0usize;
        for i in -200i64..=200 {
            for j in -200i64..=200 {
                if i * i + j * j <= 40_000 {
                    expected += 1;
                }
            }
        }
        assert_eq!(pts.len(), expected);
        assert!((pts.len() as f64 - 125_600.0).abs() < 200.0);
    }

    #[test]
    fn coverage_grid_errors() {
        let cell = Cell::new(p(0.0, 0.0), 1.0);
        assert!(matches!(grid_points(&cell, &[], 2.5), Err(GeomError::EmptyGrid { .. })));
        let all = [Obstacle::circle(p(0.0, 0.0), 5.0)];
        assert_eq!(grid_points(&cell, &all, 0.5), Err(GeomError::NoFreePoints));
    }

    #[test]
    fn ris_restores_shadow() {
        let cell = Cell::new(p(0.0, 0.0), 5.0);
        let wall = [Obstacle::wall(p(0.0, 1.0), 4.0, 0.0)];
        let bs = p(0.0, -7.0);
        let before = coverage(&cell, bs, &wall, None, 0.25).unwrap();
        let after = coverage(&cell, bs, &wall, Some(p(4.0, 0.0)), 0.25).unwrap();
        assert!(before.fraction < 1.0);
        assert!(after.fraction > before.fraction);
        assert_eq!(before.points.len(), after.points.len());
    }
}
