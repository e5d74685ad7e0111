//! Link synthesis and rate evaluation.
//!
//! The direct BS-user links are Rayleigh faded; the two RIS legs are Rician
//! with a line-of-sight component built from uniform-linear-array steering
//! vectors. Large-scale loss follows the urban-micro formulas below. Any link
//! whose straight segment touches an obstacle is zeroed.
//!
//! Powers are carried in milliwatts, losses in dB, and channel amplitudes
//! include `sqrt(10^(-PL/10))`.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geom::{fraunhofer_distance, segment_blocked, Point2};
use crate::rng::{Purpose, StreamKey};
use crate::scenario::Scenario;
use crate::C64;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("link distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("coincident points at ({x}, {y})")]
    CoincidentPoints { x: f64, y: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Radio parameters in linear internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct RfParams {
    pub carrier_ghz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub p_max_mw: f64,
    /// Rician factor of the BS-RIS leg (linear).
    pub rician_bs_ris: f64,
    /// Rician factor of the RIS-user legs (linear).
    pub rician_ris_user: f64,
    pub bs_antennas: usize,
    pub ris_elements: usize,
    /// Element spacing in wavelengths, shared by the BS and RIS arrays.
    pub spacing: f64,
}

impl RfParams {
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / (self.carrier_ghz * 1e9)
    }

    pub fn noise_power_dbm(&self) -> f64 {
        noise_power(self.bandwidth_hz, self.noise_figure_db)
    }

    pub fn noise_power_mw(&self) -> f64 {
        db_to_linear(self.noise_power_dbm())
    }

    pub fn far_field_distance(&self) -> f64 {
        let lambda = self.wavelength_m();
        fraunhofer_distance(self.bs_antennas, lambda, self.spacing * lambda)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Loss (dB) of a BS-RIS or RIS-user leg at distance `d` meters and carrier `fc_ghz`.
pub fn pathloss_ris_leg(d: f64, fc_ghz: f64) -> Result<f64, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::NonPositiveDistance(d));
    }
    Ok(22.0 * d.log10() + 28.0 + 20.0 * fc_ghz.log10())
}

/// Loss (dB) of the direct BS-user link.
pub fn pathloss_direct(d: f64, fc_ghz: f64) -> Result<f64, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::NonPositiveDistance(d));
    }
    Ok(36.7 * d.log10() + 22.7 + 26.0 * fc_ghz.log10())
}

/// Thermal noise floor in dBm for bandwidth `bandwidth_hz` and noise figure `nf_db`.
pub fn noise_power(bandwidth_hz: f64, nf_db: f64) -> f64 {
    -174.0 + 10.0 * bandwidth_hz.log10() + nf_db
}

/// ULA response: element `m` is `exp(j 2π spacing m sin(angle))`, spacing in wavelengths.
pub fn steering_vector(n: usize, angle: f64, spacing: f64) -> DVector<C64> {
    let step = 2.0 * PI * spacing * angle.sin();
    DVector::from_fn(n, |m, _| C64::from_polar(1.0, step * m as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkAngles {
    /// Arrival at the RIS from the BS.
    pub bs_ris_arrival: f64,
    /// Departure at the BS toward the RIS.
    pub bs_ris_departure: f64,
    /// Departure at the RIS toward each user.
    pub ris_user_departure: Vec<f64>,
}

/// Azimuth of `to - from` measured from the broadside normal of an array
/// laid along `axis`; result in `(-π, π]`.
fn broadside_angle(from: Point2, to: Point2, axis: f64) -> Result<f64, ChannelError> {
    let d = to - from;
    if d.x == 0.0 && d.y == 0.0 {
        return Err(ChannelError::CoincidentPoints { x: from.x, y: from.y });
    }
    let along = Point2::new(axis.cos(), axis.sin());
    let normal = Point2::new(-axis.sin(), axis.cos());
    let a = d.dot(along).atan2(d.dot(normal));
    Ok(if a <= -PI { a + 2.0 * PI } else { a })
}

pub fn link_angles(bs: Point2, ris: Point2, users: &[Point2], array_axis: f64) -> Result<LinkAngles, ChannelError> {
    Ok(LinkAngles {
        bs_ris_arrival: broadside_angle(ris, bs, array_axis)?,
        bs_ris_departure: broadside_angle(bs, ris, array_axis)?,
        ris_user_departure: users
            .iter()
            .map(|&u| broadside_angle(ris, u, array_axis))
            .collect::<Result<_, _>>()?,
    })
}

/// Loss bookkeeping for one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRecord {
    pub loss_db: f64,
    pub blocked: bool,
}

/// One realization of every link for `K` users.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Direct BS-user channels, `M` entries each.
    pub direct: Vec<DVector<C64>>,
    /// BS-RIS channel, `N x M`.
    pub bs_ris: DMatrix<C64>,
    /// RIS-user channels, `N` entries each.
    pub ris_user: Vec<DVector<C64>>,
    /// `diag(conj(h_ru_k)) H_br` for each user.
    pub cascade: Vec<DMatrix<C64>>,
    pub direct_links: Vec<LinkRecord>,
    pub bs_ris_link: Option<LinkRecord>,
    pub ris_user_links: Vec<LinkRecord>,
}

impl ChannelSet {
    /// Assembles a channel set from raw links and forms the cascaded channels.
    pub fn new(
        direct: Vec<DVector<C64>>,
        bs_ris: DMatrix<C64>,
        ris_user: Vec<DVector<C64>>,
    ) -> Result<Self, ChannelError> {
        let k = direct.len();
        let m = direct.first().map_or(bs_ris.ncols(), |h| h.len());
        let n = bs_ris.nrows();
        if direct.iter().any(|h| h.len() != m) {
            return Err(ChannelError::DimensionMismatch("direct links differ in length".into()));
        }
        if n > 0 && bs_ris.ncols() != m {
            return Err(ChannelError::DimensionMismatch(format!(
                "BS-RIS channel has {} columns, expected {m}",
                bs_ris.ncols()
            )));
        }
        if ris_user.len() != k || ris_user.iter().any(|h| h.len() != n) {
            return Err(ChannelError::DimensionMismatch(format!(
                "expected {k} RIS-user links of length {n}"
            )));
        }
        let bs_ris = if n == 0 { DMatrix::zeros(0, m) } else { bs_ris };
        let cascade = ris_user.iter().map(|h| cascade_channel(h, &bs_ris)).collect();
        Ok(Self {
            direct_links: vec![LinkRecord { loss_db: 0.0, blocked: false }; k],
            bs_ris_link: None,
            ris_user_links: vec![LinkRecord { loss_db: 0.0, blocked: false }; k],
            direct,
            bs_ris,
            ris_user,
            cascade,
        })
    }

    /// Channel set without a RIS (`N = 0`).
    pub fn direct_only(direct: Vec<DVector<C64>>) -> Result<Self, ChannelError> {
        let m = direct.first().map_or(0, |h| h.len());
        let k = direct.len();
        Self::new(direct, DMatrix::zeros(0, m), vec![DVector::zeros(0); k])
    }

    pub fn users(&self) -> usize {
        self.direct.len()
    }

    pub fn antennas(&self) -> usize {
        self.bs_ris.ncols()
    }

    pub fn elements(&self) -> usize {
        self.bs_ris.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.direct.iter().all(|h| h.iter().all(|z| z.norm_sqr() == 0.0))
            && self.cascade.iter().all(|h| h.iter().all(|z| z.norm_sqr() == 0.0))
    }

    /// Effective row `h_bu_k^H + v^T H_k` per user, with `v_n = exp(j φ_n)`.
    pub fn effective_rows(&self, phases: &[f64]) -> Vec<DVector<C64>> {
        let v: Vec<C64> = phases.iter().map(|&p| C64::from_polar(1.0, p)).collect();
        self.direct
            .iter()
            .zip(&self.cascade)
            .map(|(h, hk)| {
                DVector::from_fn(h.len(), |m, _| {
                    let mut acc = h[m].conj();
                    for (n, vn) in v.iter().enumerate() {
                        acc += vn * hk[(n, m)];
                    }
                    acc
                })
            })
            .collect()
    }

    fn check(&self, w: &DMatrix<C64>, phases: &[f64]) -> Result<(), ChannelError> {
        if w.nrows() != self.antennas() || w.ncols() != self.users() {
            return Err(ChannelError::DimensionMismatch(format!(
                "beamformer is {}x{}, expected {}x{}",
                w.nrows(),
                w.ncols(),
                self.antennas(),
                self.users()
            )));
        }
        if phases.len() != self.elements() {
            return Err(ChannelError::DimensionMismatch(format!(
                "{} phases for {} RIS elements",
                phases.len(),
                self.elements()
            )));
        }
        Ok(())
    }
}

fn cascade_channel(h_ru: &DVector<C64>, bs_ris: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = bs_ris.clone();
    for (n, mut row) in out.row_iter_mut().enumerate() {
        row *= h_ru[n].conj();
    }
    out
}

fn cscg<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws every link for RIS position `ris` (none: direct links only) and the
/// given users. Direct links use the instantiation-shared stream of `key`, so
/// they do not change between candidates.
pub fn sample_channels(
    scenario: &Scenario,
    ris: Option<Point2>,
    users: &[Point2],
    key: StreamKey,
) -> Result<ChannelSet, ChannelError> {
    let rf = &scenario.rf;
    let m = rf.bs_antennas;
    let fc = rf.carrier_ghz;
    let obstacles = &scenario.obstacles;
    let bs = scenario.bs;

    let mut direct = Vec::with_capacity(users.len());
    let mut direct_links = Vec::with_capacity(users.len());
    for (k, &u) in users.iter().enumerate() {
        let loss_db = pathloss_direct(bs.distance(u), fc)?;
        let blocked = segment_blocked(bs, u, obstacles);
        let h = if blocked {
            DVector::zeros(m)
        } else {
            let mut rng = key.shared().rng(Purpose::Direct(k));
            let amp = db_to_linear(-loss_db).sqrt();
            DVector::from_fn(m, |_, _| cscg(&mut rng) * amp)
        };
        direct.push(h);
        direct_links.push(LinkRecord { loss_db, blocked });
    }

    let Some(ris) = ris else {
        let mut cs = ChannelSet::direct_only(direct)?;
        cs.direct_links = direct_links;
        return Ok(cs);
    };

    let n = rf.ris_elements;
    let angles = link_angles(bs, ris, users, 0.0)?;

    let br_loss = pathloss_ris_leg(bs.distance(ris), fc)?;
    let br_blocked = segment_blocked(bs, ris, obstacles);
    let bs_ris = if br_blocked {
        DMatrix::zeros(n, m)
    } else {
        let t1 = rf.rician_bs_ris;
        let los = steering_vector(n, angles.bs_ris_arrival, rf.spacing)
            * steering_vector(m, angles.bs_ris_departure, rf.spacing).adjoint();
        let mut rng = key.rng(Purpose::BsRis);
        let nlos = DMatrix::from_fn(n, m, |_, _| cscg(&mut rng));
        let amp = db_to_linear(-br_loss).sqrt();
        (los * C64::from((t1 / (1.0 + t1)).sqrt()) + nlos * C64::from((1.0 / (1.0 + t1)).sqrt())) * C64::from(amp)
    };

    let t2 = rf.rician_ris_user;
    let mut ris_user = Vec::with_capacity(users.len());
    let mut ris_user_links = Vec::with_capacity(users.len());
    for (k, &u) in users.iter().enumerate() {
        let loss_db = pathloss_ris_leg(ris.distance(u), fc)?;
        let blocked = segment_blocked(ris, u, obstacles);
        let h = if blocked {
            DVector::zeros(n)
        } else {
            let los = steering_vector(n, angles.ris_user_departure[k], rf.spacing);
            let mut rng = key.rng(Purpose::RisUser(k));
            let amp = db_to_linear(-loss_db).sqrt();
            let w_los = (t2 / (1.0 + t2)).sqrt();
            let w_nlos = (1.0 / (1.0 + t2)).sqrt();
            DVector::from_fn(n, |i, _| (los[i] * w_los + cscg(&mut rng) * w_nlos) * amp)
        };
        ris_user.push(h);
        ris_user_links.push(LinkRecord { loss_db, blocked });
    }

    let mut cs = ChannelSet::new(direct, bs_ris, ris_user)?;
    cs.direct_links = direct_links;
    cs.bs_ris_link = Some(LinkRecord {
        loss_db: br_loss,
        blocked: br_blocked,
    });
    cs.ris_user_links = ris_user_links;
    Ok(cs)
}

/// Cross gains `a[(k, i)] = c_k w_i` for effective rows `rows`.
pub(crate) fn cross_gains(rows: &[DVector<C64>], w: &DMatrix<C64>) -> DMatrix<C64> {
    let k = rows.len();
    DMatrix::from_fn(k, w.ncols(), |r, i| rows[r].dot(&w.column(i)))
}

pub(crate) fn sinr_from_gains(a: &DMatrix<C64>, k: usize, noise: f64) -> f64 {
    let signal = a[(k, k)].norm_sqr();
    let interference: f64 = (0..a.ncols()).filter(|&i| i != k).map(|i| a[(k, i)].norm_sqr()).sum();
    signal / (interference + noise)
}

/// SINR of user `k` (0-based) under beamformer `w` (`M x K`) and RIS phases.
pub fn sinr(k: usize, cs: &ChannelSet, w: &DMatrix<C64>, phases: &[f64], noise: f64) -> Result<f64, ChannelError> {
    cs.check(w, phases)?;
    if k >= cs.users() {
        return Err(ChannelError::DimensionMismatch(format!("user {k} of {}", cs.users())));
    }
    let rows = cs.effective_rows(phases);
    let a = cross_gains(&rows, w);
    Ok(sinr_from_gains(&a, k, noise))
}

/// SINR of every user.
pub fn sinrs(cs: &ChannelSet, w: &DMatrix<C64>, phases: &[f64], noise: f64) -> Result<Vec<f64>, ChannelError> {
    cs.check(w, phases)?;
    let rows = cs.effective_rows(phases);
    let a = cross_gains(&rows, w);
    Ok((0..cs.users()).map(|k| sinr_from_gains(&a, k, noise)).collect())
}

/// Equal-weight sum rate `(1/K) Σ log2(1 + γ_k)` in bit/s/Hz.
pub fn wsr(cs: &ChannelSet, w: &DMatrix<C64>, phases: &[f64], noise: f64) -> Result<f64, ChannelError> {
    Ok(rate_of(&sinrs(cs, w, phases, noise)?))
}

pub(crate) fn rate_of(gammas: &[f64]) -> f64 {
    if gammas.is_empty() {
        return 0.0;
    }
    gammas.iter().map(|g| g.ln_1p()).sum::<f64>() / (gammas.len() as f64 * LN_2)
}
