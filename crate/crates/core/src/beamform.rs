//! Joint BS beamforming and RIS phase design for the equal-weight sum rate.
//!
//! The sum rate is lifted to the fractional-programming surrogate
//!
//! ```text
//! f(α, β, W, φ) = Σ_k (1/K)(ln(1+α_k) − α_k)
//!               + 2 sqrt((1+α_k)/K) Re{β_k* a_kk}
//!               − |β_k|² (Σ_i |a_ki|² + σ²)
//! ```
//!
//! with `a_ki = (h_bu_k^H + v^T H_k) w_i` and `v_n = exp(jφ_n)`, reported in
//! bits (divided by ln 2). Each iteration maximizes over `(α, β)` in closed
//! form, then takes `w_steps` projected gradient steps in `W` (one by
//! default) and one backtracked gradient step in `φ`. Every block update is
//! non-decreasing in `f`, and at the `(α, β)` optimum `f` equals the sum rate.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{cross_gains, rate_of, sinr_from_gains, ChannelSet, RfParams};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },
    #[error("channel set has no users")]
    NoUsers,
    #[error("state does not match the channel set: {0}")]
    DimensionMismatch(String),
}

/// Momentum applied to the beamformer before each gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extrapolation {
    None,
    Nesterov,
    Fixed(f64),
}

/// How the auxiliary variables are refreshed at the start of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxUpdate {
    /// Jump to the joint optimum `α = γ`, then refresh `β`.
    #[default]
    Joint,
    /// One pass of the `α` closed form followed by the `β` closed form.
    Alternating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub extrapolation: Extrapolation,
    /// Initial phase-step curvature; `None` reuses the beamformer Lipschitz constant.
    pub kappa0: Option<f64>,
    pub backtrack_factor: f64,
    pub aux_update: AuxUpdate,
    /// Projected gradient steps on `W` per iteration.
    pub w_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-4,
            extrapolation: Extrapolation::Nesterov,
            kappa0: None,
            backtrack_factor: 2.0,
            aux_update: AuxUpdate::Joint,
            w_steps: 1,
        }
    }
}

/// Solver iterate.
#[derive(Debug, Clone)]
pub struct FpState {
    /// Beamformer, `M x K`.
    pub w: DMatrix<C64>,
    /// RIS phases in `[-π, π)`.
    pub phases: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<C64>,
    pub zeta: Vec<f64>,
    pub mu: Vec<f64>,
    pub iteration: usize,
    /// Surrogate value (bits) after each iteration.
    pub objective_history: Vec<f64>,
    /// Sum rate (bit/s/Hz) after each iteration.
    pub wsr_history: Vec<f64>,
    pub converged: bool,
    prev_w: DMatrix<C64>,
    momentum: f64,
    kappa: Option<f64>,
    lipschitz: f64,
}

impl FpState {
    /// State with the given beamformer and phases and zeroed auxiliaries.
    pub fn new(w: DMatrix<C64>, phases: Vec<f64>) -> Self {
        let k = w.ncols();
        Self {
            prev_w: w.clone(),
            w,
            phases,
            alpha: vec![0.0; k],
            beta: vec![C64::new(0.0, 0.0); k],
            zeta: vec![0.0; k],
            mu: vec![0.0; k],
            iteration: 0,
            objective_history: Vec::new(),
            wsr_history: Vec::new(),
            converged: false,
            momentum: 1.0,
            kappa: None,
            lipschitz: 0.0,
        }
    }

    /// Matched filter to the effective channels at zero phase, power split
    /// evenly. Users without any channel get a zero column.
    pub fn matched_filter(cs: &ChannelSet, p_max: f64) -> Self {
        Self::matched_filter_at(cs, p_max, vec![0.0; cs.elements()])
    }

    /// Matched filter to the effective channels at the given phases.
    pub fn matched_filter_at(cs: &ChannelSet, p_max: f64, phases: Vec<f64>) -> Self {
        let k = cs.users();
        let rows = cs.effective_rows(&phases);
        let scale = (p_max / k as f64).sqrt();
        let mut w = DMatrix::zeros(cs.antennas(), k);
        for (j, row) in rows.iter().enumerate() {
            let norm = row.norm();
            if norm > 0.0 {
                w.set_column(j, &(row.map(|z| z.conj()) * C64::from(scale / norm)));
            }
        }
        Self::new(w, phases)
    }

    /// Total transmit power `Σ ‖w_k‖²`.
    pub fn power(&self) -> f64 {
        self.w.norm_squared()
    }

    /// Lipschitz constant used by the most recent beamformer step.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn check(&self, cs: &ChannelSet) -> Result<(), SolveError> {
        if cs.users() == 0 {
            return Err(SolveError::NoUsers);
        }
        if self.w.nrows() != cs.antennas() || self.w.ncols() != cs.users() || self.phases.len() != cs.elements() {
            return Err(SolveError::DimensionMismatch(format!(
                "W is {}x{} with {} phases; channel has M={}, K={}, N={}",
                self.w.nrows(),
                self.w.ncols(),
                self.phases.len(),
                cs.antennas(),
                cs.users(),
                cs.elements()
            )));
        }
        Ok(())
    }
}

/// `sqrt((1 + α_k)/K)`.
fn weights(alpha: &[f64]) -> Vec<f64> {
    let k = alpha.len() as f64;
    alpha.iter().map(|a| ((1.0 + a).max(0.0) / k).sqrt()).collect()
}

/// Surrogate in nats, split into the `α`-only part and the `(β, W, φ)` part.
fn surrogate_nats(alpha: &[f64], beta: &[C64], gains: &DMatrix<C64>, noise: f64) -> f64 {
    let k = alpha.len() as f64;
    let coef = weights(alpha);
    let mut total = 0.0;
    for j in 0..alpha.len() {
        let received: f64 = gains.row(j).iter().map(|z| z.norm_sqr()).sum();
        total += ((alpha[j]).ln_1p() - alpha[j]) / k;
        total += 2.0 * coef[j] * (beta[j].conj() * gains[(j, j)]).re;
        total -= beta[j].norm_sqr() * (received + noise);
    }
    total
}

/// `(β, W, φ)`-dependent part of the surrogate, without the noise term.
fn coupled_nats(coef: &[f64], beta: &[C64], gains: &DMatrix<C64>) -> f64 {
    let mut total = 0.0;
    for j in 0..beta.len() {
        let received: f64 = gains.row(j).iter().map(|z| z.norm_sqr()).sum();
        total += 2.0 * coef[j] * (beta[j].conj() * gains[(j, j)]).re - beta[j].norm_sqr() * received;
    }
    total
}

/// Surrogate objective in bits.
pub fn surrogate_f(state: &FpState, cs: &ChannelSet, noise: f64) -> Result<f64, SolveError> {
    state.check(cs)?;
    let rows = cs.effective_rows(&state.phases);
    let gains = cross_gains(&rows, &state.w);
    Ok(surrogate_nats(&state.alpha, &state.beta, &gains, noise) / LN_2)
}

/// Closed-form `α` maximizer at the current `β`, `W`, `φ`:
/// `α = (ζ² + ζ sqrt(ζ² + 4))/2` with `ζ_k = sqrt(K) Re{β_k* a_kk}`.
pub fn update_alpha(state: &mut FpState, cs: &ChannelSet) {
    let rows = cs.effective_rows(&state.phases);
    let gains = cross_gains(&rows, &state.w);
    let sqrt_k = (cs.users() as f64).sqrt();
    for j in 0..cs.users() {
        let zeta = sqrt_k * (state.beta[j].conj() * gains[(j, j)]).re;
        state.zeta[j] = zeta;
        state.alpha[j] = alpha_from_zeta(zeta);
    }
}

pub fn alpha_from_zeta(zeta: f64) -> f64 {
    (zeta * zeta + zeta * (zeta * zeta + 4.0).sqrt()) / 2.0
}

/// Closed-form `β` maximizer at the current `α`, `W`, `φ`.
pub fn update_beta(state: &mut FpState, cs: &ChannelSet, noise: f64) {
    let rows = cs.effective_rows(&state.phases);
    let gains = cross_gains(&rows, &state.w);
    beta_from_gains(state, &gains, noise);
}

fn beta_from_gains(state: &mut FpState, gains: &DMatrix<C64>, noise: f64) {
    state.mu = weights(&state.alpha);
    for j in 0..state.beta.len() {
        let received: f64 = gains.row(j).iter().map(|z| z.norm_sqr()).sum();
        state.beta[j] = gains[(j, j)] * (state.mu[j] / (received + noise));
    }
}

/// Joint `(α, β)` optimum: `α_k = γ_k`, then `β` from its closed form. This
/// is the fixed point of alternating [`update_alpha`] and [`update_beta`].
pub fn update_aux_joint(state: &mut FpState, cs: &ChannelSet, noise: f64) {
    let rows = cs.effective_rows(&state.phases);
    let gains = cross_gains(&rows, &state.w);
    for j in 0..cs.users() {
        state.alpha[j] = sinr_from_gains(&gains, j, noise);
    }
    beta_from_gains(state, &gains, noise);
    let sqrt_k = (cs.users() as f64).sqrt();
    for j in 0..cs.users() {
        state.zeta[j] = sqrt_k * (state.beta[j].conj() * gains[(j, j)]).re;
    }
}

/// Ascent direction of the surrogate in nats with respect to `W`, written so
/// that `df = Re{tr(G^H dW)}`.
fn w_gradient_nats(coef: &[f64], beta: &[C64], rows: &[DVector<C64>], w: &DMatrix<C64>) -> DMatrix<C64> {
    let gains = cross_gains(rows, w);
    let (m, k) = w.shape();
    let mut g = DMatrix::zeros(m, k);
    for col in 0..k {
        let mut gk = g.column_mut(col);
        let lead = beta[col] * (2.0 * coef[col]);
        for j in 0..rows.len() {
            let weight = lead * if j == col { 1.0 } else { 0.0 } - gains[(j, col)] * (2.0 * beta[j].norm_sqr());
            if weight == C64::new(0.0, 0.0) {
                continue;
            }
            for (entry, c) in gk.iter_mut().zip(rows[j].iter()) {
                *entry += weight * c.conj();
            }
        }
    }
    g
}

/// Surrogate gradient (bits) with respect to the real and imaginary parts of
/// `W`: entry `(m, k)` is `∂f/∂Re w_mk + j ∂f/∂Im w_mk`.
pub fn w_gradient(state: &FpState, cs: &ChannelSet) -> DMatrix<C64> {
    let rows = cs.effective_rows(&state.phases);
    w_gradient_nats(&weights(&state.alpha), &state.beta, &rows, &state.w) / C64::from(LN_2)
}

/// Largest eigenvalue of a Hermitian positive semidefinite matrix by power
/// iteration, stopped at `tol` relative change of the Rayleigh quotient.
pub fn largest_eigenvalue(a: &DMatrix<C64>, tol: f64) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let start = (0..n)
        .max_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re))
        .unwrap_or(0);
    if a[(start, start)].re <= 0.0 {
        return 0.0;
    }
    let mut x: DVector<C64> = a.column(start).into_owned();
    x /= C64::from(x.norm());
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let y = a * &x;
        let next = x.dotc(&y).re;
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = y / C64::from(norm);
        if (next - lambda).abs() <= tol * next.abs() {
            return next.max(lambda);
        }
        lambda = next;
    }
    lambda
}

fn project_power(w: &mut DMatrix<C64>, p_max: f64) {
    let power = w.norm_squared();
    if power > p_max {
        *w *= C64::from((p_max / power).sqrt());
    }
}

fn next_momentum(eta: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * eta * eta).sqrt()) / 2.0
}

/// One projected gradient step on the beamformer with step `1/L`, from an
/// extrapolated point when configured. Falls back to the plain step (and
/// resets momentum) when the extrapolated step would lower the surrogate.
pub fn update_w(state: &mut FpState, cs: &ChannelSet, p_max: f64, cfg: &SolverConfig) {
    let rows = cs.effective_rows(&state.phases);
    let coef = weights(&state.alpha);
    let beta = &state.beta;
    let m = cs.antennas();

    let mut gram = DMatrix::<C64>::zeros(m, m);
    for (row, b) in rows.iter().zip(beta) {
        let weight = b.norm_sqr();
        if weight == 0.0 {
            continue;
        }
        let hbar = row.map(|z| z.conj());
        gram.gerc(C64::from(weight), &hbar, &hbar, C64::new(1.0, 0.0));
    }
    let lipschitz = 2.0 * largest_eigenvalue(&gram, 1e-6);
    state.lipschitz = lipschitz;
    if !(lipschitz > 0.0) {
        state.prev_w = state.w.clone();
        return;
    }

    let objective = |w: &DMatrix<C64>| coupled_nats(&coef, beta, &cross_gains(&rows, w));
    let step_from = |base: &DMatrix<C64>, lip: f64| {
        let g = w_gradient_nats(&coef, beta, &rows, base);
        let mut next = base + g / C64::from(lip);
        project_power(&mut next, p_max);
        next
    };

    let current = objective(&state.w);
    let (eps, eta_next) = match cfg.extrapolation {
        Extrapolation::None => (0.0, 1.0),
        Extrapolation::Fixed(e) => (e, 1.0),
        Extrapolation::Nesterov => {
            let eta_next = next_momentum(state.momentum);
            ((state.momentum - 1.0) / eta_next, eta_next)
        }
    };

    let mut accepted = None;
    if eps > 0.0 {
        let base = &state.w + (&state.w - &state.prev_w) * C64::from(eps);
        let cand = step_from(&base, lipschitz);
        if objective(&cand) >= current {
            accepted = Some(cand);
            state.momentum = eta_next;
        }
    }
    if accepted.is_none() {
        state.momentum = 1.0;
        let mut lip = lipschitz;
        for _ in 0..40 {
            let cand = step_from(&state.w, lip);
            if objective(&cand) >= current {
                accepted = Some(cand);
                break;
            }
            // power iteration may stop just below the true constant
            lip *= 2.0;
        }
    }
    let next = accepted.unwrap_or_else(|| state.w.clone());
    state.prev_w = std::mem::replace(&mut state.w, next);
}

/// Surrogate gradient (bits) with respect to the RIS phases.
pub fn phase_gradient(state: &FpState, cs: &ChannelSet) -> Vec<f64> {
    let rows = cs.effective_rows(&state.phases);
    phase_gradient_nats(state, cs, &rows).into_iter().map(|g| g / LN_2).collect()
}

fn phase_gradient_nats(state: &FpState, cs: &ChannelSet, rows: &[DVector<C64>]) -> Vec<f64> {
    let n = cs.elements();
    if n == 0 {
        return Vec::new();
    }
    let gains = cross_gains(rows, &state.w);
    let coef = weights(&state.alpha);
    let m = cs.antennas();
    let mut q = DVector::<C64>::zeros(n);
    for j in 0..cs.users() {
        // z_j = 2 coef_j β_j* w_j − 2|β_j|² Σ_i conj(a_ji) w_i
        let mut z = state.w.column(j) * (state.beta[j].conj() * (2.0 * coef[j]));
        let damp = 2.0 * state.beta[j].norm_sqr();
        if damp > 0.0 {
            for i in 0..cs.users() {
                z -= state.w.column(i) * (gains[(j, i)].conj() * damp);
            }
        }
        if z.iter().all(|v| v.norm_sqr() == 0.0) {
            continue;
        }
        let hk = &cs.cascade[j];
        for row in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for col in 0..m {
                acc += hk[(row, col)] * z[col];
            }
            q[row] += acc;
        }
    }
    state
        .phases
        .iter()
        .zip(q.iter())
        .map(|(&phi, qn)| -(C64::from_polar(1.0, phi) * qn).im)
        .collect()
}

fn wrap_phase(phi: f64) -> f64 {
    (phi + PI).rem_euclid(2.0 * PI) - PI
}

/// Gradient step on the phases with step `1/κ`. `κ` starts one factor below
/// the last accepted value (or at `κ₀`) and grows by the backtrack factor
/// until the surrogate does not decrease.
pub fn update_theta(state: &mut FpState, cs: &ChannelSet, cfg: &SolverConfig) {
    if cs.elements() == 0 {
        return;
    }
    let rows = cs.effective_rows(&state.phases);
    let grad = phase_gradient_nats(state, cs, &rows);
    if grad.iter().all(|g| *g == 0.0) {
        return;
    }
    let coef = weights(&state.alpha);
    let value = |phases: &[f64], rows: Option<&[DVector<C64>]>| {
        let owned;
        let rows = match rows {
            Some(r) => r,
            None => {
                owned = cs.effective_rows(phases);
                &owned[..]
            }
        };
        coupled_nats(&coef, &state.beta, &cross_gains(rows, &state.w))
    };
    let current = value(&state.phases, Some(&rows));

    let factor = cfg.backtrack_factor;
    let mut kappa = match state.kappa {
        Some(k) => k / factor,
        None => cfg
            .kappa0
            .unwrap_or(if state.lipschitz > 0.0 { state.lipschitz } else { 1.0 }),
    };
    for _ in 0..80 {
        let trial: Vec<f64> = state
            .phases
            .iter()
            .zip(&grad)
            .map(|(p, g)| wrap_phase(p + g / kappa))
            .collect();
        if value(&trial, None) >= current {
            state.phases = trial;
            state.kappa = Some(kappa);
            return;
        }
        kappa *= factor;
    }
    state.kappa = Some(kappa);
}

/// Sum rate of the state's current `(W, φ)`.
pub fn state_wsr(state: &FpState, cs: &ChannelSet, noise: f64) -> f64 {
    rate_of(&state_sinrs(state, cs, noise))
}

pub fn state_sinrs(state: &FpState, cs: &ChannelSet, noise: f64) -> Vec<f64> {
    let rows = cs.effective_rows(&state.phases);
    let gains = cross_gains(&rows, &state.w);
    (0..cs.users()).map(|k| sinr_from_gains(&gains, k, noise)).collect()
}

/// Runs the block-ascent iteration until the relative sum-rate change over
/// one iteration drops below `rel_tol` or `max_iters` is reached.
pub fn solve(cs: &ChannelSet, rf: &RfParams, cfg: &SolverConfig) -> Result<FpState, SolveError> {
    solve_with(cs, rf.p_max_mw, rf.noise_power_mw(), cfg)
}

pub fn solve_with(cs: &ChannelSet, p_max: f64, noise: f64, cfg: &SolverConfig) -> Result<FpState, SolveError> {
    solve_from(FpState::matched_filter(cs, p_max), cs, p_max, noise, cfg)
}

/// Runs the iteration from a caller-supplied starting point.
pub fn solve_from(
    mut state: FpState,
    cs: &ChannelSet,
    p_max: f64,
    noise: f64,
    cfg: &SolverConfig,
) -> Result<FpState, SolveError> {
    state.check(cs)?;
    let mut previous = state_wsr(&state, cs, noise);
    for t in 1..=cfg.max_iters.max(1) {
        match cfg.aux_update {
            AuxUpdate::Joint => update_aux_joint(&mut state, cs, noise),
            AuxUpdate::Alternating => {
                update_alpha(&mut state, cs);
                update_beta(&mut state, cs, noise);
            }
        }
        for _ in 0..cfg.w_steps.max(1) {
            update_w(&mut state, cs, p_max, cfg);
        }
        update_theta(&mut state, cs, cfg);

        let rows = cs.effective_rows(&state.phases);
        let gains = cross_gains(&rows, &state.w);
        let f = surrogate_nats(&state.alpha, &state.beta, &gains, noise) / LN_2;
        let gammas: Vec<f64> = (0..cs.users()).map(|k| sinr_from_gains(&gains, k, noise)).collect();
        let rate = rate_of(&gammas);
        if !f.is_finite() || !rate.is_finite() {
            return Err(SolveError::NonFiniteObjective { iteration: t });
        }
        state.iteration = t;
        state.objective_history.push(f);
        state.wsr_history.push(rate);
        let delta = (rate - previous).abs();
        if delta == 0.0 || delta < cfg.rel_tol * previous.abs() {
            state.converged = true;
            break;
        }
        previous = rate;
    }
    Ok(state)
}

/// Smallest user SINR of a solved state.
pub fn min_sinr(cs: &ChannelSet, state: &FpState, noise: f64) -> f64 {
    state_sinrs(state, cs, noise).into_iter().fold(f64::INFINITY, f64::min)
}
