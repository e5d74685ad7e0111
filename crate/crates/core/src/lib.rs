//! Placement planning for a reconfigurable intelligent surface (RIS) in a
//! multi-user MISO cell whose users are random and whose obstacles are known.
//!
//! The crate is organized bottom-up:
//!
//! - [`geom`]: obstacles, line-of-sight tests, far-field distance, coverage grids.
//! - [`channel`]: path loss, fading synthesis, SINR and sum rate.
//! - [`beamform`]: the joint beamformer / RIS phase solver.
//! - [`placement`]: user sampling, candidate and solution sets, recursive refinement.
//! - [`assess`]: coverage and average-rate metrics, transmit-power sweeps.
//! - [`scenario`]: scenario files, validation and bundled fixtures.

pub mod assess;
pub mod beamform;
pub mod channel;
pub mod geom;
pub mod placement;
pub mod rng;
pub mod scenario;

pub type C64 = nalgebra::Complex<f64>;

pub use beamform::{FpState, SolverConfig};
pub use channel::{ChannelSet, RfParams};
pub use geom::{Cell, Obstacle, Point2};
pub use placement::{PlacementResult, SolutionSet, UserModel};
pub use scenario::{Scenario, ScenarioError, ScenarioFile};
