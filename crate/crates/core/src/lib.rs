//! Evolutionary dynamics of the prisoner's dilemma on regular networks when
//! the population periodically switches between strategy update rules.
//!
//! The crate is layered:
//!
//! * [`game`] holds the donation-form payoff matrix, fitness, and the
//!   weak-selection replicator coefficients for pairwise-comparison (PC) and
//!   imitation (IM) updating.
//! * [`switched`] evaluates the periodically switched replicator system in
//!   closed form, classifies its asymptotics and computes switching-time
//!   thresholds.
//! * [`ode`] is a fixed-step RK4 integrator that lands exactly on switching
//!   instants; it backs the reduced-ODE engine and the pair-approximation
//!   engine.
//! * [`pair_approx`] contains the two-dimensional pair-approximation systems
//!   and their slow manifold.
//! * [`agent`] is a stochastic agent-based model on random k-regular graphs.

pub mod agent;
pub mod error;
pub mod game;
pub mod ode;
pub mod pair_approx;
pub mod switched;

pub use error::{Error, Result};
pub use game::{GameParams, PayoffMatrix, Strategy, UpdateRule};
pub use pair_approx::PairState;
pub use switched::{Classification, StablePoint, SwitchSchedule};
