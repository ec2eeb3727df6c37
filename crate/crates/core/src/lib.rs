//! Engines for stochastic reaction networks.
//!
//! A [`Network`] is a list of reactions between complexes of species, each with a
//! positive rate constant. Three engines describe its dynamics and can be checked
//! against each other:
//!
//! - [`rate`]: the deterministic mass-action rate equation, integrated with RK4.
//! - [`master`]: the master equation on a truncated state space, with the generator
//!   assembled from falling-power propensities and evolved by uniformization.
//! - [`ssa`]: Gillespie direct-method sampling of the same jump process.
//!
//! [`fock`] provides the formal-power-series view of mixed states together with
//! creation, annihilation and number operators and Poisson product (coherent)
//! states. [`verify`] turns the identities between these pieces into runnable
//! checks with structured reports.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
pub mod fock;
pub mod master;
pub mod model;
pub mod rate;
pub mod space;
pub mod ssa;
pub mod verify;

pub use error::{Error, Result};
pub use fock::{CoherentState, FockSeries, MixedStateView};
pub use master::{Generator, SignConvention};
pub use model::{
    falling_power, multi_falling_power, multi_power, ClassicalState, MultiIndex, NetChange,
    Network, Reaction, SpeciesTable,
};
pub use rate::Trajectory;
pub use space::{StateSpace, Truncation};
pub use ssa::{EnsembleStats, SsaTrajectory};
pub use verify::Report;

/// Sample times `0, dt, 2dt, …` up to and including `t_end`.
///
/// When `t_end` is not a multiple of `dt` the final sample lands exactly on `t_end`.
pub fn sample_grid(t_end: f64, dt: f64) -> alloc::vec::Vec<f64> {
    let mut times = alloc::vec![0.0];
    if !(t_end > 0.0) || !(dt > 0.0) {
        return times;
    }
    let mut i = 1u64;
    loop {
        let t = i as f64 * dt;
        if t >= t_end * (1.0 - 1e-12) {
            times.push(t_end);
            break;
        }
        times.push(t);
        i += 1;
    }
    times
}
