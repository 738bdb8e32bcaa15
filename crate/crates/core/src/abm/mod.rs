//! Discrete-time agent-based simulator.
//!
//! Agents move by random waypoint in a square area. Each slot some of them
//! request task execution; every task is offered to one in-range peer which
//! serves it with a per-slot probability derived from its contracted rate.
//! Serving a compromised requester may infect the server; compromised
//! agents recover at rate δ. The simulator is the independent check on the
//! mean-field predictions of [`crate::epidemic`] and [`crate::equilibrium`].
//!
//! Conversion convention: rates per unit time (a, δ, q) are divided by
//! `slots_per_unit_time`; per-task quantities (β, rewards) stay per task.

mod eta;
mod mobility;
mod world;

pub use eta::{estimate_eta, rate_to_slot_probability, EtaEstimate, SlotProbability};
pub use mobility::Walker;
pub use world::{run, Agent, ContractPolicy, Health, SimWorld, SlotStats, Trace, TraceRow};

use crate::error::{Error, Result};

/// How agents are split across UE types.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TypeAssignment {
    /// Deterministic counts by largest remainder, placed in random order.
    Proportional,
    /// Independent draw per agent.
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n_agents: usize,
    /// Side length of the square area.
    pub area: f64,
    pub slots_per_unit_time: u32,
    /// Speed range, distance per slot; speeds are uniform on
    /// (v_min, v_max]. When `v_min >= v_max` the speed is fixed at `v_max`.
    pub v_min: f64,
    pub v_max: f64,
    /// Maximum pause at a waypoint, in slots.
    pub m_max: u32,
    /// Requester probability per slot.
    pub p: f64,
    /// Maximum tasks per requester per slot.
    pub w_max: u32,
    /// D2D range.
    pub d: f64,
    pub seed: u64,
    pub type_assignment: TypeAssignment,
    /// Fraction of agents compromised at slot 0.
    pub initial_infected: f64,
    /// Compromised agents keep issuing requests.
    pub compromised_requests: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_agents: 100,
            area: 100.0,
            slots_per_unit_time: 100,
            v_min: 0.0,
            v_max: 20.0,
            m_max: 10,
            p: 0.2,
            w_max: 3,
            d: 30.0,
            seed: 0,
            type_assignment: TypeAssignment::Proportional,
            initial_infected: 0.2,
            compromised_requests: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::invalid("n_agents", 0.0, "must be >= 1"));
        }
        if !(self.area > 0.0 && self.area.is_finite()) {
            return Err(Error::invalid("area", self.area, "must be finite and > 0"));
        }
        if self.slots_per_unit_time == 0 {
            return Err(Error::invalid("slots_per_unit_time", 0.0, "must be >= 1"));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::invalid("v_max", self.v_max, "must be finite and > 0"));
        }
        if !(self.v_min >= 0.0) {
            return Err(Error::invalid("v_min", self.v_min, "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid("p", self.p, "must lie in [0, 1]"));
        }
        if self.w_max == 0 {
            return Err(Error::invalid("w_max", 0.0, "must be >= 1"));
        }
        if !(self.d >= 0.0) {
            return Err(Error::invalid("d", self.d, "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.initial_infected) {
            return Err(Error::invalid("initial_infected", self.initial_infected, "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub(crate) fn slots(&self) -> f64 {
        self.slots_per_unit_time as f64
    }
}
