//! Continuous-time kinetic Monte Carlo.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::rates::{Event, RateState};
use crate::error::{LabError, Result};
use crate::fields::KernelEstimate;

/// Receives each state together with its holding time, just before the jump
/// that ends it, and once more at the final time with `event = None`.
pub trait Observer {
    fn observe(&mut self, state: &RateState, dt: f64, event: Option<Event>);
}

impl Observer for KernelEstimate {
    fn observe(&mut self, state: &RateState, dt: f64, _event: Option<Event>) {
        self.accumulate_pairs(&state.config, dt);
    }
}

/// Time-integrated occupations.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OccupationObserver {
    pub integral: Vec<f64>,
    pub time: f64,
}

impl OccupationObserver {
    pub fn means(&self) -> Vec<f64> {
        self.integral.iter().map(|v| v / self.time).collect()
    }
}

impl Observer for OccupationObserver {
    fn observe(&mut self, state: &RateState, dt: f64, _event: Option<Event>) {
        if self.integral.is_empty() {
            self.integral = vec![0.0; state.sites()];
        }
        for (acc, &e) in self.integral.iter_mut().zip(&state.config.eta) {
            if e == 1 {
                *acc += dt;
            }
        }
        self.time += dt;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub events: u64,
    /// Proposals discarded by the bias thinning step.
    pub rejected: u64,
    pub time: f64,
}

/// Advances `state` by macroscopic time `t_final`. Observers see only
/// accepted jumps; the holding time includes rejected proposals.
pub fn kmc_run<R: Rng + ?Sized>(
    state: &mut RateState,
    t_final: f64,
    observers: &mut [&mut dyn Observer],
    rng: &mut R,
) -> Result<RunSummary> {
    if !(t_final > 0.0) {
        return Err(LabError::InvalidArgument(format!("run length {t_final} must be positive")));
    }
    let mut t = 0.0;
    let mut held = 0.0;
    let mut events = 0;
    let mut rejected = 0;
    loop {
        let total = state.total_rate();
        if !(total > 0.0) {
            return Err(LabError::Numerical("total rate vanished".into()));
        }
        let e1: f64 = Exp1.sample(rng);
        let dt = e1 / total;
        if t + dt >= t_final {
            for o in observers.iter_mut() {
                o.observe(state, held + t_final - t, None);
            }
            return Ok(RunSummary { events, rejected, time: t_final });
        }
        t += dt;
        held += dt;
        let ev = state.select(rng.random::<f64>() * total);
        if state.is_biased() && rng.random::<f64>() >= state.acceptance(ev) {
            rejected += 1;
            continue;
        }
        for o in observers.iter_mut() {
            o.observe(state, held, Some(ev));
        }
        state.apply_event(ev);
        held = 0.0;
        events += 1;
    }
}
