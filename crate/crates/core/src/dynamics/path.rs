//! Recorded trajectories and their Girsanov weight.

use serde::{Deserialize, Serialize};

use super::kmc::Observer;
use super::rates::{plain_rate, Event, RateState};
use crate::fields::pi_field;
use crate::lattice::{Configuration, LatticeKernel, Profile};

/// Initial configuration and every `(holding time, event)` of a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PathRecorder {
    pub initial: Option<Configuration>,
    pub steps: Vec<(f64, Option<Event>)>,
}

impl Observer for PathRecorder {
    fn observe(&mut self, state: &RateState, dt: f64, event: Option<Event>) {
        if self.initial.is_none() {
            self.initial = Some(state.config.clone());
        }
        self.steps.push((dt, event));
    }
}

impl PathRecorder {
    pub fn duration(&self) -> f64 {
        self.steps.iter().map(|s| s.0).sum()
    }
}

/// `Π_T(h) - Π_0(h) - ∫_0^T e^{-Π_t(h)} N²L e^{Π_t(h)} dt` along the path.
pub fn log_rn_derivative(path: &PathRecorder, profile: &Profile, h: &LatticeKernel) -> f64 {
    let Some(init) = &path.initial else { return 0.0 };
    let l = profile.params.sites();
    let n = profile.params.n as f64;
    let scale = 0.5 * n * n;
    let mut config = init.clone();
    let mut integral = 0.0;
    let mut pi = pi_field(&config, h, profile);
    let pi0 = pi;
    for &(dt, ev) in &path.steps {
        let mut rate = 0.0;
        for k in 0..=l {
            let e = Event::from_index(k, l);
            let c = plain_rate(&config, e, profile);
            if c > 0.0 {
                let next = pi_field(&e.apply(&config), h, profile);
                rate += scale * c * ((next - pi).exp() - 1.0);
            }
        }
        integral += rate * dt;
        if let Some(e) = ev {
            config = e.apply(&config);
            pi = pi_field(&config, h, profile);
        }
    }
    pi - pi0 - integral
}
