//! Jump rates of the open exclusion process, plain and tilted by a
//! quadratic bias, with incremental maintenance of the bias terms.

use serde::{Deserialize, Serialize};

use super::tree::SumTree;
use crate::lattice::{Configuration, LatticeKernel, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A transition: exchange across bond `(o, o+1)` or a reservoir flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    Swap(usize),
    Flip(Side),
}

impl Event {
    /// Events are numbered `0..2N`: bonds first, then left and right flips.
    pub fn from_index(e: usize, sites: usize) -> Self {
        if e + 1 < sites {
            Event::Swap(e)
        } else if e + 1 == sites {
            Event::Flip(Side::Left)
        } else {
            Event::Flip(Side::Right)
        }
    }

    pub fn index(&self, sites: usize) -> usize {
        match self {
            Event::Swap(o) => *o,
            Event::Flip(Side::Left) => sites - 1,
            Event::Flip(Side::Right) => sites,
        }
    }

    /// Offsets whose occupation changes.
    pub fn sites(&self, sites: usize) -> Vec<usize> {
        match self {
            Event::Swap(o) => vec![*o, *o + 1],
            Event::Flip(Side::Left) => vec![0],
            Event::Flip(Side::Right) => vec![sites - 1],
        }
    }

    /// Configuration after the event.
    pub fn apply(&self, config: &Configuration) -> Configuration {
        let mut c = config.clone();
        match self {
            Event::Swap(o) => c.eta.swap(*o, *o + 1),
            Event::Flip(_) => {
                for o in self.sites(config.len()) {
                    c.eta[o] ^= 1;
                }
            }
        }
        c
    }
}

/// `c(η, o, o+1) = η_{o+1}(1-η_o) + η_o(1-η_{o+1})`.
pub fn bulk_rate(config: &Configuration, o: usize) -> f64 {
    f64::from(config.eta[o] != config.eta[o + 1])
}

/// `(1-ρ)η + ρ(1-η)` at the end site on `side`.
pub fn boundary_rate(config: &Configuration, side: Side, profile: &Profile) -> f64 {
    let p = &profile.params;
    let (o, r) = match side {
        Side::Left => (0, p.rho_minus),
        Side::Right => (p.sites() - 1, p.rho_plus),
    };
    if config.eta[o] == 1 {
        1.0 - r
    } else {
        r
    }
}

/// Plain rate `c(η, e)` without the `N²/2` time scale.
pub fn plain_rate(config: &Configuration, e: Event, profile: &Profile) -> f64 {
    match e {
        Event::Swap(o) => bulk_rate(config, o),
        Event::Flip(s) => boundary_rate(config, s, profile),
    }
}

/// Event count between full re-synchronisations.
/// Event count between full re-synchronisations.
pub const RESYNC_EVERY: u64 = 1 << 16;

/// Configuration, bias bookkeeping and the sampling tree over all events.
///
/// With a bias the tree holds envelope rates `(N²/2) c(η, e) exp(b_e)`, where
/// `b_e` bounds `|ΔΠ(h)|` uniformly in `η`; a proposed event is kept with
/// probability `exp(ΔΠ(h) - b_e)`.
#[derive(Debug, Clone)]
pub struct RateState {
    pub config: Configuration,
    pub profile: Profile,
    pub h: Option<LatticeKernel>,
    eb: Vec<f64>,
    /// `F_a = Σ_{j≠a} h_{aj} η̄_j`.
    field: Vec<f64>,
    /// `b_e` per event, zero without bias.
    pub envelope: Vec<f64>,
    /// Envelope rates including the `N²/2` time scale.
    pub rates: Vec<f64>,
    tree: SumTree,
    events_since_sync: u64,
}

impl RateState {
    pub fn new(config: Configuration, profile: Profile, h: Option<LatticeKernel>) -> Self {
        let l = profile.params.sites();
        assert_eq!(config.len(), l, "configuration length does not match the lattice");
        if let Some(k) = &h {
            assert_eq!(k.sites, l, "bias kernel size does not match the lattice");
        }
        let envelope = match &h {
            Some(k) => envelope_bounds(k, &profile),
            None => vec![0.0; l + 1],
        };
        let mut s = Self {
            eb: Vec::new(),
            field: Vec::new(),
            envelope,
            rates: vec![0.0; l + 1],
            tree: SumTree::new(&vec![0.0; l + 1]),
            events_since_sync: 0,
            config,
            profile,
            h,
        };
        s.resync();
        s
    }

    pub fn sites(&self) -> usize {
        self.config.len()
    }

    pub fn n_events(&self) -> usize {
        self.sites() + 1
    }

    pub fn is_biased(&self) -> bool {
        self.h.is_some()
    }

    fn scale(&self) -> f64 {
        let n = self.profile.params.n as f64;
        0.5 * n * n
    }

    /// Recomputes every derived quantity from the configuration.
    pub fn resync(&mut self) {
        self.eb = self.config.centered_all(&self.profile);
        if let Some(h) = &self.h {
            self.field = bias_field(h, &self.eb);
        }
        for e in 0..self.n_events() {
            self.rates[e] = self.envelope_rate(e);
        }
        self.tree.rebuild(&self.rates);
        self.events_since_sync = 0;
    }

    fn envelope_rate(&self, k: usize) -> f64 {
        let e = Event::from_index(k, self.sites());
        self.scale() * plain_rate(&self.config, e, &self.profile) * self.envelope[k].exp()
    }

    /// `C_o = ½ Σ_{j∉{o,o+1}} (h_{o+1,j} - h_{o,j}) η̄_j + ρ' h_{o,o+1}/(2N)`.
    pub fn swap_bias(&self, o: usize) -> f64 {
        let Some(h) = &self.h else { return 0.0 };
        let n = self.profile.params.n as f64;
        let b = 0.5 * ((self.field[o + 1] - h.get(o + 1, o) * self.eb[o]) - (self.field[o] - h.get(o, o + 1) * self.eb[o + 1]));
        b + self.profile.rho_prime * h.get(o, o + 1) / (2.0 * n)
    }

    /// Exponent `ΔΠ(h)` of an event (zero without bias).
    pub fn bias_exponent(&self, e: Event) -> f64 {
        if self.h.is_none() {
            return 0.0;
        }
        let n = self.profile.params.n as f64;
        match e {
            Event::Swap(o) => {
                let d = self.config.eta[o + 1] as f64 - self.config.eta[o] as f64;
                -d * self.swap_bias(o) / n
            }
            Event::Flip(side) => {
                let o = if side == Side::Left { 0 } else { self.sites() - 1 };
                (1.0 - 2.0 * self.config.eta[o] as f64) / (2.0 * n) * self.field[o]
            }
        }
    }

    /// `(N²/2) c(η, e) exp[ΔΠ(h)]`.
    pub fn biased_rate(&self, e: Event) -> f64 {
        let c = plain_rate(&self.config, e, &self.profile);
        if c == 0.0 {
            return 0.0;
        }
        self.scale() * c * self.bias_exponent(e).exp()
    }

    /// `(N²/2) c(η, e)`.
    pub fn unbiased_rate(&self, e: Event) -> f64 {
        self.scale() * plain_rate(&self.config, e, &self.profile)
    }

    /// Sum of the envelope rates; the exact total without bias.
    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    /// Event whose cumulative-rate interval contains `u ∈ [0, total)`.
    pub fn select(&self, u: f64) -> Event {
        Event::from_index(self.tree.find(u), self.sites())
    }

    /// Probability of keeping a proposed event, `exp(ΔΠ(h) - b_e)`.
    pub fn acceptance(&self, e: Event) -> f64 {
        if self.h.is_none() {
            return 1.0;
        }
        (self.bias_exponent(e) - self.envelope[e.index(self.sites())]).exp().min(1.0)
    }

    /// Performs `e` and updates the bias field, rates and the tree.
    pub fn apply_event(&mut self, e: Event) {
        let l = self.sites();
        let changed = e.sites(l);
        match e {
            Event::Swap(o) => self.config.eta.swap(o, o + 1),
            Event::Flip(_) => self.config.eta[changed[0]] ^= 1,
        }
        for &o in &changed {
            let new = self.config.eta[o] as f64 - self.profile.rho_bar[o];
            let d = new - self.eb[o];
            self.eb[o] = new;
            if let Some(h) = &self.h {
                let row = h.row(o);
                for (f, r) in self.field.iter_mut().zip(row) {
                    *f += r * d;
                }
                self.field[o] -= row[o] * d;
            }
        }
        self.events_since_sync += 1;
        if self.events_since_sync >= RESYNC_EVERY {
            self.resync();
            return;
        }
        let mut touched = Vec::with_capacity(4);
        for &o in &changed {
            if o > 0 {
                touched.push(o - 1);
            }
            if o + 1 < l {
                touched.push(o);
            }
            if o == 0 {
                touched.push(l - 1);
            }
            if o == l - 1 {
                touched.push(l);
            }
        }
        for k in touched {
            let r = self.envelope_rate(k);
            self.rates[k] = r;
            self.tree.update(k, r);
        }
    }

    /// Largest deviation of the incrementally maintained bias exponents from
    /// a fresh recomputation.
    pub fn bias_drift(&self) -> f64 {
        let mut fresh = self.clone();
        fresh.resync();
        (0..self.n_events())
            .map(|k| {
                let e = Event::from_index(k, self.sites());
                (self.bias_exponent(e) - fresh.bias_exponent(e)).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn bias_field(h: &LatticeKernel, eb: &[f64]) -> Vec<f64> {
    let l = eb.len();
    (0..l).map(|a| (0..l).filter(|&j| j != a).map(|j| h.get(a, j) * eb[j]).sum()).collect()
}

/// Uniform bounds on `|ΔΠ(h)|` per event using `|η̄_j| ≤ max(ρ̄_j, 1 - ρ̄_j)`.
fn envelope_bounds(h: &LatticeKernel, profile: &Profile) -> Vec<f64> {
    let l = profile.params.sites();
    let n = profile.params.n as f64;
    let m: Vec<f64> = profile.rho_bar.iter().map(|&r| r.max(1.0 - r)).collect();
    let mut b = Vec::with_capacity(l + 1);
    for o in 0..l - 1 {
        let s: f64 = (0..l)
            .filter(|&j| j != o && j != o + 1)
            .map(|j| (h.get(o + 1, j) - h.get(o, j)).abs() * m[j])
            .sum();
        b.push((0.5 * s + (profile.rho_prime * h.get(o, o + 1)).abs() / (2.0 * n)) / n);
    }
    for o in [0, l - 1] {
        let s: f64 = (0..l).filter(|&j| j != o).map(|j| h.get(o, j).abs() * m[j]).sum();
        b.push(s / (2.0 * n));
    }
    b
}
