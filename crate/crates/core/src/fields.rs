//! Observables of a configuration and the time-averaged empirical kernel.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::{Configuration, LatticeKernel, Params, Profile};
use crate::stats::batch_mean_stderr;

/// `Π(φ) = (1/4N) Σ_{i≠j} η̄_i η̄_j φ_{ij}`.
pub fn pi_field(config: &Configuration, phi: &LatticeKernel, profile: &Profile) -> f64 {
    let eb = config.centered_all(profile);
    pi_field_centered(&eb, phi, profile.params.n)
}

/// [`pi_field`] on precomputed centred occupations.
pub fn pi_field_centered(eb: &[f64], phi: &LatticeKernel, n: usize) -> f64 {
    let mut s = 0.0;
    for (a, &ea) in eb.iter().enumerate() {
        let row = phi.row(a);
        let mut r = 0.0;
        for (b, &e) in eb.iter().enumerate() {
            if b != a {
                r += row[b] * e;
            }
        }
        s += ea * r;
    }
    s / (4.0 * n as f64)
}

/// `Y(ψ) = N^{-1/2} Σ η̄_i ψ(i/N)`.
pub fn y_field(config: &Configuration, psi: impl Fn(f64) -> f64, profile: &Profile) -> f64 {
    let p = &profile.params;
    let s: f64 = (0..p.sites()).map(|o| config.centered_at(profile, o) * psi(p.position(o))).sum();
    s / (p.n as f64).sqrt()
}

/// Nearest-neighbour diagonal term `(1/4) Σ_i η̄_i η̄_{i+1} jump(i/N)`, where
/// `jump(x)` is the jump of `∂₁h(·, x)` across `x`.
pub fn neumann_term(config: &Configuration, jump: impl Fn(f64) -> f64, profile: &Profile) -> f64 {
    let p = &profile.params;
    let eb = config.centered_all(profile);
    0.25 * (0..p.sites() - 1).map(|o| eb[o] * eb[o + 1] * jump(p.position(o))).sum::<f64>()
}

/// Time integrals `∫ η̄_i η̄_j dt` over a set of tracked sites, accumulated
/// lazily: a pair is brought up to date only when one of its sites changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub params: Params,
    /// Array offsets of tracked sites.
    pub tracked: Vec<usize>,
    rho_bar: Vec<f64>,
    /// Centred occupation of each tracked site in the current state.
    current: Vec<f64>,
    /// Time of the last change of each tracked site.
    changed_at: Vec<f64>,
    /// Row-major upper triangle over tracked sites.
    open: Vec<f64>,
    closed: Vec<Vec<f64>>,
    clock: f64,
    batch_start: f64,
    batch_len: Option<f64>,
    primed: bool,
}

impl KernelEstimate {
    /// Tracks every `stride`-th site; `total_time`, when given, splits the
    /// run into `batches` equal batches for standard errors.
    pub fn new(profile: &Profile, stride: usize, total_time: Option<f64>, batches: usize) -> Self {
        let params = profile.params;
        let tracked: Vec<usize> = (0..params.sites()).step_by(stride.max(1)).collect();
        let t = tracked.len();
        Self {
            params,
            rho_bar: tracked.iter().map(|&o| profile.rho_bar[o]).collect(),
            current: vec![0.0; t],
            changed_at: vec![0.0; t],
            open: vec![0.0; t * t],
            closed: Vec::new(),
            clock: 0.0,
            batch_start: 0.0,
            batch_len: total_time.map(|tt| tt / batches.max(1) as f64),
            primed: false,
            tracked,
        }
    }

    /// Stride keeping the number of tracked pairs at or below `max_pairs`.
    pub fn stride_for(params: &Params, max_pairs: usize) -> usize {
        let l = params.sites();
        (1..=l).find(|s| {
            let t = l.div_ceil(*s);
            t * (t - 1) / 2 <= max_pairs
        })
        .unwrap_or(l)
    }

    /// Estimate whose kernel equals `f(i/N, j/N)` exactly, for quadrature checks.
    pub fn from_kernel(profile: &Profile, stride: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut e = Self::new(profile, stride, None, 1);
        let t = e.tracked.len();
        let n = e.params.n as f64;
        for a in 0..t {
            for b in a + 1..t {
                let (x, y) = (e.params.position(e.tracked[a]), e.params.position(e.tracked[b]));
                e.open[a * t + b] = f(x, y) / n;
            }
        }
        e.clock = 1.0;
        e
    }

    pub fn total_time(&self) -> f64 {
        self.clock
    }

    fn flush_site(&mut self, a: usize, now: f64) {
        let t = self.tracked.len();
        let (ea, ta) = (self.current[a], self.changed_at[a]);
        for b in 0..t {
            if b == a {
                continue;
            }
            let dt = now - ta.max(self.changed_at[b]);
            if dt > 0.0 {
                let (p, q) = if a < b { (a, b) } else { (b, a) };
                self.open[p * t + q] += ea * self.current[b] * dt;
            }
        }
    }

    fn flush_all(&mut self, now: f64) {
        let t = self.tracked.len();
        for a in 0..t {
            for b in a + 1..t {
                let dt = now - self.changed_at[a].max(self.changed_at[b]);
                if dt > 0.0 {
                    self.open[a * t + b] += self.current[a] * self.current[b] * dt;
                }
            }
        }
        self.changed_at.iter_mut().for_each(|c| *c = now);
    }

    fn close_batch(&mut self, at: f64) {
        self.flush_all(at);
        let fresh = vec![0.0; self.open.len()];
        self.closed.push(std::mem::replace(&mut self.open, fresh));
        self.batch_start = at;
    }

    fn hold(&mut self, config: &Configuration, dt: f64) {
        if !self.primed {
            for (k, &o) in self.tracked.iter().enumerate() {
                self.current[k] = config.eta[o] as f64 - self.rho_bar[k];
                self.changed_at[k] = self.clock;
            }
            self.primed = true;
        } else {
            for k in 0..self.tracked.len() {
                let v = config.eta[self.tracked[k]] as f64 - self.rho_bar[k];
                if v != self.current[k] {
                    let now = self.clock;
                    self.flush_site(k, now);
                    self.current[k] = v;
                    self.changed_at[k] = now;
                }
            }
        }
        self.clock += dt;
    }

    /// Records that `config` was held for a duration `dt`.
    pub fn accumulate_pairs(&mut self, config: &Configuration, dt: f64) {
        let mut remaining = dt;
        if let Some(len) = self.batch_len {
            while self.batch_start + len <= self.clock + remaining {
                let step = (self.batch_start + len - self.clock).max(0.0);
                self.hold(config, step);
                remaining -= step;
                let at = self.clock;
                self.close_batch(at);
                if remaining <= 0.0 {
                    return;
                }
            }
        }
        self.hold(config, remaining);
    }

    fn batch_sums(&self) -> Vec<Vec<f64>> {
        let mut all = self.closed.clone();
        let mut tail = self.clone();
        let now = tail.clock;
        tail.flush_all(now);
        if tail.open.iter().any(|&v| v != 0.0) || all.is_empty() {
            all.push(tail.open);
        }
        all
    }

    /// `k̂_{ij} = N · (time average of η̄_i η̄_j)` for tracked pairs `i < j`,
    /// with batch-means standard errors (NaN with fewer than two batches).
    pub fn kernel(&self) -> Result<Vec<PairEstimate>> {
        if self.clock <= 0.0 {
            return Err(LabError::InvalidArgument("no time accumulated".into()));
        }
        let t = self.tracked.len();
        let n = self.params.n as f64;
        let batches = self.batch_sums();
        let batch_len = self.batch_len.filter(|_| self.closed.len() >= 2);
        let mut out = Vec::with_capacity(t * (t - 1) / 2);
        for a in 0..t {
            for b in a + 1..t {
                let total: f64 = batches.iter().map(|s| s[a * t + b]).sum();
                let stderr = match batch_len {
                    Some(len) => {
                        let means: Vec<f64> = self.closed.iter().map(|s| n * s[a * t + b] / len).collect();
                        batch_mean_stderr(&means).1
                    }
                    None => f64::NAN,
                };
                out.push(PairEstimate {
                    i: self.tracked[a],
                    j: self.tracked[b],
                    x: self.params.position(self.tracked[a]),
                    y: self.params.position(self.tracked[b]),
                    value: n * total / self.clock,
                    stderr,
                });
            }
        }
        Ok(out)
    }

    /// Merges an independent run of equal tracking layout.
    pub fn merge(&mut self, other: &KernelEstimate) {
        assert_eq!(self.tracked, other.tracked, "tracking layouts differ");
        let now = self.clock;
        self.flush_all(now);
        let mut o = other.clone();
        let onow = o.clock;
        o.flush_all(onow);
        for (p, q) in self.open.iter_mut().zip(&o.open) {
            *p += q;
        }
        self.closed.extend(o.closed);
        self.clock += o.clock;
    }
}

/// Empirical kernel value at one tracked pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub stderr: f64,
}

/// `Π̂(∂₁φ)/‖φ‖₂` with `Π̂(F) = (1/4)∫∫ k̂ F`, using the tracked pairs as a
/// quadrature and a fine midpoint rule for `‖φ‖₂`.
pub fn regularity_functional(est: &KernelEstimate, phi: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let pairs = est.kernel()?;
    let p = &est.params;
    let stride = if est.tracked.len() > 1 { est.tracked[1] - est.tracked[0] } else { 1 };
    let cell = (stride as f64 / p.n as f64).powi(2);
    let eps = 1e-5;
    let d1 = |x: f64, y: f64| (phi(x + eps, y) - phi(x - eps, y)) / (2.0 * eps);
    let num: f64 = pairs.iter().map(|e| e.value * (d1(e.x, e.y) + d1(e.y, e.x))).sum::<f64>() * cell / 4.0;
    let m = 400;
    let h = 2.0 / m as f64;
    let mut norm2 = 0.0;
    for a in 0..m {
        for b in 0..m {
            let v = phi(-1.0 + (a as f64 + 0.5) * h, -1.0 + (b as f64 + 0.5) * h);
            norm2 += v * v * h * h;
        }
    }
    if norm2 == 0.0 {
        return Err(LabError::InvalidArgument("test function vanishes".into()));
    }
    Ok(num / norm2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::steady_profile;

    fn setup(n: usize) -> Profile {
        steady_profile(&Params::new(n, 0.2, 0.8).unwrap())
    }

    #[test]
    fn pi_field_brute_force() {
        let prof = setup(3);
        let c = Configuration::from_bits(vec![1, 0, 1, 1, 0]);
        let phi = LatticeKernel::from_fn(&prof.params, |x, y| (x - 2.0 * y).cos() + (y - 2.0 * x).cos());
        let eb = c.centered_all(&prof);
        let mut s = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    s += eb[i] * eb[j] * phi.get(i, j);
                }
            }
        }
        assert!((pi_field(&c, &phi, &prof) - s / 12.0).abs() < 1e-14);
    }

    #[test]
    fn single_state_held() {
        let prof = setup(4);
        let c = Configuration::from_bits(vec![1, 0, 0, 1, 1, 0, 1]);
        let mut e = KernelEstimate::new(&prof, 1, None, 1);
        e.accumulate_pairs(&c, 2.5);
        let eb = c.centered_all(&prof);
        for p in e.kernel().unwrap() {
            assert!((p.value - 4.0 * eb[p.i] * eb[p.j]).abs() < 1e-12);
        }
    }

    #[test]
    fn two_states_average() {
        let prof = setup(3);
        let c1 = Configuration::from_bits(vec![1, 0, 0, 1, 1]);
        let c2 = Configuration::from_bits(vec![0, 1, 0, 1, 0]);
        let mut e = KernelEstimate::new(&prof, 1, Some(4.0), 4);
        for _ in 0..2 {
            e.accumulate_pairs(&c1, 1.0);
            e.accumulate_pairs(&c2, 1.0);
        }
        let (a, b) = (c1.centered_all(&prof), c2.centered_all(&prof));
        for p in e.kernel().unwrap() {
            let exp = 3.0 * 0.5 * (a[p.i] * a[p.j] + b[p.i] * b[p.j]);
            assert!((p.value - exp).abs() < 1e-12);
            assert!(p.stderr.is_finite());
        }
    }

    #[test]
    fn stride_bounds_pairs() {
        let p = Params::new(256, 0.3, 0.5).unwrap();
        let s = KernelEstimate::stride_for(&p, 4096);
        let t = p.sites().div_ceil(s);
        assert!(t * (t - 1) / 2 <= 4096);
        assert_eq!(KernelEstimate::stride_for(&Params::new(8, 0.3, 0.5).unwrap(), 4096), 1);
    }
}
