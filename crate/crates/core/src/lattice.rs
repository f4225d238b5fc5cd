//! Lattice parameters, the affine steady profile and configurations.
//!
//! Sites `i ∈ {-N+1, …, N-1}` are stored at offsets `i + N - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Half-width of the lattice and the two reservoir densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub rho_minus: f64,
    pub rho_plus: f64,
}

impl Params {
    pub fn new(n: usize, rho_minus: f64, rho_plus: f64) -> Result<Self> {
        if n < 2 {
            return Err(LabError::InvalidParams(format!("N = {n} must be at least 2")));
        }
        let ok = |r: f64| r > 0.0 && r < 1.0;
        if !ok(rho_minus) || !ok(rho_plus) {
            return Err(LabError::InvalidParams(format!(
                "densities ({rho_minus}, {rho_plus}) must lie in (0,1)"
            )));
        }
        if rho_minus > rho_plus {
            return Err(LabError::InvalidParams(format!(
                "rho_minus = {rho_minus} exceeds rho_plus = {rho_plus}"
            )));
        }
        Ok(Self { n, rho_minus, rho_plus })
    }

    /// Number of sites, `2N - 1`.
    pub fn sites(&self) -> usize {
        2 * self.n - 1
    }

    /// Array offset of site `i`.
    pub fn offset(&self, i: i64) -> usize {
        let n = self.n as i64;
        assert!(i > -n && i < n, "site {i} outside the lattice");
        (i + n - 1) as usize
    }

    /// Site label of array offset `o`.
    pub fn site(&self, o: usize) -> i64 {
        o as i64 - (self.n as i64 - 1)
    }

    /// Macroscopic position `i/N` of offset `o`.
    pub fn position(&self, o: usize) -> f64 {
        self.site(o) as f64 / self.n as f64
    }

    pub fn rho_prime(&self) -> f64 {
        0.5 * (self.rho_plus - self.rho_minus)
    }

    pub fn is_equilibrium(&self) -> bool {
        self.rho_minus == self.rho_plus
    }

    /// Profile value `ρ̄(x)` at a macroscopic point.
    pub fn rho_bar_at(&self, x: f64) -> f64 {
        0.5 * (1.0 - x) * self.rho_minus + 0.5 * (1.0 + x) * self.rho_plus
    }

    pub fn sigma_bar_at(&self, x: f64) -> f64 {
        let r = self.rho_bar_at(x);
        r * (1.0 - r)
    }
}

/// Mobility `σ(r) = r(1-r)`.
pub fn sigma(r: f64) -> f64 {
    r * (1.0 - r)
}

/// Chemical potential `log(r/(1-r))`.
pub fn logit(r: f64) -> f64 {
    (r / (1.0 - r)).ln()
}

/// Steady density, mobility and chemical potential sampled on the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub params: Params,
    pub rho_bar: Vec<f64>,
    pub sigma_bar: Vec<f64>,
    /// `λ_i` for `i = -N, …, N`; index `i + N`.
    pub lambda: Vec<f64>,
    pub rho_prime: f64,
}

impl Profile {
    /// `λ_i` including the reservoir values at `i = ±N`.
    pub fn lambda_at(&self, i: i64) -> f64 {
        self.lambda[(i + self.params.n as i64) as usize]
    }

    pub fn len(&self) -> usize {
        self.rho_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_bar.is_empty()
    }
}

pub fn steady_profile(params: &Params) -> Profile {
    let l = params.sites();
    let rho_bar: Vec<f64> = (0..l).map(|o| params.rho_bar_at(params.position(o))).collect();
    let sigma_bar = rho_bar.iter().map(|&r| sigma(r)).collect();
    let mut lambda = Vec::with_capacity(l + 2);
    lambda.push(logit(params.rho_minus));
    lambda.extend(rho_bar.iter().map(|&r| logit(r)));
    lambda.push(logit(params.rho_plus));
    Profile { params: *params, rho_bar, sigma_bar, lambda, rho_prime: params.rho_prime() }
}

/// Occupation numbers over the lattice, one byte per site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    pub eta: Vec<u8>,
}

impl Configuration {
    pub fn empty(sites: usize) -> Self {
        Self { eta: vec![0; sites] }
    }

    pub fn full(sites: usize) -> Self {
        Self { eta: vec![1; sites] }
    }

    pub fn from_bits(eta: Vec<u8>) -> Self {
        debug_assert!(eta.iter().all(|&e| e <= 1));
        Self { eta }
    }

    /// Little-endian code: bit `o` holds the occupation of offset `o`.
    pub fn from_code(code: usize, sites: usize) -> Self {
        Self { eta: (0..sites).map(|o| ((code >> o) & 1) as u8).collect() }
    }

    pub fn code(&self) -> usize {
        self.eta.iter().enumerate().fold(0, |acc, (o, &e)| acc | ((e as usize) << o))
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn particles(&self) -> usize {
        self.eta.iter().map(|&e| e as usize).sum()
    }

    /// Centered occupation `η_o - ρ̄_o` at offset `o`.
    pub fn centered_at(&self, profile: &Profile, o: usize) -> f64 {
        self.eta[o] as f64 - profile.rho_bar[o]
    }

    pub fn centered_all(&self, profile: &Profile) -> Vec<f64> {
        self.eta.iter().zip(&profile.rho_bar).map(|(&e, &r)| e as f64 - r).collect()
    }
}

/// Centered occupation `η_i - ρ̄_i` at site label `i`.
pub fn centered(config: &Configuration, profile: &Profile, i: i64) -> f64 {
    let o = profile.params.offset(i);
    config.centered_at(profile, o)
}

/// Symmetric matrix of kernel values at lattice points `(i/N, j/N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeKernel {
    pub sites: usize,
    pub values: Vec<f64>,
}

impl LatticeKernel {
    pub fn zeros(sites: usize) -> Self {
        Self { sites, values: vec![0.0; sites * sites] }
    }

    /// Samples `f(i/N, j/N)` for every ordered pair, symmetrising the result.
    pub fn from_fn(params: &Params, f: impl Fn(f64, f64) -> f64) -> Self {
        let l = params.sites();
        let mut values = vec![0.0; l * l];
        for a in 0..l {
            for b in a..l {
                let x = params.position(a);
                let y = params.position(b);
                let v = 0.5 * (f(x, y) + f(y, x));
                values[a * l + b] = v;
                values[b * l + a] = v;
            }
        }
        Self { sites: l, values }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.sites + b]
    }

    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        self.values[a * self.sites + b] = v;
        self.values[b * self.sites + a] = v;
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { sites: self.sites, values: self.values.iter().map(|v| v * s).collect() }
    }

    /// Largest off-diagonal absolute value.
    pub fn sup_norm_off_diagonal(&self) -> f64 {
        let mut m: f64 = 0.0;
        for a in 0..self.sites {
            for b in 0..self.sites {
                if a != b {
                    m = m.max(self.get(a, b).abs());
                }
            }
        }
        m
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.values[a * self.sites..(a + 1) * self.sites]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_profile_is_flat() {
        let p = Params::new(6, 0.3, 0.3).unwrap();
        let prof = steady_profile(&p);
        assert!(prof.rho_bar.iter().all(|&r| (r - 0.3).abs() < 1e-15));
        assert_eq!(prof.rho_prime, 0.0);
    }

    #[test]
    fn profile_value_at_site_five() {
        let p = Params::new(10, 0.2, 0.8).unwrap();
        let prof = steady_profile(&p);
        assert!((prof.rho_bar[p.offset(5)] - 0.65).abs() < 1e-14);
        assert!((prof.rho_bar[p.offset(0)] - 0.5).abs() < 1e-14);
        assert!((prof.lambda_at(10) - logit(0.8)).abs() < 1e-14);
        assert!((prof.lambda_at(-10) - logit(0.2)).abs() < 1e-14);
    }

    #[test]
    fn centered_values() {
        let p = Params::new(10, 0.2, 0.8).unwrap();
        let prof = steady_profile(&p);
        let mut c = Configuration::empty(p.sites());
        assert!((centered(&c, &prof, 5) + 0.65).abs() < 1e-14);
        c.eta[p.offset(5)] = 1;
        assert!((centered(&c, &prof, 5) - 0.35).abs() < 1e-14);
        let q = Params::new(4, 0.5, 0.5).unwrap();
        let qp = steady_profile(&q);
        assert_eq!(centered(&Configuration::full(q.sites()), &qp, 0), 0.5);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(Params::new(1, 0.2, 0.3).is_err());
        assert!(Params::new(4, 0.0, 0.3).is_err());
        assert!(Params::new(4, 0.6, 0.3).is_err());
    }

    #[test]
    fn code_round_trip() {
        let c = Configuration::from_bits(vec![1, 0, 1, 1, 0]);
        assert_eq!(c.code(), 0b01101);
        assert_eq!(Configuration::from_code(c.code(), 5), c);
    }
}
