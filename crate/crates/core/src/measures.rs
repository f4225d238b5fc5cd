//! Product Bernoulli and discrete Gaussian measures on configurations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fields::pi_field_centered;
use crate::lattice::{Configuration, LatticeKernel, Params, Profile};
use crate::stats::batch_means;

/// Largest `N` handled by exact enumeration (`2^13` states).
pub const MAX_EXACT_N: usize = 7;

pub fn check_exact_size(params: &Params) -> Result<()> {
    if params.n > MAX_EXACT_N {
        return Err(LabError::TooLarge { n: params.n, max: MAX_EXACT_N });
    }
    Ok(())
}

/// Probability vector indexed by configuration code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureVector {
    pub params: Params,
    pub probs: Vec<f64>,
}

impl MeasureVector {
    pub fn new(params: Params, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1usize << params.sites() {
            return Err(LabError::InvalidArgument(format!(
                "expected {} probabilities, got {}",
                1usize << params.sites(),
                probs.len()
            )));
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) || probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(LabError::Numerical("weights must be finite, nonnegative, not all zero".into()));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self { params, probs })
    }

    /// `⊗ Ber(ρ̄_i)`.
    pub fn product(profile: &Profile) -> Result<Self> {
        let p = profile.params;
        check_exact_size(&p)?;
        let l = p.sites();
        let probs = (0..1usize << l)
            .map(|code| {
                (0..l)
                    .map(|o| if code >> o & 1 == 1 { profile.rho_bar[o] } else { 1.0 - profile.rho_bar[o] })
                    .product()
            })
            .collect();
        Self::new(p, probs)
    }

    pub fn states(&self) -> usize {
        self.probs.len()
    }

    pub fn expectation(&self, f: impl Fn(&Configuration) -> f64) -> f64 {
        let l = self.params.sites();
        self.probs
            .iter()
            .enumerate()
            .map(|(code, &p)| if p == 0.0 { 0.0 } else { p * f(&Configuration::from_code(code, l)) })
            .sum()
    }

    /// `E[η_i]` at every offset.
    pub fn occupations(&self) -> Vec<f64> {
        let l = self.params.sites();
        let mut m = vec![0.0; l];
        for (code, &p) in self.probs.iter().enumerate() {
            for (o, mo) in m.iter_mut().enumerate() {
                if code >> o & 1 == 1 {
                    *mo += p;
                }
            }
        }
        m
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Discrete Gaussian measure `ν_g ∝ exp[2Π(g)] ν̄` with lattice kernel `g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianMeasureSpec {
    pub g: LatticeKernel,
    pub profile: Profile,
    pub log_partition: Option<f64>,
}

impl GaussianMeasureSpec {
    pub fn new(g: LatticeKernel, profile: Profile) -> Result<Self> {
        if g.sites != profile.params.sites() {
            return Err(LabError::InvalidArgument("kernel and lattice sizes differ".into()));
        }
        Ok(Self { g, profile, log_partition: None })
    }

    /// Samples a continuum kernel at lattice points.
    pub fn from_fn(profile: Profile, f: impl Fn(f64, f64) -> f64) -> Self {
        let g = LatticeKernel::from_fn(&profile.params, f);
        Self { g, profile, log_partition: None }
    }

    /// `2Π(g)` from centred occupations.
    pub fn exponent(&self, eb: &[f64]) -> f64 {
        2.0 * pi_field_centered(eb, &self.g, self.profile.params.n)
    }
}

/// Exact measure by enumeration; fills `spec.log_partition`.
pub fn exact_gaussian_measure(spec: &mut GaussianMeasureSpec) -> Result<MeasureVector> {
    let product = MeasureVector::product(&spec.profile)?;
    let l = spec.profile.params.sites();
    let mut z = 0.0;
    let weights: Vec<f64> = product
        .probs
        .iter()
        .enumerate()
        .map(|(code, &p)| {
            let eb = Configuration::from_code(code, l).centered_all(&spec.profile);
            let w = p * spec.exponent(&eb).exp();
            z += w;
            w
        })
        .collect();
    spec.log_partition = Some(z.ln());
    MeasureVector::new(spec.profile.params, weights)
}

/// Independent `Ber(ρ̄_i)` occupations.
pub fn sample_product<R: Rng + ?Sized>(profile: &Profile, rng: &mut R) -> Configuration {
    Configuration::from_bits(profile.rho_bar.iter().map(|&r| u8::from(rng.random::<f64>() < r)).collect())
}

/// Single-site heat-bath chain targeting `ν_g`.
#[derive(Debug, Clone)]
pub struct GlauberSampler {
    pub spec: GaussianMeasureSpec,
    pub config: Configuration,
    eb: Vec<f64>,
    /// `Σ_{j≠i} g_ij η̄_j`.
    local: Vec<f64>,
}

impl GlauberSampler {
    /// Starts from a product sample.
    pub fn new<R: Rng + ?Sized>(spec: GaussianMeasureSpec, rng: &mut R) -> Self {
        let config = sample_product(&spec.profile, rng);
        Self::from_config(spec, config)
    }

    pub fn from_config(spec: GaussianMeasureSpec, config: Configuration) -> Self {
        let eb = config.centered_all(&spec.profile);
        let l = eb.len();
        let local = (0..l)
            .map(|i| (0..l).filter(|&j| j != i).map(|j| spec.g.get(i, j) * eb[j]).sum())
            .collect();
        Self { spec, config, eb, local }
    }

    /// Target-weight ratio `π(η^i)/π(η)` of flipping site `i`.
    pub fn flip_ratio(&self, i: usize) -> f64 {
        let r = self.spec.profile.rho_bar[i];
        let up = self.config.eta[i] == 0;
        let bern = if up { r / (1.0 - r) } else { (1.0 - r) / r };
        let delta = if up { 1.0 } else { -1.0 };
        let n = self.spec.profile.params.n as f64;
        bern * (delta * self.local[i] / n).exp()
    }

    /// Probability of moving to `η^i` in one proposal step.
    pub fn transition_prob(&self, i: usize) -> f64 {
        let q = self.flip_ratio(i);
        q / (1.0 + q) / self.eb.len() as f64
    }

    fn flip(&mut self, i: usize) {
        let old = self.eb[i];
        self.config.eta[i] ^= 1;
        let new = self.config.eta[i] as f64 - self.spec.profile.rho_bar[i];
        self.eb[i] = new;
        let d = new - old;
        let row = self.spec.g.row(i);
        for (j, lj) in self.local.iter_mut().enumerate() {
            if j != i {
                *lj += row[j] * d;
            }
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let i = rng.random_range(0..self.eb.len());
        let q = self.flip_ratio(i);
        if rng.random::<f64>() * (1.0 + q) < q {
            self.flip(i);
        }
    }

    /// `2N - 1` proposals.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for _ in 0..self.eb.len() {
            self.step(rng);
        }
    }

    /// `count` samples after 20 burn-in sweeps, 2 sweeps apart.
    pub fn samples<R: Rng + ?Sized>(&mut self, count: usize, rng: &mut R) -> Vec<Configuration> {
        for _ in 0..20 {
            self.sweep(rng);
        }
        (0..count)
            .map(|_| {
                self.sweep(rng);
                self.sweep(rng);
                self.config.clone()
            })
            .collect()
    }
}

/// Configuration after `sweeps` sweeps from a product start.
pub fn glauber_sampler<R: Rng + ?Sized>(
    spec: &GaussianMeasureSpec,
    sweeps: usize,
    rng: &mut R,
) -> Result<Configuration> {
    if sweeps == 0 {
        return Err(LabError::InvalidArgument("at least one sweep is required".into()));
    }
    let mut s = GlauberSampler::new(spec.clone(), rng);
    for _ in 0..sweeps {
        s.sweep(rng);
    }
    Ok(s.config)
}

fn check_sites(sites: &[usize], l: usize) -> Result<()> {
    if sites.is_empty() {
        return Err(LabError::InvalidArgument("empty site set".into()));
    }
    for (k, &s) in sites.iter().enumerate() {
        if s >= l {
            return Err(LabError::InvalidArgument(format!("site offset {s} out of range")));
        }
        if sites[..k].contains(&s) {
            return Err(LabError::InvalidArgument(format!("site offset {s} repeated")));
        }
    }
    Ok(())
}

/// `E[∏_{a∈I} η̄_a]` under an exact measure.
pub fn npoint_correlation(measure: &MeasureVector, profile: &Profile, sites: &[usize]) -> Result<f64> {
    check_sites(sites, measure.params.sites())?;
    Ok(measure.expectation(|c| sites.iter().map(|&o| c.centered_at(profile, o)).product()))
}

/// Sample mean of `∏_{a∈I} η̄_a` with a batch-means standard error.
pub fn npoint_correlation_mc(samples: &[Configuration], profile: &Profile, sites: &[usize]) -> Result<(f64, f64)> {
    check_sites(sites, profile.params.sites())?;
    let v: Vec<f64> =
        samples.iter().map(|c| sites.iter().map(|&o| c.centered_at(profile, o)).product()).collect();
    Ok(batch_means(&v, 32))
}

/// Largest `|E[∏ η̄]|` over all sets of `n` distinct sites.
pub fn max_npoint_correlation(measure: &MeasureVector, profile: &Profile, n: usize) -> Result<f64> {
    let l = measure.params.sites();
    if n == 0 || n > l {
        return Err(LabError::InvalidArgument(format!("order {n} not in 1..={l}")));
    }
    let eb: Vec<Vec<f64>> = (0..measure.states())
        .map(|code| Configuration::from_code(code, l).centered_all(profile))
        .collect();
    let mut best: f64 = 0.0;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let v: f64 = measure.probs.iter().zip(&eb).map(|(p, e)| p * idx.iter().map(|&o| e[o]).product::<f64>()).sum();
        best = best.max(v.abs());
        // next combination in lexicographic order
        let mut k = n;
        while k > 0 && idx[k - 1] == l - n + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        idx[k - 1] += 1;
        for t in k..n {
            idx[t] = idx[t - 1] + 1;
        }
    }
    Ok(best)
}

/// Coefficient tensor of a multilinear form in centred occupations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TensorEntries {
    /// Row-major entries over `(2N-1)^d` index tuples.
    Dense(Vec<f64>),
    /// Order two, value `a` off the diagonal and zero on it.
    OffDiagonalConstant(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationTensorSpec {
    pub params: Params,
    pub d: usize,
    /// Offsets attached to the first index; must contain 0.
    pub offsets: Vec<i64>,
    pub entries: TensorEntries,
}

impl CorrelationTensorSpec {
    pub fn new(params: Params, d: usize, offsets: Vec<i64>, entries: TensorEntries) -> Result<Self> {
        if d == 0 || !offsets.contains(&0) {
            return Err(LabError::InvalidArgument("need d ≥ 1 and 0 in the offset set".into()));
        }
        let l = params.sites();
        match &entries {
            TensorEntries::Dense(v) if v.len() != l.pow(d as u32) => {
                return Err(LabError::InvalidArgument("dense tensor has the wrong size".into()))
            }
            TensorEntries::OffDiagonalConstant(_) if d != 2 || offsets != [0] => {
                return Err(LabError::InvalidArgument("constant form needs d = 2 and offsets {0}".into()))
            }
            _ => {}
        }
        Ok(Self { params, d, offsets, entries })
    }

    /// `(Σ A²)^{1/2}`.
    pub fn hs_norm(&self) -> f64 {
        match &self.entries {
            TensorEntries::Dense(v) => v.iter().map(|a| a * a).sum::<f64>().sqrt(),
            TensorEntries::OffDiagonalConstant(a) => {
                let l = self.params.sites() as f64;
                a.abs() * (l * (l - 1.0)).sqrt()
            }
        }
    }

    /// `N^{-d/2} ‖A‖_HS`.
    pub fn norm_2n(&self) -> f64 {
        self.hs_norm() / (self.params.n as f64).powf(self.d as f64 / 2.0)
    }

    /// Value of the form on centred occupations.
    pub fn evaluate(&self, eb: &[f64]) -> f64 {
        let l = eb.len() as i64;
        match &self.entries {
            TensorEntries::OffDiagonalConstant(a) => {
                let s: f64 = eb.iter().sum();
                let q: f64 = eb.iter().map(|e| e * e).sum();
                a * (s * s - q)
            }
            TensorEntries::Dense(v) => {
                let lu = l as usize;
                let mut total = 0.0;
                let inner = lu.pow(self.d as u32 - 1);
                for i0 in 0..l {
                    if self.offsets.iter().any(|&j| i0 + j < 0 || i0 + j >= l) {
                        continue;
                    }
                    let head: f64 = self.offsets.iter().map(|&j| eb[(i0 + j) as usize]).product();
                    if head == 0.0 {
                        continue;
                    }
                    let base = i0 as usize * inner;
                    for r in 0..inner {
                        let a = v[base + r];
                        if a == 0.0 {
                            continue;
                        }
                        let mut rest = r;
                        let mut prod = 1.0;
                        for _ in 1..self.d {
                            prod *= eb[rest % lu];
                            rest /= lu;
                        }
                        total += a * head * prod;
                    }
                }
                total
            }
        }
    }
}

/// Monte Carlo estimate with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Normalised values `|X|^{2/d}/‖A‖_HS^{2/d}` under product samples.
pub fn concentration_samples<R: Rng + ?Sized>(
    spec: &CorrelationTensorSpec,
    profile: &Profile,
    samples: usize,
    rng: &mut R,
) -> Vec<f64> {
    let hs = spec.hs_norm();
    let p = 2.0 / spec.d as f64;
    (0..samples)
        .map(|_| {
            if hs == 0.0 {
                return 0.0;
            }
            let eb = sample_product(profile, rng).centered_all(profile);
            (spec.evaluate(&eb).abs() / hs).powf(p)
        })
        .collect()
}

/// `E_ν̄[exp(c|X|^{2/d}/‖A‖_HS^{2/d})]` by Monte Carlo.
pub fn concentration_check<R: Rng + ?Sized>(
    spec: &CorrelationTensorSpec,
    profile: &Profile,
    c: f64,
    samples: usize,
    rng: &mut R,
) -> Estimate {
    let v: Vec<f64> = concentration_samples(spec, profile, samples, rng).iter().map(|z| (c * z).exp()).collect();
    let (mean, stderr) = batch_means(&v, 32);
    Estimate { mean, stderr }
}

/// Constant `c` for which the sample mean of `exp(c z)` equals `target`.
pub fn calibrate_concentration(normalised: &[f64], target: f64) -> f64 {
    let stat = |c: f64| normalised.iter().map(|z| (c * z).exp()).sum::<f64>() / normalised.len() as f64;
    let (mut lo, mut hi) = (0.0, 1.0);
    while stat(hi) < target && hi < 1e6 {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if stat(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
