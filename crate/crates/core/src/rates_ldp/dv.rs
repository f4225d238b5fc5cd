//! Donsker-Varadhan functionals: exact small-chain values and the density
//! and correlation asymptotics at equilibrium.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::GeneratorMatrix;
use crate::error::{LabError, Result};
use crate::lattice::{logit, sigma, Configuration, Params, Profile};
use crate::measures::{exact_gaussian_measure, GaussianMeasureSpec, GlauberSampler, MeasureVector};
use crate::stats::batch_means;

fn check_positive(mu: &MeasureVector) -> Result<()> {
    if mu.probs.iter().any(|&p| p <= 0.0) {
        return Err(LabError::InvalidArgument("measure must be strictly positive".into()));
    }
    Ok(())
}

/// `ν(√f (-L) √f)` with `f = dμ/dν` for the reversible product measure `ν`.
pub fn dv_reversible(mu: &MeasureVector, gen: &GeneratorMatrix) -> Result<f64> {
    let p = &gen.profile.params;
    if !p.is_equilibrium() || gen.biased {
        return Err(LabError::InvalidParams("closed form needs equal reservoir densities and no bias".into()));
    }
    check_positive(mu)?;
    let nu = MeasureVector::product(&gen.profile)?;
    let rf: Vec<f64> = mu.probs.iter().zip(&nu.probs).map(|(m, n)| (m / n).sqrt()).collect();
    let mut s = 0.0;
    for (i, row) in gen.rows.iter().enumerate() {
        for &(j, r) in row {
            s += nu.probs[i] * r * (rf[j] - rf[i]).powi(2);
        }
    }
    Ok(0.5 * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvReport {
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

fn dv_objective(mu: &[f64], gen: &GeneratorMatrix, h: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, row) in gen.rows.iter().enumerate() {
        for &(j, r) in row {
            s -= mu[i] * r * ((h[j] - h[i]).exp() - 1.0);
        }
    }
    s
}

fn dv_ascent(mu: &[f64], gen: &GeneratorMatrix, mut h: Vec<f64>) -> DvReport {
    let n = h.len();
    let mut value = dv_objective(mu, gen, &h);
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it;
        let mut g = DVector::zeros(n);
        let mut hess: DMatrix<f64> = DMatrix::zeros(n, n);
        for (i, row) in gen.rows.iter().enumerate() {
            for &(j, r) in row {
                let w = mu[i] * r * (h[j] - h[i]).exp();
                g[j] -= w;
                g[i] += w;
                hess[(i, i)] += w;
                hess[(j, j)] += w;
                hess[(i, j)] -= w;
                hess[(j, i)] -= w;
            }
        }
        grad_norm = g.norm();
        if grad_norm < 1e-13 {
            break;
        }
        // The objective is invariant under constant shifts of h.
        let shift = hess.diagonal().max().max(1e-300) / n as f64;
        hess.add_scalar_mut(shift);
        let dir = match hess.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => g.clone(),
        };
        let slope = g.dot(&dir);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = h.iter().zip(dir.iter()).map(|(a, d)| a + t * d).collect();
            let v = dv_objective(mu, gen, &trial);
            if v >= value + 1e-4 * t * slope || t < 1e-12 {
                if v >= value {
                    h = trial;
                    value = v;
                }
                break;
            }
            t *= 0.5;
        }
        if t < 1e-12 {
            break;
        }
    }
    DvReport { value, gradient_norm: grad_norm, iterations }
}

/// `sup_{u>0} μ(-Lu/u)` by Newton ascent in `log u` from `h = 0` and
/// `restarts` random starting points; returns the best value.
pub fn dv_variational<R: Rng + ?Sized>(
    mu: &MeasureVector,
    gen: &GeneratorMatrix,
    restarts: usize,
    rng: &mut R,
) -> Result<DvReport> {
    check_positive(mu)?;
    let n = gen.states();
    let mut best = dv_ascent(&mu.probs, gen, vec![0.0; n]);
    for _ in 0..restarts {
        let start: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let r = dv_ascent(&mu.probs, gen, start);
        if r.value > best.value {
            best = r;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DvMode {
    Exact,
    Continuum,
}

/// Density functional for the product measure with profile `ρ̂`.
///
/// `Exact` gives the signed finite-`N` value (nonpositive); `Continuum` gives
/// the rate `(N/8)∫σ(ρ̂)|λ̂'|²` with `λ̂ = logit ρ̂`.
pub fn density_dv(rho_hat: impl Fn(f64) -> f64, params: &Params, mode: DvMode) -> Result<f64> {
    let n = params.n as f64;
    match mode {
        DvMode::Exact => {
            let l = params.sites();
            let r: Vec<f64> = (0..l).map(|o| rho_hat(params.position(o))).collect();
            if r.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                return Err(LabError::InvalidArgument("profile must lie in (0,1)".into()));
            }
            let mut s = 0.0;
            for o in 0..l - 1 {
                let a = n * (logit(r[o + 1]) - logit(r[o])) / (2.0 * n);
                s += r[o] * (1.0 - r[o + 1]) * (a.exp() - 1.0).powi(2);
                s += (1.0 - r[o]) * r[o + 1] * ((-a).exp() - 1.0).powi(2);
            }
            Ok(-n * n / 4.0 * s)
        }
        DvMode::Continuum => {
            let m = 20_000;
            let dx = 2.0 / m as f64;
            let eps = 1e-5;
            let mut s = 0.0;
            for k in 0..m {
                let x = -1.0 + (k as f64 + 0.5) * dx;
                let dl = (logit(rho_hat(x + eps)) - logit(rho_hat(x - eps))) / (2.0 * eps);
                s += sigma(rho_hat(x)) * dl * dl * dx;
            }
            Ok(n / 8.0 * s)
        }
    }
}

/// Values of `Σ_i c(η, i, i+1) (Σ_{j∉{i,i+1}} η̄_j ∂₁φ_{ij})²` for one configuration.
fn correlation_integrand(eb: &[f64], eta: &[u8], dphi: &[Vec<f64>]) -> f64 {
    let l = eb.len();
    let mut s = 0.0;
    for i in 0..l - 1 {
        if eta[i] == eta[i + 1] {
            continue;
        }
        let row = &dphi[i];
        let mut t = 0.0;
        for j in 0..l {
            if j != i && j != i + 1 {
                t += eb[j] * row[j];
            }
        }
        s += t * t;
    }
    s
}

/// Correlation functional at equilibrium density `ρ` for the tilted measure
/// `ν_{ρ,φ} ∝ exp[2Π(φ)] ν_ρ`.
///
/// `Exact` enumerates (N ≤ 7); `Continuum` evaluates
/// `-(1/8)∫σ(ρ)⟨∂₁φ(z,·), (σ(ρ)⁻¹ - φ)⁻¹ ∂₁φ(z,·)⟩ dz` on a grid of `m` cells.
pub fn correlation_dv(phi: impl Fn(f64, f64) -> f64, params: &Params, mode: DvMode) -> Result<f64> {
    if !params.is_equilibrium() {
        return Err(LabError::InvalidParams("correlation functional is defined at equilibrium".into()));
    }
    let rho = params.rho_minus;
    match mode {
        DvMode::Exact => {
            let profile = crate::lattice::steady_profile(params);
            let mut spec = GaussianMeasureSpec::from_fn(profile.clone(), &phi);
            let mu = exact_gaussian_measure(&mut spec)?;
            let dphi = lattice_d1(params, &phi);
            let l = params.sites();
            let e: f64 = mu
                .probs
                .iter()
                .enumerate()
                .map(|(code, &p)| {
                    let c = Configuration::from_code(code, l);
                    p * correlation_integrand(&c.centered_all(&profile), &c.eta, &dphi)
                })
                .sum();
            let n = params.n as f64;
            Ok(-e / (16.0 * n * n))
        }
        DvMode::Continuum => correlation_dv_continuum(&phi, rho, 400),
    }
}

fn lattice_d1(params: &Params, phi: &impl Fn(f64, f64) -> f64) -> Vec<Vec<f64>> {
    let l = params.sites();
    let n = params.n as f64;
    let sym = |x: f64, y: f64| 0.5 * (phi(x, y) + phi(y, x));
    (0..l - 1)
        .map(|i| {
            let (xi, xn) = (params.position(i), params.position(i + 1));
            (0..l).map(|j| n * (sym(xn, params.position(j)) - sym(xi, params.position(j)))).collect()
        })
        .collect()
}

/// Monte Carlo version of the finite-`N` correlation functional under the
/// tilted measure, sampled by single-site heat bath.
pub fn correlation_dv_mc<R: Rng + ?Sized>(
    phi: impl Fn(f64, f64) -> f64,
    profile: &Profile,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let params = profile.params;
    if !params.is_equilibrium() {
        return Err(LabError::InvalidParams("correlation functional is defined at equilibrium".into()));
    }
    let spec = GaussianMeasureSpec::from_fn(profile.clone(), &phi);
    let mut sampler = GlauberSampler::new(spec, rng);
    let dphi = lattice_d1(&params, &phi);
    let n = params.n as f64;
    let values: Vec<f64> = sampler
        .samples(samples, rng)
        .iter()
        .map(|c| -correlation_integrand(&c.centered_all(profile), &c.eta, &dphi) / (16.0 * n * n))
        .collect();
    Ok(batch_means(&values, 32))
}

fn correlation_dv_continuum(phi: &impl Fn(f64, f64) -> f64, rho: f64, m: usize) -> Result<f64> {
    let s = sigma(rho);
    let d = 2.0 / m as f64;
    let x: Vec<f64> = (1..m).map(|a| -1.0 + a as f64 * d).collect();
    let k = x.len();
    let sym = |a: f64, b: f64| 0.5 * (phi(a, b) + phi(b, a));
    let u = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 / s } else { 0.0 } - d * sym(x[i], x[j]));
    let c = u
        .cholesky()
        .ok_or_else(|| LabError::Admissibility("σ⁻¹ - φ is not positive definite".into()))?
        .inverse();
    let eps = 1e-6;
    let mut total = 0.0;
    for &z in &x {
        let f = DVector::from_iterator(k, x.iter().map(|&y| (sym(z + eps, y) - sym(z - eps, y)) / (2.0 * eps)));
        // C acts on nodal values: (Cψ)_a = Σ_b C_ab ψ_b
        total += d * s * d * f.dot(&(&c * &f));
    }
    Ok(-total / 8.0)
}
