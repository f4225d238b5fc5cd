//! Relative-entropy bookkeeping for the forward equation on small lattices.

use serde::{Deserialize, Serialize};

use crate::dynamics::{build_generator, evolve_master, GeneratorMatrix};
use crate::error::{LabError, Result};
use crate::lattice::{LatticeKernel, Profile};
use crate::measures::{exact_gaussian_measure, GaussianMeasureSpec, MeasureVector};
use crate::stats::ols_slope;

/// `Σ μ log(μ/ν)`, `+∞` when `μ` charges a state where `ν` vanishes.
pub fn relative_entropy(mu: &MeasureVector, nu: &MeasureVector) -> f64 {
    let mut h = 0.0;
    for (&m, &n) in mu.probs.iter().zip(&nu.probs) {
        if m > 0.0 {
            if n <= 0.0 {
                return f64::INFINITY;
            }
            h += m * (m / n).ln();
        }
    }
    h.max(0.0)
}

/// Carré du champ of the generator at `√f`:
/// `(1/2) Σ_η ν(η) Σ_{η'} r(η, η') (√f(η') - √f(η))²`.
pub fn carre_du_champ(f: &[f64], gen: &GeneratorMatrix, nu: &MeasureVector) -> f64 {
    let mut s = 0.0;
    for (i, row) in gen.rows.iter().enumerate() {
        let a = f[i].sqrt();
        for &(j, r) in row {
            s += nu.probs[i] * r * (f[j].sqrt() - a).powi(2);
        }
    }
    0.5 * s
}

/// `(L*𝟙)(η) = Σ_{η'} ν(η') r(η', η)/ν(η) - Σ_{η'} r(η, η')`, the adjoint
/// in `L²(ν)` applied to the constant function.
pub fn adjoint_one(gen: &GeneratorMatrix, nu: &MeasureVector) -> Vec<f64> {
    let mut inflow = vec![0.0; gen.states()];
    for (i, row) in gen.rows.iter().enumerate() {
        for &(j, r) in row {
            inflow[j] += nu.probs[i] * r;
        }
    }
    inflow.iter().zip(&nu.probs).zip(&gen.diag).map(|((a, n), d)| a / n + d).collect()
}

/// One checkpoint of the entropy balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductionPoint {
    pub t: f64,
    pub entropy: f64,
    /// `∂_t H` from the forward equation.
    pub derivative: f64,
    /// `-2 ν(Γ(√f))`
    pub dissipation: f64,
    /// `ν(f L*𝟙)`
    pub source: f64,
    /// `bound - derivative`; nonnegative when the inequality holds.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductionReport {
    pub points: Vec<ProductionPoint>,
    pub worst_margin: f64,
}

/// Checks `∂_t H(f_t ν | ν) ≤ -2ν(Γ(√f_t)) + ν(f_t L*𝟙)` along a computed path.
pub fn entropy_production_check(
    gen: &GeneratorMatrix,
    nu: &MeasureVector,
    times: &[f64],
    path: &[MeasureVector],
) -> Result<ProductionReport> {
    if times.len() != path.len() {
        return Err(LabError::InvalidArgument("times and path lengths differ".into()));
    }
    if nu.probs.iter().any(|&p| p <= 0.0) {
        return Err(LabError::InvalidArgument("reference measure must be strictly positive".into()));
    }
    let lstar = adjoint_one(gen, nu);
    let mut points = Vec::with_capacity(path.len());
    for (&t, mu) in times.iter().zip(path) {
        let f: Vec<f64> = mu.probs.iter().zip(&nu.probs).map(|(m, n)| (m / n).max(0.0)).collect();
        let flow = gen.apply_transpose(&mu.probs);
        let derivative: f64 = flow
            .iter()
            .zip(&f)
            .map(|(d, &fv)| if fv > 0.0 { d * fv.ln() } else { 0.0 })
            .sum();
        let dissipation = -2.0 * carre_du_champ(&f, gen, nu);
        let source: f64 = nu.probs.iter().zip(&f).zip(&lstar).map(|((n, fv), l)| n * fv * l).sum();
        points.push(ProductionPoint {
            t,
            entropy: relative_entropy(mu, nu),
            derivative,
            dissipation,
            source,
            margin: dissipation + source - derivative,
        });
    }
    let worst_margin = points.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
    Ok(ProductionReport { points, worst_margin })
}

/// Entropy relaxation from the product measure towards a reference `ν_g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropySeries {
    pub n: usize,
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub report: ProductionReport,
    /// `H` at the last time.
    pub plateau: f64,
    /// `H` moved by less than 1% over the last decade of times.
    pub settled: bool,
    /// Fitted exponential rate of `H(t) - H(∞)`.
    pub decay_rate: f64,
    /// `ν(L*𝟙)`, zero up to rounding.
    pub adjoint_mass: f64,
    /// `‖L*𝟙‖_{L²(ν)}`
    pub adjoint_norm: f64,
}

/// Evolves the product measure under the plain (or `h`-biased) dynamics and
/// records `H(f_t ν_g | ν_g)`; `g` is the lattice kernel of the reference.
pub fn entropy_decay_experiment(
    profile: &Profile,
    g: &LatticeKernel,
    h: Option<&LatticeKernel>,
    times: &[f64],
) -> Result<EntropySeries> {
    let gen = build_generator(profile, h)?;
    let mut spec = GaussianMeasureSpec::new(g.clone(), profile.clone())?;
    let nu = exact_gaussian_measure(&mut spec)?;
    let start = MeasureVector::product(profile)?;
    let path = evolve_master(&gen, &start, times)?;
    let report = entropy_production_check(&gen, &nu, times, &path)?;
    let entropy: Vec<f64> = report.points.iter().map(|p| p.entropy).collect();
    let plateau = *entropy.last().unwrap_or(&0.0);
    let h0 = entropy.first().copied().unwrap_or(0.0);
    let (ts, ls): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&entropy)
        .filter(|(_, &e)| e - plateau > 1e-3 * (h0 - plateau).abs() && e - plateau > 1e-12)
        .map(|(&t, &e)| (t, (e - plateau).ln()))
        .unzip();
    let t_end = *times.last().unwrap_or(&0.0);
    let settled = times
        .iter()
        .zip(&entropy)
        .filter(|(&t, _)| t >= 0.1 * t_end)
        .all(|(_, &e)| (e - plateau).abs() <= 0.01 * plateau.abs());
    let decay_rate = if ts.len() >= 2 { -ols_slope(&ts, &ls) } else { f64::NAN };
    let lstar = adjoint_one(&gen, &nu);
    let adjoint_mass: f64 = nu.probs.iter().zip(&lstar).map(|(n, l)| n * l).sum();
    let adjoint_norm = nu.probs.iter().zip(&lstar).map(|(n, l)| n * l * l).sum::<f64>().sqrt();
    Ok(EntropySeries {
        n: profile.params.n,
        times: times.to_vec(),
        entropy,
        report,
        plateau,
        settled,
        decay_rate,
        adjoint_mass,
        adjoint_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::invariant_measure;
    use crate::lattice::{steady_profile, Params};

    #[test]
    fn point_mass_entropy() {
        let p = steady_profile(&Params::new(2, 0.3, 0.6).unwrap());
        let nu = MeasureVector::product(&p).unwrap();
        let mut d = vec![0.0; 8];
        d[5] = 1.0;
        let mu = MeasureVector::new(p.params, d).unwrap();
        assert!((relative_entropy(&mu, &nu) + nu.probs[5].ln()).abs() < 1e-14);
        assert_eq!(relative_entropy(&nu, &nu), 0.0);
    }

    #[test]
    fn invariant_reference_has_zero_adjoint() {
        let p = steady_profile(&Params::new(3, 0.2, 0.8).unwrap());
        let g = build_generator(&p, None).unwrap();
        let inv = invariant_measure(&g).unwrap();
        assert!(adjoint_one(&g, &inv).iter().all(|v| v.abs() < 1e-10));
        assert_eq!(carre_du_champ(&vec![1.0; 32], &g, &inv), 0.0);
    }

    #[test]
    fn equilibrium_relaxation_is_monotone() {
        let p = steady_profile(&Params::new(3, 0.4, 0.4).unwrap());
        let times: Vec<f64> = (0..20).map(|k| 0.05 * k as f64).collect();
        let s = entropy_decay_experiment(&p, &LatticeKernel::zeros(5), None, &times).unwrap();
        assert!(s.entropy.iter().all(|&e| e.abs() < 1e-12));
        assert!(s.report.worst_margin >= -1e-10);
    }
}
