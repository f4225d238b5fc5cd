//! Generator matrices over all configurations, stationary laws and the
//! forward equation, for small lattices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rates::{plain_rate, Event, RateState};
use crate::error::{LabError, Result};
use crate::lattice::{Configuration, LatticeKernel, Profile};
use crate::measures::{check_exact_size, MeasureVector};

/// Sparse `N²L_h` over configuration codes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    pub profile: Profile,
    pub biased: bool,
    /// Off-diagonal `(target, rate)` per source state.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub diag: Vec<f64>,
}

/// Builds `N²L_h` (plain `N²L` when `h` is `None`).
pub fn build_generator(profile: &Profile, h: Option<&LatticeKernel>) -> Result<GeneratorMatrix> {
    let p = profile.params;
    check_exact_size(&p)?;
    let l = p.sites();
    let states = 1usize << l;
    let mut rows = Vec::with_capacity(states);
    let mut diag = Vec::with_capacity(states);
    for code in 0..states {
        let c = Configuration::from_code(code, l);
        let s = RateState::new(c.clone(), profile.clone(), h.cloned());
        let mut row = Vec::with_capacity(l + 1);
        let mut out = 0.0;
        for k in 0..=l {
            let e = Event::from_index(k, l);
            let r = s.biased_rate(e);
            if r > 0.0 {
                row.push((e.apply(&c).code(), r));
                out += r;
            }
        }
        rows.push(row);
        diag.push(-out);
    }
    Ok(GeneratorMatrix { profile: profile.clone(), biased: h.is_some(), rows, diag })
}

impl GeneratorMatrix {
    pub fn states(&self) -> usize {
        self.diag.len()
    }

    /// `(L f)(η)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.diag)
            .enumerate()
            .map(|(i, (row, d))| d * f[i] + row.iter().map(|&(j, r)| r * f[j]).sum::<f64>())
            .collect()
    }

    /// `(μ L)(η)`.
    pub fn apply_transpose(&self, mu: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = mu.iter().zip(&self.diag).map(|(m, d)| m * d).collect();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                out[j] += mu[i] * r;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.states();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            m[(i, i)] = self.diag[i];
            for &(j, r) in row {
                m[(i, j)] += r;
            }
        }
        m
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, d| m.max(-d))
    }

    /// Plain rate of every transition, for carré du champ computations.
    pub fn plain_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let p = &self.profile.params;
        let l = p.sites();
        let scale = 0.5 * (p.n * p.n) as f64;
        (0..self.states())
            .map(|code| {
                let c = Configuration::from_code(code, l);
                (0..=l)
                    .filter_map(|k| {
                        let e = Event::from_index(k, l);
                        let r = plain_rate(&c, e, &self.profile);
                        (r > 0.0).then(|| (e.apply(&c).code(), scale * r))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Largest state space solved by dense factorisation.
const DENSE_LIMIT: usize = 2048;

/// Solves `μ L = 0`, `Σ μ = 1`.
pub fn invariant_measure(gen: &GeneratorMatrix) -> Result<MeasureVector> {
    let n = gen.states();
    let mu = if n <= DENSE_LIMIT {
        let mut a = gen.to_dense().transpose();
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let lu = a.clone().lu();
        let mut x = lu.solve(&b).ok_or_else(|| LabError::Numerical("singular generator".into()))?;
        let r = &b - &a * &x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
        x.iter().map(|v| v.max(0.0)).collect::<Vec<f64>>()
    } else {
        power_iteration(gen)?
    };
    let m = MeasureVector::new(gen.profile.params, mu)?;
    let res = gen.apply_transpose(&m.probs).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if res > 1e-12 * gen.max_exit_rate().max(1.0) {
        return Err(LabError::Numerical(format!("stationary residual {res:.3e}")));
    }
    Ok(m)
}

fn power_iteration(gen: &GeneratorMatrix) -> Result<Vec<f64>> {
    let n = gen.states();
    let q = 1.05 * gen.max_exit_rate();
    let mut mu = vec![1.0 / n as f64; n];
    for _ in 0..2_000_000 {
        let ml = gen.apply_transpose(&mu);
        let res = ml.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if res <= 1e-13 * q {
            return Ok(mu);
        }
        for (m, d) in mu.iter_mut().zip(&ml) {
            *m += d / q;
        }
    }
    Err(LabError::Numerical("power iteration did not converge".into()))
}

/// Forward equation `∂_t μ = μ L` by adaptive Dormand-Prince steps with
/// local error at most `1e-10`; returns `μ_t` at every time of `t_grid`.
pub fn evolve_master(gen: &GeneratorMatrix, initial: &MeasureVector, t_grid: &[f64]) -> Result<Vec<MeasureVector>> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(LabError::InvalidArgument("time grid must be nonnegative and increasing".into()));
    }
    const TOL: f64 = 1e-10;
    const A: [&[f64]; 6] = [
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let n = gen.states();
    let mut mu = initial.probs.clone();
    let mut t = 0.0;
    let mut h = 0.5 / gen.max_exit_rate().max(1.0);
    let mut out = Vec::with_capacity(t_grid.len());
    let mut k1 = gen.apply_transpose(&mu);
    for &target in t_grid {
        while t < target {
            let step = h.min(target - t);
            if step < 1e-14 * target.max(1.0) && target - t > step {
                return Err(LabError::Numerical(format!("step size underflow at t = {t}")));
            }
            let mut ks = vec![k1.clone()];
            for a in A.iter() {
                let y: Vec<f64> = (0..n)
                    .map(|i| mu[i] + step * a.iter().zip(&ks).map(|(c, k)| c * k[i]).sum::<f64>())
                    .collect();
                ks.push(gen.apply_transpose(&y));
            }
            // stage 7 is evaluated at the fifth-order solution
            let y5: Vec<f64> = (0..n)
                .map(|i| mu[i] + step * A[5].iter().zip(&ks).map(|(c, k)| c * k[i]).sum::<f64>())
                .collect();
            let err = (0..n)
                .map(|i| (step * E.iter().zip(&ks).map(|(c, k)| c * k[i]).sum::<f64>()).abs())
                .fold(0.0, f64::max);
            if err <= TOL {
                t += step;
                let total: f64 = y5.iter().sum();
                mu = y5.iter().map(|v| v / total).collect();
                k1 = match ks.pop() {
                    Some(k) if (total - 1.0).abs() <= 1e-12 => k,
                    _ => gen.apply_transpose(&mu),
                };
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * (TOL / err).powf(0.2)).clamp(0.2, 5.0) };
            h = step * factor;
        }
        out.push(MeasureVector { params: initial.params, probs: mu.clone() });
    }
    Ok(out)
}
