use anyhow::{bail, Context, Result};
use rand::Rng;
use serde_json::{json, Value};
use ssep_core::dynamics::{build_generator, invariant_measure, kmc_run, RateState};
use ssep_core::entropy_lab::entropy_decay_experiment;
use ssep_core::fields::{KernelEstimate, PairEstimate};
use ssep_core::kernel_pde::basis::basis;
use ssep_core::kernel_pde::{g_from_k, solve_euler_lagrange, solve_main_equation, PdeContext, SymmetricKernel};
use ssep_core::measures::{
    calibrate_concentration, concentration_check, concentration_samples, exact_gaussian_measure,
    max_npoint_correlation, CorrelationTensorSpec, GaussianMeasureSpec, MeasureVector, TensorEntries,
};
use ssep_core::rates_ldp::{dv_reversible, dv_variational, eval_jh, quadratic_jh, rate_sup};
use ssep_core::rng::stream;
use ssep_core::stats::{loglog_slope, rms};
use ssep_core::{steady_profile, Configuration, LatticeKernel, Params};

use crate::config::ExperimentConfig;

/// One CSV file: the header names each column with its unit.
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub struct Artifacts {
    pub tables: Vec<Table>,
    pub report: Value,
}

fn num(v: f64) -> String {
    v.to_string()
}

fn grid_x(k: &SymmetricKernel, a: usize) -> f64 {
    -1.0 + a as f64 * k.delta()
}

fn require_seed(seed: Option<u64>, kind: &str) -> Result<u64> {
    seed.with_context(|| format!("seed: required for {kind} (set `seed` in the config or pass --seed)"))
}

/// Bias kernel on the grid, zero when none is configured.
fn bias_kernel(cfg: &ExperimentConfig, ctx: &PdeContext) -> Result<(SymmetricKernel, Vec<f64>, bool)> {
    Ok(match cfg.bias(ctx)? {
        Some(b) => (b.h, b.coefficients, true),
        None => (ctx.zeros(), Vec::new(), false),
    })
}

fn lattice_bias(cfg: &ExperimentConfig, p: &Params) -> Result<Option<LatticeKernel>> {
    let ctx = PdeContext::new(p, cfg.grid.m)?;
    let (h, _, biased) = bias_kernel(cfg, &ctx)?;
    Ok(biased.then(|| h.sample_lattice(p)))
}

pub fn pde(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let p = cfg.params()?;
    let ctx = PdeContext::new(&p, cfg.grid.m)?;
    let (h, _, _) = bias_kernel(cfg, &ctx)?;
    let opts = cfg.fixed_point();
    let el = solve_euler_lagrange(&ctx, &h, &opts)?;
    let main = solve_main_equation(&ctx, &h, &opts)?;
    let k0 = ctx.k0();
    let mut rows = Vec::new();
    for a in 0..=ctx.m() {
        for b in a..=ctx.m() {
            rows.push(vec![
                num(grid_x(&k0, a)),
                num(grid_x(&k0, b)),
                num(h.get(a, b)),
                num(el.kernel.get(a, b)),
                num(main.kernel.get(a, b)),
                num(k0.get(a, b)),
            ]);
        }
    }
    let report = json!({
        "grid": ctx.m(),
        "rho_prime": p.rho_prime(),
        "bias_sup": h.max_abs(),
        "euler_lagrange": { "iterations": el.iterations, "observed_rate": el.observed_rate() },
        "main_equation": { "iterations": main.iterations, "observed_rate": main.observed_rate() },
        "max_abs_k_minus_k0": el.kernel.max_abs_diff(&k0),
        "rate_functional": eval_jh(&ctx, &el.kernel, &h).total(),
    });
    Ok(Artifacts {
        tables: vec![Table {
            name: "kernel.csv",
            header: vec![
                "x [macroscopic position]",
                "y [macroscopic position]",
                "h [bias kernel]",
                "k_h [kernel from euler-lagrange]",
                "g_h [kernel from main equation]",
                "k0 [stationary kernel]",
            ],
            rows,
        }],
        report,
    })
}

pub fn rate(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let p = cfg.params()?;
    let ctx = PdeContext::new(&p, cfg.grid.m)?;
    let (h, coeffs, _) = bias_kernel(cfg, &ctx)?;
    let k = solve_euler_lagrange(&ctx, &h, &cfg.fixed_point())?.kernel;
    let modes = basis(ctx.m(), cfg.rate.modes);
    let r = rate_sup(&ctx, &k, &modes)?;
    let rows = r
        .coefficients
        .iter()
        .enumerate()
        .map(|(i, c)| vec![i.to_string(), num(coeffs.get(i).copied().unwrap_or(0.0)), num(*c)])
        .collect();
    let report = json!({
        "grid": ctx.m(),
        "modes": cfg.rate.modes,
        "value": r.value,
        "quadratic_form_value": quadratic_jh(&ctx, &k, &h),
        "condition": r.condition,
        "optimizer_size": r.optimizer_size,
    });
    Ok(Artifacts {
        tables: vec![Table {
            name: "rate.csv",
            header: vec!["mode [index]", "input [coefficient]", "recovered [coefficient]"],
            rows,
        }],
        report,
    })
}

pub fn dv(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Artifacts> {
    let seed = require_seed(seed, "dv")?;
    let p = cfg.params()?;
    let profile = steady_profile(&p);
    let h = lattice_bias(cfg, &p)?;
    let gen = build_generator(&profile, h.as_ref())?;
    let reversible = p.is_equilibrium() && h.is_none();
    let mut rng = stream(seed, 0);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for s in 0..cfg.dv.samples {
        let w: Vec<f64> = (0..gen.states()).map(|_| 0.05 + rng.random::<f64>()).collect();
        let mu = MeasureVector::new(p, w)?;
        let v = dv_variational(&mu, &gen, cfg.dv.restarts, &mut rng)?.value;
        let closed = if reversible { Some(dv_reversible(&mu, &gen)?) } else { None };
        if let Some(d) = closed {
            worst = worst.max((v - d).abs());
        }
        rows.push(vec![s.to_string(), num(v), closed.map_or_else(String::new, num)]);
    }
    let inv = invariant_measure(&gen)?;
    let at_invariant = dv_variational(&inv, &gen, cfg.dv.restarts, &mut rng)?.value;
    let report = json!({
        "states": gen.states(),
        "reversible": reversible,
        "max_abs_variational_minus_dirichlet_form": if reversible { json!(worst) } else { Value::Null },
        "variational_at_invariant": at_invariant,
    });
    Ok(Artifacts {
        tables: vec![Table {
            name: "dv.csv",
            header: vec!["sample [index]", "variational [per unit time]", "dirichlet_form [per unit time]"],
            rows,
        }],
        report,
    })
}

pub fn entropy(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let e = &cfg.entropy;
    let mut times = vec![0.0];
    let span = e.t_max.log10() + 3.0;
    times.extend((0..e.points).map(|k| 10f64.powf(-3.0 + span * k as f64 / (e.points - 1) as f64)));
    let mut rows = Vec::new();
    let mut per_size = Vec::new();
    for &n in &e.sizes {
        let p = Params::new(n, cfg.params.rho_minus, cfg.params.rho_plus).context("entropy.sizes")?;
        let profile = steady_profile(&p);
        let g = match e.reference.as_str() {
            "k0" => g_from_k(&p, &PdeContext::new(&p, cfg.grid.m)?.k0())?.sample_lattice(&p),
            _ => LatticeKernel::zeros(p.sites()),
        };
        let h = lattice_bias(cfg, &p)?;
        let s = entropy_decay_experiment(&profile, &g, h.as_ref(), &times)?;
        for pt in &s.report.points {
            rows.push(vec![
                n.to_string(),
                num(pt.t),
                num(pt.entropy),
                num(pt.derivative),
                num(pt.dissipation),
                num(pt.source),
                num(pt.margin),
            ]);
        }
        per_size.push(json!({
            "n": n,
            "plateau": s.plateau,
            "settled": s.settled,
            "decay_rate": s.decay_rate,
            "worst_margin": s.report.worst_margin,
            "adjoint_mass": s.adjoint_mass,
            "adjoint_norm": s.adjoint_norm,
        }));
    }
    Ok(Artifacts {
        tables: vec![Table {
            name: "entropy.csv",
            header: vec![
                "n [half-width]",
                "t [macroscopic time]",
                "entropy [nats]",
                "derivative [nats per unit time]",
                "dissipation [nats per unit time]",
                "source [nats per unit time]",
                "margin [nats per unit time]",
            ],
            rows,
        }],
        report: json!({ "reference": e.reference, "sizes": per_size }),
    })
}

pub fn measure(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Artifacts> {
    let seed = require_seed(seed, "measure")?;
    let m = &cfg.measure;
    let a = m.amplitude;
    let g = move |x: f64, y: f64| -a * (std::f64::consts::FRAC_PI_2 * x).cos() * (std::f64::consts::FRAC_PI_2 * y).cos();
    let mut rows = Vec::new();
    let mut corr = [Vec::new(), Vec::new()];
    let mut partition_ok = true;
    for &n in &m.sizes {
        let p = Params::new(n, cfg.params.rho_minus, cfg.params.rho_plus).context("measure.sizes")?;
        let profile = steady_profile(&p);
        let mut spec = GaussianMeasureSpec::from_fn(profile.clone(), g);
        let mu = exact_gaussian_measure(&mut spec)?;
        let log_z = spec.log_partition.unwrap_or(f64::NAN);
        let sup = spec.g.sup_norm_off_diagonal();
        partition_ok &= log_z <= sup;
        let c2 = max_npoint_correlation(&mu, &profile, 2)?;
        let c3 = max_npoint_correlation(&mu, &profile, 3)?;
        corr[0].push(c2);
        corr[1].push(c3);
        rows.push(vec![n.to_string(), num(log_z), num(sup), num(c2), num(c3)]);
    }
    let nf: Vec<f64> = m.sizes.iter().map(|&n| n as f64).collect();
    let mut rng = stream(seed, 0);
    let tensor = |n: usize| -> Result<_> {
        let p = Params::new(n, cfg.params.rho_minus, cfg.params.rho_plus).context("measure.concentration_n")?;
        Ok((CorrelationTensorSpec::new(p, 2, vec![0], TensorEntries::OffDiagonalConstant(1.0))?, steady_profile(&p)))
    };
    let (small, small_profile) = tensor(m.concentration_n)?;
    let c = calibrate_concentration(&concentration_samples(&small, &small_profile, m.samples, &mut rng), m.target);
    let (large, large_profile) = tensor(4 * m.concentration_n)?;
    let stat = concentration_check(&large, &large_profile, c, m.samples, &mut rng);
    let report = json!({
        "partition_bound_holds": partition_ok,
        "slope_two_point": loglog_slope(&nf, &corr[0]),
        "slope_three_point": loglog_slope(&nf, &corr[1]),
        "concentration": { "c": c, "n": 4 * m.concentration_n, "mean": stat.mean, "stderr": stat.stderr },
    });
    Ok(Artifacts {
        tables: vec![Table {
            name: "correlations.csv",
            header: vec![
                "n [half-width]",
                "log_partition [nats]",
                "sup_g [nats]",
                "max_two_point [correlation]",
                "max_three_point [correlation]",
            ],
            rows,
        }],
        report,
    })
}

struct Replica {
    estimate: KernelEstimate,
    events: u64,
    rejected: u64,
}

fn run_replica(cfg: &ExperimentConfig, p: &Params, h: Option<&LatticeKernel>, seed: u64, r: usize) -> Result<Replica> {
    let s = &cfg.simulate;
    let profile = steady_profile(p);
    let mut rng = stream(seed, r as u64);
    let mut state = RateState::new(Configuration::empty(p.sites()), profile.clone(), h.cloned());
    if s.burn_in > 0.0 {
        kmc_run(&mut state, s.burn_in, &mut [], &mut rng)?;
    }
    let stride = KernelEstimate::stride_for(p, s.max_pairs);
    let mut estimate = KernelEstimate::new(&profile, stride, Some(s.time), s.batches);
    let run = kmc_run(&mut state, s.time, &mut [&mut estimate], &mut rng)?;
    Ok(Replica { estimate, events: run.events, rejected: run.rejected })
}

pub fn simulate(cfg: &ExperimentConfig, seed: Option<u64>, threads: usize) -> Result<Artifacts> {
    let seed = require_seed(seed, "simulate")?;
    let p = cfg.params()?;
    let ctx = PdeContext::new(&p, cfg.grid.m)?;
    let (h_grid, _, biased) = bias_kernel(cfg, &ctx)?;
    let h = biased.then(|| h_grid.sample_lattice(&p));
    let reference = if biased { solve_euler_lagrange(&ctx, &h_grid, &cfg.fixed_point())?.kernel } else { ctx.k0() };

    let replicas = cfg.simulate.replicas;
    let workers = threads.clamp(1, replicas);
    let mut slots: Vec<Option<Result<Replica>>> = (0..replicas).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = replicas.div_ceil(workers);
        for (w, part) in slots.chunks_mut(chunk).enumerate() {
            let (p, h) = (&p, h.as_ref());
            scope.spawn(move || {
                for (k, slot) in part.iter_mut().enumerate() {
                    *slot = Some(run_replica(cfg, p, h, seed, w * chunk + k));
                }
            });
        }
    });
    let mut results = slots.into_iter().map(|s| s.expect("replica not run"));
    let first = results.next().expect("at least one replica")?;
    let (mut estimate, mut events, mut rejected) = (first.estimate, first.events, first.rejected);
    for r in results {
        let r = r?;
        estimate.merge(&r.estimate);
        events += r.events;
        rejected += r.rejected;
    }
    let pairs: Vec<PairEstimate> = estimate.kernel()?;
    if pairs.is_empty() {
        bail!("simulate.max_pairs: no pair is tracked");
    }
    let far: Vec<&PairEstimate> = pairs.iter().filter(|e| e.j - e.i >= 4).collect();
    let devs: Vec<f64> = far.iter().map(|e| e.value - reference.eval(e.x, e.y)).collect();
    let beyond = far.iter().zip(&devs).filter(|(e, d)| d.abs() > 3.0 * e.stderr).count();
    let rows = pairs
        .iter()
        .map(|e| {
            vec![
                e.i.to_string(),
                e.j.to_string(),
                num(e.x),
                num(e.y),
                num(e.value),
                num(e.stderr),
                num(reference.eval(e.x, e.y)),
            ]
        })
        .collect();
    let report = json!({
        "replicas": replicas,
        "total_time": cfg.simulate.time * replicas as f64,
        "events": events,
        "rejected_proposals": rejected,
        "pairs": pairs.len(),
        "far_pairs": far.len(),
        "rms_deviation_far": if devs.is_empty() { Value::Null } else { json!(rms(&devs)) },
        "far_pairs_beyond_3_stderr": beyond,
        "reference": if biased { "euler-lagrange" } else { "stationary" },
    });
    Ok(Artifacts {
        tables: vec![Table {
            name: "pairs.csv",
            header: vec![
                "i [site offset]",
                "j [site offset]",
                "x [macroscopic position]",
                "y [macroscopic position]",
                "k_hat [empirical kernel]",
                "stderr [kernel batch-means error]",
                "k_ref [reference kernel]",
            ],
            rows,
        }],
        report,
    })
}
