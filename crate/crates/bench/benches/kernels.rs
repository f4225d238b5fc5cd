use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ssep_core::dynamics::{kmc_run, RateState};
use ssep_core::kernel_pde::{g_from_k, solve_euler_lagrange, solve_main_equation, BiasSpec, FixedPointOptions, PdeContext};
use ssep_core::rng::stream;
use ssep_core::{steady_profile, Configuration, Params};

fn kmc(c: &mut Criterion) {
    let p = Params::new(64, 0.2, 0.8).unwrap();
    let profile = steady_profile(&p);
    let ctx = PdeContext::new(&p, 64).unwrap();
    let h = BiasSpec::from_modes(&ctx, &[1.0, 0.5]).rescaled(&ctx, 0.05).h.sample_lattice(&p);
    let mut group = c.benchmark_group("kmc_n64_t0.01");
    for (name, bias) in [("unbiased", None), ("biased", Some(h))] {
        let mut state = RateState::new(Configuration::empty(p.sites()), profile.clone(), bias);
        let mut rng = stream(1, 0);
        kmc_run(&mut state, 5.0, &mut [], &mut rng).unwrap();
        group.bench_function(name, |b| b.iter(|| kmc_run(&mut state, 0.01, &mut [], &mut rng).unwrap()));
    }
    group.finish();
}

fn kernel_solves(c: &mut Criterion) {
    let p = Params::new(10, 0.2, 0.8).unwrap();
    let opts = FixedPointOptions::default();
    let mut group = c.benchmark_group("kernel_pde");
    group.sample_size(10);
    for m in [32usize, 64] {
        let ctx = PdeContext::new(&p, m).unwrap();
        let h = BiasSpec::from_modes(&ctx, &[1.0, 0.5, -0.3]).rescaled(&ctx, 0.05).h;
        group.bench_with_input(BenchmarkId::new("euler_lagrange", m), &h, |b, h| {
            b.iter(|| solve_euler_lagrange(&ctx, black_box(h), &opts).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("main_equation", m), &h, |b, h| {
            b.iter(|| solve_main_equation(&ctx, black_box(h), &opts).unwrap())
        });
        let k0 = ctx.k0();
        group.bench_with_input(BenchmarkId::new("g_from_k", m), &k0, |b, k| b.iter(|| g_from_k(&p, black_box(k)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, kmc, kernel_solves);
criterion_main!(benches);
