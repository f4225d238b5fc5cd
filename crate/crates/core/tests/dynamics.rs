use proptest::prelude::*;
use rand::Rng;
use ssep_core::dynamics::{
    build_generator, evolve_master, invariant_measure, kmc_run, log_rn_derivative, Event, Observer, PathRecorder,
    RateState,
};
use ssep_core::measures::MeasureVector;
use ssep_core::rng::stream;
use ssep_core::stats::batch_mean_stderr;
use ssep_core::{steady_profile, Configuration, LatticeKernel, Params};

/// Time spent in each configuration code.
struct StateTimes(Vec<f64>);

impl Observer for StateTimes {
    fn observe(&mut self, state: &RateState, dt: f64, _event: Option<Event>) {
        self.0[state.config.code()] += dt;
    }
}

fn occupation_fractions(h: Option<LatticeKernel>, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let p = Params::new(2, 0.2, 0.8).unwrap();
    let profile = steady_profile(&p);
    let mut rng = stream(seed, 0);
    let mut state = RateState::new(Configuration::empty(3), profile, h);
    kmc_run(&mut state, 5.0, &mut [], &mut rng).unwrap();
    let batches: Vec<Vec<f64>> = (0..20)
        .map(|_| {
            let mut obs = StateTimes(vec![0.0; 8]);
            kmc_run(&mut state, 100.0, &mut [&mut obs], &mut rng).unwrap();
            obs.0.iter().map(|t| t / 100.0).collect()
        })
        .collect();
    (0..8)
        .map(|s| batch_mean_stderr(&batches.iter().map(|b| b[s]).collect::<Vec<_>>()))
        .unzip()
}

#[test]
fn simulated_state_fractions_match_linear_solve() {
    let p = Params::new(2, 0.2, 0.8).unwrap();
    let profile = steady_profile(&p);
    let h = LatticeKernel::from_fn(&p, |x, y| 4.0 * (1.0 - x * y));
    for (k, bias) in [None, Some(h)].into_iter().enumerate() {
        let exact = invariant_measure(&build_generator(&profile, bias.as_ref()).unwrap()).unwrap();
        let (mean, se) = occupation_fractions(bias, 10 + k as u64);
        for s in 0..8 {
            assert!((mean[s] - exact.probs[s]).abs() <= 4.0 * se[s], "state {s}: {} vs {}", mean[s], exact.probs[s]);
        }
    }
}

#[test]
fn invariant_measure_has_affine_mean_at_n2() {
    let profile = steady_profile(&Params::new(2, 0.2, 0.8).unwrap());
    let mu = invariant_measure(&build_generator(&profile, None).unwrap()).unwrap();
    for (m, r) in mu.occupations().iter().zip(&profile.rho_bar) {
        assert!((m - r).abs() < 1e-10);
    }
}

#[test]
fn stationary_two_point_function_is_negative() {
    let profile = steady_profile(&Params::new(3, 0.2, 0.8).unwrap());
    let mu = invariant_measure(&build_generator(&profile, None).unwrap()).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            if i != j {
                let c = 3.0 * mu.expectation(|c| c.centered_at(&profile, i) * c.centered_at(&profile, j));
                assert!(c < 0.0, "({i},{j}) {c}");
            }
        }
    }
}

#[test]
fn forward_equation_reaches_invariant_measure() {
    let p = Params::new(3, 0.1, 0.7).unwrap();
    let profile = steady_profile(&p);
    let h = LatticeKernel::from_fn(&p, |x, y| (x + y).sin());
    let gen = build_generator(&profile, Some(&h)).unwrap();
    let start = MeasureVector::new(p, (0..32).map(|c| if c == 0 { 1.0 } else { 0.0 }).collect()).unwrap();
    let path = evolve_master(&gen, &start, &[0.0, 30.0]).unwrap();
    let inv = invariant_measure(&gen).unwrap();
    assert!(path[1].total_variation(&inv) < 1e-8);
}

#[test]
fn girsanov_density_has_unit_mean() {
    let p = Params::new(3, 0.2, 0.8).unwrap();
    let profile = steady_profile(&p);
    let h = LatticeKernel::from_fn(&p, |x, y| 1.5 * (1.0 - x * x) * (1.0 - y * y));
    let mut rng = stream(21, 0);
    let weights: Vec<f64> = (0..4000)
        .map(|_| {
            let mut state = RateState::new(Configuration::from_code(rng.random_range(0..32), 5), profile.clone(), None);
            let mut rec = PathRecorder::default();
            kmc_run(&mut state, 0.1, &mut [&mut rec], &mut rng).unwrap();
            log_rn_derivative(&rec, &profile, &h).exp()
        })
        .collect();
    let chunks: Vec<f64> = weights.chunks(100).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let (mean, se) = batch_mean_stderr(&chunks);
    assert!((mean - 1.0).abs() <= 4.0 * se, "{mean} ± {se}");
}

fn lattice_kernel(l: usize, vals: &[f64]) -> LatticeKernel {
    let mut k = LatticeKernel::zeros(l);
    let mut it = vals.iter();
    for a in 0..l {
        for b in a..l {
            k.set(a, b, *it.next().unwrap());
        }
    }
    k
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generator_rows_sum_to_zero(
        n in 2usize..5,
        lo in 0.05f64..0.5,
        span in 0.0f64..0.45,
        vals in prop::collection::vec(-2.0f64..2.0, 45),
    ) {
        let p = Params::new(n, lo, lo + span).unwrap();
        let h = lattice_kernel(p.sites(), &vals);
        let gen = build_generator(&steady_profile(&p), Some(&h)).unwrap();
        let scale = gen.max_exit_rate();
        for (row, d) in gen.rows.iter().zip(&gen.diag) {
            prop_assert!(row.iter().all(|&(_, r)| r >= 0.0));
            let s: f64 = row.iter().map(|&(_, r)| r).sum::<f64>() + d;
            prop_assert!(s.abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn incremental_bias_matches_recomputation(
        n in 2usize..8,
        vals in prop::collection::vec(-3.0f64..3.0, 91),
        code in 0usize..(1 << 13),
        picks in prop::collection::vec(0.0f64..1.0, 1..200),
    ) {
        let p = Params::new(n, 0.2, 0.8).unwrap();
        let l = p.sites();
        let h = lattice_kernel(l, &vals);
        let mut state = RateState::new(Configuration::from_code(code % (1 << l), l), steady_profile(&p), Some(h));
        for u in picks {
            let total = state.total_rate();
            let e = state.select(u * total);
            state.apply_event(e);
            prop_assert!(state.bias_drift() <= 1e-10);
        }
    }
}
