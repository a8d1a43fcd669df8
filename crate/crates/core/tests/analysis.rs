use branchlln::analysis::*;
use branchlln::stats::ks_two_sample;
use branchlln::*;
use proptest::prelude::*;

fn binary() -> Offspring {
    make_offspring([(2, 1.0)]).unwrap()
}

fn point_chain() -> Motion {
    ergodic_ctmc(vec![vec![0.0]], vec![1.0]).unwrap()
}

fn two_state() -> Motion {
    ergodic_ctmc(vec![vec![-1.0, 1.0], vec![2.0, -2.0]], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap()
}

#[test]
fn d_second_moment_matches_simulation_for_the_chain() {
    let off = make_offspring([(1, 0.5), (3, 0.5)]).unwrap();
    let cfg = Config::new(two_state(), off.clone(), 1.0, State::Count(0), 1.5).with_snapshots(vec![0.5, 1.5]).with_seed(3);
    let (moments, overflowed) = d_moments(&cfg, 20_000, 1).unwrap();
    assert_eq!(overflowed, 0);
    for dm in moments {
        let exact = d_second_moment_analytic(&cfg.motion, cfg.x0, 1.0, off.m1(), off.m2(), dm.t).unwrap();
        let g = off.m1() - 1.0;
        let closed = (-g * dm.t).exp() + (off.m2() - off.m1()) / g * (1.0 - (-g * dm.t).exp());
        assert!((exact - closed).abs() < 1e-9);
        assert!((dm.second.mean - exact).abs() < 4.0 * dm.second.stderr, "{dm:?} vs {exact}");
    }
}

#[test]
fn d_second_moment_at_zero_is_one() {
    let m = killed_recurrent_ou(1.0).unwrap();
    assert_eq!(d_second_moment_analytic(&m, State::Real(1.0), 2.0, 2.0, 4.0, 0.0).unwrap(), 1.0);
}

#[test]
fn phi_rejects_i2_violation() {
    let m = killed_recurrent_ou(1.0).unwrap();
    let err = phi_quadrature(&m, State::Real(1.0), 1.0, 2.0, 4.0, 1e-8).unwrap_err();
    assert!(matches!(err, Error::NotSupercritical { .. }));
}

#[test]
fn w_of_b_over_itself_has_mean_one() {
    let m = killed_drifted_bm(1.0).unwrap();
    let b = Interval::new(0.0, 2.0).unwrap();
    let x = State::Real(1.0);
    let expected = branchlln::spine::many_to_one(&m, x, &b, 2.0, 1.5, 2.0, 10, 0).mean;
    let cfg = Config::new(m, binary(), 1.5, x, 2.0).with_seed(4);
    let run = run_replicas(&cfg, 10_000, 1, |_, t| w_statistic(&t.snapshots[0], &b, expected)).unwrap();
    let est = EstimatorResult::from_samples(&run.outputs);
    assert!((est.mean - 1.0).abs() < 4.0 * est.stderr, "{est:?}");
}

#[test]
fn killed_ou_pooled_ratio_approaches_nu_ratio() {
    let cfg = Config::new(killed_recurrent_ou(1.0).unwrap(), binary(), 2.0, State::Real(1.0), 8.0).with_seed(5);
    let b = Interval::new(0.0, 1.0).unwrap();
    let bp = Interval::above(1.0);
    let run = run_replicas(&cfg, 200, 1, |_, t| (t.snapshots[0].count_in(&b), t.snapshots[0].count_in(&bp))).unwrap();
    let (num, den) = run.outputs.iter().fold((0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
    let ratio = num as f64 / den as f64;
    let target = 1f64.exp() - 1.0;
    assert!((ratio - target).abs() < 0.1, "{ratio} vs {target}");
}

#[test]
fn bm_extinction_decreases_with_start() {
    let grid = [0.5, 1.0, 2.0, 4.0];
    let etas: Vec<EstimatorResult<f64>> = grid
        .iter()
        .map(|&x| {
            let cfg = Config::new(killed_drifted_bm(1.0).unwrap(), binary(), 1.5, State::Real(x), 6.0)
                .with_seed(6)
                .with_max_population(1_000);
            eta_mc(&cfg, 6.0, 4_000, 1).unwrap().eta
        })
        .collect();
    for w in etas.windows(2) {
        let se = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        assert!(w[0].mean - w[1].mean > 3.0 * se, "{etas:?}");
    }
}

#[test]
fn qsd_is_stable_under_splitting_replicas() {
    let cfg = Config::new(killed_recurrent_ou(1.0).unwrap(), binary(), 2.0, State::Real(1.0), 6.0).with_seed(7);
    let rep = qsd_sample(&cfg, 6.0, 400, Conditioning::Survival, Pooling::Pooled, 1).unwrap();
    let (even, odd): (Vec<&QsdSample<f64>>, Vec<_>) = rep.samples.iter().partition(|s| s.replica % 2 == 0);
    let a: Vec<f64> = even.iter().map(|s| s.position).collect();
    let b: Vec<f64> = odd.iter().map(|s| s.position).collect();
    let d = ks_two_sample(&a, &b);
    assert!(d < 0.03, "KS between halves {d}");
    let total: f64 = rep.histogram.iter().map(|h| h.2).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn qsd_of_single_state_is_a_point_mass() {
    let cfg = Config::new(point_chain(), binary(), 1.0, State::Count(0), 2.0).with_seed(8);
    let rep = qsd_sample(&cfg, 2.0, 20, Conditioning::Survival, Pooling::PerReplica, 1).unwrap();
    assert_eq!(rep.ks_distance, Some(0.0));
    assert_eq!(rep.histogram, vec![(0.0, 1.0, 1.0)]);
}

#[test]
fn qsd_reports_no_survivors() {
    let off = OffspringLaw::from_pmf([(0u32, 1.0)]).unwrap();
    let cfg = Config::new(point_chain(), off, 1.0, State::Count(0), 30.0).with_seed(9);
    let err = qsd_sample(&cfg, 30.0, 50, Conditioning::Survival, Pooling::Pooled, 1).unwrap_err();
    assert_eq!(err, Error::NoSurvivors);
}

#[test]
fn scalar_g_iteration_reaches_one_third() {
    let off = make_offspring([(0, 0.25), (2, 0.75)]).unwrap();
    let cfg = Config::new(point_chain(), off, 1.0, State::Count(0), 1.0).with_seed(10);
    let iterates = g_iterate(&[State::Count(0)], &cfg, 20, 4_000, 1).unwrap();
    let last = iterates.last().unwrap()[0];
    assert!((last - 1.0 / 3.0).abs() < 0.02, "{last}");
    for w in iterates.windows(2).take(8) {
        assert!(w[1][0] >= w[0][0] - 0.02);
    }
}

#[test]
fn g_of_zero_is_probability_of_no_live_descendants() {
    let off = make_offspring([(0, 0.25), (2, 0.75)]).unwrap();
    let cfg = Config::new(point_chain(), off, 0.2, State::Count(0), 1.0).with_seed(11);
    let g0 = g_apply(|_| 0.0, State::Count(0), &cfg, 4_000, 1).unwrap();
    let eta1 = eta_mc(&cfg, 1.0, 4_000, 1).unwrap().eta;
    assert_eq!(g0.mean, eta1.mean);
}

#[test]
fn g_iterate_rejects_a_grid_that_loses_mass() {
    let cfg = Config::new(subcritical_gw([(-1, 0.75), (1, 0.25)]).unwrap(), binary(), 1.0, State::Count(5), 1.0).with_seed(12);
    let grid: Vec<State> = (1..=5).map(State::Count).collect();
    let err = g_iterate(&grid, &cfg, 1, 500, 1).unwrap_err();
    assert!(matches!(err, Error::TruncationTooSmall { .. }));
}

#[test]
fn local_survival_persists_for_transient_ou() {
    let cfg = Config::new(transient_ou(0.5, 1.0).unwrap(), binary(), 0.7, State::Real(0.0), 12.0).with_seed(13);
    let k = Interval::new(-1.0, 1.0).unwrap();
    for t in [4.0, 8.0, 12.0] {
        let ls = local_survival_mc(&cfg, &k, t, 1_000, 1).unwrap();
        assert!(ls.mean > 0.1, "t={t}: {ls:?}");
    }
}

#[test]
fn local_survival_near_boundary_tracks_survival_for_killed_bm() {
    let cfg = Config::new(killed_drifted_bm(1.0).unwrap(), binary(), 1.5, State::Real(1.0), 12.0).with_seed(14);
    let k = Interval::new(0.0, 1.0).unwrap();
    let ls = local_survival_mc(&cfg, &k, 12.0, 1_000, 1).unwrap();
    let eta = eta_mc(&cfg, 12.0, 1_000, 1).unwrap();
    assert!(ls.mean > 0.0);
    assert!((ls.mean - (1.0 - eta.eta.mean)).abs() < 0.05, "{ls:?} vs {eta:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phi_of_constant_h_is_offspring_ratio(p0 in 0.0f64..0.3, p3 in 0.05f64..0.6) {
        let p2 = 1.0 - p0 - p3;
        prop_assume!(p2 >= 0.0);
        let off = make_offspring([(0, p0), (2, p2), (3, p3)]);
        prop_assume!(off.is_ok());
        let off = off.unwrap();
        let q = phi_quadrature(&two_state(), State::Count(1), 1.3, off.m1(), off.m2(), 1e-9).unwrap();
        let exact = (off.m2() - off.m1()) / (off.m1() - 1.0);
        prop_assert!(!q.diverged);
        prop_assert!((q.value.unwrap() - exact).abs() < 1e-7 * exact.max(1.0));
    }

    #[test]
    fn g_operator_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, seed in any::<u64>()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let off = make_offspring([(0, 0.25), (2, 0.75)]).unwrap();
        let cfg = Config::new(two_state(), off, 1.0, State::Count(0), 1.0).with_seed(seed);
        let g_lo = move |s: &State| if *s == State::Count(0) { lo } else { lo * 0.5 };
        let g_hi = move |s: &State| if *s == State::Count(0) { hi } else { hi * 0.5 };
        let low = g_apply(g_lo, State::Count(0), &cfg, 200, 1).unwrap();
        let high = g_apply(g_hi, State::Count(0), &cfg, 200, 1).unwrap();
        prop_assert!(low.mean <= high.mean + 1e-12);
        let one = g_apply(|_| 1.0, State::Count(1), &cfg, 200, 1).unwrap();
        prop_assert_eq!(one.mean, 1.0);
    }
}
