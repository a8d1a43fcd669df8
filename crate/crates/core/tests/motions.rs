use branchlln::spine::{h_transform_expectation, sample_endpoint};
use branchlln::stats::{ks_distance, ks_two_sample, ks_two_sample_pvalue};
use branchlln::*;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn norm_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// `P_x(τ₀ > t)` for Brownian motion with drift `−c`.
fn bm_survival(x: f64, c: f64, t: f64) -> f64 {
    let s = t.sqrt();
    norm_cdf((x - c * t) / s) - (2.0 * c * x).exp() * norm_cdf((-x - c * t) / s)
}

fn endpoints(motion: &Motion, x: State, t: f64, n: usize, seed: u64) -> Vec<State> {
    (0..n)
        .map(|i| {
            let mut rng = StreamKey::new(seed, 9).child(i as u32).stream();
            sample_endpoint(motion, x, t, &mut rng)
        })
        .collect()
}

fn fraction(states: &[State], pred: impl Fn(&State) -> bool) -> (f64, f64) {
    let n = states.len() as f64;
    let p = states.iter().filter(|s| pred(s)).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

#[test]
fn bm_survival_matches_reflection_formula() {
    let m = killed_drifted_bm(1.0).unwrap();
    let ys = endpoints(&m, State::Real(1.0), 1.0, 100_000, 1);
    let (p, se) = fraction(&ys, |s| s.is_live());
    let exact = bm_survival(1.0, 1.0, 1.0);
    assert!((p - exact).abs() < 4.0 * se, "{p} ± {se} vs {exact}");
    let quad = m.probability_in(1.0, 1.0, &Interval::above(0.0)).unwrap().value;
    assert!((quad - exact).abs() < 1e-8, "{quad} vs {exact}");
}

#[test]
fn bm_substeps_agree_with_one_step() {
    let m = killed_drifted_bm(1.0).unwrap();
    let n = 40_000;
    let alive = (0..n)
        .filter(|&i| {
            let mut rng = StreamKey::new(2, 9).child(i).stream();
            m.advance(State::Real(1.0), 1.0, 0.01, &mut rng).is_live()
        })
        .count() as f64
        / n as f64;
    let exact = bm_survival(1.0, 1.0, 1.0);
    let se = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((alive - exact).abs() < 4.0 * se);
}

#[test]
fn bm_endpoint_histogram_passes_chi_square() {
    let m = killed_drifted_bm(1.0).unwrap();
    let n = 100_000;
    let ys = endpoints(&m, State::Real(1.0), 1.0, n, 3);
    let edges: Vec<f64> = (0..=12).map(|k| k as f64 * 0.25).chain([f64::INFINITY]).collect();
    let mut stat = 0.0;
    let mut expected_total = 0.0;
    for w in edges.windows(2) {
        let b = Interval::new(w[0], w[1]).unwrap();
        let p = m.probability_in(1.0, 1.0, &b).unwrap().value;
        let observed = ys.iter().filter(|s| b.contains(s)).count() as f64;
        let e = p * n as f64;
        stat += (observed - e).powi(2) / e;
        expected_total += p;
    }
    let absorbed = ys.iter().filter(|s| !s.is_live()).count() as f64;
    let e = (1.0 - expected_total) * n as f64;
    stat += (absorbed - e).powi(2) / e;
    let dof = (edges.len() - 1) as f64;
    let pvalue = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
    assert!(pvalue > 0.001, "chi2 = {stat}, p = {pvalue}");
}

#[test]
fn killed_ou_survival_and_endpoint_law() {
    let lam = 1.0f64;
    let m = killed_recurrent_ou(lam).unwrap();
    let (x, t) = (3.0, 1.0);
    let a = (-lam * t).exp();
    let v = (1.0 - a * a) / (2.0 * lam);
    let ys = endpoints(&m, State::Real(x), t, 100_000, 4);
    let (p, se) = fraction(&ys, |s| s.is_live());
    let exact = 2.0 * norm_cdf(a * x / v.sqrt()) - 1.0;
    assert!((p - exact).abs() < 4.0 * se, "{p} vs {exact}");

    // Joint law P(Y ≤ y, τ > t) by the method of images.
    let joint = |y: f64| {
        let s = v.sqrt();
        (norm_cdf((y - a * x) / s) - norm_cdf(-a * x / s)) - (norm_cdf((y + a * x) / s) - norm_cdf(a * x / s))
    };
    let live: Vec<f64> = ys.iter().filter_map(|s| s.coordinate().filter(|_| s.is_live())).collect();
    let d = ks_distance(&live, None, |y| joint(y) / exact);
    let p = branchlln::stats::kolmogorov_pvalue((live.len() as f64).sqrt() * d);
    assert!(p > 0.001, "KS {d}, p {p}");
}

#[test]
fn killed_ou_fine_step_self_convergence() {
    let m = killed_recurrent_ou(1.0).unwrap();
    let n = 20_000;
    let absorbed = |dt: f64, seed: u64| {
        (0..n)
            .filter(|&i| {
                let mut rng = StreamKey::new(seed, 9).child(i).stream();
                !m.advance(State::Real(3.0), 1.0, dt, &mut rng).is_live()
            })
            .count() as f64
            / n as f64
    };
    let coarse = absorbed(1.0, 5);
    let fine = absorbed(1e-3, 6);
    let se = ((coarse * (1.0 - coarse) + fine * (1.0 - fine)) / n as f64).sqrt().max(1.0 / n as f64);
    assert!((coarse - fine).abs() < 4.0 * se, "{coarse} vs {fine}");
}

#[test]
fn killed_ou_mean_for_small_step() {
    let m = killed_recurrent_ou(1.0).unwrap();
    let (x, dt) = (5.0, 0.01);
    let ys = endpoints(&m, State::Real(x), dt, 50_000, 7);
    let vals: Vec<f64> = ys.iter().map(|s| s.coordinate().unwrap()).collect();
    let est = EstimatorResult::from_samples(&vals);
    let leading = x * (1.0 - dt);
    assert!((est.mean - leading).abs() < 4.0 * est.stderr + x * dt * dt, "{est:?}");
}

#[test]
fn transient_ou_moments() {
    let m = transient_ou(1.0, 1.0).unwrap();
    let from_one: Vec<f64> = endpoints(&m, State::Real(1.0), 1.0, 100_000, 8).iter().map(|s| s.coordinate().unwrap()).collect();
    let mean = EstimatorResult::from_samples(&from_one);
    assert!((mean.mean - 1f64.exp()).abs() < 3.0 * mean.stderr, "{mean:?}");

    let from_zero: Vec<f64> = endpoints(&m, State::Real(0.0), 1.0, 100_000, 9).iter().map(|s| s.coordinate().unwrap()).collect();
    let squares: Vec<f64> = from_zero.iter().map(|y| y * y).collect();
    let var = EstimatorResult::from_samples(&squares);
    let exact = (2f64.exp() - 1.0) / 2.0;
    assert!((var.mean - exact).abs() < 3.0 * var.stderr, "{var:?} vs {exact}");
    let centred = EstimatorResult::from_samples(&from_zero);
    assert!(centred.mean.abs() < 4.0 * centred.stderr);
}

#[test]
fn gw_h_martingale() {
    let m = subcritical_gw([(-1, 0.75), (1, 0.25)]).unwrap();
    assert!((m.lambda() - 0.5f64).abs() < 1e-15);
    let ys = endpoints(&m, State::Count(5), 1.0, 100_000, 10);
    let vals: Vec<f64> = ys.iter().map(|s| if s.is_live() { s.coordinate().unwrap() } else { 0.0 }).collect();
    let est = EstimatorResult::from_samples(&vals);
    let exact = 5.0 * (-0.5f64).exp();
    assert!((est.mean - exact).abs() < 4.0 * est.stderr, "{est:?} vs {exact}");
}

#[test]
fn ctmc_occupancy_matches_matrix_exponential() {
    let q = vec![vec![-1.0f64, 1.0], vec![2.0, -2.0]];
    let pi = stationary_distribution(&q).unwrap();
    assert!((pi[0] - 2.0 / 3.0).abs() < 1e-14 && (pi[1] - 1.0 / 3.0).abs() < 1e-14);
    let m = ergodic_ctmc(q, pi).unwrap();
    let t = 2.0;
    let ys = endpoints(&m, State::Count(0), t, 100_000, 11);
    let (p, se) = fraction(&ys, |s| *s == State::Count(0));
    let exact = 2.0 / 3.0 + (-3.0 * t).exp() / 3.0;
    assert!((p - exact).abs() < 3.0 * se, "{p} vs {exact}");
}

#[test]
fn h_transform_of_one_is_one_for_every_model() {
    let models: Vec<(Motion, State)> = vec![
        (ergodic_ctmc(vec![vec![-1.0, 1.0], vec![2.0, -2.0]], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(), State::Count(1)),
        (killed_recurrent_ou(1.0).unwrap(), State::Real(1.0)),
        (killed_drifted_bm(1.0).unwrap(), State::Real(1.0)),
        (subcritical_gw([(-1, 0.75), (1, 0.25)]).unwrap(), State::Count(5)),
        (transient_ou(0.5, 1.0).unwrap(), State::Real(0.0)),
    ];
    for (m, x) in &models {
        for (k, &t) in [0.5, 1.0, 2.0, 4.0].iter().enumerate() {
            let est = h_transform_expectation(m, *x, |_| 1.0, t, 100_000, 20 + k as u64).unwrap();
            assert!((est.mean - 1.0).abs() <= 4.0 * est.stderr + 1e-12, "{} t={t}: {est:?}", m.name);
        }
    }
}

#[test]
fn density_quadrature_agrees_with_sampled_mass_for_transient_ou() {
    let m = transient_ou(0.5, 1.0).unwrap();
    let b = Interval::new(-1.0, 1.0).unwrap();
    let q = m.probability_in(0.3, 2.0, &b).unwrap().value;
    let ys = endpoints(&m, State::Real(0.3), 2.0, 50_000, 12);
    let (p, se) = fraction(&ys, |s| b.contains(s));
    assert!((p - q).abs() < 4.0 * se, "{p} vs {q}");
}

#[test]
fn regular_variation_examples() {
    let bm = killed_drifted_bm(1.0).unwrap();
    let report = regular_variation_check(|t| bm.eigen.p(t), 5.0, &[1000.0]);
    let expected = 1.0 - (1000.0f64 / 1005.0).powf(1.5);
    let got = report.rows[0].1;
    assert!((got - expected).abs() < 1e-3 * expected.max(1e-3) + 1e-4, "{got} vs {expected}");
    let flat = regular_variation_check(|_| 1.0, 5.0, &[1.0, 10.0, 100.0]);
    assert!(flat.rows.iter().all(|r| r.1 == 0.0));
    let exp = regular_variation_check(f64::exp, 5.0, &[10.0, 100.0]);
    assert!(!exp.decays(0.01));
}

#[test]
fn two_spine_marginals_match_single_particle_law() {
    let m = killed_drifted_bm(1.0).unwrap();
    let off = make_offspring([(2, 1.0)]).unwrap();
    let n = 100_000;
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = StreamKey::new(13, 2).child(i as u32).stream();
        let s = branchlln::spine::sample_two_spine(&m, State::Real(1.0), 1.0, 1.5, &off, &mut rng);
        assert!(s.weight >= 1.0 && s.split_time <= 1.0);
        let code = |x: State| x.coordinate().filter(|_| x.is_live()).unwrap_or(-1.0);
        first.push(code(s.x1));
        second.push(code(s.x2));
    }
    let single: Vec<f64> = endpoints(&m, State::Real(1.0), 1.0, n, 14)
        .into_iter()
        .map(|x| x.coordinate().filter(|_| x.is_live()).unwrap_or(-1.0))
        .collect();
    for marg in [&first, &second] {
        let d = ks_two_sample(marg, &single);
        let p = ks_two_sample_pvalue(d, n, n);
        assert!(p > 0.001, "KS {d}, p {p}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn absorbed_input_never_revives(seed in any::<u64>(), dt in 1e-3f64..5.0) {
        let mut rng = StreamKey::new(seed, 0).stream();
        for m in [killed_drifted_bm(1.0).unwrap(), killed_recurrent_ou(1.0).unwrap()] {
            prop_assert_eq!(m.step(State::Absorbed, dt, &mut rng), State::Absorbed);
        }
        let gw = subcritical_gw([(-1, 0.75), (1, 0.25)]).unwrap();
        prop_assert_eq!(gw.step(State::Absorbed, dt, &mut rng), State::Absorbed);
    }

    #[test]
    fn killed_densities_are_sub_probabilities(x in 0.01f64..6.0, t in 0.01f64..10.0) {
        for m in [killed_drifted_bm(1.0).unwrap(), killed_recurrent_ou(1.0).unwrap()] {
            let mass = m.probability_in(x, t, &Interval::above(0.0)).unwrap().value;
            prop_assert!((0.0..=1.0 + 1e-6).contains(&mass), "{} mass {}", m.name, mass);
        }
    }

    #[test]
    fn bm_kernel_mass_matches_reflection(x in 0.05f64..5.0, t in 0.05f64..8.0) {
        let m = killed_drifted_bm(1.0).unwrap();
        let mass = m.probability_in(x, t, &Interval::above(0.0)).unwrap().value;
        prop_assert!((mass - bm_survival(x, 1.0, t)).abs() < 1e-7);
    }
}
