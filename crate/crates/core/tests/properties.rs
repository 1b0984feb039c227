//! Randomised invariants. Spectral quantities are checked against a plain
//! cyclic Jacobi solver written here, not against the library's eigen path.

use coop_anneal::annealing::{daa_step, daag_step, Method, SwarmState};
use coop_anneal::config::ExperimentConfig;
use coop_anneal::experiment::Experiment;
use coop_anneal::game::{check_gradients, CustomGame, EvChargingGame, EvRanges, QuadraticTwoAgentGame, SocialCost};
use coop_anneal::metrics::{consensus_error, ensemble_run, social_cost_series};
use coop_anneal::noise::{GradientNoise, NoiseModel, NoiseStreams};
use coop_anneal::oracle::{gibbs_density_1d, grid_search_social_optimum};
use coop_anneal::schedule::ScheduleSet;
use coop_anneal::topology::{erdos_renyi_pool, lambda2, GraphSample};
use coop_anneal::trace::{Record, RunTrace};
use coop_anneal::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

fn adjacency_strategy() -> impl Strategy<Value = (usize, Vec<bool>)> {
    (2usize..10).prop_flat_map(|n| (Just(n), proptest::collection::vec(any::<bool>(), n * (n - 1) / 2)))
}

fn graph_from_bits(n: usize, bits: &[bool]) -> GraphSample {
    let mut edges = Vec::new();
    let mut b = 0;
    for u in 0..n {
        for v in u + 1..n {
            if bits[b] {
                edges.push((u, v));
            }
            b += 1;
        }
    }
    GraphSample::from_edges(n, &edges).unwrap()
}

fn ev_config(seed: u64, horizon: usize) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"game":{{"kind":"ev_charging","seed":{seed}}},"network":{{"mode":"pool","n":10,"seed":{seed}}},"method":"daa",
        "schedule":{{"c_alpha":1,"c_beta":0.4,"c_gamma":1,"tau_beta":0.25}},
        "noise":{{"gradient":{{"kind":"uniform","bound":5.0}}}},"horizon":{horizon},"seed":{seed}}}"#
    ))
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_invariants((n, bits) in adjacency_strategy()) {
        let g = graph_from_bits(n, &bits);
        let l = g.laplacian();
        for i in 0..n {
            prop_assert_eq!(l.row(i).iter().sum::<f64>(), 0.0);
            for j in 0..n {
                prop_assert_eq!(l[(i, j)], l[(j, i)]);
            }
        }
        let eig = jacobi_eigenvalues(l);
        prop_assert!(eig[0].abs() <= 1e-9, "lambda1 = {}", eig[0]);
        prop_assert!(eig.iter().all(|&e| e >= -1e-9));
    }

    #[test]
    fn lambda2_matches_jacobi((n, bits) in adjacency_strategy()) {
        let g = graph_from_bits(n, &bits);
        let ours = lambda2(g.laplacian(), 1e-12).unwrap();
        let reference = jacobi_eigenvalues(g.laplacian())[1];
        prop_assert!((ours - reference).abs() <= 1e-8 * (1.0 + reference.abs()), "{} vs {}", ours, reference);
    }

    #[test]
    fn lambda2_is_monotone_in_edges((n, bits) in adjacency_strategy(), flip in any::<prop::sample::Index>()) {
        let mut more = bits.clone();
        let idx = flip.index(bits.len());
        more[idx] = true;
        let (a, b) = (graph_from_bits(n, &bits), graph_from_bits(n, &more));
        let (la, lb) = (lambda2(a.laplacian(), 1e-12).unwrap(), lambda2(b.laplacian(), 1e-12).unwrap());
        prop_assert!(lb >= la - 1e-9, "adding an edge lowered lambda2: {} -> {}", la, lb);
    }

    #[test]
    fn schedule_asymptotics(c_alpha in 0.01f64..10.0, c_beta in 0.01f64..10.0, c_gamma in 0.01f64..10.0,
                            tau_beta in 0.01f64..0.49, k in 3usize..1_000_000) {
        let s = ScheduleSet { c_alpha, c_beta, c_gamma, tau_beta, k_guard: 3, beta_cap: None };
        let kf = k as f64;
        prop_assert!((s.alpha(k) * kf - c_alpha).abs() <= 1e-12 * c_alpha);
        prop_assert!((s.beta(k) * kf.powf(tau_beta) - c_beta).abs() <= 1e-12 * c_beta);
        prop_assert!((s.gamma(k) * kf.sqrt() * kf.ln().ln().sqrt() - c_gamma).abs() <= 1e-12 * c_gamma);
        prop_assert!(s.alpha(k + 1) <= s.alpha(k) && s.beta(k + 1) <= s.beta(k) && s.gamma(k + 1) <= s.gamma(k));
    }

    #[test]
    fn ev_gradients_match_finite_differences(seed in any::<u64>()) {
        let game = EvChargingGame::from_seed(seed, EvRanges::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let probes: Vec<_> = (0..16).map(|_| (vec![rng.random_range(0.0..24.0)], vec![rng.random_range(0.0..24.0)])).collect();
        let report = check_gradients(&game, &probes);
        prop_assert!(report.passed() && report.max_rel_error <= 1e-5, "{:?}", report.failures);
    }

    #[test]
    fn gibbs_density_is_normalised(eps in 0.2f64..3.0, a in 0.1f64..2.0, tilt in -0.5f64..0.5) {
        let g = gibbs_density_1d(|z| a * (z * z - 1.0).powi(2) + tilt * z + 1.0, eps, (-2.0, 2.0), 1e-3).unwrap();
        prop_assert!((g.total_mass() - 1.0).abs() <= 1e-8);
        prop_assert!(g.density.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn config_round_trip(seed in any::<u64>(), horizon in 1usize..1_000_000, c in 0.01f64..100.0, bound in 0.01f64..50.0) {
        let mut config = ev_config(seed, horizon);
        config.schedule.c_gamma = c;
        config.noise.gradient = GradientNoise::Uniform { bound };
        let again = ExperimentConfig::from_json(&config.to_json()).unwrap();
        prop_assert_eq!(again, config);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tracking_identities_hold(seed in any::<u64>()) {
        let config = ev_config(seed, 400);
        let trace = Experiment::build(&config).unwrap().run(Method::Daa, 400, seed).unwrap();
        let n = trace.n as f64;
        for r in &trace.records {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
            let (xbar, vbar, sbar) = (mean(&r.x), mean(&r.v), mean(&r.s));
            let scale = 1e-12 * n * (1.0 + xbar.abs().max(vbar.abs()));
            prop_assert!((sbar - vbar).abs() <= scale, "k = {}: s̄ - v̄ = {}", r.k, sbar - vbar);
            prop_assert!((vbar - xbar).abs() <= scale, "k = {}: v̄ - x̄ = {}", r.k, vbar - xbar);
        }
    }

    #[test]
    fn runs_are_bitwise_reproducible(seed in any::<u64>()) {
        let config = ev_config(seed, 200);
        let exp = Experiment::build(&config).unwrap();
        for method in [Method::Daa, Method::Daag, Method::Centralized] {
            let (a, b) = (exp.run(method, 200, seed).unwrap(), exp.run(method, 200, seed).unwrap());
            prop_assert!(a == b);
        }
    }

    #[test]
    fn noise_off_daa_equals_daag(x0 in proptest::collection::vec(-2.0f64..2.0, 4), seed in any::<u64>()) {
        let game = CustomGame::new(4, 1,
            |i, x, _| (x[0] - i as f64).powi(2) + 0.1 * x[0].powi(4),
            |i, x, _, o| o[0] = 2.0 * (x[0] - i as f64) + 0.4 * x[0].powi(3),
            |_, _, _, o| o[0] = 0.0).unwrap();
        let pool = erdos_renyi_pool(4, 5, (0.3, 0.8), seed).unwrap();
        let sched = ScheduleSet { c_alpha: 0.1, ..ScheduleSet::default() }.with_beta_cap(Some(0.16));
        let mut noise = NoiseStreams::new(NoiseModel::off(), 4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut a, mut b) = (SwarmState::new(4, 1, x0.clone()).unwrap(), SwarmState::new(4, 1, x0).unwrap());
        for _ in 0..200 {
            let g = pool.sample_graph(&mut rng);
            a = daa_step(&a, &game, &g, &sched, &mut noise).unwrap();
            b = daag_step(&b, &game, &g, &sched).unwrap();
            prop_assert!(a == b);
        }
    }

    #[test]
    fn consensus_tau_admissibility(tau_beta in 0.01f64..0.49, excess in 0.0f64..1.0) {
        let trace = RunTrace {
            method: Method::Daa, n: 1, d: 1, tau_beta,
            records: vec![Record { k: 1, x: vec![0.0], v: vec![0.0], s: vec![0.0] }],
            final_state: SwarmState::new(1, 1, vec![0.0]).unwrap(),
            fingerprint: String::new(),
        };
        let bound = 0.5 - tau_beta;
        let rejected = matches!(consensus_error(&trace, bound + excess), Err(Error::TauOutOfRange { .. }));
        prop_assert!(rejected);
        prop_assert!(consensus_error(&trace, bound * 0.99).is_ok());
    }

    #[test]
    fn cost_identity_on_constant_trace(x in proptest::collection::vec(-5.0f64..5.0, 2)) {
        let game = QuadraticTwoAgentGame::new();
        let trace = RunTrace {
            method: Method::Daag, n: 2, d: 1, tau_beta: 0.25,
            records: (1..=5).map(|k| Record { k, x: x.clone(), v: x.clone(), s: x.clone() }).collect(),
            final_state: SwarmState::new(2, 1, x.clone()).unwrap(),
            fingerprint: String::new(),
        };
        let direct = SocialCost::new(&game).value(&x).unwrap();
        for (_, c) in social_cost_series(&trace, &game).unwrap() {
            prop_assert_eq!(c, direct);
        }
    }

    #[test]
    fn gradient_noise_decays_under_weighting(seed in any::<u64>(), gaussian in any::<bool>()) {
        let gradient = if gaussian { GradientNoise::Gaussian { sigma: 2.0 } } else { GradientNoise::Uniform { bound: 5.0 } };
        let mut streams = NoiseStreams::new(NoiseModel { gradient, annealing: false }, 1, seed);
        let t = 20_000;
        let mut buf = [0.0];
        let (mut first, mut second) = (0.0f64, 0.0f64);
        for k in 1..=t {
            streams.gradient_into(0, &mut buf);
            let w = ((k + 1) as f64).powf(-0.6) * buf[0].abs();
            if k <= t / 2 { first = first.max(w) } else { second = second.max(w) }
        }
        prop_assert!(second <= first, "{} > {}", second, first);
    }
}

#[test]
fn pool_draws_are_uniform() {
    let pool = erdos_renyi_pool(10, 10, (0.1, 0.2), 3).unwrap();
    let graphs = pool.pool().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 20_000;
    let mut counts = [0usize; 10];
    for _ in 0..draws {
        let g = pool.sample_graph(&mut rng);
        let idx = graphs.iter().position(|p| std::ptr::eq(p, &*g)).unwrap();
        counts[idx] += 1;
    }
    let expected = draws as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 9 degrees of freedom, p = 0.001
    assert!(chi2 < 27.88, "chi-square {chi2}, counts {counts:?}");
}

#[test]
fn ensemble_is_deterministic() {
    let mut config = ev_config(5, 300);
    config.ensemble = None;
    let a = ensemble_run(&config, 4, &[]).unwrap();
    let b = ensemble_run(&config, 4, &[]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn noise_free_ensemble_has_zero_variance() {
    let config = ExperimentConfig::from_json(
        r#"{"game":{"kind":"quadratic"},"network":{"mode":"complete","n":2},"method":"daag",
        "schedule":{"c_alpha":1,"c_beta":0.4,"c_gamma":1,"tau_beta":0.25},
        "noise":{"gradient":{"kind":"none"},"annealing":false},"init_box":[0.5,0.5],"horizon":500,"seed":2}"#,
    )
    .unwrap();
    let stats = ensemble_run(&config, 5, &[]).unwrap();
    assert_eq!(stats.completed, 5);
    assert_eq!(stats.variance(0), 0.0);
    assert_eq!(stats.variance(1), 0.0);
}

#[test]
fn grid_argmin_is_a_descent_fixed_point() {
    let game = QuadraticTwoAgentGame::new();
    let res = 0.01;
    let r = grid_search_social_optimum(&game, (-2.0, 4.0), res).unwrap();
    let grad = SocialCost::new(&game).gradient(&r.point).unwrap();
    // largest Hessian eigenvalue of the social cost is 6
    let moved = grad.iter().map(|g| (g / 6.0).powi(2)).sum::<f64>().sqrt();
    assert!(moved <= res * 2f64.sqrt(), "{moved}");
}
