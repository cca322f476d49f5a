//! Property tests over randomized small instances.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ddmpc::consistency::{
    assemble_pi, build_pi_blocks, contains, qmi_membership, sample_consistent, Multipliers, RESIDUAL_SLACK,
};
use ddmpc::controller::{run_closed_loop, MpcConfig};
use ddmpc::io;
use ddmpc::lti::{generate_dataset, DataSet, LtiSystem, NoiseDistribution, NoiseModel};
use ddmpc::synthesis::{synthesize, Certificate, ConstraintSets, CostWeights, StateConstraintForm, SynthesisOptions};

fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize, s: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| s * rng.sample::<f64, _>(StandardNormal))
}

fn lambda_max(m: &DMatrix<f64>) -> f64 {
    ((m + m.transpose()) * 0.5).symmetric_eigenvalues().max()
}

fn lambda_min(m: &DMatrix<f64>) -> f64 {
    ((m + m.transpose()) * 0.5).symmetric_eigenvalues().min()
}

fn noise_kind() -> impl Strategy<Value = NoiseDistribution> {
    prop_oneof![
        Just(NoiseDistribution::UniformBall),
        Just(NoiseDistribution::Boundary),
        Just(NoiseDistribution::Zero)
    ]
}

/// Plant, inputs and data generated from `seed`.
fn experiment(n: usize, m: usize, t: usize, eps: f64, kind: NoiseDistribution, seed: u64) -> (LtiSystem, DataSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys = LtiSystem::new(gauss(&mut rng, n, n, 0.3), gauss(&mut rng, n, m, 1.0)).unwrap();
    let u = gauss(&mut rng, m, t, 1.0);
    let x0 = gauss(&mut rng, n, 1, 1.0).column(0).into_owned();
    let noise = NoiseModel::new(eps, kind).unwrap();
    let data = generate_dataset(&sys, &x0, &u, &noise, &mut rng).unwrap();
    (sys, data)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn same_seed_same_data(n in 1usize..=3, m in 1usize..=2, t in 1usize..=20, eps in 0.0f64..1.0, kind in noise_kind(), seed in any::<u64>()) {
        let (_, d1) = experiment(n, m, t, eps, kind, seed);
        let (_, d2) = experiment(n, m, t, eps, kind, seed);
        prop_assert_eq!(d1.states(), d2.states());
        prop_assert_eq!(d1.inputs(), d2.inputs());
    }

    #[test]
    fn true_system_is_consistent(n in 1usize..=3, m in 1usize..=2, t in 1usize..=20, eps in 0.0f64..1.0, kind in noise_kind(), seed in any::<u64>()) {
        let (sys, data) = experiment(n, m, t, eps, kind, seed);
        for i in 0..t {
            let r = data.state(i + 1) - sys.a() * data.state(i) - sys.b() * data.input(i);
            prop_assert!(r.norm_squared() <= eps + RESIDUAL_SLACK, "sample {}: {} > {}", i, r.norm_squared(), eps);
        }
        prop_assert!(contains(&data, sys.a(), sys.b()).unwrap());
    }

    #[test]
    fn single_sample_qmi_matches_residual(t in 1usize..=8, eps in 1e-4f64..1.0, shift in 0.0f64..0.5, seed in any::<u64>()) {
        let (sys, data) = experiment(2, 1, t, eps, NoiseDistribution::UniformBall, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let a = sys.a() + gauss(&mut rng, 2, 2, shift);
        let b = sys.b() + gauss(&mut rng, 2, 1, shift);
        let blocks = build_pi_blocks(&data);
        for i in 0..t {
            let r = data.state(i + 1) - &a * data.state(i) - &b * data.input(i);
            let margin = eps - r.norm_squared();
            prop_assume!(margin.abs() > 1e-10);
            let qmi = qmi_membership(&blocks, &Multipliers::unit(i, t), &a, &b).unwrap();
            prop_assert_eq!(qmi, margin > 0.0);
        }
    }

    #[test]
    fn consistent_pairs_satisfy_every_qmi(t in 1usize..=10, eps in 1e-4f64..1.0, seed in any::<u64>()) {
        let (sys, data) = experiment(2, 1, t, eps, NoiseDistribution::UniformBall, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a0);
        let tau = DVector::from_fn(t, |_, _| rng.random::<f64>() * 5.0);
        let blocks = build_pi_blocks(&data);
        prop_assert!(qmi_membership(&blocks, &Multipliers::per_sample(tau).unwrap(), sys.a(), sys.b()).unwrap());
    }

    #[test]
    fn assemble_pi_is_linear(n in 1usize..=3, m in 1usize..=2, t in 1usize..=10, seed in any::<u64>()) {
        let (_, data) = experiment(n, m, t, 0.1, NoiseDistribution::UniformBall, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
        let t1 = DVector::from_fn(t, |_, _| rng.random::<f64>());
        let t2 = DVector::from_fn(t, |_, _| rng.random::<f64>());
        let blocks = build_pi_blocks(&data);
        let pi = |tau: DVector<f64>| assemble_pi(&blocks, &Multipliers::per_sample(tau).unwrap()).unwrap();
        let sum = pi(&t1 + &t2);
        let parts = pi(t1) + pi(t2);
        prop_assert!((&sum - &parts).norm() <= 1e-12 * sum.norm().max(1e-300));
    }

    #[test]
    fn trajectory_csv_round_trip(n in 1usize..=3, m in 1usize..=2, t in 1usize..=20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, t + 1, |_, _| rng.sample::<f64, _>(StandardNormal) * 10f64.powi(rng.random_range(-12..12)));
        let u = DMatrix::from_fn(m, t, |_, _| rng.sample::<f64, _>(StandardNormal) * 10f64.powi(rng.random_range(-12..12)));
        let text = io::write_trajectory(&x, &u).unwrap();
        let (x2, u2) = io::parse_trajectory(&text).unwrap();
        prop_assert_eq!(&x, &x2);
        prop_assert_eq!(&u, &u2);
        prop_assert_eq!(io::write_trajectory(&x2, &u2).unwrap(), text);
    }
}

struct SynthesisCase {
    data: DataSet,
    x_t: DVector<f64>,
    weights: CostWeights,
}

fn synthesis_case(r: f64, seed: u64) -> SynthesisCase {
    let (_, data) = experiment(2, 1, 10, 1e-4, NoiseDistribution::UniformBall, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0de);
    let x_t = gauss(&mut rng, 2, 1, 0.5).column(0).into_owned();
    let weights = CostWeights::new(DMatrix::identity(2, 2), DMatrix::from_element(1, 1, r)).unwrap();
    SynthesisCase { data, x_t, weights }
}

fn solve(case: &SynthesisCase, data: &DataSet, cons: &ConstraintSets, opts: &SynthesisOptions) -> Option<Certificate> {
    let res = synthesize(&case.x_t, &build_pi_blocks(data), &case.weights, cons, opts).unwrap();
    if res.is_optimal() {
        res.certificate
    } else {
        None
    }
}

fn unconstrained() -> SynthesisOptions {
    SynthesisOptions {
        constraints: false,
        ..SynthesisOptions::default()
    }
}

fn constraint_sets(su: f64, sx: f64) -> ConstraintSets {
    ConstraintSets::new(DMatrix::from_element(1, 1, su), DMatrix::identity(2, 2) * sx).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn certificate_holds_on_consistent_samples(r in 0.1f64..10.0, seed in any::<u64>()) {
        let case = synthesis_case(r, seed);
        let cert = solve(&case, &case.data, &constraint_sets(1.0, 0.0), &unconstrained());
        prop_assume!(cert.is_some());
        let c = cert.unwrap();
        let w = &case.weights;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = sample_consistent(&case.data, 100, &mut rng).pairs;
        prop_assert!(!samples.is_empty());
        let h_inv = c.h.clone().try_inverse().unwrap();
        for (a, b) in &samples {
            let acl = a + b * &c.f;
            let decrease = acl.transpose() * &c.p * &acl - &c.p + c.f.transpose() * w.r() * &c.f + w.q();
            prop_assert!(lambda_max(&decrease) <= 1e-6, "decrease {}", lambda_max(&decrease));
            let m = a * &c.h + b * &c.l;
            let chain = m.transpose() * &h_inv * &m - &c.h
                + (c.l.transpose() * w.r() * &c.l + &c.h * w.q() * &c.h) / c.gamma;
            prop_assert!(lambda_max(&chain) <= 1e-6, "schur chain {}", lambda_max(&chain));
        }
    }

    #[test]
    fn constraint_certificates_hold(r in 0.1f64..10.0, su in 0.01f64..1.0, sx in 0.01f64..1.0, seed in any::<u64>()) {
        let case = synthesis_case(r, seed);
        let cons = constraint_sets(su, sx);
        for form in [StateConstraintForm::Containment, StateConstraintForm::Standard] {
            let opts = SynthesisOptions { state_form: form, ..SynthesisOptions::default() };
            let Some(c) = solve(&case, &case.data, &cons, &opts) else { continue };
            let input = &c.h - c.l.transpose() * cons.s_u() * &c.l;
            prop_assert!(lambda_min(&input) >= -1e-8, "input {}", lambda_min(&input));
            let scaled = &c.p / c.gamma;
            let state = match form {
                // Ellipsoid inside the state set.
                StateConstraintForm::Containment => &scaled - cons.s_x(),
                StateConstraintForm::Standard => cons.s_x() - &scaled,
            };
            prop_assert!(lambda_min(&state) >= -1e-8, "{} state {}", form, lambda_min(&state));
        }
    }

    #[test]
    fn gamma_grows_with_declared_noise(r in 0.1f64..10.0, factor in 1.5f64..10.0, seed in any::<u64>()) {
        let case = synthesis_case(r, seed);
        let cons = constraint_sets(1.0, 0.0);
        let small = solve(&case, &case.data, &cons, &unconstrained());
        let wide = case.data.with_eps(case.data.eps() * factor).unwrap();
        let large = solve(&case, &wide, &cons, &unconstrained());
        prop_assume!(small.is_some() && large.is_some());
        let (g_small, g_large) = (small.unwrap().gamma, large.unwrap().gamma);
        prop_assert!(g_large >= g_small * (1.0 - 1e-6), "{} < {}", g_large, g_small);
    }

    #[test]
    fn constraints_never_lower_gamma(r in 0.1f64..10.0, su in 0.01f64..1.0, sx in 0.01f64..1.0, seed in any::<u64>()) {
        let case = synthesis_case(r, seed);
        let cons = constraint_sets(su, sx);
        let free = solve(&case, &case.data, &cons, &unconstrained());
        let bound = solve(&case, &case.data, &cons, &SynthesisOptions::default());
        prop_assume!(free.is_some() && bound.is_some());
        let (g_free, g_bound) = (free.unwrap().gamma, bound.unwrap().gamma);
        prop_assert!(g_bound >= g_free * (1.0 - 1e-6), "{} < {}", g_bound, g_free);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn noise_free_closed_loop_invariants(r in 0.1f64..10.0, seed in any::<u64>()) {
        let (sys, data) = experiment(2, 1, 10, 1e-4, NoiseDistribution::UniformBall, seed);
        let weights = CostWeights::new(DMatrix::identity(2, 2), DMatrix::from_element(1, 1, r)).unwrap();
        let cons = constraint_sets(0.1, 0.05);
        let cfg = MpcConfig::new(weights.clone(), cons, data, 15);
        let x0 = DVector::from_vec(vec![1.0, -1.0]);
        let first = run_closed_loop(&sys, &x0, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assume!(first.is_ok());
        let run = first.unwrap();
        let again = run_closed_loop(&sys, &x0, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        // solve_time is wall clock, everything else must repeat exactly.
        prop_assert_eq!(&run.states, &again.states);
        prop_assert_eq!(&run.inputs, &again.inputs);
        prop_assert_eq!(&run.gains, &again.gains);
        prop_assert_eq!(&run.lyapunov, &again.lyapunov);
        prop_assert_eq!(run.total_cost, again.total_cost);

        let gammas: Vec<f64> = run.records.iter().map(|r| r.gamma).collect();
        let gammas_again: Vec<f64> = again.records.iter().map(|r| r.gamma).collect();
        prop_assert_eq!(&gammas, &gammas_again);
        for g in gammas.windows(2) {
            prop_assert!(g[1] <= g[0] * (1.0 + 1e-6), "gamma rose {} -> {}", g[0], g[1]);
        }
        prop_assert!(run.total_cost <= gammas[0] * (1.0 + 1e-6));
        let c = lambda_min(weights.q());
        for t in 0..run.len() - 1 {
            let v = |k: usize| run.lyapunov[k].as_ref().map_or(0.0, |p| run.states[k].dot(&(p * &run.states[k])));
            let v_next = run.lyapunov[t + 1].as_ref().map_or(0.0, |p| run.states[t + 1].dot(&(p * &run.states[t + 1])));
            prop_assert!(v_next - v(t) <= -c * run.states[t].norm_squared() + 1e-8);
        }
        for rec in &run.records {
            prop_assert!(rec.input_ok() && rec.state_ok());
        }
    }
}
