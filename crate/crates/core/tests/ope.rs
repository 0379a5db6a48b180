//! Distribution shift, the plug-in estimator and the robust value.

mod common;

use common::*;
use drmdp::bench::{build_behavioral_geometric, build_gridworld, two_state_test_mdp};
use drmdp::empirical::{
    empirical_sans, kernel_from_sans, policy_from_sans, simulate_trajectory, SansDistribution, Trajectory,
};
use drmdp::mdp::{average_reward, stationary_sans, Kernel, Policy, Reward};
use drmdp::ope::{
    consistency_schedule, plug_in_estimate, robust_value, shift_distribution, smooth_into_xi0, value_of_sans,
    EvaluationRequest, RadiusSchedule, RobustConfig,
};
use drmdp::rng::derive_seed;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn shift_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (ns, na) = random_dims(&mut r);
        let kernel = random_kernel(&mut r, ns, na, true);
        let behavioral = random_policy(&mut r, ns, na, 0.01);
        let policy = random_policy(&mut r, ns, na, 0.01);
        let xi0 = stationary_sans(&behavioral, &kernel).unwrap();
        let shifted = shift_distribution(&policy, &xi0).unwrap();
        let pi = policy_from_sans(&shifted).into_policy().unwrap();
        for (a, b) in pi.as_slice().iter().zip(policy.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        let (q, q0) = (kernel_from_sans(&shifted).into_kernel().unwrap(), kernel_from_sans(&xi0).into_kernel().unwrap());
        for (a, b) in q.as_slice().iter().zip(q0.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        let reward = random_reward(&mut r, ns, na);
        let direct = average_reward(&policy, &kernel, &reward).unwrap();
        prop_assert!((value_of_sans(&shifted, &reward).unwrap() - direct).abs() <= 1e-12);
    }
}

#[test]
fn shift_by_own_policy_is_identity() {
    let mut r = rng(4);
    let kernel = random_kernel(&mut r, 4, 3, true);
    let behavioral = random_policy(&mut r, 4, 3, 0.05);
    let xi0 = stationary_sans(&behavioral, &kernel).unwrap();
    let own = policy_from_sans(&xi0).into_policy().unwrap();
    let shifted = shift_distribution(&own, &xi0).unwrap();
    for (a, b) in shifted.as_slice().iter().zip(xi0.as_slice()) {
        assert!((a - b).abs() <= 1e-12);
    }
    let single = stationary_sans(&Policy::uniform(4, 1), &random_kernel(&mut r, 4, 1, true)).unwrap();
    let same = shift_distribution(&Policy::uniform(4, 1), &single).unwrap();
    for (a, b) in same.as_slice().iter().zip(single.as_slice()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn shift_matches_direct_construction() {
    let kernel = Kernel::new(2, 2, vec![0.5; 8]).unwrap();
    let behavioral = Policy::state_independent(2, &[0.9, 0.1]).unwrap();
    let xi0 = stationary_sans(&behavioral, &kernel).unwrap();
    let shifted = shift_distribution(&Policy::uniform(2, 2), &xi0).unwrap();
    // Uniform π and uniform Q spread mass evenly over all eight triples.
    for v in shifted.as_slice() {
        assert!((v - 0.125).abs() <= 1e-12);
    }
}

#[test]
fn value_of_point_mass() {
    let mut probs = vec![0.0; 8];
    probs[0] = 1.0;
    let xi = SansDistribution::new(2, 2, probs).unwrap();
    let reward = Reward::new(2, 2, vec![-5.0, 1.0, 2.0, 3.0]).unwrap();
    assert_eq!(value_of_sans(&xi, &reward).unwrap(), -5.0);
    assert_eq!(value_of_sans(&xi, &Reward::constant(2, 2, 0.3)).unwrap(), 0.3);
}

#[test]
fn plug_in_is_exact_at_truth_and_undefined_off_support() {
    let (mdp, behavioral, evaluation) = two_state_test_mdp();
    let xi0 = stationary_sans(&behavioral, &mdp.kernel).unwrap();
    let truth = average_reward(&evaluation, &mdp.kernel, &mdp.reward).unwrap();
    assert!((plug_in_estimate(&evaluation, &xi0, &mdp.reward).unwrap() - truth).abs() <= 1e-12);
    let stuck = empirical_sans(&Trajectory::new(2, 2, vec![0, 0, 0], vec![0, 1, 0]).unwrap());
    assert!(plug_in_estimate(&evaluation, &stuck, &mdp.reward).is_none());
}

#[test]
fn gridworld_plug_in_needs_smoothing_at_two_thousand_steps() {
    let mdp = build_gridworld();
    let behavioral = build_behavioral_geometric();
    let evaluation = Policy::uniform(25, 4);
    let truth = average_reward(&evaluation, &mdp.kernel, &mdp.reward).unwrap();
    assert!((truth + 1.58).abs() <= 1e-12);
    let traj = simulate_trajectory(&mdp, &behavioral, 2000, derive_seed(0, &[2000])).unwrap();
    let xi_hat = empirical_sans(&traj);
    // Rare actions leave (s,a) rows unvisited, so the raw estimate is undefined.
    assert!(plug_in_estimate(&evaluation, &xi_hat, &mdp.reward).is_none());
    let weight = 100.0 / (2000.0 + 100.0);
    let (center, smoothed) = smooth_into_xi0(&xi_hat, weight).unwrap();
    assert!(smoothed);
    let estimate = plug_in_estimate(&evaluation, &center, &mdp.reward).unwrap();
    assert!((estimate - truth).abs() <= 0.1, "{estimate}");
}

fn two_state_request(radius: f64) -> (EvaluationRequest, f64) {
    let (mdp, behavioral, evaluation) = two_state_test_mdp();
    let xi0 = stationary_sans(&behavioral, &mdp.kernel).unwrap();
    let plug_in = plug_in_estimate(&evaluation, &xi0, &mdp.reward).unwrap();
    (EvaluationRequest { policy: evaluation, empirical: xi0, radius, reward: mdp.reward }, plug_in)
}

#[test]
fn tiny_radius_collapses_to_plug_in() {
    let (req, plug_in) = two_state_request(1e-8);
    let res = robust_value(&req, &RobustConfig::default()).unwrap();
    assert!((res.value - plug_in).abs() <= 1e-3);
    assert!(res.value <= plug_in + 1e-12);
}

#[test]
fn constant_reward_is_unaffected_by_the_adversary() {
    let (mut req, _) = two_state_request(0.3);
    req.reward = Reward::constant(2, 2, 2.5);
    let res = robust_value(&req, &RobustConfig::default()).unwrap();
    assert!((res.value - 2.5).abs() <= 1e-12);
}

#[test]
fn single_action_example_matches_grid() {
    let (inst, behavioral) = example_single_action();
    let oracle = BallOracle::new(inst.clone(), &behavioral);
    let xi = stationary_sans(&Policy::uniform(2, 1), &inst.kernel()).unwrap();
    let req = EvaluationRequest { policy: Policy::uniform(2, 1), empirical: xi, radius: 0.01, reward: inst.reward() };
    let res = robust_value(&req, &RobustConfig::default()).unwrap();
    let grid = literal_grid_single_action(&inst, &oracle.weights, 0.01, 1e-3);
    assert!((res.value - grid).abs() <= 5e-3, "{} vs {grid}", res.value);
    assert!(res.diagnostics.constraint_value <= 0.01 + 1e-8);
}

#[test]
fn robust_value_is_monotone_in_radius() {
    let mut last = f64::INFINITY;
    for radius in [0.001, 0.01, 0.1] {
        let (req, plug_in) = two_state_request(radius);
        let res = robust_value(&req, &RobustConfig::default()).unwrap();
        assert!(res.value <= plug_in + 1e-3);
        assert!(res.value <= last + 1e-3, "radius {radius}: {} after {last}", res.value);
        last = res.value;
    }
}

#[test]
fn radius_schedule_values() {
    assert!((consistency_schedule(450) - 0.01).abs() <= 1e-15);
    assert!((RadiusSchedule { scale: 9.0 }.radius(900) - 0.01).abs() <= 1e-15);
    assert!(consistency_schedule(1_000_000_000) < 1e-8);
}

#[test]
fn robust_value_rejects_bad_inputs() {
    let (mut req, _) = two_state_request(0.0);
    assert!(robust_value(&req, &RobustConfig::default()).is_err());
    req.radius = 0.1;
    req.empirical = empirical_sans(&Trajectory::new(2, 2, vec![0, 0, 0], vec![0, 1, 0]).unwrap());
    assert!(robust_value(&req, &RobustConfig::default()).is_err());
}

#[test]
fn consistent_with_shrinking_radius() {
    let (mdp, behavioral, evaluation) = two_state_test_mdp();
    let truth = average_reward(&evaluation, &mdp.kernel, &mdp.reward).unwrap();
    let len = 50_000;
    let close = (0..100u64)
        .filter(|&seed| {
            let xi = empirical_sans(&simulate_trajectory(&mdp, &behavioral, len, seed).unwrap());
            let req = EvaluationRequest {
                policy: evaluation.clone(),
                empirical: xi,
                radius: consistency_schedule(len as u64),
                reward: mdp.reward.clone(),
            };
            let mut cfg = RobustConfig::default();
            cfg.critic.seed = seed;
            (robust_value(&req, &cfg).unwrap().value - truth).abs() <= 0.05
        })
        .count();
    assert!(close >= 90, "{close}/100 within 0.05");
}
