use std::f64::consts::PI;
use std::time::Instant;

use circuflow_robot::dynamics::Vec2;
use circuflow_robot::env::observe;
use circuflow_robot::evaluate::episode_rng;
use circuflow_robot::{
    evaluate_policy, EnvConfig, PolicyFile, PolicyRegistry, ReachEnv, ServoPolicy,
    ZeroPolicy,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probability that a target uniform on the spawn annulus lies within the
/// success radius of a fingertip held still at a uniformly random angle.
fn resting_overlap_oracle(cfg: &EnvConfig, draws: usize, seed: u64) -> f64 {
    let p = &cfg.params;
    let tip = (p.l1 * p.l1 + p.l2 * p.l2 + 2.0 * p.l1 * p.l2 * cfg.initial.q2.cos()).sqrt();
    let (r0, r1) = (cfg.spawn.min_radius, cfg.spawn.radius);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..draws {
        // Inverse-CDF polar sampling, independent of the env's rejection sampler.
        let r = rng.random_range(r0 * r0..r1 * r1).sqrt();
        let theta = rng.random_range(-PI..PI);
        let phi = rng.random_range(-PI..PI);
        let d2 = r * r + tip * tip - 2.0 * r * tip * (theta - phi).cos();
        if d2 < cfg.criterion.distance_threshold.powi(2) {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

#[test]
fn zero_torque_success_matches_geometric_oracle() {
    let env = ReachEnv::new(EnvConfig::default()).unwrap();
    let oracle = resting_overlap_oracle(&env.config, 1_000_000, 99);
    let eval = evaluate_policy(&env, &ZeroPolicy, 100_000, 0).unwrap();
    let rate = eval.report.success_rate;
    assert!(
        (rate - oracle).abs() <= 0.005,
        "zero-torque rate {rate} vs oracle {oracle}"
    );
    // A resting arm either succeeds on the first step or never.
    assert!(eval
        .outcomes
        .iter()
        .all(|o| o.success_step.is_none() || o.success_step == Some(1)));
}

#[test]
fn evaluation_is_bit_identical_per_seed() {
    let env = ReachEnv::new(EnvConfig::default()).unwrap();
    let servo = ServoPolicy {
        params: env.config.params,
        gains: Default::default(),
    };
    let a = evaluate_policy(&env, &servo, 2_000, 5).unwrap();
    let b = evaluate_policy(&env, &servo, 2_000, 5).unwrap();
    assert!(a.report.same_outcome(&b.report));
    assert_eq!(a.outcomes, b.outcomes);
    for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
        assert_eq!(x.total_reward.to_bits(), y.total_reward.to_bits());
        assert_eq!(x.final_distance.to_bits(), y.final_distance.to_bits());
    }
    let c = evaluate_policy(&env, &servo, 2_000, 6).unwrap();
    assert_ne!(a.outcomes, c.outcomes);
}

#[test]
fn servo_oracle_policy_succeeds() {
    let env = ReachEnv::new(EnvConfig::default()).unwrap();
    let registry = PolicyRegistry::builtin();
    let servo = registry.resolve("servo", &env.config).unwrap();
    assert_eq!(servo.kind(), "servo");
    let eval = evaluate_policy(&env, servo.as_ref(), 10_000, 1).unwrap();
    assert!(eval.report.success_rate >= 0.95, "{:?}", eval.report);
    assert_eq!(eval.report.aborted, 0);
}

#[test]
fn ten_thousand_episodes_within_budget() {
    let env = ReachEnv::new(EnvConfig::default()).unwrap();
    let servo = ServoPolicy {
        params: env.config.params,
        gains: Default::default(),
    };
    let started = Instant::now();
    evaluate_policy(&env, &servo, 10_000, 2).unwrap();
    assert!(started.elapsed().as_secs_f64() <= 60.0);
}

#[test]
fn episode_starts_follow_the_configured_distributions() {
    let env = ReachEnv::new(EnvConfig::default()).unwrap();
    let c = &env.config;
    let mut radii = Vec::new();
    for i in 0..20_000 {
        let s = env.reset(&mut episode_rng(3, i));
        let r = s.target.norm();
        assert!(r >= c.spawn.min_radius && r <= c.spawn.radius);
        assert!(s.q[0] >= c.initial.q1_range[0] && s.q[0] < c.initial.q1_range[1]);
        assert_eq!(s.q[1], c.initial.q2);
        assert_eq!(s.qd, Vec2::zeros());
        radii.push(r);
    }
    // Uniform on the annulus: P(r < m) = (m² − r0²)/(R² − r0²) at the
    // median radius m.
    let (r0, r1) = (c.spawn.min_radius, c.spawn.radius);
    let median = ((r0 * r0 + r1 * r1) / 2.0).sqrt();
    let below = radii.iter().filter(|&&r| r < median).count() as f64 / radii.len() as f64;
    assert!((below - 0.5).abs() < 0.02, "{below}");
}

#[test]
fn mlp_policy_file_evaluates_like_the_network() {
    let env = ReachEnv::new(EnvConfig::default()).unwrap();
    let cfg = circuflow_robot::CemConfig {
        hidden: vec![5],
        ..Default::default()
    };
    let mlp = circuflow_robot::cem::initial_policy(&env, &cfg, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.json");
    std::fs::write(&path, mlp.to_file().to_json()).unwrap();
    let loaded = PolicyRegistry::builtin()
        .build(&PolicyFile::load(&path).unwrap(), &env.config)
        .unwrap();
    let a = evaluate_policy(&env, &mlp, 200, 8).unwrap();
    let b = evaluate_policy(&env, loaded.as_ref(), 200, 8).unwrap();
    assert_eq!(a.outcomes, b.outcomes);
}

proptest! {
    #[test]
    fn observation_offset_is_fingertip_minus_target(
        q1 in -PI..PI, q2 in -PI..PI, tx in -0.16f64..0.16, ty in -0.16f64..0.16,
    ) {
        let env = ReachEnv::new(EnvConfig::default()).unwrap();
        let p = &env.config.params;
        let mut s = env.reset(&mut episode_rng(0, 0));
        s.q = Vec2::new(q1, q2);
        s.target = Vec2::new(tx, ty);
        let o = observe(&s, p);
        let tip = Vec2::new(
            p.l1 * q1.cos() + p.l2 * (q1 + q2).cos(),
            p.l1 * q1.sin() + p.l2 * (q1 + q2).sin(),
        );
        prop_assert!((o[8] - (tip[0] - tx)).abs() <= 1e-12);
        prop_assert!((o[9] - (tip[1] - ty)).abs() <= 1e-12);
        let distance = ((tip[0] - tx).powi(2) + (tip[1] - ty).powi(2)).sqrt();
        let offset_norm = (o[8] * o[8] + o[9] * o[9] + o[10] * o[10]).sqrt();
        prop_assert!((offset_norm - distance).abs() <= 1e-12);
        prop_assert_eq!(o.len(), 11);
        prop_assert!((o[0] * o[0] + o[2] * o[2] - 1.0).abs() <= 1e-12);
        prop_assert!((o[1] * o[1] + o[3] * o[3] - 1.0).abs() <= 1e-12);
        prop_assert_eq!(o[10], 0.0);
    }

    #[test]
    fn step_never_exceeds_torque_limit(a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let env = ReachEnv::new(EnvConfig::default()).unwrap();
        let s = env.reset(&mut episode_rng(1, 0));
        let tr = env.step(&s, [a, b]);
        let lim = env.config.torque_limit;
        prop_assert!(tr.torque.iter().all(|t| t.abs() <= lim));
        prop_assert!(tr.reward <= 0.0);
    }
}
