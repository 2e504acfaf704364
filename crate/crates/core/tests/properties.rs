//! Cross-module invariants: strategy parity, episode trace sanity and
//! training behaviour.

use follower::config::Config;
use follower::control::{tune_gains, StepSetup, TuningGrid};
use follower::exec::Exec;
use follower::kinematics::Pose;
use follower::planner::{
    generate_dataset, train_network, ExpertConfig, ExpertPolicy, GenConfig, LossKind, MlpNetwork, TrainConfig,
    V_NET_SIZES,
};
use follower::vision::{detect_batch, VisionConfig};
use follower::world::{builtin_environments, render_frame, simulate_episode, CameraConfig, Outcome, SimConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn strategies_agree_on_detection() {
    let cam = CameraConfig::default();
    let frames: Vec<_> = (0..12)
        .map(|i| {
            let b = (-24.0 + 4.0 * i as f64).to_radians();
            let d = 0.3 + 0.1 * i as f64;
            render_frame(&Pose::default(), (d * b.cos(), -d * b.sin()), &cam, &[])
        })
        .collect();
    let cfg = VisionConfig::default();
    assert_eq!(detect_batch(&frames, &cfg, Exec::Sequential), detect_batch(&frames, &cfg, Exec::Parallel));
}

#[test]
fn strategies_agree_on_tuning() {
    let grid = TuningGrid { kp_step: 0.5, ki_step: 5.0, ..TuningGrid::default() };
    let setup = StepSetup::default();
    assert_eq!(tune_gains(&grid, &setup, Exec::Sequential), tune_gains(&grid, &setup, Exec::Parallel));
}

#[test]
fn strategies_agree_on_dataset() {
    let envs = builtin_environments();
    let gen = GenConfig { rows: 150, seed: 11, batch: 4, ..GenConfig::default() };
    let run = |exec| generate_dataset(&envs, &ExpertConfig::default(), &SimConfig::default(), &gen, exec).unwrap();
    assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
}

#[test]
fn expert_episodes_are_sane() {
    let cfg = Config::default();
    for env in builtin_environments() {
        let trace = simulate_episode(&env, &mut ExpertPolicy::new(cfg.expert), &cfg.sim).unwrap();
        assert_eq!(trace.summary.outcome, Outcome::Completed, "{}", env.name);
        assert!(trace.rows.iter().all(|r| r.is_finite()));
        assert!(trace.rows.windows(2).all(|w| w[1].t > w[0].t));
        assert!(trace.rows.iter().all(|r| (0.0..=1.0).contains(&r.v_desired)));
        // odometry drifts by quantisation only
        assert!(trace.summary.final_odometry_error_m < 0.01);
    }
}

#[test]
fn constant_label_loss_settles_monotonically() {
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<[f64; 4]> = (0..400)
            .map(|_| {
                let far = if rng.gen_bool(0.5) { 0.0 } else { 1.0 };
                [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), far]
            })
            .collect();
        let targets = vec![0.5; inputs.len()];
        let mut net = MlpNetwork::initialized(&V_NET_SIZES, &mut rng);
        let cfg = TrainConfig { epochs: 150, seed, ..TrainConfig::default() };
        let hist = train_network(&mut net, &inputs, &targets, LossKind::Mse, &cfg).unwrap();
        for w in hist[5..].windows(2) {
            assert!(w[1].train <= w[0].train, "seed {seed} epoch {}: {} > {}", w[1].epoch, w[1].train, w[0].train);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn episodes_never_produce_nan(seed in 0u64..1000, env_index in 0usize..3) {
        let envs = builtin_environments();
        let gen = GenConfig::default();
        let env = follower::planner::episode_variant(&envs, seed, env_index, &gen);
        let sim = SimConfig { max_duration: 8.0, ..SimConfig::default() };
        let trace = simulate_episode(&env, &mut ExpertPolicy::new(ExpertConfig::default()), &sim).unwrap();
        prop_assert!(trace.rows.iter().all(|r| r.is_finite()));
        prop_assert!(trace.summary.duration_s <= sim.max_duration + 1e-9);
    }
}
