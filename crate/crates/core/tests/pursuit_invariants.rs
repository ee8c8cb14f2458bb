use parshare::pursuit::{
    episode_seed, random_baseline, record_episode, Action, Event, PursuitConfig, PursuitEnv,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config() -> impl Strategy<Value = PursuitConfig> {
    (4usize..=12, 4usize..=12, 1usize..=5, 1usize..=8, any::<u64>()).prop_map(|(w, h, p, e, seed)| {
        PursuitConfig {
            grid_w: w,
            grid_h: h,
            n_pursuers: p,
            n_evaders: e,
            obs_range: 3,
            max_steps: 60,
            seed,
            ..PursuitConfig::default()
        }
    })
}

fn random_actions(rng: &mut ChaCha8Rng, n: usize) -> Vec<Action> {
    (0..n).map(|_| Action::from_index(rng.gen_range(0..5))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn steps_conserve_entities_and_explain_rewards(cfg in config(), action_seed in any::<u64>()) {
        prop_assume!(cfg.validate().is_ok());
        let mut env = PursuitEnv::reset(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(action_seed);
        let mut captured = 0;
        while !env.is_done() {
            let before = env.state().clone();
            let out = env.step(&random_actions(&mut rng, cfg.n_pursuers)).unwrap();
            let s = env.state();

            let mut cells: Vec<_> = s.pursuers.iter().chain(s.evaders.iter().flatten()).copied().collect();
            let n_cells = cells.len();
            cells.sort_unstable();
            cells.dedup();
            prop_assert_eq!(cells.len(), n_cells);
            for &p in &cells {
                prop_assert!(p.0 < cfg.grid_w && p.1 < cfg.grid_h);
                prop_assert!(!s.is_obstacle(cfg.grid_w, p));
            }
            prop_assert_eq!(s.pursuers.len(), cfg.n_pursuers);
            prop_assert_eq!(s.evaders.len(), cfg.n_evaders);
            for (a, b) in before.pursuers.iter().zip(&s.pursuers) {
                prop_assert!(a.0.abs_diff(b.0) + a.1.abs_diff(b.1) <= 1);
            }

            let mut expected = vec![0.0; cfg.n_pursuers];
            for ev in &out.events {
                match ev {
                    Event::Touch { pursuer, .. } => expected[*pursuer] += cfg.touch_reward,
                    Event::Capture { evader, pursuers } => {
                        captured += 1;
                        prop_assert!(s.evaders[*evader].is_none());
                        prop_assert!(before.evaders[*evader].is_some());
                        for &i in pursuers {
                            expected[i] += cfg.capture_reward;
                        }
                    }
                }
            }
            for (r, e) in out.rewards.iter().zip(&expected) {
                prop_assert!((r - e).abs() < 1e-12);
            }
        }
        prop_assert_eq!(env.state().alive_evaders() + captured, cfg.n_evaders);
        prop_assert!(env.state().step <= cfg.max_steps);
        prop_assert!(env.state().step == cfg.max_steps || env.state().alive_evaders() == 0);
    }
}

#[test]
fn episodes_are_reproducible() {
    let cfg = PursuitConfig { seed: 77, ..PursuitConfig::small() };
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        record_episode(&cfg, |_, _| Action::from_index(rng.gen_range(0..5))).unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.len() <= cfg.max_steps as usize);
    let other = PursuitConfig { seed: 78, ..cfg.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = record_episode(&other, |_, _| Action::from_index(rng.gen_range(0..5))).unwrap();
    assert_ne!(a, b);
}

#[test]
fn baseline_is_deterministic_and_seed_sensitive() {
    let cfg = PursuitConfig::small();
    let a = random_baseline(&cfg, 30).unwrap();
    assert_eq!(a, random_baseline(&cfg, 30).unwrap());
    let b = random_baseline(&PursuitConfig { seed: 1, ..cfg }, 30).unwrap();
    assert_ne!(a.mean, b.mean);
    assert_ne!(episode_seed(0, 0), episode_seed(0, 1));
    assert_ne!(episode_seed(0, 1), episode_seed(1, 0));
}

#[test]
fn trajectory_lines_are_json_objects() {
    let cfg = PursuitConfig { max_steps: 5, ..PursuitConfig::small() };
    let records = record_episode(&cfg, |_, _| Action::Stay).unwrap();
    assert_eq!(records.len(), 5);
    for (k, r) in records.iter().enumerate() {
        let line = r.to_json_line();
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["t"], k as u64 + 1);
        assert_eq!(v["actions"][0], "stay");
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        PursuitConfig { obs_range: 4, ..PursuitConfig::small() },
        PursuitConfig { grid_w: 0, ..PursuitConfig::small() },
        PursuitConfig { max_steps: 0, ..PursuitConfig::small() },
        PursuitConfig { n_evaders: 100, ..PursuitConfig::small() },
    ];
    for cfg in bad {
        assert!(PursuitEnv::reset(&cfg).is_err());
    }
    let mut env = PursuitEnv::reset(&PursuitConfig::small()).unwrap();
    assert!(env.step(&[Action::Stay]).is_err());
    assert!(env.observe(9).is_err());
}
