//! One shared table against per-agent tables on the small pursuit task.
//!
//! `cargo run --release --example centralization [episodes]`

use parshare::learn::{evaluate, train, EpsilonSchedule, JointPolicy, SharingMode, TrainConfig};
use parshare::pursuit::PursuitConfig;

fn main() {
    let episodes: u64 = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("episode count"));
    let env = PursuitConfig::small();
    let base = TrainConfig {
        episodes,
        eval_every: (episodes / 4).max(1),
        exploration: EpsilonSchedule {
            start: 1.0,
            end: 0.05,
            decay_episodes: episodes / 2,
        },
        ..TrainConfig::default()
    };

    let mut saved = None;
    for (name, mode, agent_indication) in [
        ("shared", SharingMode::Shared, false),
        ("independent", SharingMode::Independent, false),
        ("shared + id", SharingMode::Shared, true),
    ] {
        let cfg = TrainConfig {
            mode,
            agent_indication,
            ..base.clone()
        };
        let (policy, curve) = train(&env, &cfg).unwrap();
        let rows: usize = policy.tables.iter().map(|t| t.len()).sum();
        print!("{name:<12} {rows:>7} rows |");
        for p in &curve.points {
            print!(" {}: {:.2}", p.episode, p.mean);
        }
        println!();
        saved.get_or_insert(policy);
    }

    let policy = saved.unwrap();
    let text = policy.to_json();
    let reloaded = JointPolicy::from_json(&text).unwrap();
    let m = evaluate(&reloaded, &env, 100, 99).unwrap();
    println!("\nreloaded shared policy ({} KiB): {:.3} +- {:.3}", text.len() / 1024, m.mean, m.stderr);
}
