//! Uniformly random pursuers, plus a short trajectory dump.
//!
//! `cargo run --release --example pursuit_random [episodes]`

use parshare::pursuit::{random_baseline, record_episode, Action, PursuitConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let episodes: usize = std::env::args().nth(1).map_or(100, |s| s.parse().expect("episode count"));
    let config = PursuitConfig::default();
    let m = random_baseline(&config, episodes).unwrap();
    println!(
        "{}x{} grid, {} pursuers, {} evaders: {:.3} +- {:.3} over {} episodes",
        config.grid_w, config.grid_h, config.n_pursuers, config.n_evaders, m.mean, m.stderr, m.n
    );

    let small = PursuitConfig::small();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let records = record_episode(&small, |_, _| Action::from_index(rng.gen_range(0..Action::ALL.len()))).unwrap();
    println!("\nfirst steps of a small episode ({} steps total):", records.len());
    for r in records.iter().take(3) {
        println!("{}", r.to_json_line());
    }
    if let Some(r) = records.iter().find(|r| !r.events.is_empty()) {
        println!("first event at t = {}: {:?}", r.t, r.events);
    }
}
