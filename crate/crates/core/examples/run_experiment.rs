//! Driving the experiment runner from code instead of the command line.

use parshare::harness::{execute, ExperimentConfig, Kind};

const CONFIG: &str = r#"
seeds = "0..3"
jobs = 2

[params]
n = 3
k_star = 0.4
eps = 0.01
"#;

fn main() {
    let config = ExperimentConfig::parse(CONFIG, Some(Kind::MailpSim)).unwrap();
    let outcome = execute(&config).unwrap();
    for (name, text) in &outcome.files {
        println!("== {name}");
        for line in text.lines().take(24) {
            println!("{line}");
        }
    }

    let (_, summary) = &outcome.files[1];
    let rebuilt = ExperimentConfig::from_metadata(summary).unwrap();
    println!("\nrebuilt from metadata: {}", rebuilt.params == config.params);
}
