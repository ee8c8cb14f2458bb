use std::fs;
use std::path::Path;

use parshare::harness::cli::main_with_args;
use parshare::harness::{execute, parse_csv, ExperimentConfig, Kind};

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["parshare"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn malformed_configs_exit_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    for (k, text) in [
        "kind = \"bounds_sweep\"\nunknown = 1\n",
        "kind = \"bounds_sweep\"\n[params]\nk_grdi = [0.5]\n",
        "kind = \"bounds_sweep\"\n[params\n",
        "kind = \"pursuit_random\"\n",
        "seeds = \"5..2\"\n",
        "[params.learning_fn]\nkind = \"cubic\"\n",
    ]
    .iter()
    .enumerate()
    {
        let cfg = write(tmp.path(), &format!("bad{k}.toml"), text);
        assert_eq!(run(&["bounds-sweep", "--config", &cfg, "--out", out_s]), 2, "{text}");
        assert!(!out.exists());
    }
    assert_eq!(run(&["bounds-sweep", "--config", "/nonexistent.toml", "--out", out_s]), 2);
    assert_eq!(run(&["bounds-sweep", "--seeds", "x", "--out", out_s]), 2);
    assert_eq!(run(&["bounds-sweep", "--jobs", "0", "--out", out_s]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
    assert!(!out.exists());
}

#[test]
fn domain_errors_exit_3_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write(tmp.path(), "c.toml", "[params]\ni0 = 0.6\n");
    assert_eq!(run(&["bounds-sweep", "--config", &cfg, "--out", out.to_str().unwrap()]), 3);
    let cfg = write(tmp.path(), "d.toml", "[params]\nk_star = 1.5\n");
    assert_eq!(run(&["mailp-sim", "--config", &cfg, "--out", out.to_str().unwrap()]), 3);
    assert!(!out.exists());
}

#[test]
fn failed_checks_exit_4_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // No run converges within three steps.
    let cfg = write(
        tmp.path(),
        "v.toml",
        "[params]\nmax_steps = 3\nmulti_n = [3]\nmulti_k = [0.5]\nrecurrence_cases = 2\n",
    );
    assert_eq!(run(&["mailp-verify", "--config", &cfg, "--out", out.to_str().unwrap()]), 4);
    let text = read(&out, "mailp_verify.csv");
    assert!(text.lines().any(|l| l.ends_with(",false")));
}

#[test]
fn csv_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(run(&["bounds-sweep", "--out", out.to_str().unwrap()]), 0);
    let text = read(&out, "bounds_sweep.csv");
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    let header = text.lines().position(|l| !l.starts_with('#')).unwrap();
    assert!(header > 3);
    assert!(text.lines().next().unwrap().starts_with("# parshare "));
    assert_eq!(text.lines().nth(header).unwrap(), "k,formula,t_star,t_star_ceil,simulated_steps,simulated_converged");
    let (_, records) = parse_csv(&text).unwrap();
    assert_eq!(records.len(), 1 + 101);
    for r in &records[1..] {
        let mantissa = r[2].split('e').next().unwrap();
        assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17, "{}", r[2]);
    }
    let k1: f64 = records.last().unwrap()[2].parse().unwrap();
    assert_eq!(k1, parshare::bounds::k1_limit_bound(3, 0.45, 0.01, 0.001).unwrap());
}

#[test]
fn parallel_and_serial_runs_match() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "t.toml",
        "seeds = \"0..3\"\n[params]\nsave_policies = true\n[params.env]\nmax_steps = 60\n[params.train]\nepisodes = 12\neval_every = 6\neval_episodes = 3\n",
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(run(&["pursuit-train", "--config", &cfg, "--out", a.to_str().unwrap(), "--jobs", "1"]), 0);
    assert_eq!(run(&["pursuit-train", "--config", &cfg, "--out", b.to_str().unwrap(), "--jobs", "4"]), 0);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 2 + 2 * 3);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }

    let eval_cfg = write(
        tmp.path(),
        "e.toml",
        &format!(
            "seeds = \"4,9\"\n[params]\npolicy = {:?}\nepisodes = 3\ntrajectory = true\n[params.env]\nmax_steps = 60\n",
            a.join("policy_shared_seed1.json").to_str().unwrap()
        ),
    );
    let e = tmp.path().join("e");
    assert_eq!(run(&["pursuit-eval", "--config", &eval_cfg, "--out", e.to_str().unwrap()]), 0);
    let traj = read(&e, "trajectory_seed9.jsonl");
    assert_eq!(traj.lines().count(), 60);
    assert!(read(&e, "pursuit_eval.csv").contains("\n9,3,"));
}

#[test]
fn outputs_rebuild_from_metadata() {
    let text = "kind = \"pursuit_random\"\nseeds = \"2..=3\"\njobs = 2\n[params]\nepisodes = 4\n[params.env]\ngrid_w = 10\nmax_steps = 40\n";
    let config = ExperimentConfig::parse(text, None).unwrap();
    let first = execute(&config).unwrap();
    let (_, csv) = &first.files[0];
    let rebuilt = ExperimentConfig::from_metadata(csv).unwrap();
    assert_eq!(rebuilt.params, config.params);
    assert_eq!(rebuilt.seeds, config.seeds);
    assert_eq!(execute(&rebuilt).unwrap(), first);
}

#[test]
fn every_kind_runs_from_defaults_or_small_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("bounds-sweep", "[params]\nsimulate = true\nk_grid = [0.3, 0.7, 1.0]\n"),
        ("mailp-sim", "[params]\nn = 1\nk_star = 0.3\n"),
        ("mailp-verify", "[params]\nmulti_n = [2]\nmulti_k = [0.5, 1.0]\n"),
        ("posg-props", "[params]\nmax_agents = 2\nmax_size = 2\nmin_instances = 50\n"),
        ("pursuit-random", "[params]\nepisodes = 3\n[params.env]\nmax_steps = 30\n"),
    ];
    for (cmd, text) in cases {
        let cfg = write(tmp.path(), &format!("{cmd}.toml"), text);
        let out = tmp.path().join(cmd);
        assert_eq!(run(&[cmd, "--config", &cfg, "--out", out.to_str().unwrap()]), 0, "{cmd}");
        for entry in fs::read_dir(&out).unwrap() {
            let body = fs::read_to_string(entry.unwrap().path()).unwrap();
            assert!(body.contains(&format!("# experiment: {}", cmd.replace('-', "_"))));
        }
    }
    let sim = read(&tmp.path().join("mailp-sim"), "mailp_sim_summary.csv");
    assert!(sim.lines().last().unwrap().starts_with("true,"));
    assert_eq!(
        ExperimentConfig::parse("", Some(Kind::PosgProps)).unwrap().kind(),
        Kind::PosgProps
    );
}
