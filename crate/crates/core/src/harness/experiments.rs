//! One function per experiment kind, plus the numerical checks behind
//! `mailp_verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    render_csv, BoundsSweepParams, ExperimentConfig, HarnessError, MailpSimParams,
    MailpVerifyParams, Outcome, Params, PosgPropsParams, PursuitEvalParams, PursuitRandomParams,
    PursuitTrainParams, Result, Value,
};
use crate::bounds::{
    ceil_steps, closed_form_recurrence, default_k_grid, multi_agent_bound, single_agent_bound,
    sweep_k, BoundFormula, BoundInputs,
};
use crate::learn::{evaluate, median, train, JointPolicy, LearningCurve, TrainConfig};
use crate::mailp::{
    homogeneous_spec, run_until, single_agent_spec, ConvergenceReport, Homogeneous,
    LearningFunction,
};
use crate::posg::run_property_suite;
use crate::pursuit::{episode_seed, random_baseline, record_episode, Action, PursuitConfig};

pub(super) fn dispatch(config: &ExperimentConfig) -> Result<Outcome> {
    let seeds = &config.seeds.0;
    let meta = config.metadata();
    match &config.params {
        Params::BoundsSweep(p) => bounds_sweep(p, &meta),
        Params::MailpSim(p) => mailp_sim(p, &meta),
        Params::MailpVerify(p) => mailp_verify(p, seeds, &meta),
        Params::PosgProps(p) => posg_props(p, seeds, &meta),
        Params::PursuitRandom(p) => pursuit_random(p, seeds, &meta),
        Params::PursuitTrain(p) => pursuit_train(p, seeds, &meta),
        Params::PursuitEval(p) => pursuit_eval(p, seeds, &meta),
    }
}

fn done(files: Vec<(String, String)>) -> Result<Outcome> {
    Ok(Outcome {
        files,
        failure: None,
    })
}

fn homogeneous_run(
    n: usize,
    c_env: f64,
    k: f64,
    learning_fn: LearningFunction,
    i0: f64,
    eps: f64,
    max_steps: u64,
) -> Result<ConvergenceReport> {
    let (spec, state) = homogeneous_spec(&Homogeneous {
        n,
        c_env,
        k_star: k,
        learning_fn,
        i0_star: i0,
        eps,
    })?;
    Ok(run_until(&state, &spec, eps, max_steps)?)
}

fn bounds_sweep(p: &BoundsSweepParams, meta: &[String]) -> Result<Outcome> {
    let grid = p.k_grid.clone().unwrap_or_else(default_k_grid);
    let rows = sweep_k(p.n, p.c_env, p.i0, p.eps, &grid);
    let simulated: Vec<Option<ConvergenceReport>> = grid
        .par_iter()
        .map(|&k| {
            p.simulate
                .then(|| homogeneous_run(p.n, p.c_env, k, p.learning_fn, p.i0, p.eps, p.max_steps))
                .transpose()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(rows.len());
    for (row, sim) in rows.iter().zip(&simulated) {
        let t = row
            .t_star
            .clone()
            .map_err(|e| HarnessError::Domain(format!("K = {}: {e}", row.k)))?;
        let formula = match row.formula {
            BoundFormula::MultiAgent => "multi_agent",
            BoundFormula::K1Limit => "k1_limit",
        };
        out.push(vec![
            Value::from(row.k),
            Value::from(formula),
            Value::from(t),
            Value::from(ceil_steps(t)),
            Value::from(sim.as_ref().map(|r| r.steps)),
            Value::from(sim.as_ref().map(|r| r.converged)),
        ]);
    }
    let schema = [
        "k",
        "formula",
        "t_star",
        "t_star_ceil",
        "simulated_steps",
        "simulated_converged",
    ];
    done(vec![("bounds_sweep.csv".into(), render_csv(meta, &schema, &out)?)])
}

fn mailp_sim(p: &MailpSimParams, meta: &[String]) -> Result<Outcome> {
    let (report, bound) = if p.n == 1 {
        let (spec, state) = single_agent_spec(p.k_star, p.learning_fn, p.i0)?;
        let report = run_until(&state, &spec, p.eps, p.max_steps)?;
        (report, single_agent_bound(p.k_star, p.i0, p.eps)?)
    } else {
        let report = homogeneous_run(p.n, p.c_env, p.k_star, p.learning_fn, p.i0, p.eps, p.max_steps)?;
        let bound = multi_agent_bound(&BoundInputs {
            n: p.n,
            c_env: p.c_env,
            k: p.k_star,
            i0: p.i0,
            eps: p.eps,
        })?;
        (report, bound)
    };
    let mut schema = vec!["t".to_string(), "min_info".to_string()];
    schema.extend((0..p.n).map(|i| format!("info_{i}")));
    let schema_refs: Vec<&str> = schema.iter().map(String::as_str).collect();
    let rows: Vec<Vec<Value>> = report
        .trajectory
        .iter()
        .map(|(t, totals)| {
            let min = totals.iter().copied().fold(f64::INFINITY, f64::min);
            let mut row = vec![Value::from(*t), Value::from(min)];
            row.extend(totals.iter().map(|&v| Value::from(v)));
            row
        })
        .collect();
    let summary = vec![vec![
        Value::from(report.converged),
        Value::from(report.steps),
        Value::from(bound),
        Value::from(ceil_steps(bound)),
    ]];
    done(vec![
        ("mailp_sim.csv".into(), render_csv(meta, &schema_refs, &rows)?),
        (
            "mailp_sim_summary.csv".into(),
            render_csv(meta, &["converged", "steps", "bound", "bound_ceil"], &summary)?,
        ),
    ])
}

/// One line of a verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: &'static str,
    pub seed: Option<u64>,
    pub case: String,
    pub bound: Option<f64>,
    pub observed: Option<f64>,
    pub deviation: Option<f64>,
    pub pass: bool,
}

/// Single agent, identity learning: the simulated trajectory must equal
/// `1 − (1−K)^t (1 − I0)` within `1e-12` and first passage must happen at the
/// rounded-up bound.
pub fn verify_single_agent(
    ks: &[f64],
    i0s: &[f64],
    epss: &[f64],
    max_steps: u64,
) -> Result<Vec<CheckRow>> {
    let mut cases = Vec::new();
    for &k in ks {
        for &i0 in i0s {
            for &eps in epss {
                cases.push((k, i0, eps));
            }
        }
    }
    cases
        .par_iter()
        .map(|&(k, i0, eps)| {
            let (spec, state) = single_agent_spec(k, LearningFunction::Identity, i0)?;
            let report = run_until(&state, &spec, eps, max_steps)?;
            let deviation = report
                .trajectory
                .iter()
                .map(|(t, v)| (v[0] - closed_form_recurrence(k, 1.0, i0, *t as u32)).abs())
                .fold(0.0, f64::max);
            let bound = single_agent_bound(k, i0, eps)?;
            let pass = deviation <= 1e-12 && report.converged && report.steps == ceil_steps(bound);
            Ok(CheckRow {
                check: "single_agent_exact",
                seed: None,
                case: format!("K={k} I0={i0} eps={eps}"),
                bound: Some(bound),
                observed: Some(report.steps as f64),
                deviation: Some(deviation),
                pass,
            })
        })
        .collect()
}

/// Homogeneous agents: the simulated first-passage step is never below the
/// rounded-up multi-agent bound.
pub fn verify_multi_agent(
    ns: &[usize],
    ks: &[f64],
    learning_fns: &[LearningFunction],
    c_env: f64,
    i0: f64,
    eps: f64,
    max_steps: u64,
) -> Result<Vec<CheckRow>> {
    let mut cases = Vec::new();
    for &lf in learning_fns {
        for &n in ns {
            for &k in ks {
                cases.push((lf, n, k));
            }
        }
    }
    cases
        .par_iter()
        .map(|&(lf, n, k)| {
            let report = homogeneous_run(n, c_env, k, lf, i0, eps, max_steps)?;
            let bound = multi_agent_bound(&BoundInputs {
                n,
                c_env,
                k,
                i0,
                eps,
            })?;
            Ok(CheckRow {
                check: "multi_agent_lower_bound",
                seed: None,
                case: format!("n={n} K={k} lambda={lf}"),
                bound: Some(bound),
                observed: Some(report.steps as f64),
                deviation: None,
                pass: report.converged && report.steps >= ceil_steps(bound),
            })
        })
        .collect()
}

/// Random recurrences `g ← g + α(C − g)` against their closed form, and
/// damped ones `g ← g + uα(C − g)` with `u ∈ [0, 1]`, which must stay at or
/// below it.
pub fn verify_recurrence(seed: u64, cases: usize, max_t: u32) -> Vec<CheckRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * cases);
    for _ in 0..cases {
        let alpha: f64 = rng.gen_range(1e-3..=1.0);
        let c: f64 = rng.gen_range(1e-3..=1.0);
        let g0 = rng.gen_range(0.0..=c);
        let t_max = rng.gen_range(1..=max_t.max(1));
        let case = format!("alpha={alpha:.6} C={c:.6} g0={g0:.6} t={t_max}");

        let mut g = g0;
        let mut worst = 0.0_f64;
        for t in 1..=t_max {
            g += alpha * (c - g);
            worst = worst.max((g - closed_form_recurrence(alpha, c, g0, t)).abs());
        }
        rows.push(CheckRow {
            check: "recurrence_equality",
            seed: Some(seed),
            case: case.clone(),
            bound: Some(1e-9),
            observed: None,
            deviation: Some(worst),
            pass: worst < 1e-9,
        });

        let mut g = g0;
        let mut excess = f64::NEG_INFINITY;
        for t in 1..=t_max {
            g += rng.gen::<f64>() * alpha * (c - g);
            excess = excess.max(g - closed_form_recurrence(alpha, c, g0, t));
        }
        rows.push(CheckRow {
            check: "recurrence_inequality",
            seed: Some(seed),
            case,
            bound: Some(0.0),
            observed: None,
            deviation: Some(excess),
            pass: excess <= 1e-12,
        });
    }
    rows
}

fn mailp_verify(p: &MailpVerifyParams, seeds: &[u64], meta: &[String]) -> Result<Outcome> {
    let mut rows = verify_single_agent(&p.single_k, &p.single_i0, &p.single_eps, p.max_steps)?;
    rows.extend(verify_multi_agent(
        &p.multi_n,
        &p.multi_k,
        &p.multi_learning_fns,
        p.c_env,
        p.i0,
        p.eps,
        p.max_steps,
    )?);
    let recurrences: Vec<Vec<CheckRow>> = seeds
        .par_iter()
        .map(|&s| verify_recurrence(s, p.recurrence_cases, p.recurrence_max_t))
        .collect();
    rows.extend(recurrences.into_iter().flatten());

    let failed = rows.iter().filter(|r| !r.pass).count();
    let table: Vec<Vec<Value>> = rows
        .iter()
        .map(|r| {
            vec![
                Value::from(r.check),
                Value::from(r.seed),
                Value::from(r.case.clone()),
                Value::from(r.bound),
                Value::from(r.observed),
                Value::from(r.deviation),
                Value::from(r.pass),
            ]
        })
        .collect();
    let schema = ["check", "seed", "case", "bound", "observed", "deviation", "pass"];
    Ok(Outcome {
        files: vec![("mailp_verify.csv".into(), render_csv(meta, &schema, &table)?)],
        failure: (failed > 0).then(|| format!("{failed} of {} checks failed", rows.len())),
    })
}

fn posg_props(p: &PosgPropsParams, seeds: &[u64], meta: &[String]) -> Result<Outcome> {
    let reports: Vec<_> = seeds
        .par_iter()
        .map(|&s| run_property_suite(s, p.max_agents, p.max_size, p.horizon, p.min_instances))
        .collect();
    let mut rows = Vec::new();
    let mut failures = 0;
    for (&seed, report) in seeds.iter().zip(&reports) {
        failures += report.total_failures();
        for t in &report.tallies {
            rows.push(vec![
                Value::from(seed),
                Value::from(t.property),
                Value::from(report.instances),
                Value::from(t.checked),
                Value::from(t.failures),
            ]);
        }
    }
    let schema = ["seed", "property", "instances", "checked", "failures"];
    Ok(Outcome {
        files: vec![("posg_props.csv".into(), render_csv(meta, &schema, &rows)?)],
        failure: (failures > 0).then(|| format!("{failures} property checks failed")),
    })
}

fn pursuit_random(p: &PursuitRandomParams, seeds: &[u64], meta: &[String]) -> Result<Outcome> {
    let results: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let env = PursuitConfig {
                seed,
                ..p.env.clone()
            };
            random_baseline(&env, p.episodes)
        })
        .collect::<std::result::Result<_, _>>()?;
    let rows: Vec<Vec<Value>> = seeds
        .iter()
        .zip(&results)
        .map(|(&seed, m)| {
            vec![
                Value::from(seed),
                Value::from(m.n),
                Value::from(m.mean),
                Value::from(m.stderr),
            ]
        })
        .collect();
    let schema = ["seed", "episodes", "mean", "stderr"];
    done(vec![("pursuit_random.csv".into(), render_csv(meta, &schema, &rows)?)])
}

fn pursuit_train(p: &PursuitTrainParams, seeds: &[u64], meta: &[String]) -> Result<Outcome> {
    if p.variants.is_empty() {
        return Err(HarnessError::Domain("no training variants".into()));
    }
    let mut names = std::collections::BTreeSet::new();
    for v in &p.variants {
        if !names.insert(v.name.as_str()) {
            return Err(HarnessError::Domain(format!("duplicate variant {:?}", v.name)));
        }
    }
    let tasks: Vec<(usize, u64)> = (0..p.variants.len())
        .flat_map(|v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let runs: Vec<(Option<String>, LearningCurve)> = tasks
        .par_iter()
        .map(|&(v, seed)| {
            let variant = &p.variants[v];
            let cfg = TrainConfig {
                mode: variant.mode,
                agent_indication: variant.agent_indication,
                seed,
                ..p.train.clone()
            };
            let (policy, curve) = train(&p.env, &cfg)?;
            Ok::<_, crate::learn::LearnError>((p.save_policies.then(|| policy.to_json()), curve))
        })
        .collect::<std::result::Result<_, _>>()?;

    let mut curves = Vec::new();
    let mut files = Vec::new();
    for (&(v, seed), (policy, curve)) in tasks.iter().zip(&runs) {
        let name = &p.variants[v].name;
        for pt in &curve.points {
            curves.push(vec![
                Value::from(name.as_str()),
                Value::from(seed),
                Value::from(pt.episode),
                Value::from(pt.mean),
                Value::from(pt.stderr),
            ]);
        }
        if let Some(json) = policy {
            files.push((format!("policy_{name}_seed{seed}.json"), json.clone()));
        }
    }
    let mut summary = Vec::new();
    for (v, variant) in p.variants.iter().enumerate() {
        let own: Vec<&LearningCurve> = tasks
            .iter()
            .zip(&runs)
            .filter(|((tv, _), _)| *tv == v)
            .map(|(_, (_, c))| c)
            .collect();
        let finals: Vec<f64> = own.iter().filter_map(|c| c.final_mean()).collect();
        let reach: Vec<f64> = own
            .iter()
            .filter_map(|c| c.episodes_to_fraction(p.target_fraction))
            .map(|e| e as f64)
            .collect();
        summary.push(vec![
            Value::from(variant.name.as_str()),
            Value::from(match variant.mode {
                crate::learn::SharingMode::Shared => "shared",
                crate::learn::SharingMode::Independent => "independent",
            }),
            Value::from(variant.agent_indication),
            Value::from(own.len()),
            Value::from(median(&finals)),
            Value::from(median(&reach)),
        ]);
    }
    let mut all = vec![
        (
            "pursuit_train_curves.csv".to_string(),
            render_csv(meta, &["variant", "seed", "episode", "mean", "stderr"], &curves)?,
        ),
        (
            "pursuit_train_summary.csv".to_string(),
            render_csv(
                meta,
                &[
                    "variant",
                    "mode",
                    "agent_indication",
                    "runs",
                    "median_final",
                    "median_episodes_to_target",
                ],
                &summary,
            )?,
        ),
    ];
    all.extend(files);
    done(all)
}

fn pursuit_eval(p: &PursuitEvalParams, seeds: &[u64], meta: &[String]) -> Result<Outcome> {
    let path = p
        .policy
        .as_ref()
        .ok_or_else(|| HarnessError::Config("[params]: missing key `policy`".into()))?;
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    let policy = JointPolicy::from_json(&text)?;
    let results: Vec<_> = seeds
        .par_iter()
        .map(|&seed| evaluate(&policy, &p.env, p.episodes, seed))
        .collect::<std::result::Result<_, _>>()?;
    let rows: Vec<Vec<Value>> = seeds
        .iter()
        .zip(&results)
        .map(|(&seed, m)| {
            vec![
                Value::from(seed),
                Value::from(m.n),
                Value::from(m.mean),
                Value::from(m.stderr),
            ]
        })
        .collect();
    let mut files = vec![(
        "pursuit_eval.csv".to_string(),
        render_csv(meta, &["seed", "episodes", "mean", "stderr"], &rows)?,
    )];
    if p.trajectory {
        for &seed in seeds {
            let env = PursuitConfig {
                seed: episode_seed(seed, 0),
                ..p.env.clone()
            };
            let records = record_episode(&env, |i, obs| {
                policy.greedy_action(i, obs).unwrap_or(Action::Stay)
            })?;
            let mut jsonl = String::new();
            for r in &records {
                jsonl.push_str(&r.to_json_line());
                jsonl.push('\n');
            }
            files.push((format!("trajectory_seed{seed}.jsonl"), jsonl));
        }
    }
    done(files)
}
