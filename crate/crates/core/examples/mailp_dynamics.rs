//! Information dynamics for a hand-built spec with a group target, then the
//! symmetric setting compared against its bound.

use std::collections::BTreeMap;

use parshare::bounds::{ceil_steps, multi_agent_bound, BoundInputs};
use parshare::mailp::{
    homogeneous_spec, run_until, step, Coefficients, Homogeneous, LearningFunction, MailpSpec,
    TargetKey,
};

fn coeff(coordination: f64, centralization: f64) -> Coefficients {
    Coefficients {
        coordination,
        centralization,
    }
}

fn main() {
    // Agent 0 depends on the pair {1, 2}; agents 1 and 2 depend on each other.
    let targets = vec![
        BTreeMap::from([
            (TargetKey::Env, coeff(0.4, 0.3)),
            (TargetKey::group([1, 2]), coeff(0.6, 0.5)),
        ]),
        BTreeMap::from([
            (TargetKey::Env, coeff(0.5, 0.3)),
            (TargetKey::agent(2), coeff(0.5, 0.8)),
        ]),
        BTreeMap::from([
            (TargetKey::Env, coeff(0.5, 0.3)),
            (TargetKey::agent(1), coeff(0.5, 0.8)),
        ]),
    ];
    let spec = MailpSpec::new(targets, LearningFunction::saturating(0.5).unwrap()).unwrap();
    let mut state = spec.zero_state();
    println!("t   I_0       I_1       I_2");
    for _ in 0..=8 {
        let i = state.totals();
        println!("{:<3} {:.6}  {:.6}  {:.6}", state.t, i[0], i[1], i[2]);
        state = step(&state, &spec).unwrap();
    }

    println!("\nsymmetric agents, C_env = 0.1, I0 = 0.01, eps = 0.001");
    println!("n  K    simulated  bound");
    for n in [2, 3, 5] {
        for k in [0.2, 0.6, 1.0] {
            let params = Homogeneous {
                n,
                c_env: 0.1,
                k_star: k,
                learning_fn: LearningFunction::Identity,
                i0_star: 0.01,
                eps: 0.001,
            };
            let (spec, init) = homogeneous_spec(&params).unwrap();
            let report = run_until(&init, &spec, params.eps, 100_000).unwrap();
            let bound = multi_agent_bound(&BoundInputs {
                n,
                c_env: 0.1,
                k,
                i0: 0.01,
                eps: 0.001,
            })
            .unwrap();
            println!("{n}  {k:.1}  {:>9}  {:>5}", report.steps, ceil_steps(bound));
        }
    }
}
