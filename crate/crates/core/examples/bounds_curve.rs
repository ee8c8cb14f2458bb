//! Lower bound on convergence time as the centralization coefficient varies.
//!
//! Run with `cargo run --example bounds_curve`.

use parshare::bounds::{
    compute_phi, default_k_grid, k1_limit_bound, single_agent_bound, sweep_k, BoundFormula,
};
use parshare::mailp::LearningFunction;

fn main() {
    let (n, c_env, i0, eps) = (3, 0.1, 0.01, 0.001);
    let rows = sweep_k(n, c_env, i0, eps, &default_k_grid());

    println!("{:>10}  {:>12}  formula", "K", "t*");
    for row in rows.iter().filter(|r| (r.k * 100.0).round() as i64 % 10 == 0 || r.k > 0.99) {
        let formula = match row.formula {
            BoundFormula::MultiAgent => "multi-agent",
            BoundFormula::K1Limit => "K = 1 limit",
        };
        println!("{:>10.6}  {:>12.6}  {formula}", row.k, row.t_star.clone().unwrap());
    }

    let c_star = (1.0 - c_env) / (n as f64 - 1.0);
    let limit = k1_limit_bound(n, c_star, i0, eps).unwrap();
    let near = rows[rows.len() - 2].t_star.clone().unwrap();
    println!("\nK -> 1: {near:.9} vs limit {limit:.9}");

    println!("\nsingle agent, I0 = {i0}, eps = {eps}:");
    for k in [0.1, 0.5, 0.9] {
        println!("  K_env = {k}: {:.4} steps", single_agent_bound(k, i0, eps).unwrap());
    }

    println!("\nfraction of pairwise gain lost to nonstationarity (K = 0.5):");
    for i_star in [0.0, 0.1, 0.3, 0.45] {
        let phi = compute_phi(n, c_env, 0.5, LearningFunction::Identity, i_star).unwrap();
        println!("  I = {i_star:.2}: phi = {phi:.6}");
    }
}
