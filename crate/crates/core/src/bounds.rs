//! Closed-form convergence-time bounds and proof diagnostics.

use serde::Serialize;
use thiserror::Error;

use crate::mailp::LearningFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, BoundsError>;

fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(BoundsError::Domain(msg.into()))
}

/// Inputs of the homogeneous multi-agent bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: usize,
    pub c_env: f64,
    pub k: f64,
    pub i0: f64,
    pub eps: f64,
}

impl BoundInputs {
    pub fn c_star(&self) -> f64 {
        (1.0 - self.c_env) / (self.n as f64 - 1.0)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return domain(format!("n must be at least 2, got {}", self.n));
        }
        if !(0.0..1.0).contains(&self.c_env) {
            return domain(format!("C_env must lie in [0,1), got {}", self.c_env));
        }
        if !(self.k > 0.0 && self.k <= 1.0) {
            return domain(format!("K must lie in (0,1], got {}", self.k));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return domain(format!("epsilon must lie in (0,1), got {}", self.eps));
        }
        if self.i0.is_nan() || self.i0 < 0.0 {
            return domain(format!("I0 must be nonnegative, got {}", self.i0));
        }
        if self.i0 >= self.c_star() {
            return domain(format!(
                "I0 = {} must be below C_star = {}",
                self.i0,
                self.c_star()
            ));
        }
        Ok(())
    }
}

/// Solution of `g(t) = g(t−1) + α(C − g(t−1))`: `C − (1−α)^t (C − g0)`.
pub fn closed_form_recurrence(alpha: f64, c: f64, g0: f64, t: u32) -> f64 {
    c - (1.0 - alpha).powi(t as i32) * (c - g0)
}

/// Lower bound on single-agent convergence time:
/// `(log ε − log(1 − I0)) / log(1 − K_env)`.
pub fn single_agent_bound(k_env: f64, i0: f64, eps: f64) -> Result<f64> {
    if !(k_env > 0.0 && k_env <= 1.0) {
        return domain(format!("K_env must lie in (0,1], got {k_env}"));
    }
    if !(0.0..1.0).contains(&i0) {
        return domain(format!("I0 must lie in [0,1), got {i0}"));
    }
    if eps.is_nan() || eps <= 0.0 {
        return domain(format!("epsilon must be positive, got {eps}"));
    }
    if k_env == 1.0 || eps >= 1.0 - i0 {
        return Ok(0.0);
    }
    Ok((eps.ln() - (1.0 - i0).ln()) / (1.0 - k_env).ln())
}

/// Lower bound `t*` on homogeneous multi-agent convergence time.
pub fn multi_agent_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let BoundInputs {
        n,
        c_env,
        k,
        i0,
        eps,
    } = *inputs;
    let c_star = inputs.c_star();
    let numerator = (c_star * eps / (c_star - i0)).ln();
    let rate = 1.0 - k + k * i0 / (c_env / (n as f64 - 1.0) + c_star * (k + 1.0));
    if rate <= 0.0 {
        // K = 1 with I0 = 0: one step closes every gap.
        return Ok(0.0);
    }
    let denominator = rate.ln();
    if denominator == 0.0 {
        return domain("rate argument equals 1");
    }
    Ok(numerator / denominator + 0.0)
}

/// The `K → 1` limit of [`multi_agent_bound`]:
/// `log(C_⋆ε/(C_⋆ − I0)) / log(I0(n−1)/(1 + (n−1)C_⋆))`.
pub fn k1_limit_bound(n: usize, c_star: f64, i0: f64, eps: f64) -> Result<f64> {
    if n < 2 {
        return domain(format!("n must be at least 2, got {n}"));
    }
    if !(i0 > 0.0 && i0 < c_star) {
        return domain(format!("need 0 < I0 < C_star, got I0 = {i0}, C_star = {c_star}"));
    }
    if eps.is_nan() || eps <= 0.0 {
        return domain(format!("epsilon must be positive, got {eps}"));
    }
    let m = n as f64 - 1.0;
    let num_arg = c_star * eps / (c_star - i0);
    let den_arg = i0 * m / (1.0 + m * c_star);
    if !(num_arg > 0.0 && num_arg.is_finite()) || den_arg.is_nan() || den_arg <= 0.0 || den_arg == 1.0 {
        return domain(format!(
            "degenerate logarithm (numerator argument {num_arg}, denominator argument {den_arg})"
        ));
    }
    Ok(num_arg.ln() / den_arg.ln() + 0.0)
}

/// Fraction of a pairwise gain cancelled by nonstationarity in the symmetric
/// setting: `I_⋆⋆ / (C_env/(n−1) + I_⋆⋆ + K·Λ(C_⋆ − I_⋆⋆))`.
///
/// The net pairwise change per step is `K·Λ(C_⋆ − I_⋆⋆)·(1 − Φ)` when every
/// agent's environment information equals `c_env`; pass the actual
/// environment information in that slot to evaluate an arbitrary state.
pub fn compute_phi(n: usize, c_env: f64, k: f64, lf: LearningFunction, i_star: f64) -> Result<f64> {
    if n < 2 {
        return domain(format!("n must be at least 2, got {n}"));
    }
    let c_star = (1.0 - c_env) / (n as f64 - 1.0);
    if !(0.0..=c_star).contains(&i_star) {
        return domain(format!("I_star = {i_star} outside [0, {c_star}]"));
    }
    if i_star == 0.0 {
        return Ok(0.0);
    }
    Ok(i_star / (c_env / (n as f64 - 1.0) + i_star + k * lf.eval(c_star - i_star)))
}

/// Net pairwise change implied by [`compute_phi`].
pub fn net_pairwise_change(
    n: usize,
    c_env: f64,
    k: f64,
    lf: LearningFunction,
    i_star: f64,
) -> Result<f64> {
    let c_star = (1.0 - c_env) / (n as f64 - 1.0);
    let phi = compute_phi(n, c_env, k, lf, i_star)?;
    Ok(k * lf.eval(c_star - i_star) * (1.0 - phi))
}

/// Which closed form produced a sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFormula {
    MultiAgent,
    K1Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: f64,
    pub formula: BoundFormula,
    /// `Err` carries the domain message for rows that could not be evaluated.
    pub t_star: std::result::Result<f64, String>,
}

/// Evaluates the multi-agent bound along `k_grid`; `K = 1` uses the limit form.
pub fn sweep_k(n: usize, c_env: f64, i0: f64, eps: f64, k_grid: &[f64]) -> Vec<SweepRow> {
    k_grid
        .iter()
        .map(|&k| {
            let (formula, value) = if k == 1.0 {
                let c_star = (1.0 - c_env) / (n as f64 - 1.0);
                (BoundFormula::K1Limit, k1_limit_bound(n, c_star, i0, eps))
            } else {
                (
                    BoundFormula::MultiAgent,
                    multi_agent_bound(&BoundInputs {
                        n,
                        c_env,
                        k,
                        i0,
                        eps,
                    }),
                )
            };
            SweepRow {
                k,
                formula,
                t_star: value.map_err(|e| e.to_string()),
            }
        })
        .collect()
}

/// `0.01, 0.02, …, 0.99, 1 − 10⁻⁶, 1.0`.
pub fn default_k_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    grid.push(1.0 - 1e-6);
    grid.push(1.0);
    grid
}

/// Rounds a real-valued bound up to a step index. Values within `1e-9` of an
/// integer snap to it so that exact bounds are not pushed a full step.
pub fn ceil_steps(t: f64) -> u64 {
    if t <= 0.0 {
        return 0;
    }
    let r = t.round();
    if (t - r).abs() < 1e-9 {
        r as u64
    } else {
        t.ceil() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_examples() {
        assert_eq!(closed_form_recurrence(0.3, 2.0, 0.7, 0), 0.7);
        assert_eq!(closed_form_recurrence(1.0, 2.0, 0.7, 5), 2.0);
        assert!((closed_form_recurrence(0.5, 1.0, 0.0, 3) - 0.875).abs() < 1e-15);
    }

    #[test]
    fn single_agent_examples() {
        assert!((single_agent_bound(0.5, 0.0, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((single_agent_bound(0.5, 0.5, 0.125).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(single_agent_bound(1.0, 0.2, 0.01).unwrap(), 0.0);
        assert_eq!(single_agent_bound(0.3, 0.6, 0.5).unwrap(), 0.0);
        assert!(single_agent_bound(0.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn single_agent_high_precision_value() {
        // (ln 0.001 − ln 0.99)/ln 0.9 evaluated with 30-digit arithmetic.
        let v = single_agent_bound(0.1, 0.01, 0.001).unwrap();
        assert!((v - 65.467_646_015_799_15).abs() < 1e-9, "{v}");
    }

    #[test]
    fn multi_agent_reference_value() {
        let v = multi_agent_bound(&BoundInputs {
            n: 3,
            c_env: 0.1,
            k: 0.5,
            i0: 0.01,
            eps: 0.001,
        })
        .unwrap();
        assert!((v - 10.133_636_446_326_18).abs() < 1e-9, "{v}");
    }

    #[test]
    fn multi_agent_domain() {
        let base = BoundInputs {
            n: 3,
            c_env: 0.1,
            k: 0.5,
            i0: 0.45,
            eps: 0.001,
        };
        assert!(multi_agent_bound(&base).is_err());
        assert!(multi_agent_bound(&BoundInputs { i0: 0.0, ..base }).is_ok());
        assert_eq!(
            multi_agent_bound(&BoundInputs { i0: 0.0, k: 1.0, ..base }).unwrap(),
            0.0
        );
    }

    #[test]
    fn k1_reference_value() {
        let v = k1_limit_bound(3, 0.45, 0.01, 0.001).unwrap();
        assert!((v - 1.511_960_596_877_296).abs() < 1e-9, "{v}");
    }

    #[test]
    fn k1_numerator_at_one() {
        let c_star = 0.45;
        let eps = 0.001;
        let i0 = c_star * (1.0 - eps);
        assert!(k1_limit_bound(3, c_star, i0, eps).unwrap().abs() < 1e-9);
        assert!(k1_limit_bound(3, c_star, 0.0, eps).is_err());
        assert!(k1_limit_bound(3, c_star, c_star, eps).is_err());
    }

    #[test]
    fn k1_agrees_with_limit_of_multi_agent() {
        let near = multi_agent_bound(&BoundInputs {
            n: 3,
            c_env: 0.1,
            k: 1.0 - 1e-6,
            i0: 0.01,
            eps: 0.001,
        })
        .unwrap();
        let limit = k1_limit_bound(3, 0.45, 0.01, 0.001).unwrap();
        assert!(((near - limit) / limit).abs() < 1e-3);
    }

    #[test]
    fn phi_examples() {
        assert_eq!(compute_phi(3, 0.1, 0.5, LearningFunction::Identity, 0.0).unwrap(), 0.0);
        let phi = compute_phi(2, 0.0, 1.0, LearningFunction::Identity, 0.5).unwrap();
        assert!((phi - 0.5).abs() < 1e-15);
        let c_star = 0.45;
        for k in 0..=20 {
            let i = c_star * k as f64 / 20.0;
            let phi = compute_phi(3, 0.1, 1.0, LearningFunction::Identity, i).unwrap();
            assert!((0.0..1.0).contains(&phi));
        }
        // C_env = 0 at capacity: the gain term vanishes and Φ reaches 1.
        let phi = compute_phi(2, 0.0, 1.0, LearningFunction::Identity, 1.0).unwrap();
        assert_eq!(phi, 1.0);
    }

    #[test]
    fn sweep_is_monotone_and_blows_up() {
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let rows = sweep_k(3, 0.1, 0.01, 0.001, &grid);
        let values: Vec<f64> = rows.iter().map(|r| *r.t_star.as_ref().unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(rows.last().unwrap().formula, BoundFormula::K1Limit);
        assert!(values[0] > 10.0 * values[values.len() - 1]);
    }

    #[test]
    fn sweep_marks_bad_rows() {
        let rows = sweep_k(3, 0.1, 0.5, 0.001, &[0.5, 1.0]);
        assert!(rows.iter().all(|r| r.t_star.is_err()));
    }

    #[test]
    fn ceil_steps_snaps() {
        assert_eq!(ceil_steps(1.0000000000002), 1);
        assert_eq!(ceil_steps(1.2), 2);
        assert_eq!(ceil_steps(-3.0), 0);
        assert_eq!(ceil_steps(0.0), 0);
    }
}
