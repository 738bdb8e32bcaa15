//! Operator-side reward design.
//!
//! The operator earns (b0 − r0) per task served by an uncompromised UE.
//! Without attacks it maximises (b0 − r0)·A(r0), where
//! A(r0) = Σ w_k a^AF_k(r0) is the attack-free participation mixture.
//! Under attack, any r0 that drives A(r0) above 1/τ makes the infection
//! persistent and pins effective participation at exactly 1/τ, so such
//! rewards only cost more. The secure problem is therefore the attack-free
//! one restricted to A(r0) ≤ 1/τ.

use alloc::vec::Vec;

use crate::bestresp::attack_free_rate;
use crate::equilibrium::solve_ne_with;
use crate::error::{Error, Result};
use crate::math::{abs, powf};
use crate::model::{validate_population, OperatorParams, RewardScheme, RiskEnv, UeType};
use crate::solve::{bisect, maximize, Tolerance};

/// Pre-grid size for the one-dimensional reward searches.
pub const PRE_GRID: usize = 1000;
/// Utilities closer than this count as a tie; the smaller reward wins.
pub const TIE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardSolution {
    pub r0_star: f64,
    pub operator_utility: f64,
    /// The participation constraint A(r0) ≤ 1/τ is active.
    pub binding: bool,
    /// A(r0_star).
    pub a_af_mix: f64,
    /// Reward at which the constraint binds, when it does so below b0.
    pub r0_bar: Option<f64>,
}

/// Technology cost J(τ) of reaching effective infection rate τ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TechCost {
    /// J(τ) = j0 · τ^(−p).
    InversePower { j0: f64, p: f64 },
}

impl TechCost {
    pub fn inverse_power(j0: f64, p: f64) -> Result<Self> {
        if !(j0 > 0.0) || !(p > 0.0) {
            return Err(Error::invalid("tech_cost", if j0 > 0.0 { p } else { j0 }, "j0 and p must be > 0"));
        }
        Ok(TechCost::InversePower { j0, p })
    }

    pub fn eval(&self, tau: f64) -> f64 {
        match *self {
            TechCost::InversePower { j0, p } => {
                if tau.is_infinite() {
                    0.0
                } else {
                    j0 * powf(tau, -p)
                }
            }
        }
    }
}

/// A(r0) = Σ w_k a^AF_k(r0), with each optimum taken over [0, r_max/r0].
pub fn participation_mixture(types: &[UeType], r0: f64, r_max: f64) -> f64 {
    let scheme = RewardScheme { r0, r_max };
    types.iter().map(|t| t.weight * attack_free_rate(t, &scheme)).sum()
}

fn attack_free_objective(types: &[UeType], r_max: f64, b0: f64, r0: f64) -> f64 {
    (b0 - r0) * participation_mixture(types, r0, r_max)
}

/// Lower end used in place of the open bound r0 = 0.
fn lower_end(b0: f64) -> f64 {
    b0 * 1e-9
}

fn check_inputs(types: &[UeType], r_max: f64, op: &OperatorParams) -> Result<()> {
    validate_population(types)?;
    if !(op.b0 > 0.0) {
        return Err(Error::invalid("b0", op.b0, "must be > 0"));
    }
    if !(r_max > 0.0) {
        return Err(Error::invalid("r_max", r_max, "must be > 0"));
    }
    Ok(())
}

pub fn optimal_reward_attack_free(types: &[UeType], r_max: f64, op: &OperatorParams) -> Result<RewardSolution> {
    optimal_reward_attack_free_with(types, r_max, op, &Tolerance::default())
}

/// Maximises (b0 − r0)·A(r0) over r0 ∈ (0, b0).
pub fn optimal_reward_attack_free_with(
    types: &[UeType],
    r_max: f64,
    op: &OperatorParams,
    tol: &Tolerance,
) -> Result<RewardSolution> {
    check_inputs(types, r_max, op)?;
    let b0 = op.b0;
    let best = maximize(
        |r| attack_free_objective(types, r_max, b0, r),
        lower_end(b0),
        b0,
        PRE_GRID,
        tol,
    );
    if !(best.value > 0.0) {
        return Err(Error::Degenerate("no type participates at any reward below b0"));
    }
    Ok(RewardSolution {
        r0_star: best.x,
        operator_utility: best.value,
        binding: false,
        a_af_mix: participation_mixture(types, best.x, r_max),
        r0_bar: None,
    })
}

/// r̄0 with A(r̄0) = 1/τ, searched on (0, upper]; `None` when A stays
/// below 1/τ over the whole range.
pub fn binding_reward(types: &[UeType], r_max: f64, tau: f64, upper: f64, tol: &Tolerance) -> Option<f64> {
    if !(tau > 0.0) {
        return None;
    }
    let target = 1.0 / tau;
    if participation_mixture(types, upper, r_max) <= target {
        return None;
    }
    let lo = lower_end(upper);
    if participation_mixture(types, lo, r_max) > target {
        return Some(lo);
    }
    bisect(
        |r| participation_mixture(types, r, r_max) - target,
        lo,
        upper,
        tol,
    )
    .ok()
    .map(|root| root.x)
}

pub fn optimal_reward_secure(
    types: &[UeType],
    r_max: f64,
    op: &OperatorParams,
    env: &RiskEnv,
) -> Result<RewardSolution> {
    optimal_reward_secure_with(types, r_max, op, env, &Tolerance::default())
}

/// Maximises (b0 − r0)·A(r0) subject to A(r0) ≤ 1/τ, searching
/// (0, min(b0, r̄0)].
pub fn optimal_reward_secure_with(
    types: &[UeType],
    r_max: f64,
    op: &OperatorParams,
    env: &RiskEnv,
    tol: &Tolerance,
) -> Result<RewardSolution> {
    check_inputs(types, r_max, op)?;
    env.validate()?;
    let tau = env.tau();
    if !(tau > 0.0) {
        return optimal_reward_attack_free_with(types, r_max, op, tol);
    }
    let b0 = op.b0;
    let r0_bar = binding_reward(types, r_max, tau, b0, tol);
    let upper = r0_bar.unwrap_or(b0);
    let objective = |r: f64| attack_free_objective(types, r_max, b0, r);
    let mut best = maximize(objective, lower_end(b0), upper, PRE_GRID, tol);
    let mut binding = false;
    if let Some(bar) = r0_bar {
        let at_bar = objective(bar);
        if at_bar > best.value + TIE {
            best.x = bar;
            best.value = at_bar;
        }
        binding = abs(best.x - bar) <= tol.argument;
        if binding {
            best.x = bar;
            best.value = at_bar;
        }
    }
    if !(best.value > 0.0) {
        return Err(Error::Degenerate("no type participates at any feasible reward"));
    }
    Ok(RewardSolution {
        r0_star: best.x,
        operator_utility: best.value,
        binding,
        a_af_mix: participation_mixture(types, best.x, r_max),
        r0_bar,
    })
}

/// The original objective evaluated through the equilibrium solver.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorOutcome {
    pub r0: f64,
    pub theta_inf: f64,
    pub theta_k: Vec<f64>,
    pub a_star: Vec<f64>,
    /// Σ w_k (1 − θ_k) a*_k, from the per-type fractions.
    pub effective_participation: f64,
    /// Same quantity from the aggregate identity: 1/τ when the infection
    /// persists, Σ w_k a*_k otherwise.
    pub effective_participation_aggregate: f64,
    pub operator_utility: f64,
}

pub fn operator_utility_brute(
    types: &[UeType],
    r_max: f64,
    op: &OperatorParams,
    env: &RiskEnv,
    r0: f64,
) -> Result<OperatorOutcome> {
    operator_utility_brute_with(types, r_max, op, env, r0, &Tolerance::default())
}

/// (b0 − r0)·Σ w_k (1 − θ_k∞) a*_k(θ∞) with the equilibrium solved at `r0`.
pub fn operator_utility_brute_with(
    types: &[UeType],
    r_max: f64,
    op: &OperatorParams,
    env: &RiskEnv,
    r0: f64,
    tol: &Tolerance,
) -> Result<OperatorOutcome> {
    check_inputs(types, r_max, op)?;
    if !(r0 > 0.0 && r0 < op.b0) {
        return Err(Error::invalid("r0", r0, "must lie in (0, b0)"));
    }
    let scheme = RewardScheme::new(r0, r_max)?;
    let ne = solve_ne_with(types, &scheme, env, tol)?;
    let effective = ne.effective_participation(types);
    let aggregate = if ne.theta_inf > 0.0 {
        1.0 / env.tau()
    } else {
        ne.mean_participation(types)
    };
    Ok(OperatorOutcome {
        r0,
        theta_inf: ne.theta_inf,
        operator_utility: (op.b0 - r0) * effective,
        effective_participation: effective,
        effective_participation_aggregate: aggregate,
        theta_k: ne.theta_k_inf,
        a_star: ne.a_ne,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointSolution {
    pub r0_star: f64,
    pub tau_star: f64,
    pub utility: f64,
}

pub fn joint_optimize(types: &[UeType], r_max: f64, op: &OperatorParams, tech: &TechCost) -> Result<JointSolution> {
    joint_optimize_with(types, r_max, op, tech, &Tolerance::default())
}

/// Joint choice of reward and security level. At the optimum the
/// participation constraint binds, τ* = 1/A(r0*), leaving the 1-D problem
/// max (b0 − r0)·A(r0) − J(1/A(r0)).
pub fn joint_optimize_with(
    types: &[UeType],
    r_max: f64,
    op: &OperatorParams,
    tech: &TechCost,
    tol: &Tolerance,
) -> Result<JointSolution> {
    check_inputs(types, r_max, op)?;
    let b0 = op.b0;
    let reduced = |r: f64| {
        let a = participation_mixture(types, r, r_max);
        let tau = if a > 0.0 { 1.0 / a } else { f64::INFINITY };
        (b0 - r) * a - tech.eval(tau)
    };
    let best = maximize(reduced, lower_end(b0), b0, PRE_GRID, tol);
    let a = participation_mixture(types, best.x, r_max);
    if !(a > 0.0) {
        return Err(Error::Degenerate("no type participates at any reward below b0"));
    }
    Ok(JointSolution {
        r0_star: best.x,
        tau_star: 1.0 / a,
        utility: best.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EvaluationFunction;

    fn single(c: f64) -> [UeType; 1] {
        [UeType::new(EvaluationFunction::sqrt(), c, 5.0, 1.0).unwrap()]
    }

    fn two() -> [UeType; 2] {
        [
            UeType::new(EvaluationFunction::power(1.0, 0.5).unwrap(), 0.35, 5.0, 0.3).unwrap(),
            UeType::new(EvaluationFunction::power(1.5, 0.5).unwrap(), 0.35, 5.0, 0.7).unwrap(),
        ]
    }

    const R_MAX: f64 = 1000.0;

    #[test]
    fn attack_free_vertex() {
        let op = OperatorParams::new(6.0).unwrap();
        let sol = optimal_reward_attack_free(&single(0.35), R_MAX, &op).unwrap();
        assert!((sol.r0_star - 3.0).abs() < 1e-7, "{sol:?}");
        assert!((sol.operator_utility - 3.0 * 3.0 / 0.49).abs() < 1e-9);
        assert!((sol.operator_utility - 18.37).abs() < 5e-3);
        let sol = optimal_reward_attack_free(&two(), R_MAX, &op).unwrap();
        assert!((sol.r0_star - 3.0).abs() < 1e-7);
    }

    #[test]
    fn secure_binding_example() {
        let op = OperatorParams::new(6.0).unwrap();
        let env = RiskEnv::new(0.5, 1.0, 1.0).unwrap();
        let sol = optimal_reward_secure(&single(0.35), R_MAX, &op, &env).unwrap();
        assert!((sol.r0_star - 0.98).abs() < 1e-10, "{sol:?}");
        assert!(sol.binding);
        assert!((sol.a_af_mix - 2.0).abs() < 1e-8);
    }

    #[test]
    fn secure_slack_example() {
        let op = OperatorParams::new(6.0).unwrap();
        let env = RiskEnv::new(0.1, 1.0, 1.0).unwrap();
        let sol = optimal_reward_secure(&single(0.35), R_MAX, &op, &env).unwrap();
        assert!((sol.r0_star - 3.0).abs() < 1e-7);
        assert!(!sol.binding);
        assert!((sol.r0_bar.unwrap() - 4.9).abs() < 1e-9);
    }

    #[test]
    fn brute_matches_reformulation_regions() {
        let types = two();
        let op = OperatorParams::new(6.0).unwrap();
        let env = RiskEnv::new(0.2, 1.0, 1.0).unwrap();
        // Below the binding reward the infection dies out.
        let low = operator_utility_brute(&types, R_MAX, &op, &env, 1.0).unwrap();
        assert_eq!(low.theta_inf, 0.0);
        let af = (6.0 - 1.0) * participation_mixture(&types, 1.0, R_MAX);
        assert!((low.operator_utility - af).abs() < 1e-12);
        // Above it effective participation is pinned at 1/τ.
        for r0 in [2.0, 3.5, 5.0] {
            let hi = operator_utility_brute(&types, R_MAX, &op, &env, r0).unwrap();
            assert!(hi.theta_inf > 0.0);
            assert!((hi.effective_participation - 5.0).abs() < 1e-6);
            assert!((hi.effective_participation - hi.effective_participation_aggregate).abs() < 1e-6);
        }
    }

    #[test]
    fn joint_binding_relation() {
        let types = two();
        let op = OperatorParams::new(6.0).unwrap();
        let tech = TechCost::inverse_power(2.0, 1.0).unwrap();
        let sol = joint_optimize(&types, R_MAX, &op, &tech).unwrap();
        let a = participation_mixture(&types, sol.r0_star, R_MAX);
        assert!((a * sol.tau_star - 1.0).abs() < 1e-8);
    }

    #[test]
    fn vanishing_tech_cost_recovers_attack_free() {
        let types = two();
        let op = OperatorParams::new(6.0).unwrap();
        let tech = TechCost::inverse_power(1e-12, 1.0).unwrap();
        let sol = joint_optimize(&types, R_MAX, &op, &tech).unwrap();
        assert!((sol.r0_star - 3.0).abs() < 1e-6);
        assert!((sol.tau_star - 1.0 / participation_mixture(&types, 3.0, R_MAX)).abs() < 1e-6);
    }

    #[test]
    fn degenerate_population_is_an_error() {
        let log = [UeType::new(EvaluationFunction::log_linear(1.0).unwrap(), 10.0, 1.0, 1.0).unwrap()];
        let op = OperatorParams::new(5.0).unwrap();
        assert!(matches!(
            optimal_reward_attack_free(&log, R_MAX, &op),
            Err(Error::Degenerate(_))
        ));
    }
}
