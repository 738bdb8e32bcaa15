//! Individual best-response participation.
//!
//! Maximising the foresighted utility U(a, θ) reduces to the sign of
//!
//! f(a) = u'(a)·(ρ + δ + βθa) − βθ·u(a) − βθ·q,
//!
//! which has the sign of ∂U/∂a and is strictly decreasing because
//! f'(a) = u''(a)·(ρ + δ + βθa) < 0. Participation is zero once
//! f(0) ≤ 0, i.e. once θ reaches the threshold θ̄; otherwise the optimum
//! is the unique root of f on (0, M).

use crate::error::{Clause, Error, Result};
use crate::model::{RewardScheme, RiskEnv, UeType};
use crate::solve::{bisect, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestResponse {
    /// Optimal participation rate in [0, M].
    pub a_star: f64,
    /// Compromise level at and above which participation stops; may be +∞.
    pub theta_bar: f64,
    /// f(a*) / (ρ + δ + βθa*), zero at an interior optimum.
    pub residual: f64,
}

/// Argmax of the instantaneous utility over [0, M], always defined.
///
/// Equals the interior root of r0·v'(r0·a) = c when one exists and is
/// clamped to the interval otherwise.
pub fn attack_free_rate(ty: &UeType, scheme: &RewardScheme) -> f64 {
    let x = ty.eval.inverse_marginal(ty.cost / scheme.r0);
    (x / scheme.r0).clamp(0.0, scheme.cap())
}

/// The attack-free optimum a^AF(r0): the unique root of u'(a) = 0 on (0, M).
///
/// For the power family v(x) = k·x^γ this is (k·γ·r0/c)^{1/(1−γ)} / r0.
pub fn attack_free_optimum(ty: &UeType, scheme: &RewardScheme) -> Result<f64> {
    let r0 = scheme.r0;
    if r0 * ty.eval.marginal_at_zero() <= ty.cost {
        return Err(Error::Assumption {
            clause: Clause::InteriorOptimum,
            detail: "r0·v'(0) <= c, no positive participation is rational",
        });
    }
    if ty.utility_derivative(r0, scheme.cap()) >= 0.0 {
        return Err(Error::Assumption {
            clause: Clause::InteriorOptimum,
            detail: "utility still increasing at the cap M",
        });
    }
    Ok(attack_free_rate(ty, scheme))
}

/// θ̄ = (r0·v'(0) − c)(ρ + δ) / (q·β).
///
/// +∞ when v'(0) is infinite or when there is no risk (β = 0 or q = 0);
/// 0 when participation is unprofitable even without risk.
pub fn participation_threshold(ty: &UeType, scheme: &RewardScheme, env: &RiskEnv) -> f64 {
    let margin = scheme.r0 * ty.eval.marginal_at_zero() - ty.cost;
    if margin <= 0.0 {
        return 0.0;
    }
    if margin.is_infinite() || env.beta == 0.0 || ty.recovery_cost == 0.0 {
        return f64::INFINITY;
    }
    margin * (env.rho + env.delta) / (ty.recovery_cost * env.beta)
}

/// f(a) = u'(a)(ρ + δ + βθa) − βθ(u(a) + q).
#[inline]
pub fn first_order_condition(ty: &UeType, r0: f64, env: &RiskEnv, theta: f64, a: f64) -> f64 {
    let bt = env.beta * theta;
    let du = ty.utility_derivative(r0, a);
    if bt == 0.0 {
        return du * (env.rho + env.delta);
    }
    du * (env.rho + env.delta + bt * a) - bt * (ty.utility(r0, a) + ty.recovery_cost)
}

pub fn best_response(ty: &UeType, scheme: &RewardScheme, env: &RiskEnv, theta: f64) -> Result<BestResponse> {
    best_response_with(ty, scheme, env, theta, &Tolerance::default())
}

pub fn best_response_with(
    ty: &UeType,
    scheme: &RewardScheme,
    env: &RiskEnv,
    theta: f64,
    tol: &Tolerance,
) -> Result<BestResponse> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid("theta", theta, "must lie in [0, 1]"));
    }
    let theta_bar = participation_threshold(ty, scheme, env);
    if theta >= theta_bar {
        return Ok(BestResponse { a_star: 0.0, theta_bar, residual: 0.0 });
    }
    let r0 = scheme.r0;
    let cap = scheme.cap();
    let f = |a: f64| first_order_condition(ty, r0, env, theta, a);
    if f(cap) >= 0.0 {
        return Err(Error::Assumption {
            clause: Clause::PositiveAtCap,
            detail: "first-order condition nonnegative at the cap M",
        });
    }
    let scaled = |a: f64| f(a) / (env.rho + env.delta + env.beta * theta * a);
    let a_star = if env.beta * theta == 0.0 {
        // Closed form; f reduces to (ρ+δ)·u'(a).
        attack_free_rate(ty, scheme)
    } else {
        bisect(f, 0.0, cap, tol)?.x
    };
    Ok(BestResponse {
        a_star,
        theta_bar,
        residual: scaled(a_star),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{foresighted_utility, EvaluationFunction};

    fn scheme() -> RewardScheme {
        RewardScheme::new(2.2, 1000.0).unwrap()
    }

    fn power(k: f64) -> UeType {
        UeType::new(EvaluationFunction::power(k, 0.5).unwrap(), 0.35, 5.0, 1.0).unwrap()
    }

    #[test]
    fn attack_free_closed_forms() {
        let a = attack_free_optimum(&power(1.0), &scheme()).unwrap();
        assert!((a - 2.2 / (4.0 * 0.1225)).abs() < 1e-12);
        assert!((a - 4.4898).abs() < 1e-4);
        let a = attack_free_optimum(&power(1.5), &scheme()).unwrap();
        assert!((a - 10.102).abs() < 1e-3);
        for (r0, c) in [(0.5, 0.2), (3.0, 1.1), (7.0, 0.05)] {
            let ty = UeType { cost: c, ..power(1.0) };
            let a = attack_free_optimum(&ty, &RewardScheme::new(r0, 1e5).unwrap()).unwrap();
            assert!((a - r0 / (4.0 * c * c)).abs() < 1e-9 * a);
        }
    }

    #[test]
    fn attack_free_reports_violated_clause() {
        let ty = UeType::new(EvaluationFunction::log_linear(1.0).unwrap(), 3.0, 1.0, 1.0).unwrap();
        let err = attack_free_optimum(&ty, &RewardScheme::new(2.0, 200.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Assumption { clause: Clause::InteriorOptimum, .. }));
    }

    #[test]
    fn threshold_examples() {
        let log = |c: f64| UeType::new(EvaluationFunction::log_linear(1.0).unwrap(), c, 4.0, 1.0).unwrap();
        let env = RiskEnv::new(0.5, 1.0, 1.0).unwrap();
        let t = participation_threshold(&log(1.0), &RewardScheme::new(2.0, 100.0).unwrap(), &env);
        assert!((t - 1.0).abs() < 1e-15);
        assert_eq!(participation_threshold(&power(1.0), &scheme(), &env), f64::INFINITY);
        assert_eq!(
            participation_threshold(&log(1.0), &RewardScheme::new(1.0, 100.0).unwrap(), &env),
            0.0
        );
        let riskless = RiskEnv::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(
            participation_threshold(&log(1.0), &RewardScheme::new(2.0, 100.0).unwrap(), &riskless),
            f64::INFINITY
        );
    }

    #[test]
    fn zero_risk_gives_attack_free() {
        let env = RiskEnv::new(0.4, 1.0, 1.0).unwrap();
        let br = best_response(&power(1.0), &scheme(), &env, 0.0).unwrap();
        assert_eq!(br.a_star, attack_free_optimum(&power(1.0), &scheme()).unwrap());
    }

    #[test]
    fn at_threshold_participation_is_zero() {
        let ty = UeType::new(EvaluationFunction::log_linear(1.0).unwrap(), 1.0, 4.0, 1.0).unwrap();
        let env = RiskEnv::new(0.5, 1.0, 1.0).unwrap();
        let s = RewardScheme::new(2.0, 100.0).unwrap();
        assert_eq!(best_response(&ty, &s, &env, 1.0).unwrap().a_star, 0.0);
        assert!(best_response(&ty, &s, &env, 0.999).unwrap().a_star > 0.0);
    }

    #[test]
    fn interior_matches_golden_section_oracle() {
        // Independent route: maximise U directly.
        let ty = power(1.0);
        let s = scheme();
        let env = RiskEnv::new(0.4, 1.0, 1.0).unwrap();
        let br = best_response(&ty, &s, &env, 0.5).unwrap();
        let m = crate::solve::golden_section_max(
            |a| foresighted_utility(&ty, &s, &env, a, 0.5).unwrap(),
            0.0,
            20.0,
            &Tolerance { argument: 1e-12, ..Tolerance::default() },
        );
        assert!((br.a_star - m.x).abs() < 1e-6, "{} vs {}", br.a_star, m.x);
        assert!((br.a_star - 0.663_569_7).abs() < 1e-6);
        assert!(br.residual.abs() < 1e-10);
        assert!(br.a_star < attack_free_optimum(&ty, &s).unwrap());
    }

    #[test]
    fn rejects_theta_outside_unit_interval() {
        let env = RiskEnv::new(0.4, 1.0, 1.0).unwrap();
        assert!(best_response(&power(1.0), &scheme(), &env, 1.5).is_err());
    }
}
