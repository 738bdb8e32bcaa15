//! Nash equilibrium of the K-type participation game when the compromise
//! state is not observed.
//!
//! Each UE commits to a constant rate and best-responds to the steady-state
//! compromise that the whole profile induces. Equilibria are symmetric
//! within a type, so the game reduces to the scalar fixed point
//!
//! F(θ) = Σ_k w_k τ a_k(θ) / (τθ a_k(θ) + 1) = 1,
//!
//! with a_k(θ) the type-k best response. F is strictly decreasing, which
//! makes outer bisection on θ exact and the equilibrium unique.

use alloc::vec::Vec;

use crate::bestresp::{attack_free_rate, best_response_with};
use crate::epidemic::{integrate_dynamics, type_fraction, IntegrationOptions, Policy};
use crate::error::{Error, Result};
use crate::math::abs;
use crate::model::{validate_population, RewardScheme, RiskEnv, UeType};
use crate::solve::{bisect, Tolerance};

/// Post-solve tolerance on each type's best-response residual.
pub const BEST_RESPONSE_CHECK: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct NashEquilibrium {
    /// One rate per type.
    pub a_ne: Vec<f64>,
    pub theta_inf: f64,
    pub theta_k_inf: Vec<f64>,
    /// F(θ∞) − 1 (zero when extinct).
    pub residual: f64,
    /// 1 / Σ w_k a^AF_k.
    pub tau_c: f64,
}

impl NashEquilibrium {
    /// Σ w_k a_k.
    pub fn mean_participation(&self, types: &[UeType]) -> f64 {
        types.iter().zip(&self.a_ne).map(|(t, a)| t.weight * a).sum()
    }

    /// Σ w_k (1 − θ_k) a_k: the participation the operator is paid for.
    pub fn effective_participation(&self, types: &[UeType]) -> f64 {
        types
            .iter()
            .zip(&self.a_ne)
            .zip(&self.theta_k_inf)
            .map(|((t, a), th)| t.weight * (1.0 - th) * a)
            .sum()
    }
}

/// τ_c = 1 / Σ w_k a^AF_k(r0); +∞ if no type participates.
pub fn critical_rate(types: &[UeType], scheme: &RewardScheme) -> f64 {
    let mix: f64 = types.iter().map(|t| t.weight * attack_free_rate(t, scheme)).sum();
    if mix > 0.0 {
        1.0 / mix
    } else {
        f64::INFINITY
    }
}

/// Best responses of every type to `theta`; errors carry the type index.
pub fn best_response_profile(
    types: &[UeType],
    scheme: &RewardScheme,
    env: &RiskEnv,
    theta: f64,
    tol: &Tolerance,
) -> Result<Vec<f64>> {
    types
        .iter()
        .enumerate()
        .map(|(k, ty)| {
            best_response_with(ty, scheme, env, theta, tol)
                .map(|br| br.a_star)
                .map_err(|e| e.in_type(k))
        })
        .collect()
}

/// F(θ) − 1 for the equilibrium fixed point. At θ = 0 the best responses
/// are the attack-free optima, so F(0) = τ Σ w_k a^AF_k.
pub fn fixed_point_residual(
    types: &[UeType],
    scheme: &RewardScheme,
    env: &RiskEnv,
    theta: f64,
    tol: &Tolerance,
) -> Result<f64> {
    let tau = env.tau();
    let rates = if theta == 0.0 {
        types.iter().map(|t| attack_free_rate(t, scheme)).collect()
    } else {
        best_response_profile(types, scheme, env, theta, tol)?
    };
    Ok(types
        .iter()
        .zip(&rates)
        .map(|(t, a)| t.weight * tau * a / (tau * theta * a + 1.0))
        .sum::<f64>()
        - 1.0)
}

pub fn solve_ne(types: &[UeType], scheme: &RewardScheme, env: &RiskEnv) -> Result<NashEquilibrium> {
    solve_ne_with(types, scheme, env, &Tolerance::default())
}

pub fn solve_ne_with(
    types: &[UeType],
    scheme: &RewardScheme,
    env: &RiskEnv,
    tol: &Tolerance,
) -> Result<NashEquilibrium> {
    solve_ne_in(types, scheme, env, 0.0, 1.0, tol)
}

/// Like [`solve_ne_with`] but bisects the persistent branch on `[lo, hi]`,
/// which must bracket the root.
pub fn solve_ne_in(
    types: &[UeType],
    scheme: &RewardScheme,
    env: &RiskEnv,
    lo: f64,
    hi: f64,
    tol: &Tolerance,
) -> Result<NashEquilibrium> {
    validate_population(types)?;
    scheme.validate()?;
    env.validate()?;
    let tau = env.tau();
    let tau_c = critical_rate(types, scheme);
    if tau <= tau_c {
        let a_ne = best_response_profile(types, scheme, env, 0.0, tol)?;
        return Ok(NashEquilibrium {
            theta_k_inf: alloc::vec![0.0; types.len()],
            a_ne,
            theta_inf: 0.0,
            residual: 0.0,
            tau_c,
        });
    }

    let mut failure = None;
    let f = |theta: f64| match fixed_point_residual(types, scheme, env, theta, tol) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let root = bisect(f, lo, hi, tol);
    if let Some(e) = failure {
        return Err(e);
    }
    let theta_inf = root?.x;

    let a_ne = best_response_profile(types, scheme, env, theta_inf, tol)?;
    for (k, ty) in types.iter().enumerate() {
        let br = best_response_with(ty, scheme, env, theta_inf, tol).map_err(|e| e.in_type(k))?;
        if abs(br.residual) > BEST_RESPONSE_CHECK {
            return Err(Error::Undefined("equilibrium rate is not a best response").in_type(k));
        }
    }
    let theta_k_inf = a_ne.iter().map(|&a| type_fraction(tau, theta_inf, a)).collect();
    let residual = fixed_point_residual(types, scheme, env, theta_inf, tol)?;
    Ok(NashEquilibrium { a_ne, theta_inf, theta_k_inf, residual, tau_c })
}

/// Alternative route: integrate the observed-state best-response dynamics
/// until they settle and read off the rest point.
pub fn solve_ne_by_dynamics(
    types: &[UeType],
    scheme: &RewardScheme,
    env: &RiskEnv,
    theta0: f64,
    opts: &IntegrationOptions,
) -> Result<NashEquilibrium> {
    validate_population(types)?;
    let tr = integrate_dynamics(theta0, env, Policy::Adaptive { types, scheme }, opts)?;
    let tau = env.tau();
    let theta_inf = tr.last.theta;
    let residual = fixed_point_residual(types, scheme, env, theta_inf, &opts.tol)?;
    Ok(NashEquilibrium {
        theta_k_inf: tr.last_a.iter().map(|&a| type_fraction(tau, theta_inf, a)).collect(),
        a_ne: tr.last_a,
        theta_inf,
        residual,
        tau_c: critical_rate(types, scheme),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epidemic::{steady_state_fixed_ktype, steady_state_strategic};
    use crate::model::EvaluationFunction;

    fn two_types() -> [UeType; 2] {
        [
            UeType::new(EvaluationFunction::power(1.0, 0.5).unwrap(), 0.35, 5.0, 0.3).unwrap(),
            UeType::new(EvaluationFunction::power(1.5, 0.5).unwrap(), 0.35, 5.0, 0.7).unwrap(),
        ]
    }

    #[test]
    fn critical_rate_two_types() {
        let s = RewardScheme::new(2.2, 1000.0).unwrap();
        let tc = critical_rate(&two_types(), &s);
        let expected = 1.0 / (0.3 * 2.2 / 0.49 + 0.7 * 2.25 * 2.2 / 0.49);
        assert!((tc - expected).abs() < 1e-14);
        assert!((0.118..=0.120).contains(&tc));
    }

    #[test]
    fn critical_rate_single_type() {
        let ty = [UeType::new(EvaluationFunction::sqrt(), 0.4, 1.0, 1.0).unwrap()];
        let s = RewardScheme::new(3.0, 1000.0).unwrap();
        assert!((critical_rate(&ty, &s) - 4.0 * 0.16 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn extinct_regime_plays_attack_free() {
        let s = RewardScheme::new(2.2, 1000.0).unwrap();
        let env = RiskEnv::new(0.1, 1.0, 1.0).unwrap();
        let ne = solve_ne(&two_types(), &s, &env).unwrap();
        assert_eq!(ne.theta_inf, 0.0);
        for (a, ty) in ne.a_ne.iter().zip(two_types()) {
            assert!((a - attack_free_rate(&ty, &s)).abs() < 1e-12);
        }
    }

    #[test]
    fn persistent_regime_exceeds_inverse_tau() {
        let types = two_types();
        let s = RewardScheme::new(2.2, 1000.0).unwrap();
        let env = RiskEnv::new(0.2, 1.0, 1.0).unwrap();
        let ne = solve_ne(&types, &s, &env).unwrap();
        assert!(ne.theta_inf > 0.0);
        assert!(ne.mean_participation(&types) > 1.0 / env.tau());
        assert!((ne.effective_participation(&types) - 1.0 / env.tau()).abs() < 1e-8);
        assert!(ne.residual.abs() < 1e-10);
        let ss = steady_state_fixed_ktype(&ne.a_ne, &[0.3, 0.7], &env).unwrap();
        assert!((ss.theta_inf - ne.theta_inf).abs() < 1e-8);
    }

    #[test]
    fn single_type_matches_strategic_steady_state() {
        let ty = UeType::new(EvaluationFunction::sqrt(), 0.35, 5.0, 1.0).unwrap();
        let s = RewardScheme::new(2.2, 1000.0).unwrap();
        let env = RiskEnv::new(0.4, 1.0, 1.0).unwrap();
        let ne = solve_ne(&[ty], &s, &env).unwrap();
        let ss = steady_state_strategic(&ty, &s, &env).unwrap();
        assert!(ne.theta_inf > 0.0);
        assert!((ne.theta_inf - ss.theta_inf).abs() < 1e-8);
    }

    #[test]
    fn dynamics_route_agrees() {
        let types = two_types();
        let s = RewardScheme::new(2.2, 1000.0).unwrap();
        let env = RiskEnv::new(0.2, 1.0, 1.0).unwrap();
        let ne = solve_ne(&types, &s, &env).unwrap();
        let opts = IntegrationOptions { dt: 1e-2, horizon: 2e3, record_every: 10_000, ..Default::default() };
        let dyn_ne = solve_ne_by_dynamics(&types, &s, &env, 0.5, &opts).unwrap();
        assert!((dyn_ne.theta_inf - ne.theta_inf).abs() < 1e-6);
    }

    #[test]
    fn type_index_propagates() {
        let good = UeType::new(EvaluationFunction::sqrt(), 0.35, 5.0, 0.5).unwrap();
        // Tiny cap: utility still increasing at M, so best response fails.
        let s = RewardScheme::new(2.2, 1e-3).unwrap();
        let env = RiskEnv::new(0.2, 1.0, 1.0).unwrap();
        let err = best_response_profile(&[good, good], &s, &env, 0.3, &Tolerance::default()).unwrap_err();
        assert!(matches!(err, Error::Type { index: 0, .. }));
    }
}
