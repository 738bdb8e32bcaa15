//! Mean-field SIS dynamics.
//!
//! With type-k participation a_k and aggregate compromise θ = Σ w_k θ_k,
//!
//! dθ_k/dt = −δ·θ_k + (1 − θ_k)·β·θ·a_k.
//!
//! For one type this is dθ = θ((1 − θ)βa − δ)dt. Under the adaptive
//! policy a_k is the best response to the current θ.

use alloc::vec;
use alloc::vec::Vec;

use crate::bestresp::{attack_free_optimum, best_response_with};
use crate::error::{Error, Result};
use crate::math::{abs, ln};
use crate::model::{RewardScheme, RiskEnv, UeType};
use crate::solve::{bisect, Tolerance};

/// Allowed excursion outside [0, 1] before clamping counts as a step-size error.
pub const CLAMP_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct EpidemicState {
    pub t: f64,
    /// Aggregate compromise fraction Σ w_k θ_k.
    pub theta: f64,
    pub theta_k: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub theta_inf: f64,
    /// Critical effective infection rate; +∞ when nobody participates.
    pub tau_c: f64,
    pub persistent: bool,
    pub theta_k: Vec<f64>,
}

/// Per-type steady-state compromise τθa / (τθa + 1).
#[inline]
pub fn type_fraction(tau: f64, theta: f64, a: f64) -> f64 {
    let x = tau * theta * a;
    x / (x + 1.0)
}

/// Steady state when everybody participates at the same fixed rate.
///
/// τ_c = 1/a; θ∞ = 0 for τ ≤ τ_c and 1 − δ/(βa) otherwise.
pub fn steady_state_fixed_homogeneous(a: f64, env: &RiskEnv) -> SteadyState {
    let tau_c = if a > 0.0 { 1.0 / a } else { f64::INFINITY };
    let tau = env.tau();
    let theta_inf = if tau <= tau_c { 0.0 } else { 1.0 - env.delta / (env.beta * a) };
    SteadyState {
        theta_inf,
        tau_c,
        persistent: theta_inf > 0.0,
        theta_k: vec![theta_inf],
    }
}

pub fn steady_state_fixed_ktype(actions: &[f64], weights: &[f64], env: &RiskEnv) -> Result<SteadyState> {
    steady_state_fixed_ktype_with(actions, weights, env, &Tolerance::default())
}

/// Steady state for fixed per-type rates.
///
/// τ_c = 1/Σ w_k a_k. Above it θ∞ is the unique root in (0, 1) of
/// Σ τ w_k a_k / (τθa_k + 1) = 1, whose left side is decreasing in θ.
pub fn steady_state_fixed_ktype_with(
    actions: &[f64],
    weights: &[f64],
    env: &RiskEnv,
    tol: &Tolerance,
) -> Result<SteadyState> {
    if actions.len() != weights.len() || actions.is_empty() {
        return Err(Error::invalid(
            "actions",
            actions.len() as f64,
            "need one action per weight",
        ));
    }
    if let Some(&a) = actions.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::invalid("actions", a, "rates must be >= 0"));
    }
    let mean: f64 = actions.iter().zip(weights).map(|(a, w)| a * w).sum();
    let tau_c = if mean > 0.0 { 1.0 / mean } else { f64::INFINITY };
    let tau = env.tau();
    if tau <= tau_c {
        return Ok(SteadyState {
            theta_inf: 0.0,
            tau_c,
            persistent: false,
            theta_k: vec![0.0; actions.len()],
        });
    }
    let lhs = |theta: f64| -> f64 {
        actions
            .iter()
            .zip(weights)
            .map(|(a, w)| tau * w * a / (tau * theta * a + 1.0))
            .sum::<f64>()
            - 1.0
    };
    let theta_inf = bisect(lhs, 0.0, 1.0, tol)?.x;
    Ok(SteadyState {
        theta_inf,
        tau_c,
        persistent: theta_inf > 0.0,
        theta_k: actions.iter().map(|&a| type_fraction(tau, theta_inf, a)).collect(),
    })
}

/// Participation rule driving the dynamics.
#[derive(Clone, Copy, Debug)]
pub enum Policy<'a> {
    /// Prescribed per-type rates.
    Fixed { actions: &'a [f64], weights: &'a [f64] },
    /// Every UE best-responds to the current aggregate θ.
    Adaptive { types: &'a [UeType], scheme: &'a RewardScheme },
}

impl Policy<'_> {
    fn len(&self) -> usize {
        match self {
            Policy::Fixed { actions, .. } => actions.len(),
            Policy::Adaptive { types, .. } => types.len(),
        }
    }

    fn weight(&self, k: usize) -> f64 {
        match self {
            Policy::Fixed { weights, .. } => weights[k],
            Policy::Adaptive { types, .. } => types[k].weight,
        }
    }

    fn rates(&self, env: &RiskEnv, theta: f64, tol: &Tolerance, out: &mut [f64]) -> Result<()> {
        match self {
            Policy::Fixed { actions, .. } => out.copy_from_slice(actions),
            Policy::Adaptive { types, scheme } => {
                for (k, ty) in types.iter().enumerate() {
                    out[k] = best_response_with(ty, scheme, env, theta, tol)
                        .map_err(|e| e.in_type(k))?
                        .a_star;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Keep every n-th state in the returned trajectory.
    pub record_every: usize,
    /// Stop once max_k |dθ_k/dt| < 1e-8 has held for 100 consecutive steps.
    pub stop_when_converged: bool,
    pub tol: Tolerance,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            dt: 1e-3,
            horizon: 1e4,
            record_every: 1000,
            stop_when_converged: true,
            tol: Tolerance::default(),
        }
    }
}

pub const CONVERGED_RATE: f64 = 1e-8;
pub const CONVERGED_STEPS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<EpidemicState>,
    /// Per-type participation at each recorded state.
    pub a_star: Vec<Vec<f64>>,
    pub converged: bool,
    /// Last state reached, recorded or not.
    pub last: EpidemicState,
    pub last_a: Vec<f64>,
}

/// Explicit Euler integration of the mean-field dynamics from a common
/// initial compromise `theta0` in every type.
pub fn integrate_dynamics(
    theta0: f64,
    env: &RiskEnv,
    policy: Policy<'_>,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    if !(0.0..=1.0).contains(&theta0) {
        return Err(Error::invalid("theta0", theta0, "must lie in [0, 1]"));
    }
    if !(opts.dt > 0.0) || !opts.dt.is_finite() {
        return Err(Error::invalid("dt", opts.dt, "must be finite and > 0"));
    }
    let k = policy.len();
    let weights: Vec<f64> = (0..k).map(|i| policy.weight(i)).collect();
    let mut theta_k = vec![theta0; k];
    let mut rates = vec![0.0; k];
    let mut t = 0.0;
    let aggregate = |th: &[f64]| -> f64 { th.iter().zip(&weights).map(|(x, w)| x * w).sum() };

    let steps = libm::ceil(opts.horizon / opts.dt) as u64;
    let every = opts.record_every.max(1) as u64;
    let mut states = Vec::new();
    let mut a_rec = Vec::new();
    let mut quiet = 0usize;
    let mut converged = false;

    let mut theta = aggregate(&theta_k);
    policy.rates(env, theta.clamp(0.0, 1.0), &opts.tol, &mut rates)?;
    for step in 0..=steps {
        if step % every == 0 {
            states.push(EpidemicState { t, theta, theta_k: theta_k.clone() });
            a_rec.push(rates.clone());
        }
        if step == steps {
            break;
        }
        let mut max_rate: f64 = 0.0;
        for i in 0..k {
            let d = -env.delta * theta_k[i] + (1.0 - theta_k[i]) * env.beta * theta * rates[i];
            max_rate = max_rate.max(abs(d));
            let next = theta_k[i] + opts.dt * d;
            if next < -CLAMP_SLACK || next > 1.0 + CLAMP_SLACK {
                return Err(Error::StepSize { t, theta: next });
            }
            theta_k[i] = next.clamp(0.0, 1.0);
        }
        t += opts.dt;
        theta = aggregate(&theta_k);
        policy.rates(env, theta.clamp(0.0, 1.0), &opts.tol, &mut rates)?;
        if max_rate < CONVERGED_RATE {
            quiet += 1;
            if quiet >= CONVERGED_STEPS {
                converged = true;
                if opts.stop_when_converged {
                    if (step + 1) % every != 0 {
                        states.push(EpidemicState { t, theta, theta_k: theta_k.clone() });
                        a_rec.push(rates.clone());
                    }
                    break;
                }
            }
        } else {
            quiet = 0;
        }
    }
    Ok(Trajectory {
        states,
        a_star: a_rec,
        converged,
        last: EpidemicState { t, theta, theta_k },
        last_a: rates,
    })
}

/// g(θ) = (1 − θ)·β·a*(θ) − δ: growth rate of ln θ under the adaptive policy.
pub fn strategic_growth(ty: &UeType, scheme: &RewardScheme, env: &RiskEnv, theta: f64, tol: &Tolerance) -> Result<f64> {
    let a = best_response_with(ty, scheme, env, theta, tol)?.a_star;
    Ok((1.0 - theta) * env.beta * a - env.delta)
}

pub fn steady_state_strategic(ty: &UeType, scheme: &RewardScheme, env: &RiskEnv) -> Result<SteadyState> {
    steady_state_strategic_with(ty, scheme, env, &Tolerance::default())
}

/// Long-run compromise when a homogeneous population best-responds to the
/// observed θ.
///
/// τ_c = 1/a^AF regardless of any prescribed action; above it θ† solves
/// (1 − θ)·a*(θ) = 1/τ. Extinction is reported at τ = τ_c.
pub fn steady_state_strategic_with(
    ty: &UeType,
    scheme: &RewardScheme,
    env: &RiskEnv,
    tol: &Tolerance,
) -> Result<SteadyState> {
    let a_af = attack_free_optimum(ty, scheme)?;
    let tau_c = 1.0 / a_af;
    if env.tau() <= tau_c {
        return Ok(SteadyState { theta_inf: 0.0, tau_c, persistent: false, theta_k: vec![0.0] });
    }
    let theta_bar = crate::bestresp::participation_threshold(ty, scheme, env);
    let hi = if theta_bar <= 1.0 { theta_bar } else { 1.0 };
    let mut failure = None;
    let g = |th: f64| match strategic_growth(ty, scheme, env, th, tol) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let root = bisect(g, 0.0, hi, tol);
    if let Some(e) = failure {
        return Err(e);
    }
    let theta_inf = root?.x;
    Ok(SteadyState {
        theta_inf,
        tau_c,
        persistent: theta_inf > 0.0,
        theta_k: vec![theta_inf],
    })
}

/// Bounds on the time for ln θ to travel from `theta0` to `target` when
/// d ln θ/dt = growth(θ) with growth decreasing in θ and vanishing at the
/// steady state beyond `target`.
///
/// The speed |growth| is largest at `theta0` and smallest at `target`, so
/// Δ/growth(θ0) < T < Δ/growth(target) with Δ = ln target − ln θ0.
/// Both bounds are positive.
pub fn passage_time_bounds<F>(theta0: f64, target: f64, mut growth: F) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let gap = ln(target) - ln(theta0);
    if gap == 0.0 {
        return (0.0, 0.0);
    }
    (gap / growth(theta0), gap / growth(target))
}

/// Bounds on the time the adaptive dynamics need to come within
/// `epsilon` of θ† starting from `theta0`.
pub fn convergence_time_bounds(
    theta0: f64,
    epsilon: f64,
    env: &RiskEnv,
    ty: &UeType,
    scheme: &RewardScheme,
) -> Result<(f64, f64)> {
    let tol = Tolerance::default();
    let ss = steady_state_strategic_with(ty, scheme, env, &tol)?;
    if !ss.persistent {
        return Err(Error::Undefined("convergence bounds need tau above the strategic critical rate"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", epsilon, "must be > 0"));
    }
    let dagger = ss.theta_inf;
    if theta0 == dagger {
        return Err(Error::invalid("theta0", theta0, "already at the steady state"));
    }
    let target = if theta0 > dagger { dagger + epsilon } else { dagger - epsilon };
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid("epsilon", epsilon, "theta_eps must lie in (0, 1)"));
    }
    if (theta0 > dagger && target > theta0) || (theta0 < dagger && target < theta0) {
        return Err(Error::invalid("epsilon", epsilon, "theta0 already within epsilon of the steady state"));
    }
    let mut failure = None;
    let bounds = passage_time_bounds(theta0, target, |th| {
        strategic_growth(ty, scheme, env, th, &tol).unwrap_or_else(|e| {
            failure.get_or_insert(e);
            f64::NAN
        })
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(bounds),
    }
}
