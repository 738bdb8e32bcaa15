//! Domain types and utility evaluation.
//!
//! Rates are per unit time, costs per task, recovery cost per unit time.
//! Utilities are in abstract utility units.

use alloc::vec::Vec;

use crate::error::{Clause, Error, Result};
use crate::math::{abs, ln_1p, powf};

/// Absolute tolerance for the float comparisons in assumption checks.
pub const ASSUMPTION_TOL: f64 = 1e-12;

/// A UE's valuation of the reward it receives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvaluationFunction {
    /// v(x) = scale · x^exponent, exponent in (0, 1). v'(0) is infinite.
    Power { scale: f64, exponent: f64 },
    /// v(x) = scale · ln(1 + x). v'(0) = scale.
    LogLinear { scale: f64 },
}

impl EvaluationFunction {
    pub fn power(scale: f64, exponent: f64) -> Result<Self> {
        let v = EvaluationFunction::Power { scale, exponent };
        v.validate()?;
        Ok(v)
    }

    pub fn log_linear(scale: f64) -> Result<Self> {
        let v = EvaluationFunction::LogLinear { scale };
        v.validate()?;
        Ok(v)
    }

    /// v(x) = √x.
    pub fn sqrt() -> Self {
        EvaluationFunction::Power { scale: 1.0, exponent: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EvaluationFunction::Power { scale, exponent } => {
                positive("scale", scale)?;
                if !(exponent > 0.0 && exponent < 1.0) {
                    return Err(Error::invalid("exponent", exponent, "must lie in (0, 1)"));
                }
            }
            EvaluationFunction::LogLinear { scale } => positive("scale", scale)?,
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            EvaluationFunction::Power { scale, exponent } => {
                if x <= 0.0 {
                    0.0
                } else {
                    scale * powf(x, exponent)
                }
            }
            EvaluationFunction::LogLinear { scale } => scale * ln_1p(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            EvaluationFunction::Power { scale, exponent } => {
                if x <= 0.0 {
                    f64::INFINITY
                } else {
                    scale * exponent * powf(x, exponent - 1.0)
                }
            }
            EvaluationFunction::LogLinear { scale } => scale / (1.0 + x),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            EvaluationFunction::Power { scale, exponent } => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    scale * exponent * (exponent - 1.0) * powf(x, exponent - 2.0)
                }
            }
            EvaluationFunction::LogLinear { scale } => -scale / ((1.0 + x) * (1.0 + x)),
        }
    }

    /// v'(0), infinite for the power family.
    pub fn marginal_at_zero(&self) -> f64 {
        self.derivative(0.0)
    }

    /// The x ≥ 0 with v'(x) = y, or 0 when y ≥ v'(0).
    pub fn inverse_marginal(&self, y: f64) -> f64 {
        match *self {
            EvaluationFunction::Power { scale, exponent } => {
                powf(scale * exponent / y, 1.0 / (1.0 - exponent))
            }
            EvaluationFunction::LogLinear { scale } => (scale / y - 1.0).max(0.0),
        }
    }
}

/// One population segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UeType {
    pub eval: EvaluationFunction,
    /// Service cost per task.
    pub cost: f64,
    /// Cost per unit time spent compromised.
    pub recovery_cost: f64,
    /// Population share.
    pub weight: f64,
}

impl UeType {
    pub fn new(eval: EvaluationFunction, cost: f64, recovery_cost: f64, weight: f64) -> Result<Self> {
        let t = UeType { eval, cost, recovery_cost, weight };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        self.eval.validate()?;
        positive("cost", self.cost)?;
        positive("recovery_cost", self.recovery_cost)?;
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(Error::invalid("weight", self.weight, "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// u(a) = v(r0·a) − c·a, unchecked.
    #[inline]
    pub fn utility(&self, r0: f64, a: f64) -> f64 {
        self.eval.value(r0 * a) - self.cost * a
    }

    /// u'(a) = r0·v'(r0·a) − c.
    #[inline]
    pub fn utility_derivative(&self, r0: f64, a: f64) -> f64 {
        r0 * self.eval.derivative(r0 * a) - self.cost
    }

    /// u''(a) = r0²·v''(r0·a).
    #[inline]
    pub fn utility_second_derivative(&self, r0: f64, a: f64) -> f64 {
        r0 * r0 * self.eval.second_derivative(r0 * a)
    }
}

/// Checks every type and that the weights sum to one.
pub fn validate_population(types: &[UeType]) -> Result<()> {
    if types.is_empty() {
        return Err(Error::invalid("types", 0.0, "population needs at least one type"));
    }
    for (i, t) in types.iter().enumerate() {
        t.validate().map_err(|e| e.in_type(i))?;
    }
    let total: f64 = types.iter().map(|t| t.weight).sum();
    if abs(total - 1.0) > 1e-9 {
        return Err(Error::invalid("weights", total, "must sum to 1"));
    }
    Ok(())
}

/// Attack, recovery and discounting parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskEnv {
    /// Infection probability per task served for a compromised requester.
    pub beta: f64,
    /// Recovery rate.
    pub delta: f64,
    /// Discount rate.
    pub rho: f64,
}

impl RiskEnv {
    pub fn new(beta: f64, delta: f64, rho: f64) -> Result<Self> {
        let env = RiskEnv { beta, delta, rho };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid("beta", self.beta, "must lie in [0, 1]"));
        }
        positive("delta", self.delta)?;
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::invalid("rho", self.rho, "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Effective infection rate β/δ.
    pub fn tau(&self) -> f64 {
        self.beta / self.delta
    }
}

/// Throttled linear reward r(a) = min(r0·a, r_max).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardScheme {
    pub r0: f64,
    pub r_max: f64,
}

impl RewardScheme {
    pub fn new(r0: f64, r_max: f64) -> Result<Self> {
        let s = RewardScheme { r0, r_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        positive("r0", self.r0)?;
        positive("r_max", self.r_max)
    }

    /// Participation cap M = r_max / r0.
    pub fn cap(&self) -> f64 {
        self.r_max / self.r0
    }

    pub fn reward(&self, a: f64) -> f64 {
        if a <= self.cap() {
            self.r0 * a
        } else {
            self.r_max
        }
    }

    pub fn with_r0(&self, r0: f64) -> Self {
        RewardScheme { r0, r_max: self.r_max }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorParams {
    /// Operator benefit per completed D2D task.
    pub b0: f64,
}

impl OperatorParams {
    pub fn new(b0: f64) -> Result<Self> {
        positive("b0", b0)?;
        Ok(OperatorParams { b0 })
    }
}

/// Everything needed to evaluate the game for one population.
#[derive(Clone, Debug, PartialEq)]
pub struct Market {
    pub types: Vec<UeType>,
    pub scheme: RewardScheme,
    pub env: RiskEnv,
    pub operator: OperatorParams,
}

impl Market {
    pub fn validate(&self) -> Result<()> {
        validate_population(&self.types)?;
        self.scheme.validate()?;
        self.env.validate()?;
        positive("b0", self.operator.b0)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.types.iter().map(|t| t.weight).collect()
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, value, "must be finite and > 0"))
    }
}

fn check_rate(scheme: &RewardScheme, a: f64) -> Result<()> {
    if !(a >= 0.0) {
        return Err(Error::invalid("a", a, "participation must be >= 0"));
    }
    if a > scheme.cap() {
        return Err(Error::invalid("a", a, "participation above the reward cap M"));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::invalid("theta", theta, "must lie in [0, 1]"))
    }
}

/// Instantaneous utility rate u(a) = v(r0·a) − c·a for 0 ≤ a ≤ M.
pub fn instant_utility(ty: &UeType, scheme: &RewardScheme, a: f64) -> Result<f64> {
    check_rate(scheme, a)?;
    Ok(ty.utility(scheme.r0, a))
}

/// Discounted long-run utility of participating at rate `a` while a
/// fraction `theta` of requesters is compromised:
///
/// U(a, θ) = ((ρ+δ)·u(a) − βθa·q) / (ρ + δ + βθa).
///
/// A compromised UE earns nothing and pays q per unit time until it
/// recovers, after which it returns to the same contract.
pub fn foresighted_utility(
    ty: &UeType,
    scheme: &RewardScheme,
    env: &RiskEnv,
    a: f64,
    theta: f64,
) -> Result<f64> {
    check_rate(scheme, a)?;
    check_theta(theta)?;
    Ok(foresighted_unchecked(ty, scheme.r0, env, a, theta))
}

#[inline]
pub(crate) fn foresighted_unchecked(ty: &UeType, r0: f64, env: &RiskEnv, a: f64, theta: f64) -> f64 {
    let patience = env.rho + env.delta;
    let hazard = env.beta * theta * a;
    (patience * ty.utility(r0, a) - hazard * ty.recovery_cost) / (patience + hazard)
}

/// ∂U/∂a = (ρ+δ)·f(a) / (ρ+δ+βθa)², with f the first-order expression of
/// [`crate::bestresp::first_order_condition`].
pub fn foresighted_gradient(
    ty: &UeType,
    scheme: &RewardScheme,
    env: &RiskEnv,
    a: f64,
    theta: f64,
) -> Result<f64> {
    check_rate(scheme, a)?;
    check_theta(theta)?;
    let denom = env.rho + env.delta + env.beta * theta * a;
    let f = crate::bestresp::first_order_condition(ty, scheme.r0, env, theta, a);
    Ok((env.rho + env.delta) * f / (denom * denom))
}

/// Outcome of [`check_assumptions`]; failures are entries, not errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AssumptionReport {
    pub concavity: bool,
    pub positive_at_cap: bool,
    pub interior_optimum: bool,
    pub monotone_in_reward: bool,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.concavity && self.positive_at_cap && self.interior_optimum && self.monotone_in_reward
    }

    pub fn failures(&self) -> impl Iterator<Item = Clause> + '_ {
        [
            (self.concavity, Clause::Concavity),
            (self.positive_at_cap, Clause::PositiveAtCap),
            (self.interior_optimum, Clause::InteriorOptimum),
            (self.monotone_in_reward, Clause::MonotoneInReward),
        ]
        .into_iter()
        .filter_map(|(ok, c)| (!ok).then_some(c))
    }
}

/// Evaluates the standing assumptions for one type under one scheme.
///
/// Concavity is checked by finite differences on a geometric grid of
/// reward values in (0, r0·M]. Monotonicity of the attack-free optimum is
/// sampled on 50 unit rewards in (0, 2·r0] using the uncapped root of
/// r·v'(r·a) = c.
pub fn check_assumptions(ty: &UeType, scheme: &RewardScheme) -> Result<AssumptionReport> {
    ty.validate()?;
    scheme.validate()?;
    let r0 = scheme.r0;
    let m = scheme.cap();
    let v = &ty.eval;

    let x_max = r0 * m;
    let mut concavity = true;
    for i in 0..20 {
        let x = x_max * powf(1e-3, 1.0 - i as f64 / 19.0);
        let h = 1e-3 * x;
        let d1 = (v.value(x + h) - v.value(x - h)) / (2.0 * h);
        let d2 = (v.value(x + h) - 2.0 * v.value(x) + v.value(x - h)) / (h * h);
        if !(d1 > 0.0 && d2 < 0.0) {
            concavity = false;
        }
    }

    let positive_at_cap =
        abs(v.value(0.0)) <= ASSUMPTION_TOL && v.value(r0 * m) - ty.cost * m > ASSUMPTION_TOL;

    let ratio = ty.cost / r0;
    let interior_optimum = v.derivative(r0 * m) < ratio - ASSUMPTION_TOL
        && ratio < v.marginal_at_zero() - ASSUMPTION_TOL;

    let mut monotone_in_reward = true;
    let mut prev = f64::NEG_INFINITY;
    for i in 1..=50 {
        let r = 2.0 * r0 * i as f64 / 50.0;
        let a = v.inverse_marginal(ty.cost / r) / r;
        if a < prev - ASSUMPTION_TOL {
            monotone_in_reward = false;
        }
        prev = a;
    }

    Ok(AssumptionReport {
        concavity,
        positive_at_cap,
        interior_optimum,
        monotone_in_reward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sqrt_type(c: f64) -> UeType {
        UeType::new(EvaluationFunction::sqrt(), c, 5.0, 1.0).unwrap()
    }

    #[test]
    fn instant_utility_hand_values() {
        let s = RewardScheme::new(4.0, 400.0).unwrap();
        assert!((instant_utility(&sqrt_type(1.0), &s, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(instant_utility(&sqrt_type(1.0), &s, 0.0).unwrap(), 0.0);

        // At the attack-free optimum r0/(4c²) the utility is r0/(4c).
        let s = RewardScheme::new(2.2, 1000.0).unwrap();
        let a = 2.2 / (4.0 * 0.35 * 0.35);
        let u = instant_utility(&sqrt_type(0.35), &s, a).unwrap();
        assert!((u - 1.571_428_571_428_571_4).abs() < 1e-12, "{u}");
    }

    #[test]
    fn instant_utility_rejects_out_of_range() {
        let s = RewardScheme::new(2.0, 10.0).unwrap();
        assert!(instant_utility(&sqrt_type(1.0), &s, -0.1).is_err());
        assert!(instant_utility(&sqrt_type(1.0), &s, 5.0 + 1e-9).is_err());
        assert!(instant_utility(&sqrt_type(1.0), &s, 5.0).is_ok());
    }

    #[test]
    fn foresighted_limits() {
        let ty = sqrt_type(0.35);
        let s = RewardScheme::new(2.2, 1000.0).unwrap();
        let a = 3.0;
        let u = instant_utility(&ty, &s, a).unwrap();

        let env = RiskEnv::new(0.4, 1.0, 1.0).unwrap();
        assert_eq!(foresighted_utility(&ty, &s, &env, a, 0.0).unwrap(), u);

        let myopic = RiskEnv::new(0.4, 1.0, 1e6).unwrap();
        let big = foresighted_utility(&ty, &s, &myopic, a, 0.7).unwrap();
        assert!((big - u).abs() < 1e-4);

        let patient = RiskEnv::new(0.4, 1.0, 0.0).unwrap();
        let th = 0.3;
        let expected = (1.0 * u - 0.4 * th * a * 5.0) / (1.0 + 0.4 * th * a);
        assert!((foresighted_utility(&ty, &s, &patient, a, th).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn assumption_report_examples() {
        // M = 10 lies between a^AF = 4.49 and the break-even rate 17.96.
        let s = RewardScheme::new(2.2, 22.0).unwrap();
        let r = check_assumptions(&sqrt_type(0.35), &s).unwrap();
        assert!(r.all_pass(), "{r:?}");
        let wide = check_assumptions(&sqrt_type(0.35), &RewardScheme::new(2.2, 220.0).unwrap()).unwrap();
        assert!(!wide.positive_at_cap);

        let log = UeType::new(EvaluationFunction::log_linear(1.0).unwrap(), 3.0, 1.0, 1.0).unwrap();
        let r = check_assumptions(&log, &RewardScheme::new(2.0, 200.0).unwrap()).unwrap();
        assert!(!r.interior_optimum);
        assert!(r.failures().any(|c| c == Clause::InteriorOptimum));
    }

    #[test]
    fn zero_cost_is_rejected() {
        let ty = UeType { eval: EvaluationFunction::sqrt(), cost: 0.0, recovery_cost: 1.0, weight: 1.0 };
        assert!(check_assumptions(&ty, &RewardScheme::new(1.0, 10.0).unwrap()).is_err());
        assert!(UeType::new(EvaluationFunction::sqrt(), 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn population_weights_must_sum_to_one() {
        let a = UeType::new(EvaluationFunction::sqrt(), 1.0, 1.0, 0.3).unwrap();
        let b = UeType { weight: 0.6, ..a };
        assert!(validate_population(&[a, b]).is_err());
        assert!(validate_population(&[a, UeType { weight: 0.7, ..a }]).is_ok());
    }

    #[test]
    fn inverse_marginal_round_trips() {
        for v in [EvaluationFunction::power(1.3, 0.3).unwrap(), EvaluationFunction::log_linear(2.0).unwrap()] {
            let x = v.inverse_marginal(0.5);
            assert!((v.derivative(x) - 0.5).abs() < 1e-12);
        }
    }
}
