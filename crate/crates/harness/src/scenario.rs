//! Scenario files: JSON, versioned, validated with field paths.

use std::path::Path;

use d2dsec_core::abm::{SimConfig, TypeAssignment};
use d2dsec_core::reward::TechCost;
use d2dsec_core::solve::linspace;
use d2dsec_core::{EvaluationFunction, Market, OperatorParams, RewardScheme, RiskEnv, Tolerance, UeType};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SolveBr,
    SteadyState,
    Ne,
    RewardOpt,
    JointOpt,
    Simulate,
    Sweep,
    Compare,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SolveBr => "solve-br",
            Experiment::SteadyState => "steady-state",
            Experiment::Ne => "ne",
            Experiment::RewardOpt => "reward-opt",
            Experiment::JointOpt => "joint-opt",
            Experiment::Simulate => "simulate",
            Experiment::Sweep => "sweep",
            Experiment::Compare => "compare",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalSpec {
    Power { scale: f64, exponent: f64 },
    LogLinear { scale: f64 },
    Sqrt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeSpec {
    pub eval: EvalSpec,
    pub cost: f64,
    pub recovery_cost: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub r0: f64,
    pub r_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub beta: f64,
    pub delta: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub b0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSpec {
    pub theta0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub record_every: usize,
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        DynamicsSpec { theta0: 0.2, dt: 1e-3, horizon: 50.0, record_every: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    /// Best response to the current infected fraction.
    Observed,
    /// The scenario's `fixed_actions`.
    Fixed,
    /// Hold the Nash-equilibrium rates.
    Equilibrium,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentSpec {
    Proportional,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSpec {
    pub n_agents: usize,
    pub area: f64,
    pub slots_per_unit_time: u32,
    pub v_min: f64,
    pub v_max: f64,
    pub m_max: u32,
    pub p: f64,
    pub w_max: u32,
    pub d: f64,
    pub type_assignment: AssignmentSpec,
    pub initial_infected: f64,
    pub compromised_requests: bool,
    pub policy: PolicySpec,
    pub horizon_slots: u64,
    pub sample_every: u64,
    /// Independent runs; run i uses seed + i.
    pub replicates: u32,
    pub warmup: u64,
    pub eta_slots: u64,
    /// Skip estimation and use this offer intensity.
    pub eta: Option<f64>,
    /// Share of samples averaged for terminal statistics.
    pub terminal_fraction: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        let c = SimConfig::default();
        SimSpec {
            n_agents: c.n_agents,
            area: c.area,
            slots_per_unit_time: c.slots_per_unit_time,
            v_min: c.v_min,
            v_max: c.v_max,
            m_max: c.m_max,
            p: c.p,
            w_max: c.w_max,
            d: c.d,
            type_assignment: AssignmentSpec::Proportional,
            initial_infected: c.initial_infected,
            compromised_requests: c.compromised_requests,
            policy: PolicySpec::Observed,
            horizon_slots: 50_000,
            sample_every: 100,
            replicates: 1,
            warmup: 1_000,
            eta_slots: 10_000,
            eta: None,
            terminal_fraction: 0.1,
        }
    }
}

impl SimSpec {
    pub fn config(&self, seed: u64) -> SimConfig {
        SimConfig {
            n_agents: self.n_agents,
            area: self.area,
            slots_per_unit_time: self.slots_per_unit_time,
            v_min: self.v_min,
            v_max: self.v_max,
            m_max: self.m_max,
            p: self.p,
            w_max: self.w_max,
            d: self.d,
            seed,
            type_assignment: match self.type_assignment {
                AssignmentSpec::Proportional => TypeAssignment::Proportional,
                AssignmentSpec::Random => TypeAssignment::Random,
            },
            initial_infected: self.initial_infected,
            compromised_requests: self.compromised_requests,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    R0,
    Tau,
    Beta,
    Delta,
    Rho,
    B0,
    RMax,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::R0 => "r0",
            SweepParam::Tau => "tau",
            SweepParam::Beta => "beta",
            SweepParam::Delta => "delta",
            SweepParam::Rho => "rho",
            SweepParam::B0 => "b0",
            SweepParam::RMax => "r_max",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: SweepParam,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linspace: Option<Linspace>,
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        match (&self.values, &self.linspace) {
            (Some(v), _) => v.clone(),
            (None, Some(l)) => linspace(l.start, l.stop, l.n).collect(),
            (None, None) => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    /// Also run the simulator at every point.
    pub simulate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechCostSpec {
    pub j0: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSpec {
    pub residual: f64,
    pub argument: f64,
    pub max_iter: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        let t = Tolerance::default();
        ToleranceSpec { residual: t.residual, argument: t.argument, max_iter: t.max_iter }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSpec {
    /// Absolute tolerance on the compromise level.
    pub theta_tol: f64,
    /// Relative tolerance on effective participation.
    pub effective_rel_tol: f64,
}

impl Default for CompareSpec {
    fn default() -> Self {
        CompareSpec { theta_tol: 0.05, effective_rel_tol: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub types: Vec<TypeSpec>,
    pub scheme: SchemeSpec,
    pub env: EnvSpec,
    pub operator: OperatorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_actions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub dynamics: DynamicsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tech_cost: Option<TechCostSpec>,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub compare: CompareSpec,
    #[serde(default)]
    pub seed: u64,
}

/// Command-line overrides applied after parsing.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub tol: Option<f64>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Parse {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(dt) = o.dt {
            self.dynamics.dt = dt;
        }
        if let Some(t) = o.tol {
            self.tolerances.residual = t;
        }
        self.validate()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance {
            residual: self.tolerances.residual,
            argument: self.tolerances.argument,
            max_iter: self.tolerances.max_iter,
        }
    }

    pub fn tech(&self) -> Result<TechCost> {
        let t = self
            .tech_cost
            .as_ref()
            .ok_or_else(|| HarnessError::invalid("tech_cost", "required for joint-opt"))?;
        TechCost::inverse_power(t.j0, t.p).map_err(|e| HarnessError::invalid("tech_cost", e.to_string()))
    }

    pub fn sim(&self) -> Result<&SimSpec> {
        self.sim.as_ref().ok_or_else(|| HarnessError::invalid("sim", "required for this experiment"))
    }

    pub fn market(&self) -> Result<Market> {
        let mut types = Vec::with_capacity(self.types.len());
        for (k, t) in self.types.iter().enumerate() {
            let field = |f: &str| format!("types[{k}].{f}");
            let eval = match t.eval {
                EvalSpec::Power { scale, exponent } => EvaluationFunction::power(scale, exponent),
                EvalSpec::LogLinear { scale } => EvaluationFunction::log_linear(scale),
                EvalSpec::Sqrt => Ok(EvaluationFunction::sqrt()),
            }
            .map_err(|e| HarnessError::invalid(field("eval"), e.to_string()))?;
            let ty = UeType::new(eval, t.cost, t.recovery_cost, t.weight)
                .map_err(|e| HarnessError::invalid(format!("types[{k}]"), e.to_string()))?;
            types.push(ty);
        }
        d2dsec_core::model::validate_population(&types).map_err(|e| HarnessError::invalid("types", e.to_string()))?;
        let scheme = RewardScheme::new(self.scheme.r0, self.scheme.r_max)
            .map_err(|e| HarnessError::invalid("scheme", e.to_string()))?;
        let env = RiskEnv::new(self.env.beta, self.env.delta, self.env.rho)
            .map_err(|e| HarnessError::invalid("env", e.to_string()))?;
        let operator = OperatorParams::new(self.operator.b0).map_err(|e| HarnessError::invalid("operator", e.to_string()))?;
        Ok(Market { types, scheme, env, operator })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.types.is_empty() {
            return Err(HarnessError::invalid("types", "at least one type is required"));
        }
        self.market()?;
        if let Some(a) = &self.fixed_actions {
            if a.len() != self.types.len() {
                return Err(HarnessError::invalid("fixed_actions", "need one rate per type"));
            }
            if let Some(i) = a.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(HarnessError::invalid(format!("fixed_actions[{i}]"), "must be finite and >= 0"));
            }
        }
        if let Some(g) = &self.theta_grid {
            if let Some(i) = g.iter().position(|x| !(0.0..=1.0).contains(x)) {
                return Err(HarnessError::invalid(format!("theta_grid[{i}]"), "must lie in [0, 1]"));
            }
        }
        let d = &self.dynamics;
        if !(0.0..=1.0).contains(&d.theta0) {
            return Err(HarnessError::invalid("dynamics.theta0", "must lie in [0, 1]"));
        }
        if !(d.dt > 0.0 && d.dt.is_finite()) {
            return Err(HarnessError::invalid("dynamics.dt", "must be finite and > 0"));
        }
        if !(d.horizon > 0.0 && d.horizon.is_finite()) {
            return Err(HarnessError::invalid("dynamics.horizon", "must be finite and > 0"));
        }
        if d.record_every == 0 {
            return Err(HarnessError::invalid("dynamics.record_every", "must be >= 1"));
        }
        let t = &self.tolerances;
        if !(t.residual > 0.0 && t.argument > 0.0) || t.max_iter == 0 {
            return Err(HarnessError::invalid("tolerances", "residual, argument and max_iter must be > 0"));
        }
        if let Some(s) = &self.sim {
            s.config(self.seed).validate().map_err(|e| HarnessError::invalid("sim", e.to_string()))?;
            if s.replicates == 0 || s.sample_every == 0 || s.horizon_slots == 0 {
                return Err(HarnessError::invalid("sim", "replicates, sample_every and horizon_slots must be >= 1"));
            }
            if !(s.terminal_fraction > 0.0 && s.terminal_fraction <= 1.0) {
                return Err(HarnessError::invalid("sim.terminal_fraction", "must lie in (0, 1]"));
            }
            if let Some(eta) = s.eta {
                if !(eta > 0.0 && eta.is_finite()) {
                    return Err(HarnessError::invalid("sim.eta", "must be finite and > 0"));
                }
            }
            if s.policy == PolicySpec::Fixed && self.fixed_actions.is_none() {
                return Err(HarnessError::invalid("sim.policy", "`fixed` needs fixed_actions"));
            }
        }
        for (i, axis) in self.sweep.axes.iter().enumerate() {
            let field = format!("sweep.axes[{i}]");
            if axis.values.is_some() == axis.linspace.is_some() {
                return Err(HarnessError::invalid(field, "give exactly one of `values` or `linspace`"));
            }
            if let Some(l) = &axis.linspace {
                if l.n == 0 || !l.start.is_finite() || !l.stop.is_finite() || l.stop < l.start {
                    return Err(HarnessError::invalid(format!("{field}.linspace"), "need n >= 1 and finite start <= stop"));
                }
            }
            let pts = axis.points();
            if pts.is_empty() {
                return Err(HarnessError::invalid(field, "empty grid"));
            }
            if pts.iter().any(|x| !x.is_finite()) {
                return Err(HarnessError::invalid(format!("{field}.values"), "grid values must be finite"));
            }
            if pts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(HarnessError::invalid(format!("{field}.values"), "grid must be strictly increasing"));
            }
            if self.sweep.axes[..i].iter().any(|a| a.param == axis.param) {
                return Err(HarnessError::invalid(format!("{field}.param"), "parameter swept twice"));
            }
        }
        if self.sweep.simulate && self.sim.is_none() {
            return Err(HarnessError::invalid("sweep.simulate", "needs a `sim` section"));
        }
        if let Some(t) = &self.tech_cost {
            TechCost::inverse_power(t.j0, t.p).map_err(|e| HarnessError::invalid("tech_cost", e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "name": "t",
        "types": [{"eval": {"family": "sqrt"}, "cost": 0.35, "recovery_cost": 5, "weight": 1}],
        "scheme": {"r0": 2.2, "r_max": 1000},
        "env": {"beta": 0.4, "delta": 1, "rho": 1},
        "operator": {"b0": 6}
    }"#;

    #[test]
    fn minimal_parses_with_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.dynamics, DynamicsSpec::default());
        assert!(s.sweep.axes.is_empty());
        assert_eq!(s.market().unwrap().types.len(), 1);
    }

    #[test]
    fn parse_errors_carry_field_path() {
        let bad = MINIMAL.replace(r#""cost": 0.35"#, r#""cost": "cheap""#);
        match Scenario::from_json(&bad) {
            Err(HarnessError::Parse { field, .. }) => assert_eq!(field, "types[0].cost"),
            other => panic!("{other:?}"),
        }
        let typo = MINIMAL.replace(r#""rho": 1"#, r#""rho": 1, "gamma": 2"#);
        match Scenario::from_json(&typo) {
            Err(HarnessError::Parse { field, .. }) => assert!(field.starts_with("env"), "{field}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_carry_field_path() {
        let bad = MINIMAL.replace(r#""cost": 0.35"#, r#""cost": -1"#);
        match Scenario::from_json(&bad) {
            Err(HarnessError::Invalid { field, .. }) => assert_eq!(field, "types[0]"),
            other => panic!("{other:?}"),
        }
        let unsorted = MINIMAL.replace(
            r#""operator": {"b0": 6}"#,
            r#""operator": {"b0": 6}, "sweep": {"axes": [{"param": "r0", "values": [2, 1]}]}"#,
        );
        match Scenario::from_json(&unsorted) {
            Err(HarnessError::Invalid { field, .. }) => assert_eq!(field, "sweep.axes[0].values"),
            other => panic!("{other:?}"),
        }
        let unknown = MINIMAL.replace(
            r#""operator": {"b0": 6}"#,
            r#""operator": {"b0": 6}, "sweep": {"axes": [{"param": "gamma", "values": [1]}]}"#,
        );
        assert!(matches!(Scenario::from_json(&unknown), Err(HarnessError::Parse { .. })));
    }

    #[test]
    fn hash_tracks_content() {
        let a = Scenario::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.apply(&Overrides { seed: Some(7), ..Overrides::default() }).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
