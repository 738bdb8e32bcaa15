//! Experiment recipes. Each returns tidy tables; writing them is the
//! caller's business.

use d2dsec_core::abm::{estimate_eta, run, ContractPolicy, SimWorld, Trace};
use d2dsec_core::bestresp::{attack_free_rate, best_response_with};
use d2dsec_core::epidemic::{
    integrate_dynamics, steady_state_fixed_ktype_with, IntegrationOptions, Policy, SteadyState, Trajectory,
};
use d2dsec_core::equilibrium::{critical_rate, solve_ne_with};
use d2dsec_core::model::foresighted_utility;
use d2dsec_core::reward::{
    joint_optimize_with, operator_utility_brute_with, optimal_reward_attack_free_with, optimal_reward_secure_with,
    participation_mixture,
};
use d2dsec_core::solve::linspace;
use d2dsec_core::{Market, RiskEnv, Tolerance};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::scenario::{Experiment, PolicySpec, Scenario, SimSpec, SweepParam};

/// Points in the default reward grid of `reward-opt`.
pub const REWARD_GRID: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parses a numeric column; unparsable cells become NaN.
    pub fn floats(&self, name: &str) -> Vec<f64> {
        let Some(c) = self.column(name) else { return Vec::new() };
        self.rows.iter().map(|r| r[c].parse().unwrap_or(f64::NAN)).collect()
    }
}

/// Shortest representation that round-trips.
pub fn num(x: f64) -> String {
    format!("{x}")
}

fn weights(m: &Market) -> Vec<f64> {
    m.types.iter().map(|t| t.weight).collect()
}

fn status<T>(r: &Result<T, d2dsec_core::Error>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => e.to_string(),
    }
}

pub fn run_experiment(s: &Scenario, exp: Experiment) -> Result<Vec<Table>> {
    match exp {
        Experiment::SolveBr => solve_br(s),
        Experiment::SteadyState => steady_state(s),
        Experiment::Ne => ne(s),
        Experiment::RewardOpt => reward_opt(s),
        Experiment::JointOpt => joint_opt(s),
        Experiment::Simulate => simulate(s),
        Experiment::Sweep => sweep(s),
        Experiment::Compare => compare(s),
    }
}

pub fn solve_br(s: &Scenario) -> Result<Vec<Table>> {
    let m = s.market()?;
    let tol = s.tolerance();
    let grid = s.theta_grid.clone().unwrap_or_else(|| linspace(0.0, 1.0, 101).collect());
    let mut t = Table::new("best_response", &["type", "theta", "a_star", "theta_bar", "residual", "foresighted_utility", "status"]);
    for (k, ty) in m.types.iter().enumerate() {
        for &theta in &grid {
            let br = best_response_with(ty, &m.scheme, &m.env, theta, &tol);
            let row = match &br {
                Ok(b) => {
                    let u = foresighted_utility(ty, &m.scheme, &m.env, b.a_star, theta).map(num).unwrap_or_default();
                    vec![k.to_string(), num(theta), num(b.a_star), num(b.theta_bar), num(b.residual), u, status(&br)]
                }
                Err(_) => vec![k.to_string(), num(theta), String::new(), String::new(), String::new(), String::new(), status(&br)],
            };
            t.rows.push(row);
        }
    }
    Ok(vec![t])
}

fn integration(s: &Scenario) -> IntegrationOptions {
    IntegrationOptions {
        dt: s.dynamics.dt,
        horizon: s.dynamics.horizon,
        record_every: s.dynamics.record_every,
        stop_when_converged: false,
        tol: s.tolerance(),
    }
}

fn trajectory_table(tr: &Trajectory, k: usize) -> Table {
    let mut header = vec!["t".to_string(), "theta".to_string()];
    header.extend((0..k).map(|i| format!("theta_{i}")));
    header.extend((0..k).map(|i| format!("a_{i}")));
    let mut t = Table { name: "trajectory".into(), header, rows: Vec::new() };
    for (st, a) in tr.states.iter().zip(&tr.a_star) {
        let mut row = vec![num(st.t), num(st.theta)];
        row.extend(st.theta_k.iter().map(|&x| num(x)));
        row.extend(a.iter().map(|&x| num(x)));
        t.rows.push(row);
    }
    t
}

/// Analytic long-run state: fixed actions if given, otherwise the
/// strategic rest point (shared by the observed and unobserved regimes).
pub fn analytic_steady_state(s: &Scenario, m: &Market, tol: &Tolerance) -> Result<(SteadyState, Vec<f64>)> {
    if let Some(a) = &s.fixed_actions {
        let ss = steady_state_fixed_ktype_with(a, &weights(m), &m.env, tol)?;
        Ok((ss, a.clone()))
    } else {
        let ne = solve_ne_with(&m.types, &m.scheme, &m.env, tol)?;
        let ss = SteadyState {
            theta_inf: ne.theta_inf,
            tau_c: ne.tau_c,
            persistent: ne.theta_inf > 0.0,
            theta_k: ne.theta_k_inf.clone(),
        };
        Ok((ss, ne.a_ne))
    }
}

fn effective(m: &Market, rates: &[f64], theta_k: &[f64]) -> f64 {
    m.types.iter().zip(rates).zip(theta_k).map(|((t, a), th)| t.weight * (1.0 - th) * a).sum()
}

pub fn steady_state(s: &Scenario) -> Result<Vec<Table>> {
    let m = s.market()?;
    let tol = s.tolerance();
    let k = m.types.len();
    let (ss, rates) = analytic_steady_state(s, &m, &tol)?;
    let w = weights(&m);
    let policy = match &s.fixed_actions {
        Some(a) => Policy::Fixed { actions: a, weights: &w },
        None => Policy::Adaptive { types: &m.types, scheme: &m.scheme },
    };
    let tr = integrate_dynamics(s.dynamics.theta0, &m.env, policy, &integration(s))?;

    let mut header = vec!["mode", "tau", "tau_c", "theta_inf", "persistent", "effective_participation", "ode_theta_end"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    header.extend((0..k).map(|i| format!("theta_{i}")));
    header.extend((0..k).map(|i| format!("a_{i}")));
    let mode = if s.fixed_actions.is_some() { "fixed" } else { "strategic" };
    let mut row = vec![
        mode.to_string(),
        num(m.env.tau()),
        num(ss.tau_c),
        num(ss.theta_inf),
        ss.persistent.to_string(),
        num(effective(&m, &rates, &ss.theta_k)),
        num(tr.last.theta),
    ];
    row.extend(ss.theta_k.iter().map(|&x| num(x)));
    row.extend(rates.iter().map(|&x| num(x)));
    let summary = Table { name: "steady_state".into(), header, rows: vec![row] };
    Ok(vec![summary, trajectory_table(&tr, k)])
}

pub fn ne(s: &Scenario) -> Result<Vec<Table>> {
    let m = s.market()?;
    let ne = solve_ne_with(&m.types, &m.scheme, &m.env, &s.tolerance())?;
    let mut per_type = Table::new("ne_types", &["type", "weight", "a_ne", "a_af", "theta_k"]);
    for (k, ty) in m.types.iter().enumerate() {
        per_type.rows.push(vec![
            k.to_string(),
            num(ty.weight),
            num(ne.a_ne[k]),
            num(attack_free_rate(ty, &m.scheme)),
            num(ne.theta_k_inf[k]),
        ]);
    }
    let eff = ne.effective_participation(&m.types);
    let mut summary = Table::new(
        "ne",
        &["tau", "tau_c", "theta_inf", "residual", "mean_participation", "effective_participation", "operator_utility"],
    );
    summary.rows.push(vec![
        num(m.env.tau()),
        num(ne.tau_c),
        num(ne.theta_inf),
        num(ne.residual),
        num(ne.mean_participation(&m.types)),
        num(eff),
        num((m.operator.b0 - m.scheme.r0) * eff),
    ]);
    Ok(vec![summary, per_type])
}

fn reward_grid(s: &Scenario, b0: f64) -> Vec<f64> {
    s.sweep
        .axes
        .iter()
        .find(|a| a.param == SweepParam::R0)
        .map(|a| a.points())
        .unwrap_or_else(|| (1..=REWARD_GRID).map(|i| b0 * i as f64 / (REWARD_GRID + 1) as f64).collect())
}

pub fn reward_opt(s: &Scenario) -> Result<Vec<Table>> {
    let m = s.market()?;
    let tol = s.tolerance();
    let r_max = m.scheme.r_max;
    let af = optimal_reward_attack_free_with(&m.types, r_max, &m.operator, &tol)?;
    let sec = optimal_reward_secure_with(&m.types, r_max, &m.operator, &m.env, &tol)?;
    let mut summary = Table::new("reward_opt", &["method", "r0_star", "operator_utility", "binding", "r0_bar", "a_af_mix"]);
    for (name, sol) in [("attack_free", af), ("secure", sec)] {
        summary.rows.push(vec![
            name.into(),
            num(sol.r0_star),
            num(sol.operator_utility),
            sol.binding.to_string(),
            sol.r0_bar.map(num).unwrap_or_default(),
            num(sol.a_af_mix),
        ]);
    }
    let grid = reward_grid(s, m.operator.b0);
    let mut curve = Table::new(
        "reward_curve",
        &[
            "r0",
            "a_af_mix",
            "theta_inf",
            "mean_participation",
            "effective_participation",
            "effective_identity",
            "operator_utility",
            "status",
        ],
    );
    let rows: Vec<Vec<String>> = grid
        .par_iter()
        .map(|&r0| {
            let mix = participation_mixture(&m.types, r0, r_max);
            let out = operator_utility_brute_with(&m.types, r_max, &m.operator, &m.env, r0, &tol);
            match &out {
                Ok(o) => {
                    let mean: f64 = m.types.iter().zip(&o.a_star).map(|(t, a)| t.weight * a).sum();
                    vec![
                        num(r0),
                        num(mix),
                        num(o.theta_inf),
                        num(mean),
                        num(o.effective_participation),
                        num(o.effective_participation_aggregate),
                        num(o.operator_utility),
                        status(&out),
                    ]
                }
                Err(_) => {
                    let mut r = vec![num(r0), num(mix)];
                    r.extend(std::iter::repeat(String::new()).take(5));
                    r.push(status(&out));
                    r
                }
            }
        })
        .collect();
    curve.rows = rows;
    Ok(vec![summary, curve])
}

pub fn joint_opt(s: &Scenario) -> Result<Vec<Table>> {
    let m = s.market()?;
    let tech = s.tech()?;
    let sol = joint_optimize_with(&m.types, m.scheme.r_max, &m.operator, &tech, &s.tolerance())?;
    let mut t = Table::new("joint_opt", &["r0_star", "tau_star", "utility", "tech_cost", "a_af_mix"]);
    t.rows.push(vec![
        num(sol.r0_star),
        num(sol.tau_star),
        num(sol.utility),
        num(tech.eval(sol.tau_star)),
        num(participation_mixture(&m.types, sol.r0_star, m.scheme.r_max)),
    ]);
    Ok(vec![t])
}

/// One simulator replicate.
#[derive(Clone, Debug)]
pub struct SimRun {
    pub seed: u64,
    pub eta: f64,
    pub clamped: bool,
    pub trace: Trace,
}

pub fn contract_policy(s: &Scenario, spec: &SimSpec, m: &Market) -> Result<ContractPolicy> {
    Ok(match spec.policy {
        PolicySpec::Observed => ContractPolicy::Observed,
        PolicySpec::Fixed => ContractPolicy::Fixed(
            s.fixed_actions.clone().ok_or_else(|| HarnessError::invalid("fixed_actions", "required by sim.policy"))?,
        ),
        PolicySpec::Equilibrium => {
            ContractPolicy::Fixed(solve_ne_with(&m.types, &m.scheme, &m.env, &s.tolerance())?.a_ne)
        }
    })
}

/// Runs `spec.replicates` seeds starting at `base_seed`, in parallel, in
/// seed order.
pub fn simulate_market(m: &Market, spec: &SimSpec, policy: &ContractPolicy, base_seed: u64) -> Result<Vec<SimRun>> {
    (0..u64::from(spec.replicates))
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let cfg = spec.config(seed);
            let eta = match spec.eta {
                Some(e) => e,
                None => {
                    let est = estimate_eta(&cfg, spec.warmup, spec.eta_slots)?;
                    if let Some(w) = est.warning {
                        return Err(HarnessError::invalid("sim", w));
                    }
                    est.eta
                }
            };
            let mut world = SimWorld::new(m, cfg, policy.clone(), eta)?;
            let trace = run(&mut world, spec.horizon_slots, spec.sample_every);
            Ok(SimRun { seed, eta, clamped: world.clamped(), trace })
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn simulate(s: &Scenario) -> Result<Vec<Table>> {
    let m = s.market()?;
    let spec = s.sim()?;
    let policy = contract_policy(s, spec, &m)?;
    let runs = simulate_market(&m, spec, &policy, s.seed)?;
    let mut trace = Table::new(
        "trace",
        &["seed", "slot", "theta_hat", "mean_participation", "effective_participation", "operator_utility_rate"],
    );
    let mut summary = Table::new(
        "simulate",
        &[
            "seed",
            "eta",
            "clamped",
            "terminal_theta",
            "terminal_effective",
            "terminal_mean_participation",
            "operator_utility",
            "served",
            "overflow",
        ],
    );
    let f = spec.terminal_fraction;
    for r in &runs {
        for row in &r.trace.rows {
            trace.rows.push(vec![
                r.seed.to_string(),
                row.slot.to_string(),
                num(row.theta_hat),
                num(row.mean_participation),
                num(row.effective_participation),
                num(row.operator_utility_rate),
            ]);
        }
        summary.rows.push(vec![
            r.seed.to_string(),
            num(r.eta),
            r.clamped.to_string(),
            num(r.trace.terminal_theta(f)),
            num(r.trace.terminal_effective(f)),
            num(r.trace.terminal_mean_participation(f)),
            num(r.trace.operator_utility),
            r.trace.served.to_string(),
            r.trace.overflow.to_string(),
        ]);
    }
    Ok(vec![summary, trace])
}

fn apply_param(m: &mut Market, p: SweepParam, v: f64) -> Result<(), d2dsec_core::Error> {
    match p {
        SweepParam::R0 => m.scheme.r0 = v,
        SweepParam::Tau => m.env.beta = v * m.env.delta,
        SweepParam::Beta => m.env.beta = v,
        SweepParam::Delta => m.env.delta = v,
        SweepParam::Rho => m.env.rho = v,
        SweepParam::B0 => m.operator.b0 = v,
        SweepParam::RMax => m.scheme.r_max = v,
    }
    m.validate()
}

/// Cartesian product of the sweep axes, first axis outermost. No axes
/// gives a single empty point.
pub fn sweep_points(s: &Scenario) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in &s.sweep.axes {
        let vals = axis.points();
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

struct PointResult {
    analytic: Result<(f64, f64, f64, f64, f64), d2dsec_core::Error>,
    abm: Option<Result<(f64, f64, f64)>>,
}

fn sweep_point(s: &Scenario, base: &Market, point: &[f64], index: usize) -> PointResult {
    let tol = s.tolerance();
    let mut m = base.clone();
    let applied = s
        .sweep
        .axes
        .iter()
        .zip(point)
        .try_for_each(|(a, &v)| apply_param(&mut m, a.param, v));
    let analytic = applied.and_then(|_| {
        let ne = solve_ne_with(&m.types, &m.scheme, &m.env, &tol)?;
        let eff = ne.effective_participation(&m.types);
        Ok((
            ne.theta_inf,
            ne.mean_participation(&m.types),
            eff,
            (m.operator.b0 - m.scheme.r0) * eff,
            critical_rate(&m.types, &m.scheme),
        ))
    });
    let abm = match (&s.sim, s.sweep.simulate, &analytic) {
        (Some(spec), true, Ok(_)) => Some((|| {
            let policy = contract_policy(s, spec, &m)?;
            let runs = simulate_market(&m, spec, &policy, s.seed ^ index as u64)?;
            let f = spec.terminal_fraction;
            let theta = mean(runs.iter().map(|r| r.trace.terminal_theta(f)));
            let eff = mean(runs.iter().map(|r| r.trace.terminal_effective(f)));
            Ok((theta, eff, (m.operator.b0 - m.scheme.r0) * eff))
        })()),
        _ => None,
    };
    PointResult { analytic, abm }
}

pub fn sweep(s: &Scenario) -> Result<Vec<Table>> {
    let base = s.market()?;
    let points = sweep_points(s);
    let mut header: Vec<String> = s.sweep.axes.iter().map(|a| a.param.name().to_string()).collect();
    for h in ["theta_inf", "mean_participation", "effective_participation", "operator_utility", "tau_c"] {
        header.push(h.into());
    }
    if s.sweep.simulate {
        for h in ["abm_theta", "abm_effective", "abm_operator_utility"] {
            header.push(h.into());
        }
    }
    header.push("status".into());
    let results: Vec<PointResult> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| sweep_point(s, &base, p, i))
        .collect();
    let mut t = Table { name: "sweep".into(), header, rows: Vec::with_capacity(points.len()) };
    for (p, r) in points.iter().zip(results) {
        let mut row: Vec<String> = p.iter().map(|&v| num(v)).collect();
        let mut state = String::from("ok");
        match &r.analytic {
            Ok((a, b, c, d, e)) => row.extend([a, b, c, d, e].map(|&x| num(x))),
            Err(e) => {
                row.extend(std::iter::repeat(String::new()).take(5));
                state = e.to_string();
            }
        }
        if s.sweep.simulate {
            match r.abm {
                Some(Ok((a, b, c))) => row.extend([a, b, c].map(num)),
                Some(Err(e)) => {
                    row.extend(std::iter::repeat(String::new()).take(3));
                    state = format!("abm: {e}");
                }
                None => row.extend(std::iter::repeat(String::new()).take(3)),
            }
        }
        row.push(state);
        t.rows.push(row);
    }
    Ok(vec![t])
}

/// Mean-field versus simulator agreement.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub theta_analytic: f64,
    pub theta_sim: f64,
    pub effective_analytic: f64,
    pub effective_sim: f64,
    pub persistent_analytic: bool,
    pub persistent_sim: bool,
}

pub fn compare_runs(s: &Scenario) -> Result<(Comparison, Vec<SimRun>, Market)> {
    let m = s.market()?;
    let spec = s.sim()?;
    let tol = s.tolerance();
    let (ss, rates) = if spec.policy == PolicySpec::Fixed {
        let a = s.fixed_actions.clone().ok_or_else(|| HarnessError::invalid("fixed_actions", "required by sim.policy"))?;
        (steady_state_fixed_ktype_with(&a, &weights(&m), &m.env, &tol)?, a)
    } else {
        let ne = solve_ne_with(&m.types, &m.scheme, &m.env, &tol)?;
        let ss = SteadyState {
            theta_inf: ne.theta_inf,
            tau_c: ne.tau_c,
            persistent: ne.theta_inf > 0.0,
            theta_k: ne.theta_k_inf.clone(),
        };
        (ss, ne.a_ne)
    };
    let policy = contract_policy(s, spec, &m)?;
    let runs = simulate_market(&m, spec, &policy, s.seed)?;
    let f = spec.terminal_fraction;
    let theta_sim = mean(runs.iter().map(|r| r.trace.terminal_theta(f)));
    let c = Comparison {
        theta_analytic: ss.theta_inf,
        theta_sim,
        effective_analytic: effective(&m, &rates, &ss.theta_k),
        effective_sim: mean(runs.iter().map(|r| r.trace.terminal_effective(f))),
        persistent_analytic: ss.persistent,
        persistent_sim: theta_sim >= s.compare.theta_tol,
    };
    Ok((c, runs, m))
}

pub fn compare(s: &Scenario) -> Result<Vec<Table>> {
    let (c, runs, m) = compare_runs(s)?;
    let mut report = Table::new("compare", &["metric", "analytic", "simulated", "gap", "tolerance", "pass"]);
    let theta_gap = (c.theta_sim - c.theta_analytic).abs();
    report.rows.push(vec![
        "theta_inf".into(),
        num(c.theta_analytic),
        num(c.theta_sim),
        num(theta_gap),
        num(s.compare.theta_tol),
        (theta_gap <= s.compare.theta_tol).to_string(),
    ]);
    let eff_gap = (c.effective_sim - c.effective_analytic).abs() / c.effective_analytic.abs().max(f64::MIN_POSITIVE);
    report.rows.push(vec![
        "effective_participation".into(),
        num(c.effective_analytic),
        num(c.effective_sim),
        num(eff_gap),
        num(s.compare.effective_rel_tol),
        (eff_gap <= s.compare.effective_rel_tol).to_string(),
    ]);
    report.rows.push(vec![
        "persistent".into(),
        c.persistent_analytic.to_string(),
        c.persistent_sim.to_string(),
        String::new(),
        String::new(),
        (c.persistent_analytic == c.persistent_sim).to_string(),
    ]);

    let a_af = participation_mixture(&m.types, m.scheme.r0, m.scheme.r_max);
    let a_c = critical_participation(&m.env);
    let mut traj = Table::new("participation", &["slot", "theta_hat", "mean_participation", "a_af", "a_c"]);
    if let Some(first) = runs.first() {
        for (i, row) in first.trace.rows.iter().enumerate() {
            let theta = mean(runs.iter().filter_map(|r| r.trace.rows.get(i)).map(|r| r.theta_hat));
            let part = mean(runs.iter().filter_map(|r| r.trace.rows.get(i)).map(|r| r.mean_participation));
            traj.rows.push(vec![row.slot.to_string(), num(theta), num(part), num(a_af), num(a_c)]);
        }
    }
    Ok(vec![report, traj])
}

/// a^c = 1/τ: the mean participation at which the infection is critical.
pub fn critical_participation(env: &RiskEnv) -> f64 {
    1.0 / env.tau()
}
