use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{rate_to_slot_probability, SimConfig, TypeAssignment, Walker};
use crate::bestresp::{attack_free_rate, best_response};
use crate::error::{Error, Result};
use crate::math::{ceil, floor, round};
use crate::model::{validate_population, Market, RiskEnv, UeType};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Health {
    Susceptible,
    Infected,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Agent {
    pub walker: Walker,
    pub type_index: usize,
    pub health: Health,
    /// Contracted participation rate, tasks per unit time.
    pub contract: f64,
    pub utility: f64,
    pub served: u64,
}

/// How contracts are revised after every slot.
#[derive(Clone, Debug, PartialEq)]
pub enum ContractPolicy {
    /// Constant per-type rates.
    Fixed(Vec<f64>),
    /// Best response to the exact current infected fraction.
    Observed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SlotStats {
    pub requests: u32,
    pub tasks: u32,
    pub served: u32,
    /// Tasks that found no willing in-range server and went to the edge.
    pub overflow: u32,
    pub infections: u32,
    pub recoveries: u32,
}

#[derive(Clone, Debug)]
pub struct SimWorld {
    config: SimConfig,
    types: Vec<UeType>,
    env: RiskEnv,
    r0: f64,
    margin: f64,
    policy: ContractPolicy,
    eta: f64,
    agents: Vec<Agent>,
    rng: ChaCha8Rng,
    slot: u64,
    infected: usize,
    /// rates[k][i]: type-k contract when i agents are infected (one entry
    /// per type for fixed policies).
    rates: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
    clamped: bool,
    requester: Vec<bool>,
    was_infected: Vec<bool>,
    candidates: Vec<usize>,
}

fn assign_types<R: Rng>(rng: &mut R, cfg: &SimConfig, types: &[UeType]) -> Vec<usize> {
    let n = cfg.n_agents;
    match cfg.type_assignment {
        TypeAssignment::Proportional => {
            let exact: Vec<f64> = types.iter().map(|t| t.weight * n as f64).collect();
            let mut counts: Vec<usize> = exact.iter().map(|&x| floor(x) as usize).collect();
            let mut order: Vec<usize> = (0..types.len()).collect();
            order.sort_by(|&a, &b| {
                let ra = exact[a] - floor(exact[a]);
                let rb = exact[b] - floor(exact[b]);
                rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
            });
            let mut left = n.saturating_sub(counts.iter().sum());
            for &k in order.iter().cycle() {
                if left == 0 {
                    break;
                }
                counts[k] += 1;
                left -= 1;
            }
            let mut out: Vec<usize> = counts.iter().enumerate().flat_map(|(k, &c)| core::iter::repeat(k).take(c)).collect();
            out.shuffle(rng);
            out
        }
        TypeAssignment::Random => (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (k, t) in types.iter().enumerate() {
                    acc += t.weight;
                    if u < acc {
                        return k;
                    }
                }
                types.len() - 1
            })
            .collect(),
    }
}

impl SimWorld {
    /// Builds the initial world. `eta` is the offer intensity used to turn
    /// contracted rates into per-slot acceptance probabilities.
    pub fn new(market: &Market, config: SimConfig, policy: ContractPolicy, eta: f64) -> Result<Self> {
        config.validate()?;
        validate_population(&market.types)?;
        market.scheme.validate()?;
        market.env.validate()?;
        let per_slot = market.env.delta / config.slots();
        if per_slot > 1.0 {
            return Err(Error::invalid("delta", market.env.delta, "recovery probability per slot above 1"));
        }
        let n = config.n_agents;
        let k = market.types.len();
        let rates: Vec<Vec<f64>> = match &policy {
            ContractPolicy::Fixed(a) => {
                if a.len() != k {
                    return Err(Error::invalid("actions", a.len() as f64, "need one rate per type"));
                }
                a.iter().map(|&x| alloc::vec![x]).collect()
            }
            ContractPolicy::Observed => {
                let mut table = Vec::with_capacity(k);
                for (ti, ty) in market.types.iter().enumerate() {
                    let mut row = Vec::with_capacity(n + 1);
                    row.push(attack_free_rate(ty, &market.scheme));
                    for i in 1..=n {
                        let theta = i as f64 / n as f64;
                        let br = best_response(ty, &market.scheme, &market.env, theta).map_err(|e| e.in_type(ti))?;
                        row.push(br.a_star);
                    }
                    table.push(row);
                }
                table
            }
        };
        let mut clamped = false;
        let mut probs = Vec::with_capacity(k);
        for (ti, row) in rates.iter().enumerate() {
            let mut prow = Vec::with_capacity(row.len());
            for &a in row {
                let sp = rate_to_slot_probability(a, &config, eta).map_err(|e| e.in_type(ti))?;
                clamped |= sp.clamped;
                prow.push(sp.prob);
            }
            probs.push(prow);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let type_of = assign_types(&mut rng, &config, &market.types);
        let mut agents: Vec<Agent> = type_of
            .into_iter()
            .map(|t| Agent {
                walker: Walker::spawn(&mut rng, &config),
                type_index: t,
                health: Health::Susceptible,
                contract: 0.0,
                utility: 0.0,
                served: 0,
            })
            .collect();
        let infected = round(config.initial_infected * n as f64) as usize;
        for i in index::sample(&mut rng, n, infected.min(n)) {
            agents[i].health = Health::Infected;
        }

        let mut world = SimWorld {
            types: market.types.clone(),
            env: market.env,
            r0: market.scheme.r0,
            margin: market.operator.b0 - market.scheme.r0,
            policy,
            eta,
            agents,
            rng,
            slot: 0,
            infected: infected.min(n),
            rates,
            probs,
            clamped,
            requester: alloc::vec![false; n],
            was_infected: alloc::vec![false; n],
            candidates: Vec::with_capacity(n),
            config,
        };
        world.revise();
        Ok(world)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn infected(&self) -> usize {
        self.infected
    }

    pub fn susceptible(&self) -> usize {
        self.agents.len() - self.infected
    }

    pub fn theta_hat(&self) -> f64 {
        self.infected as f64 / self.agents.len() as f64
    }

    /// Some contracted rate needed an acceptance probability above 1.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    /// Mean contracted rate over all agents.
    pub fn mean_participation(&self) -> f64 {
        self.agents.iter().map(|a| a.contract).sum::<f64>() / self.agents.len() as f64
    }

    fn column(&self) -> usize {
        match self.policy {
            ContractPolicy::Fixed(_) => 0,
            ContractPolicy::Observed => self.infected,
        }
    }

    fn revise(&mut self) {
        let col = self.column();
        for a in self.agents.iter_mut() {
            a.contract = self.rates[a.type_index][col];
        }
    }

    /// Advances one slot: move, draw roles, match and serve, infect,
    /// recover, revise contracts.
    pub fn step(&mut self) -> SlotStats {
        let cfg = &self.config;
        let n = self.agents.len();
        let slots = cfg.slots();
        let mut stats = SlotStats::default();
        let rng = &mut self.rng;

        for a in self.agents.iter_mut() {
            a.walker.advance(rng, cfg);
        }

        for (i, a) in self.agents.iter().enumerate() {
            let infected = a.health == Health::Infected;
            self.was_infected[i] = infected;
            let eligible = cfg.compromised_requests || !infected;
            self.requester[i] = eligible && rng.gen::<f64>() < cfg.p;
        }

        let range_sq = cfg.d * cfg.d;
        let col = match self.policy {
            ContractPolicy::Fixed(_) => 0,
            ContractPolicy::Observed => self.infected,
        };
        for i in 0..n {
            if !self.requester[i] {
                continue;
            }
            stats.requests += 1;
            let tasks = rng.gen_range(1..=cfg.w_max);
            stats.tasks += tasks;
            let me = self.agents[i].walker;
            let requester = &self.requester;
            let agents = &self.agents;
            self.candidates.clear();
            self.candidates
                .extend((0..n).filter(|&j| !requester[j] && agents[j].walker.within(&me, range_sq)));
            let risky = self.was_infected[i];
            for _ in 0..tasks {
                if self.candidates.is_empty() {
                    stats.overflow += 1;
                    continue;
                }
                let j = self.candidates[rng.gen_range(0..self.candidates.len())];
                let server = &mut self.agents[j];
                if server.health == Health::Infected {
                    stats.overflow += 1;
                    continue;
                }
                if rng.gen::<f64>() >= self.probs[server.type_index][col] {
                    stats.overflow += 1;
                    continue;
                }
                server.served += 1;
                stats.served += 1;
                if risky && rng.gen::<f64>() < self.env.beta {
                    server.health = Health::Infected;
                    self.infected += 1;
                    stats.infections += 1;
                }
            }
        }

        let recover = self.env.delta / slots;
        for (i, a) in self.agents.iter_mut().enumerate() {
            if self.was_infected[i] {
                a.utility -= self.types[a.type_index].recovery_cost / slots;
                if rng.gen::<f64>() < recover {
                    a.health = Health::Susceptible;
                    self.infected -= 1;
                    stats.recoveries += 1;
                }
            } else {
                a.utility += self.types[a.type_index].utility(self.r0, a.contract) / slots;
            }
        }

        self.slot += 1;
        self.revise();
        stats
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub slot: u64,
    pub theta_hat: f64,
    pub mean_participation: f64,
    /// Served tasks per agent per unit time over the sampling window.
    pub effective_participation: f64,
    /// (b0 − r0) · effective participation.
    pub operator_utility_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    /// Cumulative operator utility per agent.
    pub operator_utility: f64,
    pub served: u64,
    pub overflow: u64,
}

impl Trace {
    fn tail(&self, fraction: f64) -> &[TraceRow] {
        let len = self.rows.len();
        let take = (ceil(len as f64 * fraction) as usize).clamp(1.min(len), len);
        &self.rows[len - take..]
    }

    fn tail_mean(&self, fraction: f64, f: impl Fn(&TraceRow) -> f64) -> f64 {
        let rows = self.tail(fraction);
        if rows.is_empty() {
            return f64::NAN;
        }
        rows.iter().map(f).sum::<f64>() / rows.len() as f64
    }

    /// Mean θ̂ over the last `fraction` of the samples.
    pub fn terminal_theta(&self, fraction: f64) -> f64 {
        self.tail_mean(fraction, |r| r.theta_hat)
    }

    pub fn terminal_effective(&self, fraction: f64) -> f64 {
        self.tail_mean(fraction, |r| r.effective_participation)
    }

    pub fn terminal_mean_participation(&self, fraction: f64) -> f64 {
        self.tail_mean(fraction, |r| r.mean_participation)
    }
}

/// Steps `world` for `horizon` slots, sampling every `sample_every` slots.
pub fn run(world: &mut SimWorld, horizon: u64, sample_every: u64) -> Trace {
    let sample_every = sample_every.max(1);
    let n = world.agents.len() as f64;
    let slots = world.config.slots();
    let mut trace = Trace::default();
    let mut window_served = 0u64;
    let mut window_len = 0u64;
    for _ in 0..horizon {
        let s = world.step();
        window_served += u64::from(s.served);
        window_len += 1;
        trace.served += u64::from(s.served);
        trace.overflow += u64::from(s.overflow);
        trace.operator_utility += world.margin * f64::from(s.served) / n;
        if world.slot % sample_every == 0 {
            let effective = window_served as f64 * slots / (n * window_len as f64);
            trace.rows.push(TraceRow {
                slot: world.slot,
                theta_hat: world.theta_hat(),
                mean_participation: world.mean_participation(),
                effective_participation: effective,
                operator_utility_rate: world.margin * effective,
            });
            window_served = 0;
            window_len = 0;
        }
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abm::estimate_eta;
    use crate::model::{EvaluationFunction, OperatorParams, RewardScheme};

    fn market(beta: f64, delta: f64) -> Market {
        Market {
            types: alloc::vec![
                UeType::new(EvaluationFunction::power(1.0, 0.5).unwrap(), 0.35, 5.0, 0.3).unwrap(),
                UeType::new(EvaluationFunction::power(1.5, 0.5).unwrap(), 0.35, 5.0, 0.7).unwrap(),
            ],
            scheme: RewardScheme::new(2.2, 1000.0).unwrap(),
            env: RiskEnv::new(beta, delta, 1.0).unwrap(),
            operator: OperatorParams::new(6.0).unwrap(),
        }
    }

    fn world(beta: f64, delta: f64, seed: u64, policy: ContractPolicy) -> SimWorld {
        let cfg = SimConfig { seed, ..SimConfig::default() };
        let eta = estimate_eta(&cfg, 200, 2000).unwrap().eta;
        SimWorld::new(&market(beta, delta), cfg, policy, eta).unwrap()
    }

    #[test]
    fn conservation_and_no_growth_without_beta() {
        let mut w = world(0.0, 1.0, 5, ContractPolicy::Fixed(alloc::vec![3.0, 5.0]));
        let mut last = w.infected();
        for _ in 0..3000 {
            let s = w.step();
            assert_eq!(s.infections, 0);
            assert!(w.infected() <= last);
            last = w.infected();
            let count = w.agents().iter().filter(|a| a.health == Health::Infected).count();
            assert_eq!(count, w.infected());
            assert_eq!(w.infected() + w.susceptible(), 100);
            assert_eq!(s.served + s.overflow, s.tasks);
        }
    }

    #[test]
    fn bit_identical_replay() {
        let mk = || world(0.4, 1.0, 9, ContractPolicy::Observed);
        let (mut a, mut b) = (mk(), mk());
        let ta = run(&mut a, 2000, 50);
        let tb = run(&mut b, 2000, 50);
        assert_eq!(ta, tb);
        assert_eq!(ta.rows.len(), 40);
    }

    #[test]
    fn fast_recovery_keeps_theta_low() {
        let mut w = world(0.01, 100.0, 2, ContractPolicy::Fixed(alloc::vec![3.0, 5.0]));
        let t = run(&mut w, 2000, 100);
        assert!(t.terminal_theta(0.5) < 0.02);
    }

    #[test]
    fn served_rate_matches_contract() {
        let cfg = SimConfig { seed: 4, initial_infected: 0.0, ..SimConfig::default() };
        let eta = estimate_eta(&cfg, 500, 20_000).unwrap().eta;
        let m = market(0.0, 1.0);
        let mut w = SimWorld::new(&m, cfg, ContractPolicy::Fixed(alloc::vec![4.0, 4.0]), eta).unwrap();
        let t = run(&mut w, 10_000, 10_000);
        let eff = t.rows[0].effective_participation;
        assert!((eff - 4.0).abs() < 0.2, "{eff}");
    }

    #[test]
    fn observed_contracts_never_exceed_attack_free() {
        let mut w = world(0.2, 1.0, 7, ContractPolicy::Observed);
        let m = market(0.2, 1.0);
        let af: Vec<f64> = m.types.iter().map(|t| attack_free_rate(t, &m.scheme)).collect();
        for _ in 0..500 {
            w.step();
            for a in w.agents() {
                assert!(a.contract <= af[a.type_index] + 1e-12);
            }
        }
    }

    #[test]
    fn proportional_assignment_counts() {
        let w = world(0.2, 1.0, 1, ContractPolicy::Observed);
        let first = w.agents().iter().filter(|a| a.type_index == 0).count();
        assert_eq!(first, 30);
    }
}
