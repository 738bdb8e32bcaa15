use d2dsec_core::abm::{estimate_eta, run, ContractPolicy, Health, SimConfig, SimWorld, TypeAssignment};
use d2dsec_core::{EvaluationFunction, Market, OperatorParams, RewardScheme, RiskEnv, UeType};
use proptest::prelude::*;

fn market(beta: f64) -> Market {
    Market {
        types: vec![
            UeType::new(EvaluationFunction::power(1.0, 0.5).unwrap(), 0.35, 1.0, 0.3).unwrap(),
            UeType::new(EvaluationFunction::power(1.5, 0.5).unwrap(), 0.35, 1.0, 0.7).unwrap(),
        ],
        scheme: RewardScheme::new(2.2, 1000.0).unwrap(),
        env: RiskEnv::new(beta, 1.0, 10.0).unwrap(),
        operator: OperatorParams::new(6.0).unwrap(),
    }
}

fn small(seed: u64) -> SimConfig {
    SimConfig { n_agents: 40, area: 60.0, seed, ..SimConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn counts_stay_consistent(seed in any::<u64>(), beta in 0.0..1.0f64, observed in any::<bool>()) {
        let cfg = small(seed);
        let policy = if observed { ContractPolicy::Observed } else { ContractPolicy::Fixed(vec![3.0, 5.0]) };
        let mut w = SimWorld::new(&market(beta), cfg, policy, 0.4).unwrap();
        for _ in 0..300 {
            let s = w.step();
            prop_assert_eq!(s.served + s.overflow, s.tasks);
            prop_assert!(s.infections <= s.served);
            prop_assert_eq!(w.infected() + w.susceptible(), 40);
            let th = w.theta_hat();
            prop_assert!((0.0..=1.0).contains(&th));
        }
    }

    #[test]
    fn same_seed_same_trace(seed in any::<u64>()) {
        let go = || {
            let mut w = SimWorld::new(&market(0.4), small(seed), ContractPolicy::Observed, 0.4).unwrap();
            run(&mut w, 500, 10)
        };
        prop_assert_eq!(go(), go());
    }
}

#[test]
fn no_infection_without_attack() {
    let mut w = SimWorld::new(&market(0.0), small(3), ContractPolicy::Fixed(vec![3.0, 5.0]), 0.4).unwrap();
    let start = w.infected();
    for _ in 0..2000 {
        assert_eq!(w.step().infections, 0);
    }
    assert!(w.infected() <= start);
}

#[test]
fn random_assignment_covers_types() {
    let cfg = SimConfig { type_assignment: TypeAssignment::Random, n_agents: 400, ..SimConfig::default() };
    let w = SimWorld::new(&market(0.2), cfg, ContractPolicy::Observed, 0.4).unwrap();
    let first = w.agents().iter().filter(|a| a.type_index == 0).count();
    // Binomial(400, 0.3): mean 120, sd about 9.2.
    assert!((80..=160).contains(&first), "{first}");
    assert!(w.agents().iter().any(|a| a.health == Health::Infected));
}

#[test]
fn eta_estimate_is_reproducible() {
    let a = estimate_eta(&small(9), 100, 1000).unwrap();
    let b = estimate_eta(&small(9), 100, 1000).unwrap();
    assert_eq!(a, b);
    assert!(a.eta > 0.0);
}
