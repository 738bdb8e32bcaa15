use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SimConfig, Walker};
use crate::error::{Error, Result};

/// Offer intensity in the obedient case, where every in-range peer is
/// eligible and each task goes to one of them uniformly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaEstimate {
    /// Mean number of task offers a potential server receives per slot.
    pub eta: f64,
    pub offers: u64,
    /// Number of (agent, slot) pairs in which the agent was not requesting.
    pub server_slots: u64,
    pub warning: Option<&'static str>,
}

/// Runs the obedient simulation for `warmup + slots` slots and measures η
/// over the last `slots`.
pub fn estimate_eta(config: &SimConfig, warmup: u64, slots: u64) -> Result<EtaEstimate> {
    config.validate()?;
    let n = config.n_agents;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut walkers: Vec<Walker> = (0..n).map(|_| Walker::spawn(&mut rng, config)).collect();
    let mut requester = alloc::vec![false; n];
    let range_sq = config.d * config.d;
    let (mut offers, mut server_slots) = (0u64, 0u64);

    for slot in 0..warmup + slots {
        for w in walkers.iter_mut() {
            w.advance(&mut rng, config);
        }
        for r in requester.iter_mut() {
            *r = rng.gen::<f64>() < config.p;
        }
        let measured = slot >= warmup;
        if measured {
            server_slots += requester.iter().filter(|&&r| !r).count() as u64;
        }
        for i in 0..n {
            if !requester[i] {
                continue;
            }
            let tasks = rng.gen_range(1..=config.w_max);
            let reachable = (0..n).any(|j| !requester[j] && walkers[i].within(&walkers[j], range_sq));
            if measured && reachable {
                offers += u64::from(tasks);
            }
        }
    }
    let eta = if server_slots == 0 { 0.0 } else { offers as f64 / server_slots as f64 };
    let warning = if eta == 0.0 {
        Some("no task offers observed; rates cannot be converted")
    } else {
        None
    };
    Ok(EtaEstimate { eta, offers, server_slots, warning })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotProbability {
    pub prob: f64,
    /// The raw value a/(S(1−p)η) exceeded 1.
    pub clamped: bool,
}

/// Per-slot acceptance probability a/(S·(1−p)·η), clamped to [0, 1].
pub fn rate_to_slot_probability(a: f64, config: &SimConfig, eta: f64) -> Result<SlotProbability> {
    if !(a >= 0.0) {
        return Err(Error::invalid("a", a, "participation must be >= 0"));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid("eta", eta, "must be finite and > 0"));
    }
    let denom = config.slots() * (1.0 - config.p) * eta;
    if !(denom > 0.0) {
        return Err(Error::invalid("p", config.p, "no potential servers when p = 1"));
    }
    let raw = a / denom;
    Ok(SlotProbability { prob: raw.min(1.0), clamped: raw > 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_requesters_no_offers() {
        let cfg = SimConfig { p: 0.0, ..SimConfig::default() };
        let e = estimate_eta(&cfg, 10, 500).unwrap();
        assert_eq!(e.eta, 0.0);
        assert!(e.warning.is_some());
    }

    #[test]
    fn two_agent_closed_form() {
        // Everyone in range, one task per request: a potential server gets an
        // offer exactly when the other agent requests, probability p.
        let cfg = SimConfig { n_agents: 2, p: 0.5, w_max: 1, d: 200.0, seed: 11, ..SimConfig::default() };
        let slots = 200_000u64;
        let e = estimate_eta(&cfg, 0, slots).unwrap();
        let sigma = (0.25 / e.server_slots as f64).sqrt();
        assert!((e.eta - 0.5).abs() < 3.0 * sigma, "{e:?}");
    }

    #[test]
    fn conversion_endpoints() {
        let cfg = SimConfig::default();
        assert_eq!(rate_to_slot_probability(0.0, &cfg, 0.4).unwrap().prob, 0.0);
        let sat = 100.0 * 0.8 * 0.4;
        let p = rate_to_slot_probability(sat, &cfg, 0.4).unwrap();
        assert!((p.prob - 1.0).abs() < 1e-15);
        assert!(rate_to_slot_probability(2.0 * sat, &cfg, 0.4).unwrap().clamped);
        assert!(rate_to_slot_probability(1.0, &cfg, 0.0).is_err());
    }
}
