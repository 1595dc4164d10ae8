//! Oracles shared by the integration tests. Nothing here calls the code
//! under test except to read its output records.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use fedmod_core::dissemination::{BroadcastHop, RoundRecord, UavNetwork};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rates = BTreeMap<(usize, usize), f64>;

/// Random connected graph on `k` nodes: a random tree plus extra edges with
/// probability `p`, each direction with its own rate in 5..20 Mb/s.
pub fn random_connected(k: usize, p: f64, seed: u64) -> Rates {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BTreeSet::new();
    for i in 1..k {
        let j = rng.random_range(0..i);
        edges.insert((j, i));
    }
    for a in 0..k {
        for b in a + 1..k {
            if rng.random_bool(p) {
                edges.insert((a, b));
            }
        }
    }
    let mut rates = Rates::new();
    for (a, b) in edges {
        rates.insert((a, b), rng.random_range(5.0e6..20.0e6));
        rates.insert((b, a), rng.random_range(5.0e6..20.0e6));
    }
    rates
}

pub fn network(k: usize, rates: &Rates) -> UavNetwork {
    UavNetwork::from_rates(k, rates.clone()).expect("valid network")
}

/// Check one round against the protocol rules and return the new Known
/// sets. Checks: transmitters hold their payload, every target is a
/// neighbour, every target decodes exactly one new model (DM, so no NIM),
/// one common rate not above any used link (CC2), no receiver hears two
/// packets (CC3), no UAV both sends and receives (CC4).
pub fn check_round(
    rates: &Rates,
    known: &[BTreeSet<usize>],
    round: &RoundRecord,
) -> Result<Vec<BTreeSet<usize>>, String> {
    let i = round.index;
    let txs: BTreeSet<usize> = round.packets.iter().map(|p| p.tx).collect();
    let mut heard = BTreeSet::new();
    let mut next = known.to_vec();
    if round.packets.is_empty() {
        return Err(format!("round {i}: no packets"));
    }
    for p in &round.packets {
        if p.payload.is_empty() || p.targets.is_empty() {
            return Err(format!("round {i}: empty packet from {}", p.tx));
        }
        if !p.payload.is_subset(&known[p.tx]) {
            return Err(format!("round {i}: UAV {} sends models it lacks", p.tx));
        }
        if p.rate_bps != round.rate_bps {
            return Err(format!(
                "round {i}: CC2 packet rate {} vs round rate {}",
                p.rate_bps, round.rate_bps
            ));
        }
        for &t in &p.targets {
            let link = rates
                .get(&(p.tx, t))
                .ok_or(format!("round {i}: {} -> {t} is not a link", p.tx))?;
            if round.rate_bps > *link {
                return Err(format!(
                    "round {i}: CC2 rate {} above link {} -> {t} ({link})",
                    round.rate_bps, p.tx
                ));
            }
            if !heard.insert(t) {
                return Err(format!("round {i}: CC3 UAV {t} hears two packets"));
            }
            if txs.contains(&t) {
                return Err(format!("round {i}: CC4 UAV {t} sends and receives"));
            }
            let new: Vec<usize> = p.payload.difference(&known[t]).copied().collect();
            if new.len() != 1 {
                return Err(format!(
                    "round {i}: packet from {} is not decodable at {t} ({} unknown)",
                    p.tx,
                    new.len()
                ));
            }
            next[t].insert(new[0]);
        }
    }
    Ok(next)
}

/// Check a flood from `root`: each sender already holds the global model,
/// targets are its neighbours, the hop rate fits every link, and every UAV
/// is reached.
pub fn check_flood(rates: &Rates, k: usize, root: usize, hops: &[BroadcastHop]) -> Result<(), String> {
    let mut have = BTreeSet::from([root]);
    for h in hops {
        if !have.contains(&h.tx) {
            return Err(format!("hop from {} before it holds the model", h.tx));
        }
        for &t in &h.targets {
            let link = rates
                .get(&(h.tx, t))
                .ok_or(format!("flood {} -> {t} is not a link", h.tx))?;
            if h.rate_bps > *link {
                return Err(format!("flood {} -> {t} above link rate", h.tx));
            }
            have.insert(t);
        }
    }
    if have.len() != k {
        return Err(format!("flood reached {} of {k} UAVs", have.len()));
    }
    Ok(())
}

/// `sum s / rate` over rounds and hops.
pub fn t_diss(s: u64, rounds: &[RoundRecord], hops: &[BroadcastHop]) -> f64 {
    let s = s as f64;
    rounds.iter().map(|r| s / r.rate_bps).sum::<f64>() + hops.iter().map(|h| s / h.rate_bps).sum::<f64>()
}

/// Direct data-weighted mean `sum_u D_u w_u / sum_u D_u`.
pub fn weighted_mean(models: &[(Vec<f64>, usize)]) -> Vec<f64> {
    let total: f64 = models.iter().map(|(_, d)| *d as f64).sum();
    let dim = models[0].0.len();
    (0..dim)
        .map(|j| models.iter().map(|(w, d)| w[j] * *d as f64).sum::<f64>() / total)
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exhaustive subset enumeration: (max independent weight, min maximal
/// independent weight).
pub fn exhaustive(n: usize, edges: &BTreeSet<(usize, usize)>, w: &[f64]) -> (f64, f64) {
    let adj = |a: usize, b: usize| edges.contains(&(a.min(b), a.max(b)));
    let mut best_max = 0.0f64;
    let mut best_min = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let set: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let independent = set.iter().all(|&a| set.iter().all(|&b| a == b || !adj(a, b)));
        if !independent {
            continue;
        }
        let weight: f64 = set.iter().map(|&v| w[v]).sum();
        best_max = best_max.max(weight);
        let maximal = (0..n).all(|v| set.contains(&v) || set.iter().any(|&s| adj(s, v)));
        if maximal {
            best_min = best_min.min(weight);
        }
    }
    (best_max, best_min)
}
