//! Coded UAV-to-UAV model dissemination.
//!
//! Every UAV starts out knowing only its own cluster model. In each round
//! some UAVs transmit XOR combinations of models they know to neighbours,
//! chosen so that every target can decode exactly one new model from the
//! packet. Rounds repeat until one UAV knows every model; that UAV forms
//! the global model and floods it over a BFS tree.
//!
//! Round scheduling follows the distributed scheme: each UAV solves its own
//! local conflict graph (greedy MWIS, weight `r * N_k`), then receivers
//! claimed by several transmitters go to the claimant maximizing
//! `M_k + sum of the others' re-solved weights`, and transmitters that are
//! also targeted either keep transmitting or are dropped as targets,
//! whichever side carries more weight. On top of that, the UAV that knows
//! the most models is kept receiving and preferred as a target
//! ([`DisseminationPolicy::front_runner_priority`]).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graphs::{self, ConflictGraph};
use crate::radio::LinkRateTable;
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Directed UAV links with their rates.
#[derive(Debug, Clone, PartialEq)]
pub struct UavNetwork {
    neighbors: Vec<Vec<usize>>,
    rates: BTreeMap<(usize, usize), f64>,
}

impl UavNetwork {
    /// Build from directed rates. Every link must be present in both
    /// directions with a positive rate.
    pub fn from_rates(num_uavs: usize, rates: BTreeMap<(usize, usize), f64>) -> Result<Self> {
        let mut neighbors = vec![BTreeSet::new(); num_uavs];
        for (&(k, i), &r) in &rates {
            if k >= num_uavs || i >= num_uavs || k == i {
                return Err(Error::Validation(format!("invalid UAV link {k} -> {i}")));
            }
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::MissingRate(k, i));
            }
            if !rates.contains_key(&(i, k)) {
                return Err(Error::MissingRate(i, k));
            }
            neighbors[k].insert(i);
        }
        Ok(Self {
            neighbors: neighbors.into_iter().map(|s| s.into_iter().collect()).collect(),
            rates,
        })
    }

    pub fn from_table(num_uavs: usize, table: &LinkRateTable) -> Result<Self> {
        Self::from_rates(num_uavs, table.uav_uav_rate.clone())
    }

    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        Self::from_table(scenario.num_uavs(), &LinkRateTable::build(scenario)?)
    }

    /// Fully connected network with `rate(k, i)` on each directed link.
    pub fn complete(num_uavs: usize, mut rate: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut rates = BTreeMap::new();
        for k in 0..num_uavs {
            for i in 0..num_uavs {
                if k != i {
                    rates.insert((k, i), rate(k, i));
                }
            }
        }
        Self::from_rates(num_uavs, rates)
    }

    pub fn num_uavs(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    pub fn rate(&self, k: usize, i: usize) -> Result<f64> {
        self.rates.get(&(k, i)).copied().ok_or(Error::NotAdjacent(k, i))
    }

    /// BFS depth of every UAV from `root`, `None` where unreachable.
    pub fn depths(&self, root: usize) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.num_uavs()];
        if root >= depth.len() {
            return depth;
        }
        depth[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let d = depth[u].unwrap_or(0);
            for &w in &self.neighbors[u] {
                if depth[w].is_none() {
                    depth[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        depth
    }

    pub fn check_connected(&self) -> Result<()> {
        let unreachable: Vec<usize> = self
            .depths(0)
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_none())
            .map(|(k, _)| k)
            .collect();
        if unreachable.is_empty() {
            Ok(())
        } else {
            Err(Error::Unreachable { unreachable })
        }
    }
}

/// Per-UAV Known sets; Unknown is the complement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideInformation {
    known: Vec<BTreeSet<usize>>,
}

impl SideInformation {
    /// Round-zero side information: each UAV knows its own model.
    pub fn initial(num_uavs: usize) -> Self {
        Self {
            known: (0..num_uavs).map(|k| BTreeSet::from([k])).collect(),
        }
    }

    pub fn from_known(known: Vec<BTreeSet<usize>>) -> Result<Self> {
        let k = known.len();
        for (i, set) in known.iter().enumerate() {
            if let Some(&bad) = set.iter().find(|&&m| m >= k) {
                return Err(Error::Validation(format!("UAV {i} knows nonexistent model {bad}")));
            }
        }
        Ok(Self { known })
    }

    pub fn num_uavs(&self) -> usize {
        self.known.len()
    }

    pub fn known(&self, k: usize) -> &BTreeSet<usize> {
        &self.known[k]
    }

    pub fn unknown(&self, k: usize) -> BTreeSet<usize> {
        (0..self.num_uavs()).filter(|m| !self.known[k].contains(m)).collect()
    }

    pub fn knows(&self, k: usize, m: usize) -> bool {
        self.known[k].contains(&m)
    }

    pub fn is_complete(&self, k: usize) -> bool {
        self.known[k].len() == self.num_uavs()
    }

    /// Lowest-index UAV that knows every model.
    pub fn first_complete(&self) -> Option<usize> {
        (0..self.num_uavs()).find(|&k| self.is_complete(k))
    }

    pub fn incomplete(&self) -> Vec<usize> {
        (0..self.num_uavs()).filter(|&k| !self.is_complete(k)).collect()
    }

    /// Models `k` knows that `i` does not.
    pub fn missing_from(&self, k: usize, i: usize) -> BTreeSet<usize> {
        self.known[k].difference(&self.known[i]).copied().collect()
    }
}

/// One candidate transmission: `tx` sends model `model` to `rx` at `rate_bps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisseminationVertex {
    pub tx: usize,
    pub rx: usize,
    pub model: usize,
    pub rate_bps: f64,
}

/// Whether two candidate transmissions may share a round.
///
/// Same transmitter: one vertex per receiver, and two different models may
/// be XORed only if each receiver already holds the other's model. Different
/// transmitters: no shared receiver and no UAV both sending and receiving.
/// With a rate menu, every co-scheduled vertex must also use one rate.
pub fn fedmod_conflict(
    a: &DisseminationVertex,
    b: &DisseminationVertex,
    side: &SideInformation,
    rate_menu: bool,
) -> bool {
    if rate_menu && a.rate_bps != b.rate_bps {
        return true;
    }
    if a.tx == b.tx {
        if a.rx == b.rx {
            return true;
        }
        return a.model != b.model && !(side.knows(a.rx, b.model) && side.knows(b.rx, a.model));
    }
    a.rx == b.rx || a.tx == b.rx || b.tx == a.rx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisseminationPolicy {
    /// Keep the best-informed UAV receiving and favour it as a target.
    pub front_runner_priority: bool,
    /// Discrete rate levels in bits/s. `None` uses each link's own rate.
    pub rate_menu_bps: Option<Vec<f64>>,
}

impl DisseminationPolicy {
    pub fn literal() -> Self {
        Self {
            front_runner_priority: false,
            rate_menu_bps: None,
        }
    }

    pub fn recommended() -> Self {
        Self {
            front_runner_priority: true,
            rate_menu_bps: None,
        }
    }
}

impl Default for DisseminationPolicy {
    fn default() -> Self {
        Self::recommended()
    }
}

fn vertex_rates(policy: &DisseminationPolicy, link_rate: f64) -> Vec<f64> {
    match &policy.rate_menu_bps {
        None => vec![link_rate],
        Some(menu) => {
            let mut out: Vec<f64> = menu.iter().copied().filter(|&r| r > 0.0 && r <= link_rate).collect();
            out.sort_by(f64::total_cmp);
            out.dedup();
            out
        }
    }
}

/// Neighbours of `k` (restricted to `allowed`) that miss something `k` knows.
fn wanting(side: &SideInformation, k: usize, allowed: &[usize]) -> Vec<usize> {
    allowed
        .iter()
        .copied()
        .filter(|&i| !side.missing_from(k, i).is_empty())
        .collect()
}

/// Network-wide conflict graph of one round. Vertex weight is `r * N_k`,
/// `N_k` the number of neighbours of `k` that want something from it.
pub fn build_fedmod_graph(
    side: &SideInformation,
    net: &UavNetwork,
    policy: &DisseminationPolicy,
) -> Result<ConflictGraph<DisseminationVertex>> {
    let mut g = ConflictGraph::new();
    for k in 0..net.num_uavs() {
        let want = wanting(side, k, net.neighbors(k));
        let n_k = want.len() as f64;
        for &i in &want {
            let link = net.rate(k, i)?;
            for m in side.missing_from(k, i) {
                for r in vertex_rates(policy, link) {
                    g.add_vertex(
                        DisseminationVertex {
                            tx: k,
                            rx: i,
                            model: m,
                            rate_bps: r,
                        },
                        r * n_k,
                    )?;
                }
            }
        }
    }
    let menu = policy.rate_menu_bps.is_some();
    let n = g.len();
    for a in 0..n {
        for b in a + 1..n {
            if fedmod_conflict(&g.vertex(a).payload, &g.vertex(b).payload, side, menu) {
                g.add_edge(a, b)?;
            }
        }
    }
    Ok(g)
}

/// A coded transmission: the XOR of `payload`, sent by `tx` to `targets`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedPacket {
    pub tx: usize,
    pub payload: BTreeSet<usize>,
    pub targets: BTreeSet<usize>,
    pub rate_bps: f64,
}

impl CodedPacket {
    /// The one model `target` learns from this packet, or `NotDecodable`.
    pub fn decoded_by(&self, side: &SideInformation, target: usize) -> Result<usize> {
        let unknown: Vec<usize> = self
            .payload
            .iter()
            .copied()
            .filter(|&m| !side.knows(target, m))
            .collect();
        match unknown[..] {
            [m] => Ok(m),
            _ => Err(Error::NotDecodable {
                tx: self.tx,
                target,
                unknown: unknown.len(),
            }),
        }
    }
}

/// Apply one round of packets; every packet must be decodable at every
/// target and the transmitter must hold its whole payload.
pub fn apply_round(side: &SideInformation, packets: &[CodedPacket]) -> Result<SideInformation> {
    let mut next = side.clone();
    for p in packets {
        if p.payload.is_empty() {
            return Err(Error::Validation(format!("UAV {} sends an empty payload", p.tx)));
        }
        if let Some(&m) = p.payload.iter().find(|&&m| !side.knows(p.tx, m)) {
            return Err(Error::Validation(format!("UAV {} does not hold model {m}", p.tx)));
        }
        for &t in &p.targets {
            let m = p.decoded_by(side, t)?;
            next.known[t].insert(m);
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub index: usize,
    pub vertices: Vec<DisseminationVertex>,
    pub packets: Vec<CodedPacket>,
    /// Common rate adopted by every transmitter of the round.
    pub rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroadcastHop {
    pub tx: usize,
    pub targets: Vec<usize>,
    pub rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisseminationTrace {
    pub model_size_bits: u64,
    pub initial: SideInformation,
    pub rounds: Vec<RoundRecord>,
    pub complete_uav: usize,
    pub broadcast_hops: Vec<BroadcastHop>,
    pub t_diss_s: f64,
}

impl DisseminationTrace {
    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Line-per-transmission log with cumulative dissemination time.
    pub fn to_log(&self) -> String {
        let s = self.model_size_bits as f64;
        let list = |it: &mut dyn Iterator<Item = usize>| it.map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut t = 0.0;
        let mut out = String::new();
        for r in &self.rounds {
            t += s / r.rate_bps;
            for p in &r.packets {
                let _ = writeln!(
                    out,
                    "round {} tx {} payload {} targets {} rate_mbps {} t_diss_s {:.9}",
                    r.index,
                    p.tx,
                    list(&mut p.payload.iter().copied()),
                    list(&mut p.targets.iter().copied()),
                    r.rate_bps / 1e6,
                    t
                );
            }
        }
        let _ = writeln!(out, "complete {}", self.complete_uav);
        for h in &self.broadcast_hops {
            t += s / h.rate_bps;
            let _ = writeln!(
                out,
                "broadcast tx {} targets {} rate_mbps {} t_diss_s {:.9}",
                h.tx,
                list(&mut h.targets.iter().copied()),
                h.rate_bps / 1e6,
                t
            );
        }
        out
    }
}

/// Sum of `s / rate` over rounds then hops, in trace order.
pub fn t_diss_of(model_size_bits: u64, rounds: &[RoundRecord], hops: &[BroadcastHop]) -> f64 {
    let s = model_size_bits as f64;
    rounds.iter().map(|r| s / r.rate_bps).sum::<f64>() + hops.iter().map(|h| s / h.rate_bps).sum::<f64>()
}

#[derive(Debug, Clone, Default)]
struct Selection {
    weight: f64,
    vertices: Vec<DisseminationVertex>,
}

struct RoundPlanner<'a> {
    side: &'a SideInformation,
    net: &'a UavNetwork,
    policy: &'a DisseminationPolicy,
    leader: Option<usize>,
    bonus: f64,
}

impl RoundPlanner<'_> {
    /// Best selection of transmitter `k` toward `allowed` receivers.
    fn solve(&self, k: usize, allowed: &[usize]) -> Result<Selection> {
        let want = wanting(self.side, k, allowed);
        let n_k = want.len() as f64;
        let mut links = Vec::with_capacity(want.len());
        for &i in &want {
            links.push((i, self.net.rate(k, i)?));
        }
        let levels: Vec<Option<f64>> = match &self.policy.rate_menu_bps {
            None => vec![None],
            Some(_) => {
                let top = links.iter().map(|&(_, r)| r).fold(0.0, f64::max);
                vertex_rates(self.policy, top).into_iter().map(Some).collect()
            }
        };
        let mut best = Selection::default();
        for level in levels {
            let mut g = ConflictGraph::new();
            for &(i, link) in &links {
                let r = match level {
                    None => link,
                    Some(r0) if r0 <= link => r0,
                    Some(_) => continue,
                };
                let bonus = if Some(i) == self.leader { self.bonus } else { 0.0 };
                for m in self.side.missing_from(k, i) {
                    g.add_vertex(
                        DisseminationVertex {
                            tx: k,
                            rx: i,
                            model: m,
                            rate_bps: r,
                        },
                        r * n_k + bonus,
                    )?;
                }
            }
            let n = g.len();
            for a in 0..n {
                for b in a + 1..n {
                    if fedmod_conflict(&g.vertex(a).payload, &g.vertex(b).payload, self.side, false) {
                        g.add_edge(a, b)?;
                    }
                }
            }
            let set = graphs::greedy_mwis(&g);
            if set.total_weight > best.weight {
                best = Selection {
                    weight: set.total_weight,
                    vertices: set.ids.iter().map(|&id| g.vertex(id).payload).collect(),
                };
            }
        }
        Ok(best)
    }
}

fn without(list: &[usize], j: usize) -> Vec<usize> {
    list.iter().copied().filter(|&x| x != j).collect()
}

/// Choose the transmissions of one round. Returns the selected vertices in
/// transmitter order; empty only if nothing is schedulable.
pub fn schedule_round_vertices(
    side: &SideInformation,
    net: &UavNetwork,
    policy: &DisseminationPolicy,
) -> Result<Vec<DisseminationVertex>> {
    let k_count = net.num_uavs();
    let mut assoc: Vec<Vec<usize>> = (0..k_count).map(|k| net.neighbors(k).to_vec()).collect();

    let mut planner = RoundPlanner {
        side,
        net,
        policy,
        leader: None,
        bonus: 0.0,
    };
    if policy.front_runner_priority && k_count > 0 {
        let leader = (0..k_count)
            .max_by_key(|&k| (side.known(k).len(), net.neighbors(k).len(), std::cmp::Reverse(k)))
            .unwrap_or(0);
        // the bonus outweighs every combination of ordinary vertices
        let mut total = 0.0;
        for k in 0..k_count {
            let want = wanting(side, k, net.neighbors(k));
            for &i in &want {
                total += net.rate(k, i)? * want.len() as f64 * side.missing_from(k, i).len() as f64;
            }
        }
        planner.leader = Some(leader);
        planner.bonus = 1.0 + total;
        if net
            .neighbors(leader)
            .iter()
            .any(|&k| !side.missing_from(k, leader).is_empty())
        {
            assoc[leader].clear();
        }
    }

    let mut sel: Vec<Selection> = (0..k_count)
        .map(|k| planner.solve(k, &assoc[k]))
        .collect::<Result<_>>()?;
    let targets = |s: &Selection, j: usize| s.vertices.iter().any(|v| v.rx == j);

    let max_passes = k_count * k_count + 1;
    let mut converged = false;
    for _ in 0..max_passes {
        let mut changed = false;
        // receivers claimed by several transmitters
        for j in 0..k_count {
            let claimants: Vec<usize> = (0..k_count).filter(|&k| targets(&sel[k], j)).collect();
            if claimants.len() < 2 {
                continue;
            }
            let resolved: Vec<Selection> = claimants
                .iter()
                .map(|&k| planner.solve(k, &without(&assoc[k], j)))
                .collect::<Result<_>>()?;
            let alt_sum: f64 = resolved.iter().map(|s| s.weight).sum();
            let mut winner = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (idx, &k) in claimants.iter().enumerate() {
                let score = sel[k].weight + (alt_sum - resolved[idx].weight);
                if score > best_score {
                    best_score = score;
                    winner = idx;
                }
            }
            for (idx, &k) in claimants.iter().enumerate() {
                if idx != winner {
                    assoc[k] = without(&assoc[k], j);
                    sel[k] = resolved[idx].clone();
                }
            }
            changed = true;
        }
        // transmitters that are also targeted
        for j in 0..k_count {
            if sel[j].vertices.is_empty() {
                continue;
            }
            let Some(k) = (0..k_count).find(|&k| targets(&sel[k], j)) else {
                continue;
            };
            if sel[k].weight >= sel[j].weight {
                assoc[j].clear();
                sel[j] = Selection::default();
            } else {
                assoc[k] = without(&assoc[k], j);
                sel[k] = planner.solve(k, &assoc[k])?;
            }
            changed = true;
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(max_passes));
    }
    Ok(sel.into_iter().flat_map(|s| s.vertices).collect())
}

/// Group selected vertices into one packet per transmitter at the round's
/// common rate (the minimum selected rate).
pub fn packets_from_vertices(vertices: &[DisseminationVertex]) -> (Vec<CodedPacket>, f64) {
    let rate = vertices.iter().map(|v| v.rate_bps).fold(f64::INFINITY, f64::min);
    let mut by_tx: BTreeMap<usize, (BTreeSet<usize>, BTreeSet<usize>)> = BTreeMap::new();
    for v in vertices {
        let e = by_tx.entry(v.tx).or_default();
        e.0.insert(v.model);
        e.1.insert(v.rx);
    }
    let packets = by_tx
        .into_iter()
        .map(|(tx, (payload, targets))| CodedPacket {
            tx,
            payload,
            targets,
            rate_bps: rate,
        })
        .collect();
    (packets, rate)
}

/// Schedule one round and return its record (with `index` 0; the caller numbers rounds).
pub fn schedule_round(side: &SideInformation, net: &UavNetwork, policy: &DisseminationPolicy) -> Result<RoundRecord> {
    let vertices = schedule_round_vertices(side, net, policy)?;
    let (packets, rate_bps) = packets_from_vertices(&vertices);
    Ok(RoundRecord {
        index: 0,
        vertices,
        packets,
        rate_bps,
    })
}

/// Rounds run by [`run_rounds`], without the final flood.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialRun {
    pub rounds: Vec<RoundRecord>,
    pub side: SideInformation,
}

/// Run up to `max_rounds` rounds, stopping early once some UAV is complete.
pub fn run_rounds(
    side0: &SideInformation,
    net: &UavNetwork,
    policy: &DisseminationPolicy,
    max_rounds: usize,
) -> Result<PartialRun> {
    if side0.num_uavs() != net.num_uavs() {
        return Err(Error::DimMismatch {
            expected: net.num_uavs(),
            got: side0.num_uavs(),
        });
    }
    let mut side = side0.clone();
    let mut rounds = Vec::new();
    while side.first_complete().is_none() && rounds.len() < max_rounds {
        let mut record = schedule_round(&side, net, policy)?;
        if record.vertices.is_empty() {
            return Err(Error::ProtocolStall {
                round: rounds.len() + 1,
                waiting: side.incomplete(),
            });
        }
        record.index = rounds.len() + 1;
        side = apply_round(&side, &record.packets)?;
        rounds.push(record);
    }
    Ok(PartialRun { rounds, side })
}

/// Flood from `root` over a BFS tree. Parents are visited in index order
/// within each level; each parent sends once to all of its new children at
/// the slowest of those links.
pub fn flood(net: &UavNetwork, root: usize) -> Result<Vec<BroadcastHop>> {
    let k = net.num_uavs();
    let mut seen = vec![false; k];
    seen[root] = true;
    let mut frontier = vec![root];
    let mut hops = Vec::new();
    while !frontier.is_empty() {
        frontier.sort_unstable();
        let mut next = Vec::new();
        for &u in &frontier {
            let children: Vec<usize> = net.neighbors(u).iter().copied().filter(|&w| !seen[w]).collect();
            if children.is_empty() {
                continue;
            }
            let mut rate = f64::INFINITY;
            for &w in &children {
                seen[w] = true;
                rate = rate.min(net.rate(u, w)?);
            }
            next.extend(children.iter().copied());
            hops.push(BroadcastHop {
                tx: u,
                targets: children,
                rate_bps: rate,
            });
        }
        frontier = next;
    }
    let unreachable: Vec<usize> = (0..k).filter(|&w| !seen[w]).collect();
    if unreachable.is_empty() {
        Ok(hops)
    } else {
        Err(Error::Unreachable { unreachable })
    }
}

fn finish(
    initial: &SideInformation,
    net: &UavNetwork,
    model_size_bits: u64,
    rounds: Vec<RoundRecord>,
    side: &SideInformation,
) -> Result<DisseminationTrace> {
    let complete_uav = side.first_complete().ok_or_else(|| Error::ProtocolStall {
        round: rounds.len(),
        waiting: side.incomplete(),
    })?;
    let broadcast_hops = flood(net, complete_uav)?;
    let t_diss_s = t_diss_of(model_size_bits, &rounds, &broadcast_hops);
    Ok(DisseminationTrace {
        model_size_bits,
        initial: initial.clone(),
        rounds,
        complete_uav,
        broadcast_hops,
        t_diss_s,
    })
}

/// Disseminate until some UAV knows every model, then flood its global
/// model. The UAV graph must be connected.
pub fn run_dissemination(
    side0: &SideInformation,
    net: &UavNetwork,
    model_size_bits: u64,
    policy: &DisseminationPolicy,
) -> Result<DisseminationTrace> {
    net.check_connected()?;
    // each round teaches at least one (UAV, model) pair
    let cap = net.num_uavs() * net.num_uavs() + 1;
    let run = run_rounds(side0, net, policy, cap)?;
    finish(side0, net, model_size_bits, run.rounds, &run.side)
}

/// A hand-written transmission of a scripted round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedTransmission {
    pub tx: usize,
    pub payload: Vec<usize>,
    pub targets: Vec<usize>,
}

/// Check a scripted schedule round by round and cost it.
///
/// Every target must be a neighbour of its transmitter, no receiver may
/// hear two transmitters, no UAV may send and receive in one round, and
/// every packet must be decodable at every target. Each round runs at the
/// minimum rate over all of its links.
pub fn replay(
    side0: &SideInformation,
    net: &UavNetwork,
    model_size_bits: u64,
    script: &[Vec<ScriptedTransmission>],
) -> Result<DisseminationTrace> {
    net.check_connected()?;
    let mut side = side0.clone();
    let mut rounds = Vec::new();
    for (l, round) in script.iter().enumerate() {
        let index = l + 1;
        let txs: BTreeSet<usize> = round.iter().map(|t| t.tx).collect();
        if txs.len() != round.len() {
            return Err(Error::Validation(format!("round {index}: a UAV transmits twice")));
        }
        let mut receivers = BTreeSet::new();
        let mut rate = f64::INFINITY;
        let mut packets = Vec::new();
        let mut vertices = Vec::new();
        for t in round {
            for &i in &t.targets {
                rate = rate.min(net.rate(t.tx, i)?);
                if !receivers.insert(i) {
                    return Err(Error::Validation(format!(
                        "round {index}: UAV {i} hears two transmitters"
                    )));
                }
                if txs.contains(&i) {
                    return Err(Error::Validation(format!(
                        "round {index}: UAV {i} both sends and receives"
                    )));
                }
            }
            packets.push(CodedPacket {
                tx: t.tx,
                payload: t.payload.iter().copied().collect(),
                targets: t.targets.iter().copied().collect(),
                rate_bps: 0.0,
            });
        }
        for p in &mut packets {
            p.rate_bps = rate;
            for &i in &p.targets {
                vertices.push(DisseminationVertex {
                    tx: p.tx,
                    rx: i,
                    model: p.decoded_by(&side, i)?,
                    rate_bps: rate,
                });
            }
        }
        side = apply_round(&side, &packets)?;
        rounds.push(RoundRecord {
            index,
            vertices,
            packets,
            rate_bps: rate,
        });
    }
    finish(side0, net, model_size_bits, rounds, &side)
}

/// The hand schedule of the five-UAV worked example (0-based indices).
pub fn fig3_script() -> Vec<Vec<ScriptedTransmission>> {
    let t = |tx: usize, payload: &[usize], targets: &[usize]| ScriptedTransmission {
        tx,
        payload: payload.to_vec(),
        targets: targets.to_vec(),
    };
    vec![
        vec![t(1, &[1], &[0, 2, 3])],
        vec![t(3, &[3], &[0, 1]), t(4, &[4], &[2])],
        vec![t(0, &[0], &[1, 3])],
        vec![t(2, &[4, 1], &[1, 4])],
        vec![t(2, &[2], &[1, 4])],
    ]
}

/// `gap[(j, k)]`: how many transmissions carried model `j` to UAV `k`,
/// counting the hops of the final flood for UAVs that only obtained it
/// inside the global model.
pub fn dissemination_gap(trace: &DisseminationTrace) -> BTreeMap<(usize, usize), usize> {
    let k_count = trace.initial.num_uavs();
    let mut gap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for k in 0..k_count {
        for &m in trace.initial.known(k) {
            gap.insert((m, k), if m == k { 0 } else { 1 });
        }
    }
    let mut side = trace.initial.clone();
    for r in &trace.rounds {
        let mut updates = Vec::new();
        for p in &r.packets {
            for &t in &p.targets {
                if let Ok(m) = p.decoded_by(&side, t) {
                    let via = gap.get(&(m, p.tx)).copied().unwrap_or(0);
                    updates.push(((m, t), via + 1));
                }
            }
        }
        for (key, v) in updates {
            gap.entry(key).or_insert(v);
        }
        if let Ok(next) = apply_round(&side, &r.packets) {
            side = next;
        }
    }
    let c = trace.complete_uav;
    let mut depth = vec![0usize; k_count];
    for h in &trace.broadcast_hops {
        for &t in &h.targets {
            depth[t] = depth[h.tx] + 1;
        }
    }
    for (k, &d) in depth.iter().enumerate() {
        for j in 0..k_count {
            if !gap.contains_key(&(j, k)) {
                let at_c = gap.get(&(j, c)).copied().unwrap_or(0);
                gap.insert((j, k), at_c + d);
            }
        }
    }
    gap
}

/// Replay a trace with real parameter vectors: payloads are bitwise XORs
/// of the f64 representations and targets decode by XORing out what they
/// hold. Returns every UAV's recovered models after the rounds.
pub fn carry_models(trace: &DisseminationTrace, models: &[Vec<f64>]) -> Result<Vec<BTreeMap<usize, Vec<f64>>>> {
    carry_rounds(&trace.initial, &trace.rounds, models)
}

/// [`carry_models`] over an arbitrary prefix of rounds, such as a
/// [`PartialRun`].
pub fn carry_rounds(
    initial: &SideInformation,
    rounds: &[RoundRecord],
    models: &[Vec<f64>],
) -> Result<Vec<BTreeMap<usize, Vec<f64>>>> {
    let k_count = initial.num_uavs();
    if models.len() != k_count {
        return Err(Error::DimMismatch {
            expected: k_count,
            got: models.len(),
        });
    }
    let dim = models.first().map_or(0, Vec::len);
    if let Some(bad) = models.iter().find(|m| m.len() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
    let mut held: Vec<BTreeMap<usize, Vec<u64>>> = (0..k_count)
        .map(|k| initial.known(k).iter().map(|&m| (m, bits(&models[m]))).collect())
        .collect();
    for r in rounds {
        let mut deliveries = Vec::new();
        for p in &r.packets {
            let mut coded = vec![0u64; dim];
            for &m in &p.payload {
                let v = held[p.tx]
                    .get(&m)
                    .ok_or_else(|| Error::Validation(format!("UAV {} does not hold model {m}", p.tx)))?;
                coded.iter_mut().zip(v).for_each(|(c, x)| *c ^= x);
            }
            for &t in &p.targets {
                let mut rest: Vec<usize> = p.payload.iter().copied().filter(|m| !held[t].contains_key(m)).collect();
                if rest.len() != 1 {
                    return Err(Error::NotDecodable {
                        tx: p.tx,
                        target: t,
                        unknown: rest.len(),
                    });
                }
                let mut out = coded.clone();
                for m in p.payload.iter().filter(|m| held[t].contains_key(m)) {
                    out.iter_mut().zip(&held[t][m]).for_each(|(c, x)| *c ^= x);
                }
                deliveries.push((t, rest.pop().unwrap_or_default(), out));
            }
        }
        for (t, m, v) in deliveries {
            held[t].insert(m, v);
        }
    }
    Ok(held
        .into_iter()
        .map(|h| {
            h.into_iter()
                .map(|(m, v)| (m, v.into_iter().map(f64::from_bits).collect()))
                .collect()
        })
        .collect())
}
