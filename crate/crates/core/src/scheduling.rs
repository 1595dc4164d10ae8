//! UD-to-UAV/RRB clustering (P1) and D2D relay selection (P2).
//!
//! P1 builds a conflict graph with one vertex per feasible (UAV, RRB, UD)
//! triple weighted by that UD's computation plus upload energy, and keeps
//! the lightest maximal independent set of at most `B * K` vertices. P2
//! pairs non-LOS UDs with scheduled relays whose idle time can absorb the
//! two-hop transfer, keeping a heavy independent set by bottleneck rate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::accounting::{comm_energy_j, compute_energy_j};
use crate::graphs::{self, ConflictGraph};
use crate::radio::{self, LinkRateTable};
use crate::scenario::{classify_los, Scenario};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub ud: usize,
    pub uav: usize,
    pub rrb: usize,
    pub rate_bps: f64,
    pub upload_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayAssignment {
    pub nlos_ud: usize,
    pub relay_ud: usize,
    pub uav: usize,
    pub rrb: usize,
    pub d2d_rate_bps: f64,
    /// Rate of the relay's own (UAV, RRB) link, reused for forwarding.
    pub relay_rate_bps: f64,
    pub two_hop_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub assignments: Vec<Assignment>,
    pub relays: Vec<RelayAssignment>,
    pub r_min_bps: f64,
    /// Idle time of every directly scheduled UD.
    pub idle_time_s: BTreeMap<usize, f64>,
}

impl Schedule {
    /// UAV -> directly scheduled UDs.
    pub fn direct_clusters(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for a in &self.assignments {
            out.entry(a.uav).or_default().push(a.ud);
        }
        for v in out.values_mut() {
            v.sort_unstable();
        }
        out
    }

    /// UAV -> every UD whose model reaches it, relayed ones included.
    pub fn clusters(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut out = self.direct_clusters();
        for r in &self.relays {
            out.entry(r.uav).or_default().push(r.nlos_ud);
        }
        for v in out.values_mut() {
            v.sort_unstable();
        }
        out
    }

    /// The UDs taking part in this iteration, sorted.
    pub fn participants(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .assignments
            .iter()
            .map(|a| a.ud)
            .chain(self.relays.iter().map(|r| r.nlos_ud))
            .collect();
        out.sort_unstable();
        out
    }

    /// One CSV row per assignment and relay.
    pub fn write_csv(&self, scenario: &Scenario, local_iters: u32, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["kind", "ud", "uav", "rrb", "relay_ud", "rate_bps", "time_s", "energy_j"])?;
        let s = scenario.model_size_bits as f64;
        for a in &self.assignments {
            let node = &scenario.uds[a.ud].params;
            let e = compute_energy_j(node, local_iters) + comm_energy_j(node.transmit_power_watts, a.upload_time_s);
            w.write_record([
                "direct".to_string(),
                a.ud.to_string(),
                a.uav.to_string(),
                a.rrb.to_string(),
                String::new(),
                a.rate_bps.to_string(),
                a.upload_time_s.to_string(),
                e.to_string(),
            ])?;
        }
        for r in &self.relays {
            let node = &scenario.uds[r.nlos_ud].params;
            let e = compute_energy_j(node, local_iters) + comm_energy_j(node.transmit_power_watts, s / r.d2d_rate_bps);
            w.write_record([
                "relayed".to_string(),
                r.nlos_ud.to_string(),
                r.uav.to_string(),
                r.rrb.to_string(),
                r.relay_ud.to_string(),
                r.d2d_rate_bps.min(r.relay_rate_bps).to_string(),
                r.two_hop_time_s.to_string(),
                e.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Vertex weight of a P1 triple: computation plus upload energy.
pub fn p1_weight(scenario: &Scenario, ud: usize, rate_bps: f64, local_iters: u32) -> f64 {
    let node = &scenario.uds[ud].params;
    compute_energy_j(node, local_iters)
        + comm_energy_j(node.transmit_power_watts, scenario.model_size_bits as f64 / rate_bps)
}

/// One vertex per (UAV k, RRB z, UD u) with LOS and rate at least `R_0`
/// and energy within the UD's budget, in (k, z, u) order. Edges join
/// vertices of the same UD and vertices sharing one (UAV, RRB).
pub fn build_p1_graph(
    scenario: &Scenario,
    rates: &LinkRateTable,
    local_iters: u32,
) -> Result<ConflictGraph<Assignment>> {
    let s = scenario.model_size_bits as f64;
    let mut g = ConflictGraph::new();
    let mut by_ud: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut by_rrb: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for k in 0..scenario.num_uavs() {
        for z in 0..scenario.rrbs_per_uav {
            for u in 0..scenario.num_uds() {
                let Some(rate) = rates.access(u, k) else { continue };
                if rate < scenario.rate_threshold_bps || rate <= 0.0 {
                    continue;
                }
                let weight = p1_weight(scenario, u, rate, local_iters);
                if scenario.uds[u].energy_budget_j.is_some_and(|b| weight > b) {
                    continue;
                }
                let id = g.add_vertex(
                    Assignment {
                        ud: u,
                        uav: k,
                        rrb: z,
                        rate_bps: rate,
                        upload_time_s: s / rate,
                    },
                    weight,
                )?;
                by_ud.entry(u).or_default().push(id);
                by_rrb.entry((k, z)).or_default().push(id);
            }
        }
    }
    for group in by_ud.values().chain(by_rrb.values()) {
        for (i, &a) in group.iter().enumerate() {
            for &b in &group[i + 1..] {
                g.add_edge(a, b)?;
            }
        }
    }
    Ok(g)
}

fn decode<P: Copy>(graph: &ConflictGraph<P>, set: &graphs::IndependentSet) -> Vec<P> {
    set.ids.iter().map(|&id| graph.vertex(id).payload).collect()
}

fn sort_assignments(mut out: Vec<Assignment>) -> Vec<Assignment> {
    out.sort_by_key(|a| (a.uav, a.rrb, a.ud));
    out
}

/// Lightest maximal clustering with at most `cap` assignments.
pub fn solve_p1(graph: &ConflictGraph<Assignment>, cap: usize) -> Vec<Assignment> {
    sort_assignments(decode(graph, &graphs::greedy_min_wis(graph, cap)))
}

/// Random maximal clustering, the baseline scheduler.
pub fn solve_p1_random<R: Rng + ?Sized>(graph: &ConflictGraph<Assignment>, cap: usize, rng: &mut R) -> Vec<Assignment> {
    sort_assignments(decode(graph, &graphs::random_maximal(graph, cap, rng)))
}

pub fn min_rate(assignments: &[Assignment]) -> f64 {
    assignments.iter().map(|a| a.rate_bps).fold(f64::INFINITY, f64::min)
}

/// `s / R_min - s / R_u` for every scheduled UD.
pub fn compute_idle_times(assignments: &[Assignment], model_size_bits: u64) -> BTreeMap<usize, f64> {
    let s = model_size_bits as f64;
    let r_min = min_rate(assignments);
    assignments
        .iter()
        .map(|a| {
            let idle = if a.rate_bps == r_min {
                0.0
            } else {
                s / r_min - s / a.rate_bps
            };
            (a.ud, idle.max(0.0))
        })
        .collect()
}

/// One vertex per (scheduled relay, non-LOS UD in its zone) whose two-hop
/// time fits inside the relay's idle time, weighted by the bottleneck rate.
pub fn build_p2_graph(
    scenario: &Scenario,
    assignments: &[Assignment],
    idle_time_s: &BTreeMap<usize, f64>,
    rates: &LinkRateTable,
) -> Result<ConflictGraph<RelayAssignment>> {
    let s = scenario.model_size_bits as f64;
    let (_, non_los) = classify_los(scenario);
    let mut g = ConflictGraph::new();
    let mut by_relay: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut by_nlos: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for a in assignments {
        let idle = idle_time_s.get(&a.ud).copied().unwrap_or(0.0);
        for &n in &non_los {
            let Some(d2d) = rates.d2d(n, a.ud) else { continue };
            if d2d <= 0.0 {
                continue;
            }
            let two_hop = s / d2d + s / a.rate_bps;
            if two_hop > idle {
                continue;
            }
            let id = g.add_vertex(
                RelayAssignment {
                    nlos_ud: n,
                    relay_ud: a.ud,
                    uav: a.uav,
                    rrb: a.rrb,
                    d2d_rate_bps: d2d,
                    relay_rate_bps: a.rate_bps,
                    two_hop_time_s: two_hop,
                },
                d2d.min(a.rate_bps),
            )?;
            by_relay.entry(a.ud).or_default().push(id);
            by_nlos.entry(n).or_default().push(id);
        }
    }
    for group in by_relay.values().chain(by_nlos.values()) {
        for (i, &a) in group.iter().enumerate() {
            for &b in &group[i + 1..] {
                g.add_edge(a, b)?;
            }
        }
    }
    Ok(g)
}

pub fn solve_p2(graph: &ConflictGraph<RelayAssignment>) -> Vec<RelayAssignment> {
    let mut out = decode(graph, &graphs::greedy_mwis(graph));
    out.sort_by_key(|r| (r.nlos_ud, r.relay_ud));
    out
}

fn finish(scenario: &Scenario, rates: &LinkRateTable, assignments: Vec<Assignment>) -> Result<Schedule> {
    if assignments.is_empty() {
        return Err(Error::Infeasible("no UD can be scheduled to any UAV".into()));
    }
    let idle = compute_idle_times(&assignments, scenario.model_size_bits);
    let relays = solve_p2(&build_p2_graph(scenario, &assignments, &idle, rates)?);
    let (_, non_los) = classify_los(scenario);
    let served: BTreeSet<usize> = relays.iter().map(|r| r.nlos_ud).collect();
    for u in non_los.iter().filter(|u| !served.contains(u)) {
        log::debug!("non-LOS UD {u} has no feasible relay and sits out this iteration");
    }
    Ok(Schedule {
        r_min_bps: min_rate(&assignments),
        assignments,
        relays,
        idle_time_s: idle,
    })
}

/// Full P1 then P2 pipeline.
pub fn schedule_p1p2(scenario: &Scenario, rates: &LinkRateTable, local_iters: u32) -> Result<Schedule> {
    let g = build_p1_graph(scenario, rates, local_iters)?;
    let cap = scenario.rrbs_per_uav * scenario.num_uavs();
    finish(scenario, rates, solve_p1(&g, cap))
}

/// Random clustering followed by the usual P2 step.
pub fn schedule_random<R: Rng + ?Sized>(
    scenario: &Scenario,
    rates: &LinkRateTable,
    local_iters: u32,
    rng: &mut R,
) -> Result<Schedule> {
    let g = build_p1_graph(scenario, rates, local_iters)?;
    let cap = scenario.rrbs_per_uav * scenario.num_uavs();
    finish(scenario, rates, solve_p1_random(&g, cap, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Constraint {
    /// Disjoint clusters, one UD per RRB.
    C1,
    /// A relay serves at most one non-LOS UD, inside its zone.
    C2,
    /// A non-LOS UD uses at most one relay.
    C3,
    /// LOS and rate threshold on every direct link.
    C4,
    /// Relayed delivery within `s / R_min`.
    C5,
    /// Relay idle time covers the two-hop transfer.
    C6,
    /// Iteration time budget.
    C7,
    /// Relays are scheduled UDs; relayed UDs are not.
    C8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.constraint, self.detail)
    }
}

/// Time budget for the C7 check: `iterations * tau <= t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBudget {
    pub iterations: u32,
    pub tau_s: f64,
    pub t_max_s: f64,
}

const REL_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

/// Check C1-C8, recomputing rates and idle times from the scenario.
/// C7 is checked only when a time budget is given.
pub fn validate(schedule: &Schedule, scenario: &Scenario, budget: Option<TimeBudget>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut report = |constraint, detail: String| out.push(Violation { constraint, detail });
    let s = scenario.model_size_bits as f64;

    let mut uds = BTreeSet::new();
    let mut rrbs = BTreeSet::new();
    for a in &schedule.assignments {
        if !uds.insert(a.ud) {
            report(Constraint::C1, format!("UD {} is scheduled more than once", a.ud));
        }
        if a.uav >= scenario.num_uavs() || a.rrb >= scenario.rrbs_per_uav {
            report(Constraint::C1, format!("UAV {} / RRB {} does not exist", a.uav, a.rrb));
            continue;
        }
        if !rrbs.insert((a.uav, a.rrb)) {
            report(
                Constraint::C1,
                format!("RRB {} of UAV {} is double-booked", a.rrb, a.uav),
            );
        }
        match radio::access_rate_bps(scenario, a.ud, a.uav, a.rrb) {
            Ok(r) => {
                if r < scenario.rate_threshold_bps {
                    report(Constraint::C4, format!("UD {} rate {r} below threshold", a.ud));
                }
                if !close(r, a.rate_bps) {
                    report(
                        Constraint::C4,
                        format!("UD {} claims rate {} but link gives {r}", a.ud, a.rate_bps),
                    );
                }
            }
            Err(e) => report(Constraint::C4, format!("UD {} to UAV {}: {e}", a.ud, a.uav)),
        }
    }
    let r_min = min_rate(&schedule.assignments);
    if !schedule.assignments.is_empty() && !close(r_min, schedule.r_min_bps) {
        report(
            Constraint::C5,
            format!("r_min {} differs from minimum rate {r_min}", schedule.r_min_bps),
        );
    }
    let idle = compute_idle_times(&schedule.assignments, scenario.model_size_bits);

    let mut relays = BTreeSet::new();
    let mut served = BTreeSet::new();
    for r in &schedule.relays {
        if !relays.insert(r.relay_ud) {
            report(Constraint::C2, format!("relay {} serves more than one UD", r.relay_ud));
        }
        if !served.insert(r.nlos_ud) {
            report(Constraint::C3, format!("UD {} uses more than one relay", r.nlos_ud));
        }
        if uds.contains(&r.nlos_ud) {
            report(
                Constraint::C8,
                format!("relayed UD {} is also scheduled directly", r.nlos_ud),
            );
        }
        let Some(own) = schedule.assignments.iter().find(|a| a.ud == r.relay_ud) else {
            report(Constraint::C8, format!("relay {} is not a scheduled UD", r.relay_ud));
            continue;
        };
        if own.uav != r.uav || own.rrb != r.rrb {
            report(
                Constraint::C8,
                format!("relay {} forwards on a block it does not hold", r.relay_ud),
            );
        }
        let d2d = match radio::d2d_rate_bps(scenario, r.nlos_ud, r.relay_ud) {
            Ok(d) => d,
            Err(e) => {
                report(Constraint::C2, format!("pair ({}, {}): {e}", r.nlos_ud, r.relay_ud));
                continue;
            }
        };
        let two_hop = s / d2d + s / own.rate_bps;
        if !close(two_hop, r.two_hop_time_s) {
            report(
                Constraint::C5,
                format!(
                    "UD {} claims two-hop time {} but links give {two_hop}",
                    r.nlos_ud, r.two_hop_time_s
                ),
            );
        }
        if two_hop > s / r_min * (1.0 + REL_TOL) {
            report(Constraint::C5, format!("UD {} delivered after s/R_min", r.nlos_ud));
        }
        let relay_idle = idle.get(&r.relay_ud).copied().unwrap_or(0.0);
        if two_hop > relay_idle * (1.0 + REL_TOL) {
            report(
                Constraint::C6,
                format!("relay {} idle {relay_idle} s cannot fit {two_hop} s", r.relay_ud),
            );
        }
    }
    if let Some(b) = budget {
        if f64::from(b.iterations) * b.tau_s > b.t_max_s {
            report(
                Constraint::C7,
                format!("{} iterations of {} s exceed {} s", b.iterations, b.tau_s, b.t_max_s),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{fig3_fixture, NodeParams, UserDevice};

    fn ud(x: f64, y: f64, los: Vec<usize>, p: f64) -> UserDevice {
        UserDevice {
            position: [x, y],
            los,
            energy_budget_j: None,
            params: NodeParams {
                transmit_power_watts: p,
                cpu_freq_hz: 1e9,
                cycles_per_sample: 500.0,
                num_samples: 200,
                capacitance_coeff: 1e-28,
            },
        }
    }

    /// Single UAV at the origin, `rrbs` blocks, no threshold.
    fn one_uav(rrbs: usize, uds: Vec<UserDevice>) -> Scenario {
        let mut s = fig3_fixture();
        s.uavs.truncate(1);
        s.uavs[0].position = [0.0, 0.0, 100.0];
        s.uav_links.clear();
        s.uav_rate_mbps = None;
        s.rrbs_per_uav = rrbs;
        s.rate_threshold_bps = 0.0;
        s.uds = uds;
        s
    }

    fn p1(s: &Scenario) -> ConflictGraph<Assignment> {
        build_p1_graph(s, &LinkRateTable::build(s).unwrap(), 1).unwrap()
    }

    #[test]
    fn one_ud_two_rrbs_gives_cc1_edge() {
        let s = one_uav(2, vec![ud(0.0, 0.0, vec![0], 3.0)]);
        let g = p1(&s);
        assert_eq!(g.len(), 2);
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn two_uds_one_rrb_gives_cc2_edge() {
        let s = one_uav(1, vec![ud(0.0, 0.0, vec![0], 3.0), ud(10.0, 0.0, vec![0], 3.0)]);
        let g = p1(&s);
        assert_eq!(g.len(), 2);
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn weight_falls_as_rate_rises() {
        let s = one_uav(1, vec![ud(0.0, 0.0, vec![0], 3.0)]);
        let slow = p1_weight(&s, 0, 10e6, 1);
        let fast = p1_weight(&s, 0, 40e6, 1);
        assert!(fast < slow);
        // difference is exactly the upload energy gap
        let gap = 3.0 * 9098.0 * (1.0 / 10e6 - 1.0 / 40e6);
        assert!((slow - fast - gap).abs() < 1e-15);
    }

    #[test]
    fn energy_budget_drops_vertices() {
        let mut s = one_uav(1, vec![ud(0.0, 0.0, vec![0], 3.0)]);
        s.uds[0].energy_budget_j = Some(1e-9);
        assert!(p1(&s).is_empty());
    }

    #[test]
    fn single_vertex_and_maximality() {
        let s = one_uav(1, vec![ud(0.0, 0.0, vec![0], 3.0)]);
        let g = p1(&s);
        assert_eq!(solve_p1(&g, 1).len(), 1);
        let s = one_uav(2, vec![ud(0.0, 0.0, vec![0], 3.0), ud(5.0, 0.0, vec![0], 3.0)]);
        let out = solve_p1(&p1(&s), 2);
        assert_eq!(out.len(), 2);
        assert_ne!(out[0].rrb, out[1].rrb);
    }

    #[test]
    fn idle_times() {
        let a = |ud, r: f64| Assignment {
            ud,
            uav: 0,
            rrb: ud,
            rate_bps: r,
            upload_time_s: 9098.0 / r,
        };
        let idle = compute_idle_times(&[a(0, 9e6), a(1, 13e6)], 9098);
        assert_eq!(idle[&0], 0.0);
        // 9098 * (1/9e6 - 1/13e6) = 3.1104e-4 s
        let expected = 9098.0 * 4.0 / (9e6 * 13e6) * 1e6;
        assert!((idle[&1] - expected).abs() < 1e-15);
        assert!((idle[&1] - 3.1104e-4).abs() < 1e-8);
        let same = compute_idle_times(&[a(0, 5e6), a(1, 5e6)], 9098);
        assert!(same.values().all(|&t| t == 0.0));
    }

    /// UAV at origin; fast relay 0 right below it, slow UD 1 far away and
    /// low-powered, non-LOS UDs 2 and 3 near the relay.
    fn relay_world() -> Scenario {
        one_uav(
            4,
            vec![
                ud(0.0, 0.0, vec![0], 3.0),
                ud(300.0, 0.0, vec![0], 1e-5),
                ud(30.0, 0.0, vec![], 3.0),
                ud(-30.0, 0.0, vec![], 3.0),
            ],
        )
    }

    #[test]
    fn relay_with_zero_idle_has_no_vertices() {
        let s = relay_world();
        let rates = LinkRateTable::build(&s).unwrap();
        let sched = solve_p1(&build_p1_graph(&s, &rates, 1).unwrap(), 4);
        let idle: BTreeMap<usize, f64> = sched.iter().map(|a| (a.ud, 0.0)).collect();
        assert!(build_p2_graph(&s, &sched, &idle, &rates).unwrap().is_empty());
    }

    #[test]
    fn one_relay_two_candidates_conflict() {
        let s = relay_world();
        let rates = LinkRateTable::build(&s).unwrap();
        let sched = solve_p1(&build_p1_graph(&s, &rates, 1).unwrap(), 4);
        let idle = compute_idle_times(&sched, s.model_size_bits);
        assert!(idle[&0] > 0.0);
        let g = build_p2_graph(&s, &sched, &idle, &rates).unwrap();
        let from_relay0: Vec<usize> = g
            .vertices()
            .iter()
            .filter(|v| v.payload.relay_ud == 0)
            .map(|v| v.id)
            .collect();
        assert_eq!(from_relay0.len(), 2);
        assert!(g.has_edge(from_relay0[0], from_relay0[1]));
        let relays = solve_p2(&g);
        assert_eq!(relays.len(), 1);
    }

    #[test]
    fn two_relays_same_target_conflict_and_best_wins() {
        // two fast relays near the UAV, one slow LOS UD, one non-LOS UD
        let s = one_uav(
            4,
            vec![
                ud(0.0, 0.0, vec![0], 3.0),
                ud(20.0, 0.0, vec![0], 3.0),
                ud(300.0, 0.0, vec![0], 1e-5),
                ud(70.0, 0.0, vec![], 3.0),
            ],
        );
        let rates = LinkRateTable::build(&s).unwrap();
        let sched = solve_p1(&build_p1_graph(&s, &rates, 1).unwrap(), 4);
        let idle = compute_idle_times(&sched, s.model_size_bits);
        let g = build_p2_graph(&s, &sched, &idle, &rates).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.has_edge(0, 1));
        let best = g
            .vertices()
            .iter()
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
            .unwrap()
            .payload;
        assert_eq!(solve_p2(&g), vec![best]);
    }

    #[test]
    fn pipeline_is_valid() {
        let s = relay_world();
        let rates = LinkRateTable::build(&s).unwrap();
        let sched = schedule_p1p2(&s, &rates, 1).unwrap();
        assert_eq!(sched.relays.len(), 1);
        assert!(validate(&sched, &s, None).is_empty());
        assert_eq!(sched.participants().len(), 3);
    }

    #[test]
    fn injected_double_booking_is_c1() {
        let s = relay_world();
        let rates = LinkRateTable::build(&s).unwrap();
        let mut sched = schedule_p1p2(&s, &rates, 1).unwrap();
        let rrb = sched.assignments[0].rrb;
        sched.assignments[1].rrb = rrb;
        let v = validate(&sched, &s, None);
        assert!(v.iter().any(|x| x.constraint == Constraint::C1), "{v:?}");
    }

    #[test]
    fn injected_long_relay_is_c6() {
        let s = relay_world();
        let rates = LinkRateTable::build(&s).unwrap();
        let mut sched = schedule_p1p2(&s, &rates, 1).unwrap();
        // make every UD equally fast: relay idle collapses to zero
        let mut s2 = s.clone();
        s2.uds[1].params.transmit_power_watts = 3.0;
        s2.uds[1].position = [0.0, 0.0];
        let r = radio::access_rate_bps(&s2, 1, 0, 0).unwrap();
        let slow = sched.assignments.iter_mut().find(|a| a.ud == 1).unwrap();
        slow.rate_bps = r;
        slow.upload_time_s = 9098.0 / r;
        sched.r_min_bps = min_rate(&sched.assignments);
        let v = validate(&sched, &s2, None);
        assert!(v.iter().any(|x| x.constraint == Constraint::C6), "{v:?}");
    }

    #[test]
    fn time_budget_is_c7() {
        let s = relay_world();
        let rates = LinkRateTable::build(&s).unwrap();
        let sched = schedule_p1p2(&s, &rates, 1).unwrap();
        let budget = TimeBudget {
            iterations: 10,
            tau_s: 0.2,
            t_max_s: 1.0,
        };
        let v = validate(&sched, &s, Some(budget));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, Constraint::C7);
    }

    #[test]
    fn schedule_csv_has_row_per_entry() {
        let s = relay_world();
        let rates = LinkRateTable::build(&s).unwrap();
        let sched = schedule_p1p2(&s, &rates, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schedule.csv");
        sched.write_csv(&s, 1, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + sched.assignments.len() + sched.relays.len());
    }
}
