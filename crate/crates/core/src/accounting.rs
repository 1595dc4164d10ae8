//! Per-iteration time and energy ledger.
//!
//! Time of one global iteration:
//! `tau = max T_comp + s/R_min + max_k s/R_k + T_diss`.
//! UDs pay computation plus upload energy, UAVs pay hovering for the whole
//! `tau` plus downlink energy at power `P` for `s/R_k`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dissemination::DisseminationTrace;
use crate::radio::{self, LinkRateTable};
use crate::scenario::{NodeParams, Scenario, UavParams};
use crate::scheduling::Schedule;
use crate::{Error, Result};

/// Default FL time budget in seconds.
pub const DEFAULT_T_MAX_S: f64 = 1.0;

/// Central parameter server used by the star and HFL baselines.
pub const CPS_POSITION: [f64; 3] = [0.0, 0.0, 10.0];
pub const CPS_POWER_W: f64 = 5.0;

fn cps_distance(p: [f64; 3]) -> f64 {
    ((p[0] - CPS_POSITION[0]).powi(2) + (p[1] - CPS_POSITION[1]).powi(2) + (p[2] - CPS_POSITION[2]).powi(2)).sqrt()
}

/// `T_l * C * D / f`.
pub fn compute_time_s(node: &NodeParams, local_iters: u32) -> f64 {
    f64::from(local_iters) * node.cycles_per_sample * node.num_samples as f64 / node.cpu_freq_hz
}

/// `T_l * C * D * alpha * f^2`.
pub fn compute_energy_j(node: &NodeParams, local_iters: u32) -> f64 {
    f64::from(local_iters)
        * node.cycles_per_sample
        * node.num_samples as f64
        * node.capacitance_coeff
        * node.cpu_freq_hz.powi(2)
}

pub fn comm_energy_j(power_w: f64, duration_s: f64) -> f64 {
    power_w * duration_s
}

/// `sqrt((m g)^3 / (2 pi r_p^2 n_p rho))`.
pub fn hover_power_w(uav: &UavParams) -> f64 {
    let mg = uav.mass_kg * uav.gravity;
    (mg.powi(3) / (2.0 * std::f64::consts::PI * uav.propeller_radius_m.powi(2) * uav.num_propellers * uav.air_density))
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UdEnergy {
    pub comp_j: f64,
    pub com_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UavEnergy {
    pub hover_j: f64,
    pub com_j: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationCosts {
    pub t_comp_s: f64,
    pub t_uplink_s: f64,
    pub t_diss_s: f64,
    pub t_downlink_s: f64,
    pub tau_s: f64,
    pub ud_energy: BTreeMap<usize, UdEnergy>,
    pub uav_energy: BTreeMap<usize, UavEnergy>,
}

impl IterationCosts {
    pub fn ud_total_j(&self) -> f64 {
        self.ud_energy.values().map(|e| e.comp_j + e.com_j).sum()
    }

    pub fn uav_total_j(&self) -> f64 {
        self.uav_energy.values().map(|e| e.hover_j + e.com_j).sum()
    }

    pub fn total_energy_j(&self) -> f64 {
        self.ud_total_j() + self.uav_total_j()
    }

    /// Same iteration with `t_diss_s` of dissemination instead of the
    /// current value; hovering is re-charged over the new `tau`.
    pub fn with_dissemination(&self, scenario: &Scenario, t_diss_s: f64) -> IterationCosts {
        let mut out = self.clone();
        out.tau_s += t_diss_s - self.t_diss_s;
        out.t_diss_s = t_diss_s;
        for (k, e) in &mut out.uav_energy {
            e.hover_j = hover_power_w(&scenario.uavs[*k]) * out.tau_s;
        }
        out
    }

    /// True when `iterations` repetitions of this iteration exceed `t_max_s`.
    pub fn exceeds_time_budget(&self, iterations: u32, t_max_s: f64) -> bool {
        f64::from(iterations) * self.tau_s > t_max_s
    }
}

/// Cost of one global iteration under `schedule`.
///
/// `trace` is the dissemination run of this iteration, `None` when the
/// aggregation topology needs none. The downlink term uses the common
/// downlink rate of each UAV's directly scheduled cluster.
pub fn iteration_costs(
    scenario: &Scenario,
    schedule: &Schedule,
    trace: Option<&DisseminationTrace>,
    local_iters: u32,
) -> Result<IterationCosts> {
    if schedule.assignments.is_empty() {
        return Err(Error::Infeasible("schedule has no assignments".into()));
    }
    let s = scenario.model_size_bits as f64;
    let mut costs = IterationCosts::default();

    for a in &schedule.assignments {
        let node = &scenario.uds[a.ud].params;
        costs.t_comp_s = costs.t_comp_s.max(compute_time_s(node, local_iters));
        let e = costs.ud_energy.entry(a.ud).or_default();
        e.comp_j += compute_energy_j(node, local_iters);
        e.com_j += comm_energy_j(node.transmit_power_watts, s / a.rate_bps);
    }
    for r in &schedule.relays {
        let nlos = &scenario.uds[r.nlos_ud].params;
        costs.t_comp_s = costs.t_comp_s.max(compute_time_s(nlos, local_iters));
        let e = costs.ud_energy.entry(r.nlos_ud).or_default();
        e.comp_j += compute_energy_j(nlos, local_iters);
        e.com_j += comm_energy_j(nlos.transmit_power_watts, s / r.d2d_rate_bps);
        // forwarding leg paid by the relay
        let relay = &scenario.uds[r.relay_ud].params;
        costs.ud_energy.entry(r.relay_ud).or_default().com_j +=
            comm_energy_j(relay.transmit_power_watts, s / r.relay_rate_bps);
    }
    costs.t_uplink_s = s / schedule.r_min_bps;

    let mut rates = LinkRateTable::default();
    rates.set_downlink(scenario, &schedule.direct_clusters())?;
    let mut downlink_time = BTreeMap::new();
    for (&k, &r) in &rates.downlink_rate {
        let t = s / r;
        costs.t_downlink_s = costs.t_downlink_s.max(t);
        downlink_time.insert(k, t);
    }
    costs.t_diss_s = trace.map_or(0.0, |t| t.t_diss_s);
    costs.tau_s = costs.t_comp_s + costs.t_uplink_s + costs.t_downlink_s + costs.t_diss_s;

    for (k, uav) in scenario.uavs.iter().enumerate() {
        let com_j = downlink_time
            .get(&k)
            .map_or(0.0, |&t| comm_energy_j(uav.transmit_power_watts, t));
        costs.uav_energy.insert(
            k,
            UavEnergy {
                hover_j: hover_power_w(uav) * costs.tau_s,
                com_j,
            },
        );
    }
    Ok(costs)
}

/// Star topology: every participant uploads straight to the CPS on its own
/// RRB and the CPS broadcasts back at the slowest participant's rate. No
/// UAV is involved, so no UAV energy is charged.
pub fn star_iteration_costs(scenario: &Scenario, participants: &[usize], local_iters: u32) -> Result<IterationCosts> {
    if participants.is_empty() {
        return Err(Error::Infeasible("star topology has no participants".into()));
    }
    let s = scenario.model_size_bits as f64;
    let mut costs = IterationCosts::default();
    let mut down_rate = f64::INFINITY;
    for &u in participants {
        let ud = scenario
            .uds
            .get(u)
            .ok_or_else(|| Error::Domain(format!("UD {u} does not exist")))?;
        let [x, y] = ud.position;
        let d = cps_distance([x, y, 0.0]);
        let up = radio::link_rate_bps(scenario, ud.params.transmit_power_watts, d)?;
        down_rate = down_rate.min(radio::link_rate_bps(scenario, CPS_POWER_W, d)?);
        costs.t_comp_s = costs.t_comp_s.max(compute_time_s(&ud.params, local_iters));
        costs.t_uplink_s = costs.t_uplink_s.max(s / up);
        costs.ud_energy.insert(
            u,
            UdEnergy {
                comp_j: compute_energy_j(&ud.params, local_iters),
                com_j: comm_energy_j(ud.params.transmit_power_watts, s / up),
            },
        );
    }
    costs.t_downlink_s = s / down_rate;
    costs.tau_s = costs.t_comp_s + costs.t_uplink_s + costs.t_downlink_s;
    Ok(costs)
}

/// Hierarchical topology: the FedMoD cluster uplink, then every UAV
/// forwards its cluster model to the CPS and the CPS broadcasts the global
/// model back to the UAVs. The CPS legs take the place of dissemination.
pub fn hfl_iteration_costs(scenario: &Scenario, schedule: &Schedule, local_iters: u32) -> Result<IterationCosts> {
    let mut costs = iteration_costs(scenario, schedule, None, local_iters)?;
    let s = scenario.model_size_bits as f64;
    let clusters = schedule.clusters();
    let mut backhaul_up = 0.0f64;
    let mut cps_down = f64::INFINITY;
    let mut uav_up_time = BTreeMap::new();
    for &k in clusters.keys() {
        let uav = &scenario.uavs[k];
        let d = cps_distance(uav.position);
        let t = s / radio::link_rate_bps(scenario, uav.transmit_power_watts, d)?;
        backhaul_up = backhaul_up.max(t);
        uav_up_time.insert(k, t);
        cps_down = cps_down.min(radio::link_rate_bps(scenario, CPS_POWER_W, d)?);
    }
    let backhaul = backhaul_up + s / cps_down;
    // the backhaul sits where dissemination would
    costs.t_diss_s = backhaul;
    costs.tau_s += backhaul;
    for (k, uav) in scenario.uavs.iter().enumerate() {
        let e = costs.uav_energy.get_mut(&k).expect("every UAV has an entry");
        e.hover_j = hover_power_w(uav) * costs.tau_s;
        if let Some(&t) = uav_up_time.get(&k) {
            e.com_j += comm_energy_j(uav.transmit_power_watts, t);
        }
    }
    Ok(costs)
}
