//! Simulated world: UAV and UD placement, LOS flags, per-node parameters.
//!
//! A [`Scenario`] is immutable once built. It is either generated from a
//! [`GenerationConfig`] and a seed, or read from a TOML file whose layout is
//! the serde layout of [`Scenario`] (field order is stable on save).

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::radio::{self, A2AStochasticParams};
use crate::{Error, Result};

/// Compute and radio parameters of a transmitting node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    pub transmit_power_watts: f64,
    pub cpu_freq_hz: f64,
    /// CPU cycles needed per data sample.
    pub cycles_per_sample: f64,
    pub num_samples: u64,
    /// Effective switched capacitance (around 1e-28).
    pub capacitance_coeff: f64,
}

impl NodeParams {
    fn validate(&self, what: &str) -> Result<()> {
        let reals = [
            ("transmit_power_watts", self.transmit_power_watts),
            ("cpu_freq_hz", self.cpu_freq_hz),
            ("cycles_per_sample", self.cycles_per_sample),
            ("capacitance_coeff", self.capacitance_coeff),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{what}: {name} must be positive, got {v}")));
            }
        }
        if self.num_samples == 0 {
            return Err(Error::Validation(format!("{what}: num_samples must be at least 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavParams {
    /// (x, y, altitude) in meters.
    pub position: [f64; 3],
    pub transmit_power_watts: f64,
    pub mass_kg: f64,
    pub gravity: f64,
    pub propeller_radius_m: f64,
    pub num_propellers: f64,
    pub air_density: f64,
    pub beamwidth_deg: f64,
    pub mainlobe_gain: f64,
    pub sidelobe_gain: f64,
}

impl UavParams {
    pub fn altitude(&self) -> f64 {
        self.position[2]
    }

    fn validate(&self, k: usize) -> Result<()> {
        if !(self.altitude() > 0.0) {
            return Err(Error::Validation(format!(
                "UAV {k}: altitude must be positive, got {}",
                self.altitude()
            )));
        }
        let reals = [
            ("transmit_power_watts", self.transmit_power_watts),
            ("mass_kg", self.mass_kg),
            ("gravity", self.gravity),
            ("propeller_radius_m", self.propeller_radius_m),
            ("num_propellers", self.num_propellers),
            ("air_density", self.air_density),
            ("mainlobe_gain", self.mainlobe_gain),
            ("sidelobe_gain", self.sidelobe_gain),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("UAV {k}: {name} must be positive, got {v}")));
            }
        }
        if !(0.0..=180.0).contains(&self.beamwidth_deg) {
            return Err(Error::Validation(format!(
                "UAV {k}: beamwidth_deg must lie in [0, 180], got {}",
                self.beamwidth_deg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDevice {
    /// Ground position (x, y) in meters.
    pub position: [f64; 2],
    /// UAV indices this UD has a line-of-sight link to.
    pub los: Vec<usize>,
    /// Remaining energy budget; `None` means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_budget_j: Option<f64>,
    pub params: NodeParams,
}

/// Propagation constants that no formula here consumes. Accepted so that
/// configs carrying them parse, never read by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnusedPropagation {
    pub a: f64,
    pub b: f64,
    pub psi_los_db: f64,
    pub psi_nlos_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub carrier_hz: f64,
    pub rrbs_per_uav: usize,
    pub rrb_bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub rate_threshold_bps: f64,
    pub model_size_bits: u64,
    pub d2d_zone_radius_m: f64,
    /// Undirected UAV-to-UAV links.
    pub uav_links: Vec<[usize; 2]>,
    /// Optional per-pair A2A rates, `uav_rate_mbps[k][i]` for the k -> i
    /// direction. Zero marks a missing entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uav_rate_mbps: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2a: Option<A2AStochasticParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unused_propagation: Option<UnusedPropagation>,
    pub uavs: Vec<UavParams>,
    pub uds: Vec<UserDevice>,
}

impl Scenario {
    pub fn num_uavs(&self) -> usize {
        self.uavs.len()
    }

    pub fn num_uds(&self) -> usize {
        self.uds.len()
    }

    pub fn has_los(&self, ud: usize, uav: usize) -> bool {
        self.uds.get(ud).is_some_and(|u| u.los.contains(&uav))
    }

    pub fn is_adjacent(&self, k: usize, i: usize) -> bool {
        k != i
            && self
                .uav_links
                .iter()
                .any(|&[a, b]| (a == k && b == i) || (a == i && b == k))
    }

    /// Sorted neighbour list of UAV `k`.
    pub fn uav_neighbors(&self, k: usize) -> Vec<usize> {
        let mut out: BTreeSet<usize> = BTreeSet::new();
        for &[a, b] in &self.uav_links {
            if a == k {
                out.insert(b);
            } else if b == k {
                out.insert(a);
            }
        }
        out.into_iter().collect()
    }

    /// 3-D distance between a UD on the ground and a UAV.
    pub fn ud_uav_distance(&self, ud: usize, uav: usize) -> f64 {
        let [x, y] = self.uds[ud].position;
        let [ux, uy, h] = self.uavs[uav].position;
        ((x - ux).powi(2) + (y - uy).powi(2) + h.powi(2)).sqrt()
    }

    pub fn ud_ud_distance(&self, a: usize, b: usize) -> f64 {
        let [x1, y1] = self.uds[a].position;
        let [x2, y2] = self.uds[b].position;
        ((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt()
    }

    pub fn uav_uav_distance(&self, a: usize, b: usize) -> f64 {
        let p = self.uavs[a].position;
        let q = self.uavs[b].position;
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    }

    /// UAVs that cover `ud`: LOS and access rate at least the threshold.
    pub fn covering_uavs(&self, ud: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.uds[ud]
            .los
            .iter()
            .copied()
            .filter(|&k| {
                radio::access_rate_bps(self, ud, k, 0)
                    .map(|r| r >= self.rate_threshold_bps)
                    .unwrap_or(false)
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("rrb_bandwidth_hz", self.rrb_bandwidth_hz),
            ("d2d_zone_radius_m", self.d2d_zone_radius_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.noise_psd_dbm_hz.is_finite() {
            return Err(Error::Validation("noise_psd_dbm_hz must be finite".into()));
        }
        if !(self.rate_threshold_bps.is_finite() && self.rate_threshold_bps >= 0.0) {
            return Err(Error::Validation(format!(
                "rate_threshold_bps must be non-negative, got {}",
                self.rate_threshold_bps
            )));
        }
        if self.model_size_bits == 0 {
            return Err(Error::Validation("model_size_bits must be positive".into()));
        }
        if self.rrbs_per_uav == 0 {
            return Err(Error::Validation("rrbs_per_uav must be at least 1".into()));
        }
        if self.uavs.is_empty() {
            return Err(Error::Validation("scenario has no UAVs".into()));
        }
        for (k, uav) in self.uavs.iter().enumerate() {
            uav.validate(k)?;
        }
        let h0 = self.uavs[0].altitude();
        if self.uavs.iter().any(|u| u.altitude() != h0) {
            return Err(Error::Validation("all UAVs must share one altitude".into()));
        }
        let k = self.num_uavs();
        for (u, ud) in self.uds.iter().enumerate() {
            ud.params.validate(&format!("UD {u}"))?;
            if let Some(&bad) = ud.los.iter().find(|&&idx| idx >= k) {
                return Err(Error::Validation(format!("UD {u}: LOS entry {bad} is not a UAV index")));
            }
            if let Some(b) = ud.energy_budget_j {
                if !(b >= 0.0) {
                    return Err(Error::Validation(format!("UD {u}: energy budget must be non-negative")));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for &[a, b] in &self.uav_links {
            if a == b {
                return Err(Error::Validation(format!("UAV link {a}-{b} is a self-loop")));
            }
            if a >= k || b >= k {
                return Err(Error::Validation(format!("UAV link {a}-{b} references a missing UAV")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Validation(format!("UAV link {a}-{b} is listed twice")));
            }
        }
        if let Some(m) = &self.uav_rate_mbps {
            if m.len() != k || m.iter().any(|row| row.len() != k) {
                return Err(Error::Validation(format!("uav_rate_mbps must be a {k}x{k} matrix")));
            }
            if m.iter().flatten().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(Error::Validation("uav_rate_mbps entries must be non-negative".into()));
            }
        }
        if let Some(p) = &self.a2a {
            p.validate()?;
        }
        Ok(())
    }

    /// Serialize to TOML with deterministic field order.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}

/// Partition of all UDs into covered (LOS and rate >= R_0) and the rest.
pub fn classify_los(scenario: &Scenario) -> (Vec<usize>, Vec<usize>) {
    (0..scenario.num_uds()).partition(|&u| !scenario.covering_uavs(u).is_empty())
}

/// Knobs for [`generate`]. Defaults follow the desk-scale training setup:
/// 20 UDs, 5 UAVs with 7 RRBs of 2 MHz each, 400 m disc, 100 m altitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub num_uds: usize,
    pub num_uavs: usize,
    pub area_radius_m: f64,
    pub altitude_m: f64,
    pub rrbs_per_uav: usize,
    pub rrb_bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub rate_threshold_bps: f64,
    pub model_size_bits: u64,
    /// Probability that a given (UD, UAV) pair has line of sight.
    pub p_los: f64,
    /// UAV pairs closer than this are linked.
    pub uav_link_range_m: f64,
    pub d2d_zone_radius_m: f64,
    /// UD transmit power is drawn log-uniformly from this range.
    pub ud_power_w: (f64, f64),
    pub uav_power_w: f64,
    pub cpu_freq_hz: (f64, f64),
    pub cycles_per_sample: (f64, f64),
    pub num_samples: u64,
    pub capacitance_coeff: f64,
    pub uav_mass_kg: f64,
    pub propeller_radius_m: f64,
    pub num_propellers: f64,
    pub air_density: f64,
    pub beamwidth_deg: f64,
    pub mainlobe_gain: f64,
    pub sidelobe_gain: f64,
    pub energy_budget_j: Option<f64>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            num_uds: 20,
            num_uavs: 5,
            area_radius_m: 400.0,
            altitude_m: 100.0,
            rrbs_per_uav: 7,
            rrb_bandwidth_hz: 2.0e6,
            carrier_hz: 1.0e9,
            noise_psd_dbm_hz: -174.0,
            rate_threshold_bps: 40.0e6,
            model_size_bits: 9098,
            p_los: 0.7,
            uav_link_range_m: 500.0,
            d2d_zone_radius_m: 100.0,
            ud_power_w: (3.0, 3.0),
            uav_power_w: 1.0,
            cpu_freq_hz: (0.3e6, 1.0e9),
            cycles_per_sample: (400.0, 600.0),
            num_samples: 200,
            capacitance_coeff: 1e-28,
            uav_mass_kg: 0.5,
            propeller_radius_m: 0.25,
            num_propellers: 4.0,
            air_density: 1.225,
            beamwidth_deg: 30.0,
            mainlobe_gain: 10.0,
            sidelobe_gain: 0.1,
            energy_budget_j: None,
        }
    }
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Place UDs uniformly in the disc and one UAV per equal-angle sector.
///
/// Links join UAVs within `uav_link_range_m`; if that leaves the UAV graph
/// disconnected, the shortest link between components is added until it is
/// connected, since dissemination needs a connected topology.
pub fn generate(config: &GenerationConfig, seed: u64) -> Result<Scenario> {
    if config.num_uds == 0 || config.num_uavs == 0 {
        return Err(Error::Config("generation needs at least one UD and one UAV".into()));
    }
    if !(config.area_radius_m > 0.0 && config.altitude_m > 0.0) {
        return Err(Error::Config("area radius and altitude must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.p_los) {
        return Err(Error::Config(format!("p_los must lie in [0, 1], got {}", config.p_los)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = config.area_radius_m;
    let k = config.num_uavs;

    let sector = std::f64::consts::TAU / k as f64;
    let uavs: Vec<UavParams> = (0..k)
        .map(|i| {
            let theta = sector * (i as f64 + rng.random::<f64>());
            let rho = r * rng.random::<f64>().sqrt();
            UavParams {
                position: [rho * theta.cos(), rho * theta.sin(), config.altitude_m],
                transmit_power_watts: config.uav_power_w,
                mass_kg: config.uav_mass_kg,
                gravity: 9.81,
                propeller_radius_m: config.propeller_radius_m,
                num_propellers: config.num_propellers,
                air_density: config.air_density,
                beamwidth_deg: config.beamwidth_deg,
                mainlobe_gain: config.mainlobe_gain,
                sidelobe_gain: config.sidelobe_gain,
            }
        })
        .collect();

    let uds: Vec<UserDevice> = (0..config.num_uds)
        .map(|_| {
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            let rho = r * rng.random::<f64>().sqrt();
            let los = (0..k).filter(|_| rng.random::<f64>() < config.p_los).collect();
            let (plo, phi) = config.ud_power_w;
            let power = if phi > plo {
                (plo.ln() + rng.random::<f64>() * (phi.ln() - plo.ln())).exp()
            } else {
                plo
            };
            UserDevice {
                position: [rho * theta.cos(), rho * theta.sin()],
                los,
                energy_budget_j: config.energy_budget_j,
                params: NodeParams {
                    transmit_power_watts: power,
                    cpu_freq_hz: sample_range(&mut rng, config.cpu_freq_hz),
                    cycles_per_sample: sample_range(&mut rng, config.cycles_per_sample),
                    num_samples: config.num_samples,
                    capacitance_coeff: config.capacitance_coeff,
                },
            }
        })
        .collect();

    let dist = |a: usize, b: usize| {
        let p = uavs[a].position;
        let q = uavs[b].position;
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    };
    let mut links = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            if dist(a, b) <= config.uav_link_range_m {
                links.push([a, b]);
            }
        }
    }
    // union-find over the link set, then bridge components greedily
    let mut comp: Vec<usize> = (0..k).collect();
    fn find(c: &mut [usize], x: usize) -> usize {
        let mut x = x;
        while c[x] != x {
            c[x] = c[c[x]];
            x = c[x];
        }
        x
    }
    for &[a, b] in &links {
        let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
        comp[ra] = rb;
    }
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..k {
            for b in a + 1..k {
                if find(&mut comp, a) != find(&mut comp, b) {
                    let d = dist(a, b);
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, a, b));
                    }
                }
            }
        }
        match best {
            Some((_, a, b)) => {
                links.push([a, b]);
                let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
                comp[ra] = rb;
            }
            None => break,
        }
    }
    links.sort_unstable();

    let noise_w = radio::noise_power_w(config.noise_psd_dbm_hz, config.rrb_bandwidth_hz);
    let scenario = Scenario {
        seed,
        carrier_hz: config.carrier_hz,
        rrbs_per_uav: config.rrbs_per_uav,
        rrb_bandwidth_hz: config.rrb_bandwidth_hz,
        noise_psd_dbm_hz: config.noise_psd_dbm_hz,
        rate_threshold_bps: config.rate_threshold_bps,
        model_size_bits: config.model_size_bits,
        d2d_zone_radius_m: config.d2d_zone_radius_m,
        uav_links: links,
        uav_rate_mbps: None,
        a2a: Some(A2AStochasticParams::default_with_noise(noise_w)),
        unused_propagation: Some(UnusedPropagation {
            a: 9.6,
            b: 0.28,
            psi_los_db: 1.0,
            psi_nlos_db: 20.0,
        }),
        uavs,
        uds,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// The five-UAV topology used as the worked dissemination example, with the
/// per-direction rates of that example (Mb/s). UAV `n` of the example is
/// index `n - 1` here. UDs are not part of the fixture.
pub fn fig3_fixture() -> Scenario {
    const LINKS: [(usize, usize, f64, f64); 5] = [
        // (a, b, rate a->b, rate b->a), 1-based
        (1, 2, 10.0, 12.0),
        (1, 4, 14.0, 13.0),
        (2, 3, 9.0, 11.0),
        (2, 4, 11.0, 15.0),
        (3, 5, 15.0, 16.0),
    ];
    let k = 5;
    let mut rates = vec![vec![0.0; k]; k];
    let mut links = Vec::new();
    for (a, b, ab, ba) in LINKS {
        rates[a - 1][b - 1] = ab;
        rates[b - 1][a - 1] = ba;
        links.push([a - 1, b - 1]);
    }
    let defaults = GenerationConfig::default();
    let uav = |x: f64, y: f64| UavParams {
        position: [x, y, defaults.altitude_m],
        transmit_power_watts: defaults.uav_power_w,
        mass_kg: defaults.uav_mass_kg,
        gravity: 9.81,
        propeller_radius_m: defaults.propeller_radius_m,
        num_propellers: defaults.num_propellers,
        air_density: defaults.air_density,
        beamwidth_deg: defaults.beamwidth_deg,
        mainlobe_gain: defaults.mainlobe_gain,
        sidelobe_gain: defaults.sidelobe_gain,
    };
    Scenario {
        seed: 0,
        carrier_hz: defaults.carrier_hz,
        rrbs_per_uav: defaults.rrbs_per_uav,
        rrb_bandwidth_hz: defaults.rrb_bandwidth_hz,
        noise_psd_dbm_hz: defaults.noise_psd_dbm_hz,
        rate_threshold_bps: defaults.rate_threshold_bps,
        model_size_bits: 9098,
        d2d_zone_radius_m: defaults.d2d_zone_radius_m,
        uav_links: links,
        uav_rate_mbps: Some(rates),
        a2a: None,
        unused_propagation: None,
        uavs: vec![
            uav(-200.0, 100.0),
            uav(0.0, 0.0),
            uav(200.0, 0.0),
            uav(-100.0, -150.0),
            uav(350.0, 100.0),
        ],
        uds: Vec::new(),
    }
}
