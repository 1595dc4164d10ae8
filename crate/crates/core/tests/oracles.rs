//! Worked values recomputed by hand in the test, and the published figures
//! of the five-UAV dissemination example.

mod common;

use fedmod_core::accounting::{comm_energy_j, compute_time_s};
use fedmod_core::dissemination::{
    dissemination_gap, fig3_script, replay, run_dissemination, DisseminationPolicy, SideInformation, UavNetwork,
};
use fedmod_core::graphs::{greedy_min_wis, greedy_mwis, ConflictGraph};
use fedmod_core::radio::{link_rate_bps, uav_pair_rate_bps, UavRateMode};
use fedmod_core::scenario::{fig3_fixture, NodeParams};
use fedmod_core::scheduling::{compute_idle_times, Assignment};

const S: u64 = 9098;

#[test]
fn shannon_rate_at_three_watts() {
    let s = fig3_fixture();
    // N = 10^(-174/10) mW/Hz * 2 MHz, G = 10^(-PL/10), PL = 20 log10(4 pi d f / c)
    let noise = 10f64.powf(-17.4) * 1e-3 * 2e6;
    let pl = 20.0 * (4.0 * std::f64::consts::PI * 100.0 * 1e9 / 3e8).log10();
    let snr = 3.0 * 10f64.powf(-pl / 10.0) / noise;
    let oracle = 2e6 * (1.0 + snr).log2();
    assert!((noise - 7.96e-15).abs() < 0.05e-15);
    assert!((snr / 2.15e7 - 1.0).abs() < 0.01);
    let r = link_rate_bps(&s, 3.0, 100.0).unwrap();
    assert!((r - oracle).abs() < 1e-6);
    assert!((r / 1e6 - 48.7).abs() < 0.05, "{r}");
}

#[test]
fn halving_bandwidth_less_than_halves_rate() {
    let mut s = fig3_fixture();
    let full = link_rate_bps(&s, 3.0, 100.0).unwrap();
    s.rrb_bandwidth_hz /= 2.0;
    let half = link_rate_bps(&s, 3.0, 100.0).unwrap();
    assert!(half > full / 2.0);
}

#[test]
fn fixture_rates() {
    let s = fig3_fixture();
    let mode = UavRateMode::for_scenario(&s);
    // UAV n of the example is index n - 1
    let r = |a: usize, b: usize| uav_pair_rate_bps(&s, a - 1, b - 1, mode).unwrap() / 1e6;
    assert_eq!(r(2, 3), 9.0);
    assert_eq!(r(2, 1), 12.0);
    assert_eq!(r(2, 4), 11.0);
}

#[test]
fn replay_rounds_match_the_worked_example() {
    let s = fig3_fixture();
    let net = UavNetwork::from_scenario(&s).unwrap();
    let trace = replay(&SideInformation::initial(5), &net, S, &fig3_script()).unwrap();
    let rates: Vec<f64> = trace.rounds.iter().map(|r| r.rate_bps / 1e6).collect();
    assert_eq!(rates, vec![9.0, 13.0, 10.0, 11.0, 11.0]);
    let hops: Vec<f64> = trace.broadcast_hops.iter().map(|h| h.rate_bps / 1e6).collect();
    assert_eq!(hops, vec![9.0, 15.0]);
    let oracle =
        S as f64 * (1.0 / 9.0 + 1.0 / 13.0 + 1.0 / 10.0 + 1.0 / 11.0 + 1.0 / 11.0 + 1.0 / 9.0 + 1.0 / 15.0) * 1e-6;
    assert!((trace.t_diss_s - oracle).abs() < 1e-15);
    assert!((trace.t_diss_s - 0.0059).abs() < 1e-5);
    // round 4: UAV 3 sends w5 xor w2 to UAVs 2 and 5
    let p = &trace.rounds[3].packets[0];
    assert_eq!(p.tx, 2);
    assert_eq!(p.payload.iter().copied().collect::<Vec<_>>(), vec![1, 4]);
    assert_eq!(p.targets.iter().copied().collect::<Vec<_>>(), vec![1, 4]);
    // the highest gap: model of UAV 5 reaches UAV 1 after three transmissions
    let gap = dissemination_gap(&trace);
    assert_eq!(gap[&(4, 0)], 3);
}

#[test]
fn complete_graph_gap_is_bounded_by_k() {
    for k in 2..=6 {
        let net = UavNetwork::complete(k, |a, b| 1e7 + 1e5 * (a * k + b) as f64).unwrap();
        let trace = run_dissemination(
            &SideInformation::initial(k),
            &net,
            S,
            &DisseminationPolicy::recommended(),
        )
        .unwrap();
        assert!(dissemination_gap(&trace).values().all(|&d| d <= k));
    }
}

fn graph(weights: &[f64], edges: &[(usize, usize)]) -> ConflictGraph<()> {
    let mut g = ConflictGraph::new();
    for &w in weights {
        g.add_vertex((), w).unwrap();
    }
    for &(a, b) in edges {
        g.add_edge(a, b).unwrap();
    }
    g
}

#[test]
fn greedy_worked_examples() {
    let triangle = graph(&[3.0, 2.0, 1.0], &[(0, 1), (1, 2), (0, 2)]);
    assert_eq!(greedy_mwis(&triangle).total_weight, 3.0);
    let path = graph(&[1.0, 5.0, 1.0], &[(0, 1), (1, 2)]);
    assert_eq!(greedy_mwis(&path).ids.into_iter().collect::<Vec<_>>(), vec![1]);
    assert_eq!(greedy_min_wis(&path, 3).total_weight, 2.0);
    let star = graph(&[10.0, 1.0, 1.0, 1.0], &[(0, 1), (0, 2), (0, 3)]);
    assert_eq!(greedy_mwis(&star).ids.into_iter().collect::<Vec<_>>(), vec![0]);
    let pair = graph(&[4.0, 1.0], &[]);
    assert_eq!(greedy_min_wis(&pair, 2).total_weight, 5.0);
}

#[test]
fn idle_time_of_the_faster_ud() {
    let a = |ud, rate_bps| Assignment {
        ud,
        uav: 0,
        rrb: ud,
        rate_bps,
        upload_time_s: S as f64 / rate_bps,
    };
    let idle = compute_idle_times(&[a(0, 9e6), a(1, 13e6)], S);
    let oracle = 9098.0 * (1.0 / 9e6 - 1.0 / 13e6);
    assert_eq!(idle[&0], 0.0);
    assert!((idle[&1] - oracle).abs() < 1e-15);
    assert!((idle[&1] - 3.110e-4).abs() < 1e-7);
}

#[test]
fn compute_time_and_comm_energy() {
    let node = NodeParams {
        transmit_power_watts: 3.0,
        cpu_freq_hz: 1e9,
        cycles_per_sample: 500.0,
        num_samples: 200,
        capacitance_coeff: 1e-28,
    };
    assert!((compute_time_s(&node, 1) - 1e-4).abs() < 1e-18);
    // faster links cost less energy for the same model
    let e = |r: f64| comm_energy_j(3.0, S as f64 / r);
    assert!(e(20e6) < e(10e6));
    assert!((e(10e6) - 3.0 * 9098.0 / 10e6).abs() < 1e-15);
}
