//! Per-seed experiment execution and result files.
//!
//! Output layout of a run directory:
//! - `config.toml`: the resolved configuration
//! - `seed_<n>.csv`: one row per iteration (training) or per transmission
//!   step (dissemination modes)
//! - `seed_<n>_schedule.csv`, `seed_<n>_trace.log`: supporting detail
//! - `summary.json`: per-seed metrics and their mean and standard deviation,
//!   all recomputable from the per-seed CSVs

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accounting::{self, IterationCosts};
use crate::dissemination::{
    fig3_script, replay, run_dissemination, DisseminationPolicy, DisseminationTrace, SideInformation, UavNetwork,
};
use crate::harness::config::{Algorithm, DataSource, ExperimentConfig, Mode, ScenarioSource, SchedulerKind};
use crate::learning::data::{partition_noniid, synthetic, Dataset};
use crate::learning::mnist::load_mnist;
use crate::learning::model::ModelSpec;
use crate::learning::train::{run_fedmod, run_hfl, run_star, FedModConfig, FlProblem, TrainConfig, TrainHistory};
use crate::radio::LinkRateTable;
use crate::scenario::{fig3_fixture, generate, Scenario};
use crate::scheduling::{schedule_p1p2, schedule_random, Schedule};
use crate::{Error, Result};

/// Version of the CSV and summary layout; `compare` refuses to mix versions.
pub const SCHEMA_VERSION: u32 = 1;

/// One row of a training CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub iteration: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub grad_norm_sq: f64,
    pub consensus_gap: f64,
    pub t_diss_s: f64,
    pub diss_rounds: usize,
    pub full_dissemination: bool,
    pub tau_s: f64,
    pub ud_energy_j: f64,
    pub uav_energy_j: f64,
    pub total_energy_j: f64,
}

/// One row of a dissemination CSV: a coded round or a broadcast hop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisseminationRow {
    pub step: usize,
    pub kind: String,
    pub transmitters: String,
    pub rate_bps: f64,
    pub step_time_s: f64,
    pub t_diss_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
    pub higher_is_better: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub name: String,
    pub mode: Mode,
    pub algorithm: Algorithm,
    pub scheduler: SchedulerKind,
    pub dissemination_period: usize,
    pub seeds: Vec<SeedSummary>,
    pub metrics: BTreeMap<String, MetricSummary>,
}

/// Result of one seed, before it is written anywhere.
#[derive(Debug, Clone)]
pub enum SeedOutcome {
    Train {
        seed: u64,
        rows: Vec<TrainRow>,
        schedule: Schedule,
        scenario: Box<Scenario>,
        history: TrainHistory,
    },
    Disseminate {
        seed: u64,
        rows: Vec<DisseminationRow>,
        trace: DisseminationTrace,
    },
}

impl SeedOutcome {
    pub fn seed(&self) -> u64 {
        match self {
            SeedOutcome::Train { seed, .. } | SeedOutcome::Disseminate { seed, .. } => *seed,
        }
    }

    /// Metrics of this seed, each derivable from its CSV rows.
    pub fn metrics(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match self {
            SeedOutcome::Train { rows, .. } => {
                let last = rows.last();
                m.insert("final_accuracy".into(), last.map_or(0.0, |r| r.accuracy));
                m.insert("final_loss".into(), last.map_or(0.0, |r| r.loss));
                m.insert("total_energy_j".into(), rows.iter().map(|r| r.total_energy_j).sum());
                m.insert("total_time_s".into(), rows.iter().map(|r| r.tau_s).sum());
                m.insert(
                    "max_diss_rounds".into(),
                    rows.iter().map(|r| r.diss_rounds).max().unwrap_or(0) as f64,
                );
            }
            SeedOutcome::Disseminate { rows, trace, .. } => {
                m.insert("t_diss_s".into(), rows.last().map_or(0.0, |r| r.t_diss_s));
                m.insert("rounds".into(), trace.num_rounds() as f64);
                m.insert(
                    "broadcast_hops".into(),
                    rows.iter().filter(|r| r.kind == "broadcast").count() as f64,
                );
            }
        }
        m
    }
}

fn higher_is_better(metric: &str) -> bool {
    matches!(metric, "final_accuracy")
}

fn load_scenario(cfg: &ExperimentConfig, seed: u64) -> Result<Scenario> {
    let mut scenario = match &cfg.scenario {
        ScenarioSource::Generate(g) => generate(g, seed)?,
        ScenarioSource::File { path } => Scenario::load(path)?,
        ScenarioSource::Fig3 => fig3_fixture(),
    };
    if let Some(links) = &cfg.uav_links {
        scenario.uav_links = links.clone();
        scenario.validate()?;
    }
    Ok(scenario)
}

fn load_data(cfg: &ExperimentConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    match &cfg.data.dataset {
        DataSource::Synthetic(s) => synthetic(s, seed),
        DataSource::Mnist {
            train_images,
            train_labels,
            test_images,
            test_labels,
            max_train,
        } => {
            let train = load_mnist(train_images, train_labels)?;
            let test = load_mnist(test_images, test_labels)?;
            let train = match max_train {
                Some(n) if *n < train.len() => train.subset(&(0..*n).collect::<Vec<_>>()),
                _ => train,
            };
            Ok((train, test))
        }
    }
}

fn policy(cfg: &ExperimentConfig) -> DisseminationPolicy {
    if cfg.front_runner_priority {
        DisseminationPolicy::recommended()
    } else {
        DisseminationPolicy::literal()
    }
}

/// Cluster of every UD for the data split: its UAV when scheduled, its
/// first LOS UAV otherwise, and a round-robin UAV as a last resort.
fn partition_groups(scenario: &Scenario, schedule: &Schedule) -> Vec<usize> {
    let mut group: Vec<Option<usize>> = vec![None; scenario.num_uds()];
    for (&k, uds) in &schedule.clusters() {
        for &u in uds {
            group[u] = Some(k);
        }
    }
    group
        .into_iter()
        .enumerate()
        .map(|(u, g)| {
            g.or_else(|| scenario.uds[u].los.first().copied())
                .unwrap_or(u % scenario.num_uavs())
        })
        .collect()
}

fn make_schedule(cfg: &ExperimentConfig, scenario: &Scenario, rates: &LinkRateTable, seed: u64) -> Result<Schedule> {
    match cfg.scheduler {
        SchedulerKind::P1p2 => schedule_p1p2(scenario, rates, cfg.train.local_iters),
        SchedulerKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            schedule_random(scenario, rates, cfg.train.local_iters, &mut rng)
        }
    }
}

fn train_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let scenario = load_scenario(cfg, seed)?;
    let rates = LinkRateTable::build(&scenario)?;
    let schedule = make_schedule(cfg, &scenario, &rates, seed)?;
    let (train, test) = load_data(cfg, seed)?;
    let groups = partition_groups(&scenario, &schedule);
    let partition = partition_noniid(
        &train,
        &groups,
        cfg.data.labels_per_ud,
        cfg.data.labels_per_cluster,
        seed,
    )?;
    let spec = ModelSpec {
        kind: cfg.model,
        num_features: train.num_features,
        num_classes: train.num_classes,
    };
    let problem = FlProblem {
        spec,
        train,
        test,
        partition,
        init_seed: seed,
    };
    let tc = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let t_l = tc.local_iters;
    let clusters = schedule.clusters();
    let participants = schedule.participants();
    log::info!(
        "seed {seed}: {} participants ({} relayed), r_min {:.3} Mb/s",
        participants.len(),
        schedule.relays.len(),
        schedule.r_min_bps / 1e6
    );
    let (history, costs): (TrainHistory, Box<dyn Fn(f64) -> IterationCosts>) = match cfg.algorithm {
        Algorithm::Fedmod => {
            let net = UavNetwork::from_table(scenario.num_uavs(), &rates)?;
            let fm = FedModConfig {
                period: cfg.dissemination_period,
                partial_rounds: cfg.partial_rounds,
                policy: policy(cfg),
            };
            let h = run_fedmod(&problem, &clusters, &net, scenario.model_size_bits, &tc, &fm)?;
            let base = accounting::iteration_costs(&scenario, &schedule, None, t_l)?;
            let sc = scenario.clone();
            (h, Box::new(move |t_diss| base.with_dissemination(&sc, t_diss)))
        }
        Algorithm::Star => {
            let h = run_star(&problem, &participants, &tc)?;
            let base = accounting::star_iteration_costs(&scenario, &participants, t_l)?;
            (h, Box::new(move |_| base.clone()))
        }
        Algorithm::Hfl => {
            let h = run_hfl(&problem, &clusters, scenario.num_uavs(), &tc)?;
            let base = accounting::hfl_iteration_costs(&scenario, &schedule, t_l)?;
            (h, Box::new(move |_| base.clone()))
        }
    };
    let rows = history
        .records
        .iter()
        .map(|r| {
            let c = costs(r.t_diss_s);
            TrainRow {
                iteration: r.iteration,
                loss: r.loss,
                accuracy: r.accuracy,
                grad_norm_sq: r.grad_norm_sq,
                consensus_gap: r.consensus_gap,
                t_diss_s: c.t_diss_s,
                diss_rounds: r.diss_rounds,
                full_dissemination: r.full_dissemination,
                tau_s: c.tau_s,
                ud_energy_j: c.ud_total_j(),
                uav_energy_j: c.uav_total_j(),
                total_energy_j: c.total_energy_j(),
            }
        })
        .collect();
    Ok(SeedOutcome::Train {
        seed,
        rows,
        schedule,
        scenario: Box::new(scenario),
        history,
    })
}

/// Rows of a dissemination trace, rounds first, then broadcast hops.
pub fn dissemination_rows(trace: &DisseminationTrace) -> Vec<DisseminationRow> {
    let s = trace.model_size_bits as f64;
    let join = |v: Vec<usize>| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut t = 0.0;
    let mut rows = Vec::new();
    for r in &trace.rounds {
        let dt = s / r.rate_bps;
        t += dt;
        rows.push(DisseminationRow {
            step: rows.len() + 1,
            kind: "round".into(),
            transmitters: join(r.packets.iter().map(|p| p.tx).collect()),
            rate_bps: r.rate_bps,
            step_time_s: dt,
            t_diss_s: t,
        });
    }
    for h in &trace.broadcast_hops {
        let dt = s / h.rate_bps;
        t += dt;
        rows.push(DisseminationRow {
            step: rows.len() + 1,
            kind: "broadcast".into(),
            transmitters: h.tx.to_string(),
            rate_bps: h.rate_bps,
            step_time_s: dt,
            t_diss_s: t,
        });
    }
    rows
}

fn disseminate_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let scenario = load_scenario(cfg, seed)?;
    let net = UavNetwork::from_scenario(&scenario)?;
    let side0 = SideInformation::initial(scenario.num_uavs());
    let trace = match cfg.mode {
        Mode::Fig3Replay => {
            if !matches!(cfg.scenario, ScenarioSource::Fig3) {
                return Err(Error::Config("fig3-replay mode needs the fig3 scenario".into()));
            }
            replay(&side0, &net, scenario.model_size_bits, &fig3_script())?
        }
        _ => run_dissemination(&side0, &net, scenario.model_size_bits, &policy(cfg))?,
    };
    Ok(SeedOutcome::Disseminate {
        seed,
        rows: dissemination_rows(&trace),
        trace,
    })
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Train => train_seed(cfg, seed),
        Mode::Fig3Replay | Mode::Disseminate => disseminate_seed(cfg, seed),
    }
}

/// Run every seed, in parallel threads, and return outcomes in seed order.
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<Vec<SeedOutcome>> {
    cfg.validate()?;
    let results: Vec<Result<SeedOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&seed| s.spawn(move || run_seed(cfg, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Validation("seed worker panicked".into())))
            })
            .collect()
    });
    results.into_iter().collect()
}

pub fn summarize(cfg: &ExperimentConfig, outcomes: &[SeedOutcome]) -> RunSummary {
    let seeds: Vec<SeedSummary> = outcomes
        .iter()
        .map(|o| SeedSummary {
            seed: o.seed(),
            metrics: o.metrics(),
        })
        .collect();
    let mut metrics = BTreeMap::new();
    if let Some(first) = seeds.first() {
        for name in first.metrics.keys() {
            let vals: Vec<f64> = seeds.iter().filter_map(|s| s.metrics.get(name).copied()).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            metrics.insert(
                name.clone(),
                MetricSummary {
                    mean,
                    sd,
                    higher_is_better: higher_is_better(name),
                },
            );
        }
    }
    RunSummary {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        mode: cfg.mode,
        algorithm: cfg.algorithm,
        scheduler: cfg.scheduler,
        dissemination_period: cfg.dissemination_period,
        seeds,
        metrics,
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn seed_csv(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

/// Run the experiment and write its result directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let outcomes = run_seeds(cfg)?;
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml()?).map_err(|e| Error::io(&cfg_path, e))?;
    for o in &outcomes {
        let seed = o.seed();
        match o {
            SeedOutcome::Train {
                rows,
                schedule,
                scenario,
                ..
            } => {
                write_rows(&seed_csv(dir, seed), rows)?;
                schedule.write_csv(
                    scenario,
                    cfg.train.local_iters,
                    &dir.join(format!("seed_{seed}_schedule.csv")),
                )?;
            }
            SeedOutcome::Disseminate { rows, trace, .. } => {
                write_rows(&seed_csv(dir, seed), rows)?;
                let p = dir.join(format!("seed_{seed}_trace.log"));
                std::fs::write(&p, trace.to_log()).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    let summary = summarize(cfg, &outcomes);
    let p = dir.join("summary.json");
    std::fs::write(&p, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&p, e))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::{preset, small_synthetic};
    use crate::learning::data::SyntheticConfig;

    fn quick(algorithm: Algorithm) -> ExperimentConfig {
        let mut cfg = preset("train20").unwrap();
        cfg.algorithm = algorithm;
        cfg.data.dataset = DataSource::Synthetic(SyntheticConfig {
            train_per_class: 40,
            test_per_class: 10,
            ..small_synthetic()
        });
        cfg.train.iterations = 5;
        cfg.seeds = vec![2, 3];
        cfg
    }

    #[test]
    fn fig3_replay_summary() {
        let cfg = preset("fig3-replay").unwrap();
        let out = run_seeds(&cfg).unwrap();
        let m = out[0].metrics();
        assert!((m["t_diss_s"] - 0.0059).abs() < 1e-5, "{}", m["t_diss_s"]);
        assert_eq!(m["rounds"], 5.0);
        assert_eq!(m["broadcast_hops"], 2.0);
    }

    #[test]
    fn training_rows_account_every_iteration() {
        for alg in [Algorithm::Fedmod, Algorithm::Star, Algorithm::Hfl] {
            let out = run_seeds(&quick(alg)).unwrap();
            assert_eq!(out.len(), 2);
            match &out[0] {
                SeedOutcome::Train { rows, .. } => {
                    assert_eq!(rows.len(), 5);
                    assert!(rows.iter().all(|r| r.tau_s > 0.0 && r.total_energy_j > 0.0));
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn summary_recomputable_from_rows() {
        let cfg = quick(Algorithm::Fedmod);
        let out = run_seeds(&cfg).unwrap();
        let s = summarize(&cfg, &out);
        let SeedOutcome::Train { rows, .. } = &out[1] else {
            panic!()
        };
        let energy: f64 = rows.iter().map(|r| r.total_energy_j).sum();
        assert_eq!(s.seeds[1].metrics["total_energy_j"], energy);
        let mean = (s.seeds[0].metrics["final_accuracy"] + s.seeds[1].metrics["final_accuracy"]) / 2.0;
        assert!((s.metrics["final_accuracy"].mean - mean).abs() < 1e-15);
    }

    #[test]
    fn fig3_is_rejected_for_training() {
        let cfg = ExperimentConfig {
            scenario: ScenarioSource::Fig3,
            ..ExperimentConfig::default()
        };
        assert!(run_seed(&cfg, 0).is_err());
    }
}
