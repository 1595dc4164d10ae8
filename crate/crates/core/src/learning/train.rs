//! Federated training loops: FedMoD over the UAV network, plus the star
//! and hierarchical baselines. All three share the local update and the
//! aggregation algebra; they differ in who combines which models.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dissemination::{
    carry_rounds, run_dissemination, run_rounds, t_diss_of, DisseminationPolicy, DisseminationTrace, RoundRecord,
    SideInformation, UavNetwork,
};
use crate::learning::aggregate::{cluster_aggregate, global_aggregate, weighted_mean, GlobalRule, ModelVector, Owner};
use crate::learning::data::{Dataset, Partition};
use crate::learning::model::ModelSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Global iterations `T`.
    pub iterations: usize,
    /// Local SGD steps `T_l` per global iteration.
    pub local_iters: u32,
    pub learning_rate: f64,
    /// Minibatch size; `None` uses each UD's full dataset.
    pub batch_size: Option<usize>,
    pub global_rule: GlobalRule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            local_iters: 1,
            learning_rate: 0.05,
            batch_size: None,
            global_rule: GlobalRule::DataWeighted,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.local_iters == 0 {
            return Err(Error::Config("local_iters must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Full dissemination every `period` iterations, otherwise only
/// `partial_rounds` coded rounds after which each UAV averages what it has.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FedModConfig {
    pub period: usize,
    pub partial_rounds: usize,
    pub policy: DisseminationPolicy,
}

impl Default for FedModConfig {
    fn default() -> Self {
        Self {
            period: 1,
            partial_rounds: 1,
            policy: DisseminationPolicy::default(),
        }
    }
}

/// Data and model shared by every topology.
#[derive(Debug, Clone)]
pub struct FlProblem {
    pub spec: ModelSpec,
    pub train: Dataset,
    pub test: Dataset,
    pub partition: Partition,
    pub init_seed: u64,
}

impl FlProblem {
    fn samples(&self, ud: usize) -> Result<&[usize]> {
        let s = self
            .partition
            .ud_samples
            .get(ud)
            .ok_or_else(|| Error::Domain(format!("UD {ud} has no partition entry")))?;
        if s.is_empty() {
            return Err(Error::Validation(format!("UD {ud} holds no samples")));
        }
        Ok(s)
    }

    /// `T_l` local SGD steps from `start` on UD `ud`'s data.
    pub fn local_update(&self, start: &[f64], ud: usize, iteration: usize, cfg: &TrainConfig) -> Result<ModelVector> {
        let samples = self.samples(ud)?;
        let mut w = start.to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream((iteration * self.partition.num_uds() + ud) as u64);
        let mut batch = Vec::new();
        for step in 0..cfg.local_iters {
            let idx: &[usize] = match cfg.batch_size {
                Some(b) if b < samples.len() => {
                    batch.clear();
                    batch.extend(
                        index::sample(&mut rng, samples.len(), b)
                            .into_iter()
                            .map(|i| samples[i]),
                    );
                    &batch
                }
                _ => samples,
            };
            let (_, g) = self
                .spec
                .loss_and_grad(&w, &self.train, Some(idx))
                .map_err(|e| match e {
                    Error::NonFinite(m) => Error::NonFinite(format!(
                        "gradient of UD {ud} at iteration {iteration}, local step {step}: {m}"
                    )),
                    other => other,
                })?;
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi -= cfg.learning_rate * gi;
            }
        }
        Ok(ModelVector::new(w, Owner::Ud(ud), samples.len()))
    }

    fn pooled(&self, uds: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = uds
            .iter()
            .flat_map(|&u| self.partition.ud_samples[u].iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// Training loss of the participants' pooled data.
    pub loss: f64,
    pub accuracy: f64,
    /// `‖∇F‖²` at the sample-weighted mean of the UAV models.
    pub grad_norm_sq: f64,
    /// Largest L∞ distance between two UAV-held models.
    pub consensus_gap: f64,
    pub t_diss_s: f64,
    pub diss_rounds: usize,
    pub full_dissemination: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<IterationRecord>,
    /// Sample-weighted mean of the final UAV models; the global model
    /// whenever the last iteration reached consensus.
    pub final_model: Vec<f64>,
    pub uav_models: Vec<Vec<f64>>,
}

impl TrainHistory {
    pub fn final_accuracy(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.accuracy)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Evaluate UAV models, each standing for its `sample_count` samples.
fn record(
    problem: &FlProblem,
    pooled: &[usize],
    models: &[ModelVector],
    iteration: usize,
    t_diss_s: f64,
    diss_rounds: usize,
    full: bool,
) -> Result<(IterationRecord, Vec<f64>)> {
    let total: usize = models.iter().map(|m| m.sample_count).sum();
    let mut loss = 0.0;
    let mut accuracy = 0.0;
    let identical = models.windows(2).all(|p| p[0].params == p[1].params);
    // averaging identical copies could still perturb the last bit
    let mean = if identical {
        models[0].clone()
    } else {
        weighted_mean(models, Owner::Global)?
    };
    if identical {
        loss = problem.spec.loss(&models[0].params, &problem.train, Some(pooled))?;
        accuracy = problem.spec.accuracy(&models[0].params, &problem.test)?;
    } else {
        for m in models.iter().filter(|m| m.sample_count > 0) {
            let w = m.sample_count as f64 / total as f64;
            loss += w * problem.spec.loss(&m.params, &problem.train, Some(pooled))?;
            accuracy += w * problem.spec.accuracy(&m.params, &problem.test)?;
        }
    }
    let (_, g) = problem.spec.loss_and_grad(&mean.params, &problem.train, Some(pooled))?;
    let mut gap = 0.0f64;
    for (i, a) in models.iter().enumerate() {
        for b in &models[i + 1..] {
            gap = gap.max(linf(&a.params, &b.params));
        }
    }
    Ok((
        IterationRecord {
            iteration,
            loss,
            accuracy,
            grad_norm_sq: g.iter().map(|x| x * x).sum(),
            consensus_gap: gap,
            t_diss_s,
            diss_rounds,
            full_dissemination: full,
        },
        mean.params,
    ))
}

fn check_clusters(problem: &FlProblem, clusters: &BTreeMap<usize, Vec<usize>>, num_uavs: usize) -> Result<Vec<usize>> {
    let mut all = Vec::new();
    for (&k, uds) in clusters {
        if k >= num_uavs {
            return Err(Error::Domain(format!("cluster for UAV {k} but only {num_uavs} UAVs")));
        }
        for &u in uds {
            problem.samples(u)?;
            all.push(u);
        }
    }
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Validation("a UD appears in two clusters".into()));
    }
    if all.is_empty() {
        return Err(Error::Validation("no participating UDs".into()));
    }
    Ok(all)
}

/// Every UAV trains its cluster from the model it holds.
fn cluster_models(
    problem: &FlProblem,
    clusters: &BTreeMap<usize, Vec<usize>>,
    uav_models: &[Vec<f64>],
    iteration: usize,
    cfg: &TrainConfig,
) -> Result<Vec<ModelVector>> {
    (0..uav_models.len())
        .map(|k| match clusters.get(&k).filter(|c| !c.is_empty()) {
            Some(uds) => {
                let locals = uds
                    .iter()
                    .map(|&u| problem.local_update(&uav_models[k], u, iteration, cfg))
                    .collect::<Result<Vec<_>>>()?;
                cluster_aggregate(&locals, k)
            }
            None => Ok(ModelVector::new(uav_models[k].clone(), Owner::Uav(k), 0)),
        })
        .collect()
}

/// Algorithm 2 with coded UAV-to-UAV dissemination.
///
/// Iterations whose 1-based index is a multiple of `fedmod.period` run
/// dissemination to completion: the first complete UAV forms the global
/// model from the XOR-decoded cluster models and floods it. Other
/// iterations run `fedmod.partial_rounds` coded rounds and every UAV
/// averages the cluster models it holds by then.
pub fn run_fedmod(
    problem: &FlProblem,
    clusters: &BTreeMap<usize, Vec<usize>>,
    net: &UavNetwork,
    model_size_bits: u64,
    cfg: &TrainConfig,
    fedmod: &FedModConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if fedmod.period == 0 {
        return Err(Error::Config("dissemination period must be at least 1".into()));
    }
    let k_count = net.num_uavs();
    let pooled = problem.pooled(&check_clusters(problem, clusters, k_count)?);
    let side0 = SideInformation::initial(k_count);
    // the topology and initial side information never change, so neither do the schedules
    let full: DisseminationTrace = run_dissemination(&side0, net, model_size_bits, &fedmod.policy)?;
    let partial: Vec<RoundRecord> = if fedmod.period > 1 {
        run_rounds(&side0, net, &fedmod.policy, fedmod.partial_rounds)?.rounds
    } else {
        Vec::new()
    };
    let partial_t = t_diss_of(model_size_bits, &partial, &[]);

    let mut uav_models = vec![problem.spec.init(problem.init_seed); k_count];
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut final_model = Vec::new();
    for t in 1..=cfg.iterations {
        let cm = cluster_models(problem, clusters, &uav_models, t, cfg)?;
        let params: Vec<Vec<f64>> = cm.iter().map(|m| m.params.clone()).collect();
        let is_full = t % fedmod.period == 0;
        let held_models: Vec<ModelVector> = if is_full {
            let held = carry_rounds(&full.initial, &full.rounds, &params)?;
            let at = &held[full.complete_uav];
            let received: Vec<ModelVector> = at
                .iter()
                .map(|(&m, v)| ModelVector::new(v.clone(), Owner::Uav(m), cm[m].sample_count))
                .collect();
            let global = global_aggregate(&received, cfg.global_rule)?;
            global.check_finite()?;
            cm.iter()
                .enumerate()
                .map(|(k, m)| ModelVector::new(global.params.clone(), Owner::Uav(k), m.sample_count))
                .collect()
        } else {
            let held = carry_rounds(&side0, &partial, &params)?;
            held.iter()
                .enumerate()
                .map(|(k, h)| {
                    let known: Vec<ModelVector> = h
                        .iter()
                        .map(|(&m, v)| ModelVector::new(v.clone(), Owner::Uav(m), cm[m].sample_count))
                        .collect();
                    let total: usize = known.iter().map(|m| m.sample_count).sum();
                    let params = if total == 0 {
                        cm[k].params.clone()
                    } else {
                        weighted_mean(&known, Owner::Uav(k))?.params
                    };
                    Ok(ModelVector::new(params, Owner::Uav(k), cm[k].sample_count))
                })
                .collect::<Result<_>>()?
        };
        let (t_diss, rounds) = if is_full {
            (full.t_diss_s, full.num_rounds())
        } else {
            (partial_t, partial.len())
        };
        let (rec, mean) = record(problem, &pooled, &held_models, t, t_diss, rounds, is_full)?;
        log::debug!(
            "fedmod t={t} loss={:.6} acc={:.4} full={is_full}",
            rec.loss,
            rec.accuracy
        );
        records.push(rec);
        final_model = mean;
        uav_models = held_models.into_iter().map(|m| m.params).collect();
    }
    Ok(TrainHistory {
        records,
        final_model,
        uav_models,
    })
}

/// Star topology: every participant talks to one parameter server, which
/// takes the sample-weighted mean of all local models.
pub fn run_star(problem: &FlProblem, participants: &[usize], cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    let mut uds = participants.to_vec();
    uds.sort_unstable();
    let single: BTreeMap<usize, Vec<usize>> = [(0, uds.clone())].into();
    let pooled = problem.pooled(&check_clusters(problem, &single, 1)?);
    let mut w = problem.spec.init(problem.init_seed);
    let mut records = Vec::with_capacity(cfg.iterations);
    for t in 1..=cfg.iterations {
        let locals = uds
            .iter()
            .map(|&u| problem.local_update(&w, u, t, cfg))
            .collect::<Result<Vec<_>>>()?;
        let global = weighted_mean(&locals, Owner::Global)?;
        global.check_finite()?;
        let (rec, mean) = record(problem, &pooled, &[global], t, 0.0, 0, true)?;
        records.push(rec);
        w = mean;
    }
    Ok(TrainHistory {
        records,
        final_model: w.clone(),
        uav_models: vec![w],
    })
}

/// Hierarchical FL: UAVs aggregate their clusters and a central server
/// aggregates the UAVs.
pub fn run_hfl(
    problem: &FlProblem,
    clusters: &BTreeMap<usize, Vec<usize>>,
    num_uavs: usize,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    let pooled = problem.pooled(&check_clusters(problem, clusters, num_uavs)?);
    let mut w = problem.spec.init(problem.init_seed);
    let mut records = Vec::with_capacity(cfg.iterations);
    for t in 1..=cfg.iterations {
        let cm = cluster_models(problem, clusters, &vec![w.clone(); num_uavs], t, cfg)?;
        let global = global_aggregate(&cm, cfg.global_rule)?;
        global.check_finite()?;
        let (rec, _) = record(problem, &pooled, std::slice::from_ref(&global), t, 0.0, 0, true)?;
        records.push(rec);
        w = global.params;
    }
    Ok(TrainHistory {
        records,
        final_model: w.clone(),
        uav_models: vec![w; num_uavs],
    })
}
