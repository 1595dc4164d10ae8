//! Datasets, the synthetic Gaussian-mixture generator, and non-IID splits.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense row-major samples with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub num_features: usize,
    pub num_classes: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(num_features: usize, num_classes: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.len() != labels.len() * num_features {
            return Err(Error::DimMismatch {
                expected: labels.len() * num_features,
                got: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Validation(format!("label {bad} outside 0..{num_classes}")));
        }
        Ok(Self {
            num_features,
            num_classes,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.num_features);
        for &i in indices {
            features.extend_from_slice(self.x(i));
        }
        Dataset {
            num_features: self.num_features,
            num_classes: self.num_classes,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Concatenate datasets of the same shape.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Dataset>) -> Result<Dataset> {
        let mut out: Option<Dataset> = None;
        for p in parts {
            match &mut out {
                None => out = Some(p.clone()),
                Some(o) => {
                    if o.num_features != p.num_features || o.num_classes != p.num_classes {
                        return Err(Error::DimMismatch {
                            expected: o.num_features,
                            got: p.num_features,
                        });
                    }
                    o.features.extend_from_slice(&p.features);
                    o.labels.extend_from_slice(&p.labels);
                }
            }
        }
        out.ok_or_else(|| Error::Validation("no datasets to concatenate".into()))
    }

    pub fn label_set(&self) -> BTreeSet<usize> {
        self.labels.iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub num_classes: usize,
    pub num_features: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Standard deviation of the class means around the origin.
    pub class_spread: f64,
    /// Standard deviation of samples around their class mean.
    pub noise_std: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            // 10 * (900 + 1) = 9010 logistic parameters
            num_features: 900,
            train_per_class: 400,
            test_per_class: 100,
            class_spread: 0.1,
            noise_std: 0.3,
        }
    }
}

/// Gaussian mixture with one isotropic component per class.
/// Returns (train, test).
pub fn synthetic(config: &SyntheticConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    if config.num_classes < 2 || config.num_features == 0 {
        return Err(Error::Config(
            "synthetic data needs at least 2 classes and 1 feature".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = Normal::new(0.0, config.class_spread).map_err(|e| Error::Config(e.to_string()))?;
    let noise = Normal::new(0.0, config.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let d = config.num_features;
    let means: Vec<Vec<f64>> = (0..config.num_classes)
        .map(|_| (0..d).map(|_| spread.sample(&mut rng)).collect())
        .collect();
    let mut draw = |per_class: usize| {
        let mut features = Vec::with_capacity(per_class * config.num_classes * d);
        let mut labels = Vec::with_capacity(per_class * config.num_classes);
        for _ in 0..per_class {
            for (c, mean) in means.iter().enumerate() {
                features.extend(mean.iter().map(|m| m + noise.sample(&mut rng)));
                labels.push(c);
            }
        }
        Dataset::new(d, config.num_classes, features, labels)
    };
    let train = draw(config.train_per_class)?;
    let test = draw(config.test_per_class)?;
    Ok((train, test))
}

/// Sample indices held by each UD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub ud_samples: Vec<Vec<usize>>,
}

impl Partition {
    pub fn num_uds(&self) -> usize {
        self.ud_samples.len()
    }

    pub fn sample_count(&self, ud: usize) -> usize {
        self.ud_samples[ud].len()
    }

    pub fn labels_of(&self, data: &Dataset, ud: usize) -> BTreeSet<usize> {
        self.ud_samples[ud].iter().map(|&i| data.labels[i]).collect()
    }
}

/// Non-IID split: every UD gets samples of exactly `labels_per_ud` labels,
/// and the UDs of one group together see at most `labels_per_cluster`
/// labels. `groups[u]` is the group (cluster) of UD `u`.
///
/// Group label sets are consecutive windows of a shuffled label order so
/// that, with enough groups, every label is used somewhere. Inside a group
/// UDs take consecutive label pairs round-robin. Each label's samples are
/// then dealt evenly to the UDs holding that label.
pub fn partition_noniid(
    data: &Dataset,
    groups: &[usize],
    labels_per_ud: usize,
    labels_per_cluster: usize,
    seed: u64,
) -> Result<Partition> {
    let c = data.num_classes;
    let num_uds = groups.len();
    if num_uds == 0 {
        return Err(Error::Infeasible("no UDs to partition over".into()));
    }
    if labels_per_ud == 0 || labels_per_ud > c {
        return Err(Error::Infeasible(format!(
            "labels_per_ud = {labels_per_ud} must lie in 1..={c}"
        )));
    }
    if labels_per_cluster < labels_per_ud {
        return Err(Error::Infeasible(format!(
            "labels_per_cluster = {labels_per_cluster} is below labels_per_ud = {labels_per_ud}"
        )));
    }
    let window = labels_per_cluster.min(c);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..c).collect();
    order.shuffle(&mut rng);

    let group_ids: BTreeSet<usize> = groups.iter().copied().collect();
    let mut group_labels: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pos, &g) in group_ids.iter().enumerate() {
        let start = pos * window;
        group_labels.insert(g, (0..window).map(|j| order[(start + j) % c]).collect());
    }

    let mut ud_labels: Vec<Vec<usize>> = vec![Vec::new(); num_uds];
    let mut seen_in_group: BTreeMap<usize, usize> = BTreeMap::new();
    for (u, &g) in groups.iter().enumerate() {
        let slot = seen_in_group.entry(g).or_insert(0);
        let labels = &group_labels[&g];
        ud_labels[u] = (0..labels_per_ud)
            .map(|j| labels[(*slot * labels_per_ud + j) % labels.len()])
            .collect();
        *slot += 1;
    }

    let mut holders: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (u, labels) in ud_labels.iter().enumerate() {
        for &l in labels {
            holders.entry(l).or_default().push(u);
        }
    }
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in data.labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let mut ud_samples: Vec<Vec<usize>> = vec![Vec::new(); num_uds];
    for (l, uds) in &holders {
        let mut pool = by_label.get(l).cloned().unwrap_or_default();
        if pool.len() < uds.len() {
            return Err(Error::Infeasible(format!(
                "label {l} has {} samples for {} UDs",
                pool.len(),
                uds.len()
            )));
        }
        pool.shuffle(&mut rng);
        let share = pool.len() / uds.len();
        for (j, &u) in uds.iter().enumerate() {
            ud_samples[u].extend_from_slice(&pool[j * share..(j + 1) * share]);
        }
    }
    for s in &mut ud_samples {
        s.sort_unstable();
    }
    Ok(Partition { ud_samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (Dataset, Dataset) {
        synthetic(
            &SyntheticConfig {
                num_features: 5,
                train_per_class: 60,
                test_per_class: 10,
                ..Default::default()
            },
            3,
        )
        .unwrap()
    }

    fn groups() -> Vec<usize> {
        (0..20).map(|u| u % 5).collect()
    }

    #[test]
    fn synthetic_shapes_and_determinism() {
        let (train, test) = small();
        assert_eq!(train.len(), 600);
        assert_eq!(test.len(), 100);
        assert_eq!(train.x(3).len(), 5);
        assert_eq!(small().0, train);
    }

    #[test]
    fn twenty_uds_two_labels_each_partition_is_valid() {
        let (train, _) = small();
        let g = groups();
        let p = partition_noniid(&train, &g, 2, 6, 1).unwrap();
        let mut all = BTreeSet::new();
        for u in 0..20 {
            assert!(p.sample_count(u) >= 1);
            assert_eq!(p.labels_of(&train, u).len(), 2);
            for &i in &p.ud_samples[u] {
                assert!(all.insert(i), "sample {i} assigned twice");
            }
        }
        for cluster in 0..5 {
            let labels: BTreeSet<usize> = (0..20)
                .filter(|&u| g[u] == cluster)
                .flat_map(|u| p.labels_of(&train, u))
                .collect();
            assert!(labels.len() <= 6);
        }
        let covered: BTreeSet<usize> = (0..20).flat_map(|u| p.labels_of(&train, u)).collect();
        assert_eq!(covered.len(), 10);
    }

    #[test]
    fn all_labels_per_ud_is_allowed() {
        let (train, _) = small();
        let p = partition_noniid(&train, &groups(), 10, 10, 1).unwrap();
        assert!((0..20).all(|u| p.labels_of(&train, u).len() == 10));
    }

    #[test]
    fn same_seed_same_partition() {
        let (train, _) = small();
        let a = partition_noniid(&train, &groups(), 2, 6, 9).unwrap();
        let b = partition_noniid(&train, &groups(), 2, 6, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_combinations_name_the_constraint() {
        let (train, _) = small();
        let err = partition_noniid(&train, &groups(), 3, 2, 0).unwrap_err();
        assert!(err.to_string().contains("labels_per_cluster"), "{err}");
        let err = partition_noniid(&train, &groups(), 11, 11, 0).unwrap_err();
        assert!(err.to_string().contains("labels_per_ud"), "{err}");
        let tiny = train.subset(&[0, 1]);
        let many: Vec<usize> = vec![0; 5];
        let err = partition_noniid(&tiny, &many, 1, 1, 0).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }
}
