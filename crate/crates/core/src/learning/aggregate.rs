//! Cluster and global model aggregation.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    Ud(usize),
    Uav(usize),
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVector {
    pub params: Vec<f64>,
    pub owner: Owner,
    /// Number of training samples behind the model; the weighting basis.
    pub sample_count: usize,
}

impl ModelVector {
    pub fn new(params: Vec<f64>, owner: Owner, sample_count: usize) -> Self {
        Self {
            params,
            owner,
            sample_count,
        }
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.params.iter().position(|p| !p.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!("parameter {i} of {:?}", self.owner))),
            None => Ok(()),
        }
    }
}

/// How the global model combines cluster models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalRule {
    /// `Σ_k (D_k / D) w_k`, consistent with the intra-cluster weights.
    #[default]
    DataWeighted,
    /// `(1 / D) Σ_k w_k`: unweighted sum scaled by the total sample count.
    Strict,
}

fn common_dim(models: &[ModelVector]) -> Result<usize> {
    let first = models
        .first()
        .ok_or_else(|| Error::Validation("aggregation over no models".into()))?;
    for m in models {
        if m.dim() != first.dim() {
            return Err(Error::DimMismatch {
                expected: first.dim(),
                got: m.dim(),
            });
        }
    }
    Ok(first.dim())
}

/// Sample-weighted mean. A zero total count falls back to the plain mean.
pub fn weighted_mean(models: &[ModelVector], owner: Owner) -> Result<ModelVector> {
    let dim = common_dim(models)?;
    let total: usize = models.iter().map(|m| m.sample_count).sum();
    let mut out = vec![0.0; dim];
    for m in models {
        let weight = if total == 0 {
            1.0 / models.len() as f64
        } else {
            m.sample_count as f64 / total as f64
        };
        for (o, p) in out.iter_mut().zip(&m.params) {
            *o += weight * p;
        }
    }
    Ok(ModelVector::new(out, owner, total))
}

/// `w_k = Σ (D_u / D_k) w_u` over the models received at UAV `uav`.
pub fn cluster_aggregate(models: &[ModelVector], uav: usize) -> Result<ModelVector> {
    weighted_mean(models, Owner::Uav(uav))
}

pub fn global_aggregate(cluster_models: &[ModelVector], rule: GlobalRule) -> Result<ModelVector> {
    match rule {
        GlobalRule::DataWeighted => weighted_mean(cluster_models, Owner::Global),
        GlobalRule::Strict => {
            let dim = common_dim(cluster_models)?;
            let total: usize = cluster_models.iter().map(|m| m.sample_count).sum();
            if total == 0 {
                return Err(Error::Validation("strict global aggregation with zero samples".into()));
            }
            let mut out = vec![0.0; dim];
            for m in cluster_models {
                for (o, p) in out.iter_mut().zip(&m.params) {
                    *o += p;
                }
            }
            for o in &mut out {
                *o /= total as f64;
            }
            Ok(ModelVector::new(out, Owner::Global, total))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(params: Vec<f64>, count: usize) -> ModelVector {
        ModelVector::new(params, Owner::Ud(0), count)
    }

    #[test]
    fn equal_counts_give_arithmetic_mean() {
        let out = cluster_aggregate(&[mv(vec![1.0, 2.0], 5), mv(vec![3.0, 6.0], 5)], 0).unwrap();
        assert_eq!(out.params, vec![2.0, 4.0]);
        assert_eq!(out.sample_count, 10);
        assert_eq!(out.owner, Owner::Uav(0));
    }

    #[test]
    fn weighted_counts() {
        let out = cluster_aggregate(&[mv(vec![0.0], 1), mv(vec![4.0], 3)], 1).unwrap();
        assert_eq!(out.params, vec![3.0]);
    }

    #[test]
    fn single_input_is_identity() {
        let m = mv(vec![0.25, -7.0], 9);
        assert_eq!(cluster_aggregate(std::slice::from_ref(&m), 2).unwrap().params, m.params);
    }

    #[test]
    fn one_cluster_holding_all_data_is_the_global_model() {
        let out = global_aggregate(&[mv(vec![5.0], 10), mv(vec![-1.0], 0)], GlobalRule::DataWeighted).unwrap();
        assert_eq!(out.params, vec![5.0]);
    }

    #[test]
    fn strict_rule_is_unweighted_sum_over_total() {
        let out = global_aggregate(&[mv(vec![2.0], 1), mv(vec![6.0], 3)], GlobalRule::Strict).unwrap();
        assert_eq!(out.params, vec![2.0]);
    }

    #[test]
    fn dim_mismatch_and_empty_are_errors() {
        assert!(matches!(
            cluster_aggregate(&[mv(vec![1.0], 1), mv(vec![1.0, 2.0], 1)], 0),
            Err(Error::DimMismatch { .. })
        ));
        assert!(cluster_aggregate(&[], 0).is_err());
    }

    #[test]
    fn non_finite_detected() {
        assert!(mv(vec![f64::INFINITY], 1).check_finite().is_err());
        assert!(mv(vec![1.0], 1).check_finite().is_ok());
    }
}
