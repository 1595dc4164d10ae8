//! Observational convergence diagnostics over a training history.

use serde::{Deserialize, Serialize};

use crate::learning::data::Dataset;
use crate::learning::train::TrainHistory;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    /// `F(t) - F(t-1)`, starting at the second record.
    pub loss_deltas: Vec<f64>,
    pub grad_norm_sq: Vec<f64>,
    /// Running mean of `grad_norm_sq`, the left-hand side of the
    /// average-gradient bound.
    pub running_avg_grad_norm_sq: Vec<f64>,
    pub learning_rate: f64,
    pub smoothness: Option<f64>,
    /// `1 - λL >= 0`, when `L` is known.
    pub step_size_ok: Option<bool>,
}

impl MonitorReport {
    /// True when the loss never rises after the first `burn_in` records.
    pub fn loss_non_increasing_after(&self, burn_in: usize, tolerance: f64) -> bool {
        self.loss_deltas.iter().skip(burn_in).all(|d| *d <= tolerance)
    }
}

pub fn convergence_monitors(
    history: &TrainHistory,
    learning_rate: f64,
    smoothness: Option<f64>,
) -> Result<MonitorReport> {
    if history.records.is_empty() {
        return Err(Error::Validation("empty training history".into()));
    }
    let loss: Vec<f64> = history.records.iter().map(|r| r.loss).collect();
    let grad_norm_sq: Vec<f64> = history.records.iter().map(|r| r.grad_norm_sq).collect();
    let mut sum = 0.0;
    let running_avg_grad_norm_sq = grad_norm_sq
        .iter()
        .enumerate()
        .map(|(i, g)| {
            sum += g;
            sum / (i + 1) as f64
        })
        .collect();
    Ok(MonitorReport {
        loss_deltas: loss.windows(2).map(|w| w[1] - w[0]).collect(),
        grad_norm_sq,
        running_avg_grad_norm_sq,
        learning_rate,
        smoothness,
        step_size_ok: smoothness.map(|l| 1.0 - learning_rate * l >= 0.0),
    })
}

/// Upper bound on the smoothness constant of the mean softmax
/// cross-entropy of a linear model: `max_i (‖x_i‖² + 1) / 2`.
pub fn logistic_smoothness_bound(data: &Dataset) -> f64 {
    (0..data.len())
        .map(|i| data.x(i).iter().map(|v| v * v).sum::<f64>() + 1.0)
        .fold(0.0, f64::max)
        / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::train::IterationRecord;

    fn history(losses: &[f64]) -> TrainHistory {
        TrainHistory {
            records: losses
                .iter()
                .enumerate()
                .map(|(i, &l)| IterationRecord {
                    iteration: i + 1,
                    loss: l,
                    accuracy: 0.0,
                    grad_norm_sq: l,
                    consensus_gap: 0.0,
                    t_diss_s: 0.0,
                    diss_rounds: 0,
                    full_dissemination: true,
                })
                .collect(),
            final_model: Vec::new(),
            uav_models: Vec::new(),
        }
    }

    #[test]
    fn deltas_and_running_average() {
        let r = convergence_monitors(&history(&[4.0, 2.0, 3.0]), 0.1, None).unwrap();
        assert_eq!(r.loss_deltas, vec![-2.0, 1.0]);
        assert_eq!(r.running_avg_grad_norm_sq, vec![4.0, 3.0, 3.0]);
        assert_eq!(r.step_size_ok, None);
        assert!(r.loss_non_increasing_after(2, 0.0));
        assert!(!r.loss_non_increasing_after(0, 0.0));
    }

    #[test]
    fn oversized_step_is_flagged() {
        let r = convergence_monitors(&history(&[1.0]), 0.5, Some(4.0)).unwrap();
        assert_eq!(r.step_size_ok, Some(false));
        let r = convergence_monitors(&history(&[1.0]), 0.25, Some(4.0)).unwrap();
        assert_eq!(r.step_size_ok, Some(true));
    }

    #[test]
    fn empty_history_is_error() {
        assert!(convergence_monitors(&history(&[]), 0.1, None).is_err());
    }

    #[test]
    fn smoothness_bound_of_unit_vectors() {
        let d = Dataset::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0, 1]).unwrap();
        assert_eq!(logistic_smoothness_bound(&d), 1.0);
    }
}
