//! Classifiers over flat parameter vectors, with analytic gradients.
//!
//! Layouts (row-major):
//! - logistic: `W[C][d]` then `b[C]`
//! - MLP: `W1[h][d]`, `b1[h]`, `W2[C][h]`, `b2[C]`, tanh hidden layer

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::learning::data::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Mlp { hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub num_features: usize,
    pub num_classes: usize,
}

/// Numerically stable `ln Σ exp(z)`.
pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ModelSpec {
    pub fn logistic(num_features: usize, num_classes: usize) -> Self {
        Self {
            kind: ModelKind::Logistic,
            num_features,
            num_classes,
        }
    }

    pub fn mlp(num_features: usize, hidden: usize, num_classes: usize) -> Self {
        Self {
            kind: ModelKind::Mlp { hidden },
            num_features,
            num_classes,
        }
    }

    pub fn dim(&self) -> usize {
        let (d, c) = (self.num_features, self.num_classes);
        match self.kind {
            ModelKind::Logistic => c * (d + 1),
            ModelKind::Mlp { hidden: h } => h * (d + 1) + c * (h + 1),
        }
    }

    /// Zeros for the logistic model; scaled Gaussian weights for the MLP so
    /// its hidden units are not symmetric.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        if let ModelKind::Mlp { hidden: h } = self.kind {
            let d = self.num_features;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n1 = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("positive std");
            let n2 = Normal::new(0.0, 1.0 / (h as f64).sqrt()).expect("positive std");
            for v in &mut w[..h * d] {
                *v = n1.sample(&mut rng);
            }
            let w2 = h * (d + 1);
            for v in &mut w[w2..w2 + self.num_classes * h] {
                *v = n2.sample(&mut rng);
            }
        }
        w
    }

    fn check(&self, w: &[f64], data: &Dataset) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        if data.num_features != self.num_features {
            return Err(Error::DimMismatch {
                expected: self.num_features,
                got: data.num_features,
            });
        }
        Ok(())
    }

    /// Class scores for one sample; `hidden` receives the tanh activations
    /// for the MLP.
    fn forward(&self, w: &[f64], x: &[f64], hidden: &mut Vec<f64>, logits: &mut [f64]) {
        let (d, c) = (self.num_features, self.num_classes);
        match self.kind {
            ModelKind::Logistic => {
                let b = &w[c * d..];
                for k in 0..c {
                    logits[k] = dot(&w[k * d..(k + 1) * d], x) + b[k];
                }
            }
            ModelKind::Mlp { hidden: h } => {
                hidden.clear();
                let b1 = &w[h * d..h * (d + 1)];
                for j in 0..h {
                    hidden.push((dot(&w[j * d..(j + 1) * d], x) + b1[j]).tanh());
                }
                let w2 = &w[h * (d + 1)..];
                let b2 = &w2[c * h..];
                for k in 0..c {
                    logits[k] = dot(&w2[k * h..(k + 1) * h], hidden) + b2[k];
                }
            }
        }
    }

    pub fn predict(&self, w: &[f64], x: &[f64]) -> usize {
        let mut hidden = Vec::new();
        let mut logits = vec![0.0; self.num_classes];
        self.forward(w, x, &mut hidden, &mut logits);
        logits
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |best, (k, &z)| if z > best.1 { (k, z) } else { best },
            )
            .0
    }

    /// Mean cross-entropy over `indices` (all samples when `None`).
    pub fn loss(&self, w: &[f64], data: &Dataset, indices: Option<&[usize]>) -> Result<f64> {
        self.evaluate(w, data, indices, false).map(|(l, _)| l)
    }

    /// Mean cross-entropy and its gradient.
    pub fn loss_and_grad(&self, w: &[f64], data: &Dataset, indices: Option<&[usize]>) -> Result<(f64, Vec<f64>)> {
        self.evaluate(w, data, indices, true)
    }

    fn evaluate(
        &self,
        w: &[f64],
        data: &Dataset,
        indices: Option<&[usize]>,
        with_grad: bool,
    ) -> Result<(f64, Vec<f64>)> {
        self.check(w, data)?;
        let all: Vec<usize>;
        let idx = match indices {
            Some(i) => i,
            None => {
                all = (0..data.len()).collect();
                &all
            }
        };
        if idx.is_empty() {
            return Err(Error::Validation("loss over an empty sample set".into()));
        }
        let (d, c) = (self.num_features, self.num_classes);
        let mut grad = if with_grad { vec![0.0; self.dim()] } else { Vec::new() };
        let mut hidden = Vec::new();
        let mut logits = vec![0.0; c];
        let mut delta_h = Vec::new();
        let mut total = 0.0;
        for &i in idx {
            let (x, y) = (data.x(i), data.labels[i]);
            self.forward(w, x, &mut hidden, &mut logits);
            let lse = log_sum_exp(&logits);
            total += lse - logits[y];
            if !with_grad {
                continue;
            }
            // dL/dz = softmax(z) - onehot(y), reused in place
            for (k, z) in logits.iter_mut().enumerate() {
                *z = (*z - lse).exp() - if k == y { 1.0 } else { 0.0 };
            }
            match self.kind {
                ModelKind::Logistic => {
                    for k in 0..c {
                        let g = logits[k];
                        for (gw, xv) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                            *gw += g * xv;
                        }
                        grad[c * d + k] += g;
                    }
                }
                ModelKind::Mlp { hidden: h } => {
                    let o2 = h * (d + 1);
                    delta_h.clear();
                    delta_h.resize(h, 0.0);
                    for k in 0..c {
                        let g = logits[k];
                        for j in 0..h {
                            grad[o2 + k * h + j] += g * hidden[j];
                            delta_h[j] += g * w[o2 + k * h + j];
                        }
                        grad[o2 + c * h + k] += g;
                    }
                    for j in 0..h {
                        let dj = delta_h[j] * (1.0 - hidden[j] * hidden[j]);
                        for (gw, xv) in grad[j * d..(j + 1) * d].iter_mut().zip(x) {
                            *gw += dj * xv;
                        }
                        grad[h * d + j] += dj;
                    }
                }
            }
        }
        let n = idx.len() as f64;
        for g in &mut grad {
            *g /= n;
        }
        let loss = total / n;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("loss {loss} over {} samples", idx.len())));
        }
        Ok((loss, grad))
    }

    pub fn accuracy(&self, w: &[f64], data: &Dataset) -> Result<f64> {
        self.check(w, data)?;
        if data.is_empty() {
            return Err(Error::Validation("accuracy over an empty dataset".into()));
        }
        let correct = (0..data.len())
            .filter(|&i| self.predict(w, data.x(i)) == data.labels[i])
            .count();
        Ok(correct as f64 / data.len() as f64)
    }
}
