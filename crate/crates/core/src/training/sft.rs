//! Behavioural cloning: negative log-likelihood of expert choices.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::SftConfig;
use crate::corpus::KnowledgeCorpus;
use crate::error::{Error, Result};
use crate::expert::ExpertRecord;
use crate::policy::{featurize_candidates, softmax, FeatureVector, PolicyParams, FEATURE_DIM};
use crate::rng;

/// A featurised expert decision.
#[derive(Debug, Clone, PartialEq)]
pub struct SftExample {
    pub features: Vec<FeatureVector>,
    pub target: usize,
}

pub fn sft_examples<'a>(
    records: impl IntoIterator<Item = &'a ExpertRecord>,
    corpus: &KnowledgeCorpus,
) -> Result<Vec<SftExample>> {
    records
        .into_iter()
        .map(|r| {
            let target = r
                .candidates
                .iter()
                .position(|c| *c == r.best)
                .ok_or_else(|| Error::ExpertNotInCandidates(r.best.clone()))?;
            Ok(SftExample {
                features: featurize_candidates(&r.state, &r.profile, &r.candidates, corpus)?,
                target,
            })
        })
        .collect()
}

fn check_batch(batch: &[SftExample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("sft batch is empty".into()));
    }
    if let Some(e) = batch.iter().find(|e| e.target >= e.features.len()) {
        return Err(Error::InvalidArgument(format!(
            "expert index {} outside {} candidates",
            e.target,
            e.features.len()
        )));
    }
    Ok(())
}

pub fn sft_loss(params: &PolicyParams, batch: &[SftExample]) -> Result<f64> {
    Ok(sft_loss_and_grad(params, batch)?.0)
}

/// `-mean ln pi(k*|s)` and its gradient in theta.
///
/// With logits `z_i = theta . f_i / tau`, the per-record gradient is
/// `-(f_* - sum_i p_i f_i) / tau`.
pub fn sft_loss_and_grad(params: &PolicyParams, batch: &[SftExample]) -> Result<(f64, [f64; FEATURE_DIM])> {
    check_batch(batch)?;
    let mut loss = 0.0;
    let mut grad = [0.0; FEATURE_DIM];
    for e in batch {
        let logits = params.logits(&e.features);
        let probs = softmax(&logits);
        let lse = crate::policy::log_sum_exp(&logits);
        loss -= logits[e.target] - lse;
        for (p, f) in probs.iter().zip(&e.features) {
            for j in 0..FEATURE_DIM {
                grad[j] += p * f.0[j];
            }
        }
        for j in 0..FEATURE_DIM {
            grad[j] -= e.features[e.target].0[j];
        }
    }
    let scale = 1.0 / (batch.len() as f64 * params.temperature);
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss / batch.len() as f64, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftEpochLog {
    pub epoch: usize,
    /// Full training-set loss after the epoch's updates.
    pub loss: f64,
    pub grad_norm: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftOutcome {
    pub params: PolicyParams,
    pub initial_loss: f64,
    pub log: Vec<SftEpochLog>,
}

impl SftOutcome {
    pub fn final_loss(&self) -> f64 {
        self.log.last().map_or(self.initial_loss, |l| l.loss)
    }
}

/// Mini-batch gradient descent with a seeded shuffle per epoch.
pub fn train_sft(params0: &PolicyParams, data: &[SftExample], cfg: &SftConfig, seed: u64) -> Result<SftOutcome> {
    check_batch(data)?;
    params0.validate()?;
    let mut params = params0.clone();
    let initial_loss = sft_loss(&params, data)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let batch_size = cfg.batch_size.max(1);
    let mut batch = Vec::with_capacity(batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::rng_for(seed, epoch as u64));
        for chunk in order.chunks(batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (_, g) = sft_loss_and_grad(&params, &batch)?;
            for (t, gj) in params.theta.iter_mut().zip(g) {
                *t -= cfg.learning_rate * gj;
            }
        }
        let (loss, g) = sft_loss_and_grad(&params, data)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "sft loss at epoch {epoch} (theta = {:?})",
                params.theta
            )));
        }
        log.push(SftEpochLog {
            epoch,
            loss,
            grad_norm: g.iter().map(|x| x * x).sum::<f64>().sqrt(),
            seed,
        });
    }
    Ok(SftOutcome {
        params,
        initial_loss,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::grad_check;
    use rand::Rng as _;

    fn random_examples(rng: &mut rng::Rng, n: usize, k: usize) -> Vec<SftExample> {
        (0..n)
            .map(|_| SftExample {
                features: (0..k)
                    .map(|_| {
                        let mut f = [0.0; FEATURE_DIM];
                        f.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
                        FeatureVector(f)
                    })
                    .collect(),
                target: rng.random_range(0..k),
            })
            .collect()
    }

    #[test]
    fn zero_theta_is_ln_k() {
        let mut rng = rng::rng_from(1);
        let data = random_examples(&mut rng, 5, 10);
        let loss = sft_loss(&PolicyParams::zeros(), &data).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_record_has_near_zero_loss() {
        let mut f = vec![FeatureVector([0.0; FEATURE_DIM]); 3];
        f[1].0[0] = 1.0;
        let mut theta = [0.0; FEATURE_DIM];
        theta[0] = 40.0;
        let loss = sft_loss(&PolicyParams::new(theta, 0.5).unwrap(), &[SftExample { features: f, target: 1 }]).unwrap();
        assert!(loss < 1e-30);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng::rng_from(3);
        for _ in 0..20 {
            let data = random_examples(&mut rng, 8, 10);
            let mut theta = [0.0; FEATURE_DIM];
            theta.iter_mut().for_each(|t| *t = rng.random_range(-1.0..1.0));
            let p = PolicyParams::new(theta, 0.5).unwrap();
            let (_, g) = sft_loss_and_grad(&p, &data).unwrap();
            let f = |x: &[f64]| {
                let mut q = p.clone();
                q.theta.copy_from_slice(x);
                sft_loss(&q, &data).unwrap()
            };
            assert!(grad_check(f, &theta, &g, 1e-5) < 1e-5);
        }
    }

    #[test]
    fn rejects_bad_batches() {
        assert!(sft_loss(&PolicyParams::zeros(), &[]).is_err());
        let bad = SftExample { features: vec![FeatureVector([0.0; FEATURE_DIM])], target: 1 };
        assert!(sft_loss(&PolicyParams::zeros(), &[bad]).is_err());
    }

    #[test]
    fn single_record_becomes_argmax() {
        let mut rng = rng::rng_from(5);
        let data = random_examples(&mut rng, 1, 10);
        let cfg = SftConfig { learning_rate: 0.5, epochs: 400, batch_size: 1 };
        let out = train_sft(&PolicyParams::zeros(), &data, &cfg, 1).unwrap();
        let logits = out.params.logits(&data[0].features);
        let arg = (0..logits.len()).max_by(|a, b| logits[*a].total_cmp(&logits[*b])).unwrap();
        assert_eq!(arg, data[0].target);
    }

    #[test]
    fn zero_rate_keeps_params_and_small_rate_is_monotone() {
        let mut rng = rng::rng_from(8);
        let data = random_examples(&mut rng, 40, 10);
        let cfg = SftConfig { learning_rate: 0.0, epochs: 3, batch_size: 8 };
        let out = train_sft(&PolicyParams::zeros(), &data, &cfg, 1).unwrap();
        assert_eq!(out.params, PolicyParams::zeros());

        let cfg = SftConfig { learning_rate: 1e-3, epochs: 30, batch_size: data.len() };
        let out = train_sft(&PolicyParams::zeros(), &data, &cfg, 1).unwrap();
        let mut prev = out.initial_loss;
        for l in &out.log {
            assert!(l.loss <= prev + 1e-15, "loss rose from {prev} to {}", l.loss);
            prev = l.loss;
        }
    }
}
