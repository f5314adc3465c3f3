//! Candidate scoring and sub-batch selection.
//!
//! Five strategies share one interface: uniform sampling, gradient-norm
//! ranking, gradient-norm importance sampling, reducible-holdout-loss ranking
//! and the fairness-aware score that adds a peer-corrected proxy loss.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::proxy::{peer_expectation, proxy_loss, PeerContext, ProxyPredictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    Uniform,
    GradNorm,
    GradNormIs,
    RhoLoss,
    Fair,
}

/// How the fair strategy combines its three terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveVariant {
    /// `train + (1 - alpha) * proxy - gamma * peer`
    #[default]
    Additive,
    /// `train - alpha * (proxy - gamma * peer)`
    Reducible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorConfig {
    pub kind: SelectorKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub variant: ObjectiveVariant,
}

fn default_alpha() -> f64 {
    0.9
}

fn default_gamma() -> f64 {
    0.3
}

impl SelectorConfig {
    pub fn new(kind: SelectorKind) -> Self {
        SelectorConfig {
            kind,
            alpha: default_alpha(),
            gamma: default_gamma(),
            variant: ObjectiveVariant::default(),
        }
    }

    pub fn fair(alpha: f64, gamma: f64, variant: ObjectiveVariant) -> Self {
        SelectorConfig {
            kind: SelectorKind::Fair,
            alpha,
            gamma,
            variant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::input(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn needs_proxy(&self) -> bool {
        matches!(self.kind, SelectorKind::RhoLoss | SelectorKind::Fair)
    }
}

/// Per-candidate score with its components kept for auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub id: u64,
    pub train_loss: f64,
    pub proxy_loss: Option<f64>,
    pub peer_term: Option<f64>,
    pub score: f64,
    /// Importance-sampling probability (grad-norm IS only).
    pub sampling_weight: Option<f64>,
}

/// The fair selection score `train + (1 - alpha) * proxy - gamma * peer`.
pub fn fair_score(train_loss: f64, proxy_loss: f64, peer_term: f64, alpha: f64, gamma: f64) -> f64 {
    train_loss + (1.0 - alpha) * proxy_loss - gamma * peer_term
}

/// Frozen state every candidate is scored against.
#[derive(Clone, Copy)]
pub struct ScoringContext<'a> {
    pub model: &'a Model,
    pub proxy: Option<&'a ProxyPredictor>,
    pub peer: Option<&'a PeerContext>,
}

/// Scores every candidate in `batch`. Model-based scores are computed in
/// parallel on the current rayon pool; uniform scores consume `rng`.
pub fn score_candidates<R: Rng + ?Sized>(
    ctx: &ScoringContext<'_>,
    batch: &[&Example],
    config: &SelectorConfig,
    rng: &mut R,
) -> Result<Vec<ScoredCandidate>> {
    if batch.is_empty() {
        return Err(Error::input("candidate batch is empty"));
    }
    config.validate()?;
    if config.kind == SelectorKind::Uniform {
        return batch
            .iter()
            .map(|ex| {
                Ok(ScoredCandidate {
                    id: ex.id,
                    train_loss: ctx.model.example_loss(ex)?,
                    proxy_loss: None,
                    peer_term: None,
                    score: rng.random(),
                    sampling_weight: None,
                })
            })
            .collect();
    }
    let proxy = || {
        ctx.proxy
            .ok_or_else(|| Error::input(format!("{:?} selection needs a proxy", config.kind)))
    };
    let mut scored = batch
        .par_iter()
        .map(|ex| -> Result<ScoredCandidate> {
            let train_loss = ctx.model.example_loss(ex)?;
            let mut c = ScoredCandidate {
                id: ex.id,
                train_loss,
                proxy_loss: None,
                peer_term: None,
                score: train_loss,
                sampling_weight: None,
            };
            match config.kind {
                SelectorKind::Uniform => unreachable!(),
                SelectorKind::GradNorm | SelectorKind::GradNormIs => {
                    c.score = ctx.model.example_grad_norm(ex)?;
                }
                SelectorKind::RhoLoss => {
                    let holdout = proxy_loss(proxy()?, ex)?;
                    c.proxy_loss = Some(holdout);
                    c.score = train_loss - holdout;
                }
                SelectorKind::Fair => {
                    let p = proxy()?;
                    let peer_ctx = ctx
                        .peer
                        .ok_or_else(|| Error::Unavailable("fair selection needs peer statistics".into()))?;
                    let zs = proxy_loss(p, ex)?;
                    let peer = peer_expectation(p, ex, peer_ctx)?;
                    c.proxy_loss = Some(zs);
                    c.peer_term = Some(peer);
                    c.score = match config.variant {
                        ObjectiveVariant::Additive => fair_score(train_loss, zs, peer, config.alpha, config.gamma),
                        ObjectiveVariant::Reducible => train_loss - config.alpha * (zs - config.gamma * peer),
                    };
                }
            }
            if !c.score.is_finite() {
                return Err(Error::numeric(format!("non-finite score for example {}", ex.id)));
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    if config.kind == SelectorKind::GradNormIs {
        let total: f64 = scored.iter().map(|c| c.score).sum();
        let n = scored.len() as f64;
        for c in &mut scored {
            c.sampling_weight = Some(if total > 0.0 { c.score / total } else { 1.0 / n });
        }
    }
    Ok(scored)
}

/// Indices of the `n` best candidates: descending score, ties by ascending id.
pub fn select_top(scored: &[ScoredCandidate], n: usize) -> Result<Vec<usize>> {
    if n > scored.len() {
        return Err(Error::input(format!(
            "cannot select {n} from a batch of {}",
            scored.len()
        )));
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        scored[b]
            .score
            .total_cmp(&scored[a].score)
            .then(scored[a].id.cmp(&scored[b].id))
    });
    order.truncate(n);
    Ok(order)
}

/// One chosen candidate and the weight of its loss in the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub index: usize,
    pub weight: f64,
}

/// Draws `n` candidates with replacement proportional to their sampling
/// weights; each pick carries the importance weight `1 / (N_B * p_i)`.
pub fn sample_importance<R: Rng + ?Sized>(scored: &[ScoredCandidate], n: usize, rng: &mut R) -> Result<Vec<Pick>> {
    if scored.is_empty() {
        return Err(Error::input("candidate batch is empty"));
    }
    let probs: Vec<f64> = scored
        .iter()
        .map(|c| c.sampling_weight.unwrap_or(1.0 / scored.len() as f64))
        .collect();
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::numeric(format!("sampling weights: {e}")))?;
    let big = scored.len() as f64;
    Ok((0..n)
        .map(|_| {
            let index = dist.sample(rng);
            Pick {
                index,
                weight: 1.0 / (big * probs[index]),
            }
        })
        .collect())
}

/// Chooses the training sub-batch according to the strategy.
pub fn select<R: Rng + ?Sized>(
    scored: &[ScoredCandidate],
    n: usize,
    config: &SelectorConfig,
    rng: &mut R,
) -> Result<Vec<Pick>> {
    match config.kind {
        SelectorKind::GradNormIs => {
            if n > scored.len() {
                return Err(Error::input(format!(
                    "cannot select {n} from a batch of {}",
                    scored.len()
                )));
            }
            sample_importance(scored, n, rng)
        }
        _ => Ok(select_top(scored, n)?
            .into_iter()
            .map(|index| Pick { index, weight: 1.0 })
            .collect()),
    }
}
