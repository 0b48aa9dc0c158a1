//! Acting policies and exploration helpers.

use rand::Rng;

use crate::encoding::{encode_state, ActionId, ActionSet};
use crate::error::AgentError;
use crate::game::PlayerView;
use crate::neural::{softmax, Network};
use crate::rng::GameRng;

/// Anything that can pick an action for the seat to move.
///
/// Implementations only see the acting player's view and must return one
/// of `view.legal_actions`.
pub trait Policy: Send + Sync {
    fn act(&self, view: &PlayerView, rng: &mut GameRng) -> ActionId;

    fn name(&self) -> &str {
        "policy"
    }
}

/// Uniform over legal actions.
pub fn random_act(legal: ActionSet, rng: &mut GameRng) -> Result<ActionId, AgentError> {
    if legal.is_empty() {
        return Err(AgentError::NoLegalActions);
    }
    let k = rng.random_range(0..legal.len());
    Ok(legal.nth(k).expect("index below len"))
}

/// Highest `q` among legal actions; ties go to the lowest id.
pub fn masked_argmax(q: &[f64], legal: ActionSet) -> Result<ActionId, AgentError> {
    let mut best: Option<(ActionId, f64)> = None;
    for a in legal.iter() {
        let v = q[a.index()];
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a).ok_or(AgentError::NoLegalActions)
}

/// With probability `epsilon` a uniform legal action, otherwise the masked
/// argmax of `q`.
pub fn epsilon_greedy(q: &[f64], legal: ActionSet, epsilon: f64, rng: &mut GameRng) -> Result<ActionId, AgentError> {
    if legal.is_empty() {
        return Err(AgentError::NoLegalActions);
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        random_act(legal, rng)
    } else {
        masked_argmax(q, legal)
    }
}

/// Samples from the softmax of `logits` restricted to legal actions.
pub fn sample_masked_softmax(logits: &[f64], legal: ActionSet, rng: &mut GameRng) -> Result<ActionId, AgentError> {
    if legal.is_empty() {
        return Err(AgentError::NoLegalActions);
    }
    let ids: Vec<ActionId> = legal.iter().collect();
    let masked: Vec<f64> = ids.iter().map(|a| logits[a.index()]).collect();
    let probs = softmax(&masked);
    let mut u: f64 = rng.random();
    for (a, p) in ids.iter().zip(&probs) {
        if u < *p {
            return Ok(*a);
        }
        u -= p;
    }
    Ok(*ids.last().expect("nonempty"))
}

/// Linear decay from `start` to `end` over `decay_steps`, then constant.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            start: 1.0,
            end: 0.05,
            decay_steps: 20_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&self, view: &PlayerView, rng: &mut GameRng) -> ActionId {
        random_act(view.legal_actions, rng).expect("acting seat always has a legal action")
    }

    fn name(&self) -> &str {
        "random"
    }
}

/// Greedy masked argmax over a network's outputs. Used for evaluation of
/// every trained agent: Q estimators and the NFSP average policy alike
/// (argmax of logits equals argmax of their softmax).
#[derive(Clone, Debug)]
pub struct GreedyPolicy {
    pub net: Network,
    pub label: String,
}

impl GreedyPolicy {
    pub fn new(net: Network, label: impl Into<String>) -> GreedyPolicy {
        GreedyPolicy {
            net,
            label: label.into(),
        }
    }
}

impl Policy for GreedyPolicy {
    fn act(&self, view: &PlayerView, _rng: &mut GameRng) -> ActionId {
        let q = self.net.predict(&encode_state(view));
        masked_argmax(&q, view.legal_actions).expect("acting seat always has a legal action")
    }

    fn name(&self) -> &str {
        &self.label
    }
}
