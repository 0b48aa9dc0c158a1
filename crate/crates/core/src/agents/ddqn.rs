//! Double DQN, with and without the search term.

use super::buffer::ReplayBuffer;
use super::policy::masked_argmax;
use crate::encoding::{ActionId, ActionSet, EncodedState, NUM_ACTIONS};
use crate::error::{AgentError, NetworkError};
use crate::neural::{sync_target, Adam, AdamConfig, Gradients, Input, Network};
use crate::rng::GameRng;

/// One learner decision and what followed it.
///
/// `s_next` is the learner's next decision state (opponent turns are folded
/// into the transition); at a terminal it is the learner's final
/// observation and `legal_next` is empty.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    /// `Q_m(s, a)` from the search; `None` for agents that do not search.
    pub q_m: Option<f64>,
    pub s: EncodedState,
    pub a: ActionId,
    pub s_next: EncodedState,
    pub legal_next: ActionSet,
    /// Environment reward: +1/-1 at a terminal, 0 otherwise.
    pub r: f64,
    /// Average terminal reward of the search, 0 without search.
    pub r_m: f64,
    /// `r + r_m`.
    pub r_t: f64,
    pub done: bool,
}

#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct LossComponents {
    pub ddqn: f64,
    pub mcts: f64,
    pub total: f64,
}

/// Which reward enters the bootstrap target.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RewardSource {
    /// Plain environment reward `r`.
    Env,
    /// Shaped reward `r_t = r + r_m`.
    Shaped,
}

/// Double DQN targets: the estimator picks the next action among the legal
/// ones, the target network values it. Terminal targets are the reward.
pub fn ddqn_targets(
    batch: &[&Transition],
    estimator: &Network,
    target: &Network,
    discount: f64,
    reward: RewardSource,
) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            let r = match reward {
                RewardSource::Env => t.r,
                RewardSource::Shaped => t.r_t,
            };
            if t.done {
                return r;
            }
            match masked_argmax(&estimator.predict(&t.s_next), t.legal_next) {
                Ok(a) => r + discount * target.predict(&t.s_next)[a.index()],
                Err(_) => r,
            }
        })
        .collect()
}

/// Loss and estimator gradient for a batch.
///
/// With `mcts_term` the loss is `L_ddqn + L_mcts` where
/// `L_mcts = mean (Q_m(s,a) - Q(s,a))^2` over the batch; transitions
/// without `q_m` contribute zero to it.
pub fn ddqn_loss(
    batch: &[&Transition],
    estimator: &Network,
    target: &Network,
    discount: f64,
    reward: RewardSource,
    mcts_term: bool,
) -> Result<(LossComponents, Gradients), NetworkError> {
    if batch.is_empty() {
        return Err(NetworkError::Shape("empty batch".into()));
    }
    let n = batch.len() as f64;
    let targets = ddqn_targets(batch, estimator, target, discount, reward);
    let mut inputs = Vec::with_capacity(batch.len());
    let mut d_outputs = Vec::with_capacity(batch.len());
    let mut loss = LossComponents::default();
    for (t, y) in batch.iter().zip(&targets) {
        let x = t.s.dense();
        let q = estimator.forward_one(&x)?[t.a.index()];
        let mut dq = -2.0 * (y - q) / n;
        loss.ddqn += (y - q) * (y - q);
        if mcts_term {
            if let Some(qm) = t.q_m {
                loss.mcts += (qm - q) * (qm - q);
                dq += -2.0 * (qm - q) / n;
            }
        }
        let mut d = vec![0.0; NUM_ACTIONS];
        d[t.a.index()] = dq;
        inputs.push(x);
        d_outputs.push(d);
    }
    loss.ddqn /= n;
    loss.mcts /= n;
    loss.total = loss.ddqn + loss.mcts;
    let grads = estimator.backward(&inputs, &d_outputs)?;
    Ok((loss, grads))
}

/// Estimator, target network and optimizer of a Double DQN learner.
#[derive(Clone, Debug)]
pub struct DdqnLearner {
    pub estimator: Network,
    pub target: Network,
    pub optimizer: Adam,
    pub discount: f64,
    pub batch_size: usize,
    pub target_sync: u64,
    pub train_steps: u64,
    /// Train on `L_ddqn(r_t) + L_mcts` instead of `L_ddqn(r)`.
    pub mcts: bool,
}

impl DdqnLearner {
    pub fn new(
        estimator: Network,
        adam: AdamConfig,
        discount: f64,
        batch_size: usize,
        target_sync: u64,
        mcts: bool,
    ) -> DdqnLearner {
        DdqnLearner {
            target: sync_target(&estimator),
            optimizer: Adam::new(&estimator, adam),
            estimator,
            discount,
            batch_size,
            target_sync,
            train_steps: 0,
            mcts,
        }
    }

    /// Loss on an explicit batch followed by one optimizer step.
    pub fn train_on(&mut self, batch: &[&Transition]) -> Result<LossComponents, AgentError> {
        let reward = if self.mcts {
            RewardSource::Shaped
        } else {
            RewardSource::Env
        };
        let (loss, grads) = ddqn_loss(batch, &self.estimator, &self.target, self.discount, reward, self.mcts)?;
        self.optimizer.step(&mut self.estimator, &grads)?;
        self.train_steps += 1;
        if self.target_sync > 0 && self.train_steps.is_multiple_of(self.target_sync) {
            self.target = sync_target(&self.estimator);
        }
        Ok(loss)
    }

    /// Samples a batch from `buffer` and trains on it.
    pub fn train_step(
        &mut self,
        buffer: &ReplayBuffer<Transition>,
        rng: &mut GameRng,
    ) -> Result<LossComponents, AgentError> {
        let batch = buffer.sample(self.batch_size, rng)?;
        self.train_on(&batch)
    }
}

/// One DDQN-with-search update.
pub fn ddqn_mcts_train_step(
    learner: &mut DdqnLearner,
    buffer: &ReplayBuffer<Transition>,
    rng: &mut GameRng,
) -> Result<LossComponents, AgentError> {
    debug_assert!(learner.mcts);
    learner.train_step(buffer, rng)
}

/// One plain DDQN update.
pub fn ddqn_train_step(
    learner: &mut DdqnLearner,
    buffer: &ReplayBuffer<Transition>,
    rng: &mut GameRng,
) -> Result<f64, AgentError> {
    debug_assert!(!learner.mcts);
    learner.train_step(buffer, rng).map(|l| l.ddqn)
}
