//! Deep Monte Carlo: regress `Q(s_t, a_t)` onto discounted episode returns.

use super::buffer::ReplayBuffer;
use super::ddqn::Transition;
use crate::encoding::{ActionId, EncodedState};
use crate::error::{AgentError, NetworkError};
use crate::neural::{Adam, AdamConfig, Gradients, Network};
use crate::rng::GameRng;

/// `G_t = R_t + discount * G_{t+1}` with nothing after the last step.
pub fn dmc_returns(rewards: &[f64], discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        g = r + discount * g;
        out[i] = g;
    }
    out
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DmcSample {
    pub s: EncodedState,
    pub a: ActionId,
    pub g: f64,
}

/// Return-labelled samples of one learner episode.
pub fn dmc_samples(episode: &[Transition], discount: f64) -> Vec<DmcSample> {
    let rewards: Vec<f64> = episode.iter().map(|t| t.r).collect();
    episode
        .iter()
        .zip(dmc_returns(&rewards, discount))
        .map(|(t, g)| DmcSample { s: t.s, a: t.a, g })
        .collect()
}

pub fn dmc_loss(batch: &[&DmcSample], net: &Network) -> Result<(f64, Gradients), NetworkError> {
    let states: Vec<EncodedState> = batch.iter().map(|x| x.s).collect();
    let actions: Vec<ActionId> = batch.iter().map(|x| x.a).collect();
    let targets: Vec<f64> = batch.iter().map(|x| x.g).collect();
    net.grad_mse(&states, &actions, &targets)
}

#[derive(Clone, Debug)]
pub struct DmcLearner {
    pub net: Network,
    pub optimizer: Adam,
    pub batch_size: usize,
    pub train_steps: u64,
}

impl DmcLearner {
    pub fn new(net: Network, adam: AdamConfig, batch_size: usize) -> DmcLearner {
        DmcLearner {
            optimizer: Adam::new(&net, adam),
            net,
            batch_size,
            train_steps: 0,
        }
    }

    pub fn train_on(&mut self, batch: &[&DmcSample]) -> Result<f64, AgentError> {
        let (loss, grads) = dmc_loss(batch, &self.net)?;
        self.optimizer.step(&mut self.net, &grads)?;
        self.train_steps += 1;
        Ok(loss)
    }
}

pub fn dmc_train_step(
    learner: &mut DmcLearner,
    buffer: &ReplayBuffer<DmcSample>,
    rng: &mut GameRng,
) -> Result<f64, AgentError> {
    let batch = buffer.sample(learner.batch_size, rng)?;
    learner.train_on(&batch)
}
