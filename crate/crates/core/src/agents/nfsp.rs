//! Neural fictitious self-play: a DDQN best response mixed with a
//! supervised average policy.

use rand::Rng;

use super::buffer::{ReplayBuffer, ReservoirBuffer};
use super::ddqn::{DdqnLearner, Transition};
use super::policy::{epsilon_greedy, sample_masked_softmax};
use crate::encoding::{ActionId, ActionSet, EncodedState};
use crate::error::AgentError;
use crate::neural::{Adam, AdamConfig, Network};
use crate::rng::GameRng;

/// With probability `eta` acts ε-greedily on the value network (best
/// response, flagged `true`), otherwise samples the average policy.
pub fn nfsp_act(
    s: &EncodedState,
    legal: ActionSet,
    value_net: &Network,
    policy_net: &Network,
    eta: f64,
    epsilon: f64,
    rng: &mut GameRng,
) -> Result<(ActionId, bool), AgentError> {
    if legal.is_empty() {
        return Err(AgentError::NoLegalActions);
    }
    if rng.random::<f64>() < eta {
        let a = epsilon_greedy(&value_net.predict(s), legal, epsilon, rng)?;
        Ok((a, true))
    } else {
        let a = sample_masked_softmax(&policy_net.predict(s), legal, rng)?;
        Ok((a, false))
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct NfspLosses {
    pub value: f64,
    pub policy: f64,
}

#[derive(Clone, Debug)]
pub struct NfspLearner {
    pub value: DdqnLearner,
    pub policy: Network,
    pub policy_optimizer: Adam,
    pub eta: f64,
}

impl NfspLearner {
    pub fn new(value: DdqnLearner, policy: Network, adam: AdamConfig, eta: f64) -> NfspLearner {
        NfspLearner {
            value,
            policy_optimizer: Adam::new(&policy, adam),
            policy,
            eta,
        }
    }

    pub fn train_policy_on(&mut self, batch: &[&(EncodedState, ActionId)]) -> Result<f64, AgentError> {
        let states: Vec<EncodedState> = batch.iter().map(|x| x.0).collect();
        let actions: Vec<ActionId> = batch.iter().map(|x| x.1).collect();
        let (loss, grads) = self.policy.grad_nll(&states, &actions)?;
        self.policy_optimizer.step(&mut self.policy, &grads)?;
        Ok(loss)
    }
}

/// Value network as plain DDQN on the transition memory, policy network by
/// negative log-likelihood on the best-response memory.
pub fn nfsp_train_step(
    learner: &mut NfspLearner,
    mrl: &ReplayBuffer<Transition>,
    msl: &ReservoirBuffer<(EncodedState, ActionId)>,
    rng: &mut GameRng,
) -> Result<NfspLosses, AgentError> {
    let batch_size = learner.value.batch_size;
    if mrl.len() < batch_size || msl.len() < batch_size {
        return Err(AgentError::InsufficientData {
            have: mrl.len().min(msl.len()),
            need: batch_size,
        });
    }
    let value = learner.value.train_step(mrl, rng)?.ddqn;
    let batch = msl.sample(batch_size, rng)?;
    let policy = learner.train_policy_on(&batch)?;
    Ok(NfspLosses { value, policy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode_hand_target;
    use crate::game::{Card, Color};
    use crate::neural::DEFAULT_LAYERS;
    use crate::rng::rng_from_seed;

    #[test]
    fn eta_extremes() {
        let v = Network::init(&DEFAULT_LAYERS, 1);
        let p = Network::init(&DEFAULT_LAYERS, 2);
        let s = encode_hand_target(&[Card::number(Color::Red, 1)], Card::number(Color::Red, 2));
        let legal: ActionSet = [1, 60].iter().map(|&i| ActionId::new(i).unwrap()).collect();
        let mut rng = rng_from_seed(0);
        for _ in 0..200 {
            assert!(nfsp_act(&s, legal, &v, &p, 1.0, 0.0, &mut rng).unwrap().1);
            let (a, br) = nfsp_act(&s, legal, &v, &p, 0.0, 0.0, &mut rng).unwrap();
            assert!(!br && legal.contains(a));
        }
    }

    #[test]
    fn peaked_policy_has_tiny_nll() {
        let mut p = Network::zeros(&DEFAULT_LAYERS);
        // Output bias for action 7 dominates.
        let idx = p.num_params() - 61 + 7;
        *p.param_mut(idx) = 50.0;
        let s = encode_hand_target(&[], Card::number(Color::Red, 2));
        let (loss, _) = p.grad_nll(&[s, s], &[ActionId::new(7).unwrap(); 2]).unwrap();
        assert!(loss < 1e-12);
    }
}
