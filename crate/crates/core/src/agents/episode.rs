use super::ddqn::Transition;
use super::policy::Policy;
use crate::encoding::{encode_hand_target, ActionId, ActionSet, EncodedState};
use crate::error::{AgentError, GameError};
use crate::game::TableState;
use crate::mcts::{run_search, MctsConfig};
use crate::neural::Network;
use crate::rng::GameRng;

/// What the learner chose at one decision point.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Decision {
    pub action: ActionId,
    pub q_m: Option<f64>,
    pub r_m: f64,
}

impl Decision {
    pub fn plain(action: ActionId) -> Decision {
        Decision {
            action,
            q_m: None,
            r_m: 0.0,
        }
    }
}

/// The learner's encoded observation at `seat`.
pub fn learner_state(env: &TableState, seat: usize) -> EncodedState {
    encode_hand_target(env.hand(seat), env.target())
}

fn play_opponents(
    env: &mut TableState,
    seat: usize,
    opponent: &dyn Policy,
    rng: &mut GameRng,
) -> Result<(), GameError> {
    while !env.is_over() && env.current_player() != seat {
        if env.is_stalled() {
            return Err(GameError::Stalled(env.round_count()));
        }
        let p = env.current_player();
        let a = opponent.act(&env.view(p), rng);
        env.apply_action(a)?;
    }
    if env.is_stalled() && !env.is_over() {
        return Err(GameError::Stalled(env.round_count()));
    }
    Ok(())
}

/// Plays `env` to the end with the learner at `seat` and `opponent` in every
/// other seat. `decide` is called at each learner decision with the table,
/// the learner's encoded state and its legal actions; one transition is
/// recorded per decision.
pub fn generate_episode<F>(
    env: &mut TableState,
    seat: usize,
    opponent: &dyn Policy,
    rng: &mut GameRng,
    mut decide: F,
) -> Result<Vec<Transition>, AgentError>
where
    F: FnMut(&TableState, &EncodedState, ActionSet, &mut GameRng) -> Result<Decision, AgentError>,
{
    let mut out = Vec::new();
    play_opponents(env, seat, opponent, rng)?;
    while !env.is_over() {
        let s = learner_state(env, seat);
        let legal = env.current_legal_actions();
        let d = decide(env, &s, legal, rng)?;
        env.apply_action(d.action)?;
        play_opponents(env, seat, opponent, rng)?;
        let (r, done) = match env.result() {
            Some(res) => (res.reward(seat), true),
            None => (0.0, false),
        };
        out.push(Transition {
            q_m: d.q_m,
            s,
            a: d.action,
            s_next: learner_state(env, seat),
            legal_next: if done {
                ActionSet::EMPTY
            } else {
                env.current_legal_actions()
            },
            r,
            r_m: d.r_m,
            r_t: r + d.r_m,
            done,
        });
    }
    Ok(out)
}

/// An episode where every learner decision comes from a search with the
/// estimator `net`. `opponent` plays the other seats both for real and
/// inside the simulations.
pub fn generate_episode_mcts(
    env: &mut TableState,
    seat: usize,
    net: &Network,
    config: &MctsConfig,
    opponent: &dyn Policy,
    rng: &mut GameRng,
) -> Result<Vec<Transition>, AgentError> {
    generate_episode(env, seat, opponent, rng, |table, _, _, rng| {
        let res = run_search(table, net, config, opponent, rng)?;
        Ok(Decision {
            action: res.a_best,
            q_m: Some(res.q_m_chosen),
            r_m: res.r_m,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{random_act, RandomPolicy};
    use crate::neural::DEFAULT_LAYERS;
    use crate::rng::rng_from_seed;

    #[test]
    fn one_transition_per_decision() {
        for seed in 0..50 {
            let mut env = TableState::new(3, seed).unwrap();
            let mut rng = rng_from_seed(seed);
            let mut calls = 0;
            let eps = generate_episode(&mut env, 1, &RandomPolicy, &mut rng, |_, _, legal, rng| {
                calls += 1;
                Ok(Decision::plain(random_act(legal, rng)?))
            })
            .unwrap();
            assert_eq!(eps.len(), calls);
            let last = eps.last().unwrap();
            assert!(last.done && last.r.abs() == 1.0);
            assert!(eps[..eps.len() - 1].iter().all(|t| !t.done && t.r == 0.0));
            assert_eq!(last.r == 1.0, env.result().unwrap().winner == 1);
        }
    }

    #[test]
    fn mcts_episode_rewards() {
        let net = Network::init(&DEFAULT_LAYERS, 0);
        let mut env = TableState::new(2, 11).unwrap();
        let mut rng = rng_from_seed(2);
        let eps = generate_episode_mcts(&mut env, 0, &net, &MctsConfig::default(), &RandomPolicy, &mut rng).unwrap();
        for t in &eps {
            assert!(t.r_m.abs() <= 1.0);
            assert!(t.q_m.is_some());
            assert_eq!(t.r_t, t.r + t.r_m);
        }
        assert!(eps.last().unwrap().done);
    }
}
