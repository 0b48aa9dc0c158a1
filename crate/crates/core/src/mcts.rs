//! Multi-player Monte Carlo tree search with one-step expansion.
//!
//! Statistics exist only for states where the searching (root) player is to
//! move. After the root player acts, opponents play out their turns with a
//! fixed policy and no bookkeeping until the root player moves again or the
//! game ends. Each simulation descends through known states by
//! `Q_m + UCT`, adds at most one new state (initialised from the network's
//! predictions), and backs values up the visited path:
//!
//! ```text
//! uct(s, a)    = c * sqrt(N(s) / (1 + N(s, a)))
//! Q_m(s, a)   <- (Q_m(s, a) * N(s, a) + q_back) / (N(s, a) + 1)
//! q_back       = lambda * max_a' Q_m(s', a') + r(s')
//! r_m          = sum of terminal rewards / simulations
//! ```
//!
//! `r(s')` is +1/-1 at a terminal state (where the max term is 0) and 0
//! everywhere else.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;

use crate::agents::{epsilon_greedy, Policy};
use crate::encoding::{encode_hand_target, ActionId, ActionSet, EncodedState};
use crate::error::{GameError, SearchError};
use crate::game::{sample_determinization, TableState};
use crate::neural::Network;
use crate::rng::GameRng;

/// How simulations obtain the hidden cards.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// Clone the true table, hidden cards included.
    #[default]
    Oracle,
    /// Resample the unseen cards for every simulation.
    Determinized,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct MctsConfig {
    pub simulations: usize,
    pub c_puct: f64,
    pub discount: f64,
    /// Exploration rate of the final root choice.
    pub epsilon: f64,
    pub mode: SimulationMode,
    pub trace: bool,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            simulations: 50,
            c_puct: 1.0,
            discount: 0.99,
            epsilon: 0.0,
            mode: SimulationMode::Oracle,
            trace: false,
        }
    }
}

pub fn uct(n_s: u32, n_sa: u32, c_puct: f64) -> f64 {
    c_puct * (f64::from(n_s) / (1.0 + f64::from(n_sa))).sqrt()
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Edge {
    pub action: ActionId,
    pub q: f64,
    pub visits: u32,
}

/// Statistics of one root-player state.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeStats {
    /// Seat that was to move when the state was recorded.
    pub player: usize,
    /// One edge per legal action, ascending by id.
    pub edges: Vec<Edge>,
    pub visits: u32,
}

impl NodeStats {
    /// Initialises `Q_m` from `predictions` (indexed by action id).
    pub fn new(player: usize, legal: ActionSet, predictions: &[f64]) -> NodeStats {
        NodeStats {
            player,
            edges: legal
                .iter()
                .map(|a| Edge {
                    action: a,
                    q: predictions[a.index()],
                    visits: 0,
                })
                .collect(),
            visits: 0,
        }
    }

    pub fn legal(&self) -> ActionSet {
        self.edges.iter().map(|e| e.action).collect()
    }

    pub fn edge(&self, action: ActionId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.action == action)
    }

    /// Largest `Q_m`; 0 for a state without actions.
    pub fn max_q(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.q)
            .fold(None, |m: Option<f64>, q| Some(m.map_or(q, |m| m.max(q))))
            .unwrap_or(0.0)
    }

    /// `Q_m` as a dense 61-entry table; illegal entries are 0.
    pub fn q_table(&self) -> Vec<f64> {
        let mut q = vec![0.0; crate::encoding::NUM_ACTIONS];
        for e in &self.edges {
            q[e.action.index()] = e.q;
        }
        q
    }
}

/// Per-search statistics keyed by the encoded root-player state.
#[derive(Clone, Debug, Default)]
pub struct SearchTree {
    nodes: HashMap<EncodedState, NodeStats>,
}

impl SearchTree {
    pub fn new() -> SearchTree {
        SearchTree::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, s: &EncodedState) -> Option<&NodeStats> {
        self.nodes.get(s)
    }

    pub fn contains(&self, s: &EncodedState) -> bool {
        self.nodes.contains_key(s)
    }

    pub fn insert(&mut self, s: EncodedState, stats: NodeStats) {
        self.nodes.insert(s, stats);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EncodedState, &NodeStats)> {
        self.nodes.iter()
    }

    /// Argmax of `Q_m + uct` over the legal actions of `s`; ties go to the
    /// lowest id.
    pub fn select_action(&self, s: &EncodedState, c_puct: f64) -> Result<ActionId, SearchError> {
        let stats = self.nodes.get(s).ok_or(SearchError::UnknownState)?;
        let mut best: Option<(ActionId, f64)> = None;
        for e in &stats.edges {
            let score = e.q + uct(stats.visits, e.visits, c_puct);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((e.action, score));
            }
        }
        best.map(|(a, _)| a).ok_or(SearchError::NoLegalActions)
    }

    /// Folds `q_back` into the running mean of `(s, a)` and bumps both
    /// visit counters.
    pub fn backprop_update(&mut self, s: &EncodedState, a: ActionId, q_back: f64) -> Result<(), SearchError> {
        let stats = self.nodes.get_mut(s).ok_or(SearchError::UnknownState)?;
        let edge = stats
            .edges
            .iter_mut()
            .find(|e| e.action == a)
            .ok_or(SearchError::NoLegalActions)?;
        let n = f64::from(edge.visits);
        edge.q = (edge.q * n + q_back) / (n + 1.0);
        edge.visits += 1;
        stats.visits += 1;
        Ok(())
    }
}

/// What a backup sees below an edge.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Child {
    /// A root-player state with statistics, given by its largest `Q_m`.
    State { max_q: f64 },
    /// End of game with the root player's reward.
    Terminal { reward: f64 },
}

pub fn q_back(child: Child, discount: f64) -> f64 {
    match child {
        Child::State { max_q } => discount * max_q,
        Child::Terminal { reward } => reward,
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Reached {
    RootTurn,
    Terminal { reward: f64 },
}

/// Lets every seat other than `root` act with `opponent` until `root` is to
/// move again or the game ends.
pub fn step_through_opponents(
    state: &mut TableState,
    root: usize,
    opponent: &dyn Policy,
    rng: &mut GameRng,
) -> Result<Reached, SearchError> {
    loop {
        if let Some(result) = state.result() {
            return Ok(Reached::Terminal {
                reward: result.reward(root),
            });
        }
        if state.is_stalled() {
            return Err(GameError::Stalled(state.round_count()).into());
        }
        let seat = state.current_player();
        if seat == root {
            return Ok(Reached::RootTurn);
        }
        let action = opponent.act(&state.view(seat), rng);
        state.apply_action(action)?;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub state: EncodedState,
    pub action: ActionId,
    pub q_back: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Leaf {
    Expanded { state: EncodedState, max_q: f64 },
    Terminal { reward: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    /// Root first.
    pub steps: Vec<TraceStep>,
    pub leaf: Leaf,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchTrace {
    pub simulations: Vec<SimulationTrace>,
}

fn short_key(s: &EncodedState) -> String {
    // 61 set bits out of 240: a hash is easier to eyeball than the bits.
    let bits = s.to_bit_string();
    format!(
        "{:016x}",
        crate::rng::mix64(bits.bytes().fold(0u64, |h, b| crate::rng::mix64(h ^ u64::from(b))))
    )
}

impl fmt::Display for SearchTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, sim) in self.simulations.iter().enumerate() {
            write!(f, "sim {i}:")?;
            for step in &sim.steps {
                write!(
                    f,
                    " [{} a={} q={:.6}]",
                    short_key(&step.state),
                    step.action.index(),
                    step.q_back
                )?;
            }
            match &sim.leaf {
                Leaf::Expanded { state, max_q } => writeln!(f, " expand {} max_q={max_q:.6}", short_key(state))?,
                Leaf::Terminal { reward } => writeln!(f, " terminal {reward:+}")?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub a_best: ActionId,
    /// `Q_m(root, a_best)`.
    pub q_m_chosen: f64,
    pub r_m: f64,
    /// Root `Q_m`, one entry per legal action.
    pub root_q: Vec<(ActionId, f64)>,
    pub simulations: usize,
    pub terminal_rewards: Vec<f64>,
    pub tree: SearchTree,
    pub trace: Option<SearchTrace>,
}

fn root_key(state: &TableState, root: usize) -> EncodedState {
    encode_hand_target(state.hand(root), state.target())
}

/// Runs `config.simulations` simulations from `root_state`, searching for
/// the player to move.
pub fn run_search(
    root_state: &TableState,
    net: &Network,
    config: &MctsConfig,
    opponent: &dyn Policy,
    rng: &mut GameRng,
) -> Result<SearchResult, SearchError> {
    let root = root_state.current_player();
    let root_legal = root_state.current_legal_actions();
    if root_legal.is_empty() {
        return Err(SearchError::NoLegalActions);
    }
    let root_view = root_state.view(root);
    let start = root_key(root_state, root);

    let mut tree = SearchTree::new();
    let mut terminal_rewards = Vec::new();
    let mut trace = config.trace.then(SearchTrace::default);
    let mut path: Vec<(EncodedState, ActionId)> = Vec::new();

    for _ in 0..config.simulations {
        let mut state = match config.mode {
            SimulationMode::Oracle => {
                let mut s = root_state.clone();
                s.reseed(rng.random());
                s
            }
            SimulationMode::Determinized => {
                sample_determinization(&root_view, root_state.discard_pile(), rng.random())?
            }
        };
        path.clear();
        let mut key = start;
        let leaf = loop {
            if !tree.contains(&key) {
                let legal = state.current_legal_actions();
                let stats = NodeStats::new(root, legal, &net.predict(&key));
                let max_q = stats.max_q();
                tree.insert(key, stats);
                break Leaf::Expanded { state: key, max_q };
            }
            let a = tree.select_action(&key, config.c_puct)?;
            path.push((key, a));
            state.apply_action(a)?;
            match step_through_opponents(&mut state, root, opponent, rng)? {
                Reached::Terminal { reward } => {
                    terminal_rewards.push(reward);
                    break Leaf::Terminal { reward };
                }
                Reached::RootTurn => key = root_key(&state, root),
            }
        };

        let mut value = match leaf {
            Leaf::Expanded { max_q, .. } => q_back(Child::State { max_q }, config.discount),
            Leaf::Terminal { reward } => q_back(Child::Terminal { reward }, config.discount),
        };
        let mut steps = Vec::new();
        for (s, a) in path.iter().rev() {
            tree.backprop_update(s, *a, value)?;
            if trace.is_some() {
                steps.push(TraceStep {
                    state: *s,
                    action: *a,
                    q_back: value,
                });
            }
            let max_q = tree.get(s).expect("updated above").max_q();
            value = q_back(Child::State { max_q }, config.discount);
        }
        if let Some(t) = trace.as_mut() {
            steps.reverse();
            t.simulations.push(SimulationTrace { steps, leaf });
        }
    }

    let root_stats = match tree.get(&start) {
        Some(s) => s.clone(),
        // Zero simulations: fall back to the raw predictions.
        None => NodeStats::new(root, root_legal, &net.predict(&start)),
    };
    let a_best = epsilon_greedy(&root_stats.q_table(), root_legal, config.epsilon, rng)
        .map_err(|_| SearchError::NoLegalActions)?;
    let q_m_chosen = root_stats.edge(a_best).map_or(0.0, |e| e.q);
    let r_m = if config.simulations == 0 {
        0.0
    } else {
        terminal_rewards.iter().sum::<f64>() / config.simulations as f64
    };
    Ok(SearchResult {
        a_best,
        q_m_chosen,
        r_m,
        root_q: root_stats.edges.iter().map(|e| (e.action, e.q)).collect(),
        simulations: config.simulations,
        terminal_rewards,
        tree,
        trace,
    })
}

/// Checks that every recorded state belongs to `root`.
pub fn check_purity(tree: &SearchTree, root: usize) -> Result<(), SearchError> {
    match tree.iter().find(|(_, s)| s.player != root) {
        Some((_, s)) => Err(SearchError::Impure { root, found: s.player }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::RandomPolicy;
    use crate::encoding::NUM_ACTIONS;
    use crate::neural::DEFAULT_LAYERS;
    use crate::rng::rng_from_seed;

    fn ids(v: &[usize]) -> ActionSet {
        v.iter().map(|&i| ActionId::new(i).unwrap()).collect()
    }

    fn key() -> EncodedState {
        encode_hand_target(&[], crate::game::Card::number(crate::game::Color::Red, 8))
    }

    #[test]
    fn uct_values() {
        assert_eq!(uct(0, 5, 1.0), 0.0);
        assert!((uct(4, 1, 1.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!(uct(9, 0, 1.0) > uct(9, 1, 1.0));
        assert!(uct(9, 1, 1.0) > uct(9, 2, 1.0));
    }

    #[test]
    fn select_prefers_higher_q_then_lowest_id() {
        let mut q = vec![0.0; NUM_ACTIONS];
        q[3] = 0.5;
        q[9] = 0.1;
        let mut tree = SearchTree::new();
        tree.insert(key(), NodeStats::new(0, ids(&[3, 9]), &q));
        assert_eq!(tree.select_action(&key(), 1.0).unwrap().index(), 3);

        let mut tree = SearchTree::new();
        tree.insert(key(), NodeStats::new(0, ids(&[40, 7, 12]), &[0.2; NUM_ACTIONS]));
        assert_eq!(tree.select_action(&key(), 1.0).unwrap().index(), 7);

        let mut tree = SearchTree::new();
        tree.insert(key(), NodeStats::new(0, ids(&[60]), &[0.0; NUM_ACTIONS]));
        assert_eq!(tree.select_action(&key(), 1.0).unwrap(), ActionId::DRAW);

        assert_eq!(
            SearchTree::new().select_action(&key(), 1.0),
            Err(SearchError::UnknownState)
        );
    }

    #[test]
    fn backprop_is_running_mean() {
        let a = ActionId::new(5).unwrap();
        let mut q = vec![0.0; NUM_ACTIONS];
        q[5] = 0.5;
        let mut tree = SearchTree::new();
        tree.insert(key(), NodeStats::new(0, ids(&[5]), &q));
        // First backup replaces the prediction.
        tree.backprop_update(&key(), a, 0.7).unwrap();
        assert_eq!(tree.get(&key()).unwrap().edge(a).unwrap().q, 0.7);

        let mut tree = SearchTree::new();
        tree.insert(key(), NodeStats::new(0, ids(&[5]), &q));
        let stats = tree.nodes.get_mut(&key()).unwrap();
        stats.edges[0].visits = 1;
        tree.backprop_update(&key(), a, 0.99).unwrap();
        let e = tree.get(&key()).unwrap().edge(a).unwrap();
        assert!((e.q - 0.745).abs() < 1e-15);
        assert_eq!(e.visits, 2);
        assert_eq!(tree.get(&key()).unwrap().visits, 1);
    }

    #[test]
    fn q_back_cases() {
        assert_eq!(q_back(Child::Terminal { reward: 1.0 }, 0.99), 1.0);
        assert_eq!(q_back(Child::Terminal { reward: -1.0 }, 0.99), -1.0);
        assert!((q_back(Child::State { max_q: 0.8 }, 0.99) - 0.792).abs() < 1e-15);
    }

    #[test]
    fn step_through_is_identity_on_root_turn() {
        let mut s = TableState::new(3, 5).unwrap();
        let before = s.clone();
        let root = s.current_player();
        let mut rng = rng_from_seed(0);
        assert_eq!(
            step_through_opponents(&mut s, root, &RandomPolicy, &mut rng).unwrap(),
            Reached::RootTurn
        );
        assert_eq!(s, before);
    }

    #[test]
    fn search_budget_and_purity() {
        let net = Network::init(&DEFAULT_LAYERS, 1);
        let mut rng = rng_from_seed(9);
        for seed in 0..20 {
            let state = TableState::new(3, seed).unwrap();
            let res = run_search(&state, &net, &MctsConfig::default(), &RandomPolicy, &mut rng).unwrap();
            assert!(res.tree.len() <= 50);
            assert!(state.current_legal_actions().contains(res.a_best));
            assert!(res.r_m.abs() <= res.terminal_rewards.len() as f64 / 50.0);
            check_purity(&res.tree, state.current_player()).unwrap();
            let root = res.tree.get(&root_key(&state, state.current_player())).unwrap();
            assert_eq!(root.visits, 49);
        }
    }

    #[test]
    fn oracle_search_is_deterministic() {
        let net = Network::init(&DEFAULT_LAYERS, 1);
        let state = TableState::new(2, 77).unwrap();
        let cfg = MctsConfig {
            trace: true,
            ..MctsConfig::default()
        };
        let a = run_search(&state, &net, &cfg, &RandomPolicy, &mut rng_from_seed(4)).unwrap();
        let b = run_search(&state, &net, &cfg, &RandomPolicy, &mut rng_from_seed(4)).unwrap();
        assert_eq!(a.root_q, b.root_q);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.r_m, b.r_m);
        assert_eq!(a.trace.unwrap().simulations.len(), 50);
    }

    #[test]
    fn determinized_mode_runs() {
        let net = Network::init(&DEFAULT_LAYERS, 1);
        let state = TableState::new(4, 3).unwrap();
        let cfg = MctsConfig {
            mode: SimulationMode::Determinized,
            ..MctsConfig::default()
        };
        let res = run_search(&state, &net, &cfg, &RandomPolicy, &mut rng_from_seed(1)).unwrap();
        check_purity(&res.tree, state.current_player()).unwrap();
    }

    #[test]
    fn trace_backups_match_tree() {
        let net = Network::init(&DEFAULT_LAYERS, 2);
        let state = TableState::new(2, 8).unwrap();
        let cfg = MctsConfig {
            trace: true,
            simulations: 30,
            ..MctsConfig::default()
        };
        let res = run_search(&state, &net, &cfg, &RandomPolicy, &mut rng_from_seed(5)).unwrap();
        let trace = res.trace.unwrap();
        let mut backups: HashMap<(EncodedState, ActionId), Vec<f64>> = HashMap::new();
        for sim in &trace.simulations {
            for st in &sim.steps {
                backups.entry((st.state, st.action)).or_default().push(st.q_back);
            }
        }
        for ((s, a), vals) in backups {
            let e = res.tree.get(&s).unwrap().edge(a).unwrap();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((e.q - mean).abs() < 1e-12);
            assert_eq!(e.visits as usize, vals.len());
        }
        assert!(trace.to_string().lines().count() == 30);
    }
}
