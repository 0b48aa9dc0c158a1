use proptest::prelude::*;
use uno_core::agents::{epsilon_greedy, EpsilonSchedule, Policy, RandomPolicy, ReplayBuffer, ReservoirBuffer};
use uno_core::encoding::{action_to_id, encode_state, id_to_action, ActionId, ActionSet, EncodedState};
use uno_core::eval::{ci95, play_match, seat_of};
use uno_core::game::{build_deck, DECK_SIZE};
use uno_core::mcts::{NodeStats, SearchTree};
use uno_core::rng::{derive_seed, rng_from_seed};
use uno_core::TableState;

/// Plays `steps` random moves (or to the end) and returns the state.
fn random_state(players: usize, seed: u64, steps: usize) -> TableState {
    let mut s = TableState::new(players, seed).unwrap();
    let mut rng = rng_from_seed(seed ^ 0x5EED);
    for _ in 0..steps {
        if s.is_over() {
            break;
        }
        let seat = s.current_player();
        let a = RandomPolicy.act(&s.view(seat), &mut rng);
        s.apply_action(a).unwrap();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn encoding_is_one_hot_per_cell(players in 2usize..=10, seed in any::<u64>(), steps in 0usize..200, seat_pick in any::<usize>()) {
        let s = random_state(players, seed, steps);
        let seat = seat_pick % players;
        let enc = encode_state(&s.view(seat));
        prop_assert_eq!(enc.count_ones(), 61);
        for row in 0..4 {
            for col in 0..15 {
                let lit = (0..3).filter(|&p| enc.get(p, row, col)).count();
                prop_assert_eq!(lit, 1);
            }
        }
        let target_bits = (0..60).filter(|&c| enc.get(3, c / 15, c % 15)).count();
        prop_assert_eq!(target_bits, 1);
        prop_assert_eq!(EncodedState::from_bit_string(&enc.to_bit_string()).unwrap(), enc);
    }

    #[test]
    fn play_conserves_cards_and_offers_moves(players in 2usize..=10, seed in any::<u64>(), steps in 0usize..400) {
        let s = random_state(players, seed, steps);
        prop_assert_eq!(s.total_cards(), DECK_SIZE);
        prop_assert_eq!(s.hand_sizes().iter().sum::<usize>() + s.draw_pile().len() + s.discard_pile().len() + 1, DECK_SIZE);
        if s.is_over() {
            let r = s.result().unwrap();
            prop_assert_eq!(r.rewards.iter().filter(|&&x| x == 1.0).count(), 1);
            prop_assert_eq!(s.hand(r.winner).len(), 0);
        } else {
            prop_assert!(!s.current_legal_actions().is_empty());
            for p in 0..players {
                prop_assert_eq!(s.view(p).legal_actions.is_empty(), p != s.current_player());
            }
        }
    }

    #[test]
    fn same_seed_same_game(players in 2usize..=6, seed in any::<u64>()) {
        let a = random_state(players, seed, 100);
        let b = random_state(players, seed, 100);
        prop_assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn action_ids_round_trip(id in 0usize..61) {
        let a = id_to_action(id).unwrap();
        prop_assert_eq!(action_to_id(a).unwrap().index(), id);
    }

    #[test]
    fn running_mean_equals_arithmetic_mean(values in proptest::collection::vec(-1.0f64..1.0, 1..200), prior in -5.0f64..5.0) {
        let s = EncodedState::default();
        let a = ActionId::new(7).unwrap();
        let mut tree = SearchTree::new();
        let mut preds = vec![0.0; 61];
        preds[7] = prior;
        tree.insert(s, NodeStats::new(0, ActionSet::single(a), &preds));
        for &v in &values {
            tree.backprop_update(&s, a, v).unwrap();
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let edge = *tree.get(&s).unwrap().edge(a).unwrap();
        prop_assert!((edge.q - mean).abs() < 1e-12);
        prop_assert_eq!(edge.visits as usize, values.len());
    }

    #[test]
    fn replay_buffer_keeps_the_newest_in_order(cap in 1usize..50, n in 0usize..200) {
        let mut buf = ReplayBuffer::new(cap);
        for i in 0..n {
            buf.push(i);
        }
        let kept: Vec<usize> = buf.iter().copied().collect();
        let expected: Vec<usize> = (n.saturating_sub(cap)..n).collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn replay_samples_are_distinct_members(n in 1usize..100, batch in 1usize..100, seed in any::<u64>()) {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..n {
            buf.push(i);
        }
        let mut rng = rng_from_seed(seed);
        match buf.sample(batch, &mut rng) {
            Ok(items) => {
                prop_assert!(batch <= n);
                let mut v: Vec<usize> = items.into_iter().copied().collect();
                v.sort_unstable();
                v.dedup();
                prop_assert_eq!(v.len(), batch);
                prop_assert!(v.iter().all(|&x| x < n));
            }
            Err(_) => prop_assert!(batch > n),
        }
    }

    #[test]
    fn seat_rotation_is_a_permutation(n in 2usize..=10, game in 0usize..10_000) {
        let mut seats: Vec<usize> = (0..n).map(|a| seat_of(a, game, n, true)).collect();
        seats.sort_unstable();
        prop_assert_eq!(seats, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(seat_of(1, game, n, false), 1);
    }

    #[test]
    fn epsilon_schedule_is_monotone(a in 0u64..30_000, b in 0u64..30_000) {
        let e = EpsilonSchedule::default();
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(e.value(lo) >= e.value(hi));
        prop_assert!((0.05..=1.0).contains(&e.value(a)));
    }
}

#[test]
fn deck_inventory() {
    let deck = build_deck();
    assert_eq!(deck.len(), 108);
    let count = |s: &str| deck.iter().filter(|c| c.to_string() == s).count();
    assert_eq!(count("wild"), 4);
    assert_eq!(count("wild_draw_4"), 4);
    for c in ["r", "g", "b", "y"] {
        assert_eq!(count(&format!("{c}-0")), 1);
        for k in ["1", "2", "3", "4", "5", "6", "7", "8", "9", "skip", "reverse", "draw_2"] {
            assert_eq!(count(&format!("{c}-{k}")), 2, "{c}-{k}");
        }
        assert_eq!(
            deck.iter()
                .filter(|x| x.to_string().starts_with(&format!("{c}-")))
                .count(),
            25
        );
    }
}

#[test]
fn reservoir_keeps_each_item_with_equal_probability() {
    // 100 items through a 10-slot reservoir: each should survive with
    // probability 0.1.
    let trials = 20_000;
    let mut hits = [0u32; 100];
    let mut rng = rng_from_seed(42);
    for _ in 0..trials {
        let mut r = ReservoirBuffer::new(10);
        for i in 0..100 {
            r.push(i, &mut rng);
        }
        assert_eq!(r.seen(), 100);
        for &i in r.items() {
            hits[i] += 1;
        }
    }
    for (i, &h) in hits.iter().enumerate() {
        let p = f64::from(h) / f64::from(trials);
        assert!((p - 0.1).abs() <= 0.01, "item {i}: {p}");
    }
}

/// Pearson statistic for observed counts against expected probabilities.
fn chi_square(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

#[test]
fn epsilon_greedy_distribution() {
    let legal: ActionSet = [3, 17, 30, 44, 60]
        .into_iter()
        .map(|i| ActionId::new(i).unwrap())
        .collect();
    let mut q = vec![0.0; 61];
    q[30] = 1.0;
    let mut rng = rng_from_seed(9);
    for (eps, greedy_share) in [(1.0, 0.2), (0.3, 0.7 + 0.3 / 5.0), (0.0, 1.0)] {
        let mut counts = vec![0u64; 5];
        let n = 50_000;
        for _ in 0..n {
            let a = epsilon_greedy(&q, legal, eps, &mut rng).unwrap();
            counts[legal.iter().position(|x| x == a).unwrap()] += 1;
        }
        if eps == 0.0 {
            assert_eq!(counts[2], n);
            continue;
        }
        let other = (1.0 - greedy_share) / 4.0;
        let probs = [other, other, greedy_share, other, other];
        // Critical value of chi-square with 4 degrees of freedom at p = 0.001.
        let stat = chi_square(&counts, &probs);
        assert!(stat < 18.47, "eps {eps}: chi2 {stat}, counts {counts:?}");
    }
}

#[test]
fn derived_seeds_do_not_collide() {
    let mut seen = std::collections::HashSet::new();
    for master in 0..20u64 {
        for i in 0..500u64 {
            assert!(seen.insert(derive_seed(master, i)));
        }
    }
}

#[test]
fn interval_and_reward_identity() {
    assert!((ci95(0.5, 1000) - 1.96 * (0.25f64 / 1000.0).sqrt()).abs() < 1e-15);
    assert_eq!(ci95(0.0, 10), 0.0);
    let agents: [&dyn Policy; 2] = [&RandomPolicy, &RandomPolicy];
    let report = play_match(&agents, 501, 3, true).unwrap();
    for a in &report.agents {
        assert_eq!(a.avg_reward, 2.0 * a.win_rate - 1.0);
        assert_eq!(a.games, 501);
    }
    assert_eq!(report.agents.iter().map(|a| a.wins).sum::<usize>(), 501);
    assert_eq!(play_match(&agents, 501, 3, true).unwrap(), report);
}

#[test]
fn random_games_finish() {
    let mut rng = rng_from_seed(1);
    let rounds: Vec<u32> = (0..200)
        .map(|g| {
            let mut s = TableState::new(3, derive_seed(77, g)).unwrap();
            while !s.is_over() {
                let seat = s.current_player();
                let a = RandomPolicy.act(&s.view(seat), &mut rng);
                s.apply_action(a).unwrap();
            }
            s.round_count()
        })
        .collect();
    assert!(rounds.iter().all(|&r| r > 0));
}
