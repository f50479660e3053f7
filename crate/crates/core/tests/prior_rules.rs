use btrl::maze::generate_maze;
use btrl::posterior::{default_max_sweeps, optimal_policy_from_b, solve_exact_b, DEFAULT_TOL};
use btrl::prior::{PriorMemory, PriorRules};
use btrl::{ActionId, StateId};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Any `s -> s' -> s` bounce via `(a, a')` zeroes `g[a][a']`.
    #[test]
    fn every_observed_bounce_is_recorded(seed in any::<u64>(), moves in proptest::collection::vec(0usize..4, 2..300)) {
        let mdp = generate_maze(7, 7, seed).unwrap().to_mdp(-0.001, 1.0).unwrap().mdp;
        let mut mem = PriorMemory::new(4, PriorRules::BOTH);
        let mut path = Vec::new();
        let mut s = mdp.start();
        for a in moves.into_iter().map(ActionId) {
            if mdp.is_terminal(s) {
                break;
            }
            let s_next = mdp.next_state(s, a).unwrap();
            mem.observe_transition(s, a, mdp.reward(s, a), s_next);
            path.push((s, a, s_next));
            s = s_next;
        }
        for w in path.windows(2) {
            let ((s0, a0, s1), (_, a1, s2)) = (w[0], w[1]);
            if s1 != s0 && s2 == s0 {
                prop_assert!(!mem.undo_allowed(a0, a1));
            }
        }
    }

    /// The rules never mask the most probable action of the exact optimal
    /// policy, whether or not a previous action is given, as long as the
    /// previous action is the one that reaches `s` along the optimal route.
    #[test]
    fn rules_never_mask_the_optimal_action(seed in any::<u64>(), moves in proptest::collection::vec(0usize..4, 50..400)) {
        let maze = generate_maze(6, 6, seed).unwrap();
        let mdp = maze.to_mdp(-0.001, 1.0).unwrap().mdp;
        let b = solve_exact_b(&mdp, 1000.0, DEFAULT_TOL, default_max_sweeps(&mdp)).unwrap();

        let mut mem = PriorMemory::new(4, PriorRules::BOTH);
        let mut s = mdp.start();
        for a in moves.into_iter().map(ActionId) {
            if mdp.is_terminal(s) {
                mem.begin_episode();
                s = mdp.start();
            }
            let s_next = mdp.next_state(s, a).unwrap();
            mem.observe_transition(s, a, mdp.reward(s, a), s_next);
            s = s_next;
        }

        // predecessor action of each state along optimal routes from the start
        let mut arrived_by: Vec<Option<ActionId>> = vec![None; mdp.num_states()];
        let mut s = mdp.start();
        let mut prev = None;
        while !mdp.is_terminal(s) {
            arrived_by[s.index()] = prev;
            let best = optimal_policy_from_b(&b, s).argmax();
            s = mdp.next_state(s, best).unwrap();
            prev = Some(best);
        }
        for s in (0..mdp.num_states()).map(StateId).filter(|&s| !mdp.is_terminal(s)) {
            let best = optimal_policy_from_b(&b, s).argmax();
            prop_assert_eq!(mem.prior_f(s, best, None), 1);
            if let Some(p) = arrived_by[s.index()] {
                prop_assert_eq!(mem.prior_f(s, best, Some(p)), 1);
            }
        }
    }
}
