mod common;

use num_traits::Zero;
use proptest::prelude::*;
use ssg_core::format::{parse_model, serialize_model};
use ssg_core::graph::{best_exit, mec_decomposition, EndComponent};
use ssg_core::model::{action_value, preprocess_merge_unreachable, reaches_target, validate_game};
use ssg_core::oracle::{enumerate_end_components, satisfies_bellman, solve_exact_with, OracleOptions};
use ssg_core::rng::SplitMix64;
use ssg_core::{Player, ValueVector};

use common::{game, raw_game, random_vector, values};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn generated_games_are_valid(seed in any::<u64>(), n in 1usize..=12) {
        let g = game(seed, n);
        prop_assert!(validate_game(&g).is_empty());
        prop_assert!(reaches_target(&g).iter().enumerate().all(|(s, &r)| r || s == g.sink()));
    }

    #[test]
    fn action_values_lie_between_successor_values(seed in any::<u64>(), n in 1usize..=8, fseed in any::<u64>()) {
        let g = game(seed, n);
        let f = random_vector(&g, fseed);
        for s in g.states() {
            for a in g.actions(s) {
                let v = action_value(&g, &f, s, &a.label).unwrap();
                let lo = a.successors().map(|t| f[t]).fold(f64::INFINITY, f64::min);
                let hi = a.successors().map(|t| f[t]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo - 1e-12 <= v && v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn preprocessing_is_idempotent(seed in any::<u64>(), n in 1usize..=10) {
        let once = preprocess_merge_unreachable(&raw_game(seed, n)).unwrap();
        let twice = preprocess_merge_unreachable(&once).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn preprocessing_preserves_values(seed in any::<u64>(), n in 1usize..=4) {
        let raw = raw_game(seed, n);
        let pre = preprocess_merge_unreachable(&raw).unwrap();
        let (vr, vp) = (values(&raw), values(&pre));
        for s in raw.states() {
            match pre.state_id(raw.name(s)) {
                Some(t) => prop_assert_eq!(&vr[s], &vp[t]),
                None => prop_assert!(vr[s].is_zero()),
            }
        }
    }

    #[test]
    fn text_round_trip(seed in any::<u64>(), n in 1usize..=20) {
        let g = game(seed, n);
        let text = serialize_model(&g);
        let back = parse_model(&text).unwrap();
        prop_assert_eq!(serialize_model(&back), text);
        prop_assert_eq!(back, g);
    }

    #[test]
    fn oracle_values_are_a_fixpoint(seed in any::<u64>(), n in 1usize..=4) {
        let g = game(seed, n);
        let v = values(&g);
        prop_assert!(satisfies_bellman(&g, &v));
        let swapped = solve_exact_with(&g, &OracleOptions { min_max: true, ..OracleOptions::default() }).unwrap();
        prop_assert_eq!(v, swapped);
    }

    #[test]
    fn mecs_are_valid_disjoint_and_maximal(seed in any::<u64>(), n in 1usize..=4) {
        let g = game(seed, n);
        let mecs = mec_decomposition(&g);
        let mut owner = vec![None; g.len()];
        for (i, m) in mecs.iter().enumerate() {
            prop_assert!(m.is_valid_in(&g));
            for &s in &m.states {
                prop_assert!(owner[s].is_none());
                owner[s] = Some(i);
            }
        }
        for ec in enumerate_end_components(&g) {
            let home = owner[ec.states[0]];
            prop_assert!(home.is_some());
            let m: &EndComponent = &mecs[home.unwrap()];
            prop_assert!(ec.states.iter().all(|&s| m.contains(s)));
        }
    }

    #[test]
    fn best_exit_is_monotone(seed in any::<u64>(), n in 1usize..=6, fseed in any::<u64>()) {
        let g = game(seed, n);
        let f = random_vector(&g, fseed);
        let mut rng = SplitMix64::new(fseed ^ 0x5555);
        let h = ValueVector::new(f.iter().map(|&x| x + (1.0 - x) * rng.unit()).collect());
        for m in mec_decomposition(&g) {
            for player in [Player::Max, Player::Min] {
                let lo = best_exit(&g, &m.states, f.as_slice(), player);
                let hi = best_exit(&g, &m.states, h.as_slice(), player);
                prop_assert!(lo.value <= hi.value + 1e-12);
            }
        }
    }
}

#[test]
fn fifty_state_round_trip() {
    for seed in 0..5 {
        let g = game(seed, 50);
        let back = parse_model(&serialize_model(&g)).unwrap();
        assert_eq!(back, g);
    }
}

#[test]
fn preprocessing_sometimes_drops_states() {
    let dropped = (0..200).filter(|&seed| {
        let raw = raw_game(seed, 6);
        preprocess_merge_unreachable(&raw).unwrap().len() < raw.len()
    });
    assert!(dropped.count() > 0);
}
