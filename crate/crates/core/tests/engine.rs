use std::collections::HashMap;

use gamecon_core::engine::map_band;
use gamecon_core::numeric::{logic_calculate, oracle_event};
use gamecon_core::policy::ActionPolicy;
use gamecon_core::{
    Action, EngineConfig, EngineState, GameId, GeneratorHandle, GeneratorKind, GeneratorSpec,
};
use proptest::prelude::*;

fn fresh(game: GameId, seed: u64) -> EngineState {
    EngineState::new(game, seed, EngineConfig::for_game(game)).unwrap()
}

#[test]
fn oracle_and_ledger_agree_with_the_engine() {
    for game in GameId::ALL {
        let mut steps = 0;
        let mut events = 0;
        let mut seed = 0;
        while steps < 10_000 {
            let mut state = fresh(game, seed);
            let mut policy = ActionPolicy::new(game, seed + 1000);
            while !state.is_exhausted() && steps < 10_000 {
                let action = policy.next(&state);
                let predicted = oracle_event(&state, action).unwrap();
                let before = state.score();
                let out = state.step(action).unwrap();
                assert_eq!(out.event, predicted, "{game} seed {seed} step {}", state.step_index());
                let expected = logic_calculate(before, out.event);
                assert_eq!(state.score(), expected.record);
                assert_eq!(out.saturated, expected.saturated);
                events += out.event as usize;
                steps += 1;
            }
            seed += 1;
        }
        assert!(events > 0, "{game} produced no events");
    }
}

#[test]
fn traveler_stay_repeats_the_frame() {
    let mut state = fresh(GameId::Traveler, 3);
    let mut policy = ActionPolicy::new(GameId::Traveler, 4);
    for _ in 0..30 {
        let a = policy.next(&state);
        state.step(a).unwrap();
        let before = state.render();
        let out = state.step(Action::Stay).unwrap();
        assert!(!out.event);
        assert_eq!(out.frame, before);
    }
}

#[test]
fn jitter_touches_only_the_score_strip() {
    let game = GameId::PacMan;
    let spec = GeneratorSpec::reference(game, 8);
    let mut clean = GeneratorHandle::new(spec.clone()).unwrap();
    let mut noisy =
        GeneratorHandle::new(GeneratorSpec { kind: GeneratorKind::NumericJitter { p: 1.0 }, ..spec }).unwrap();
    let mut policy = ActionPolicy::new(game, 9);
    let mut differing = 0;
    for _ in 0..60 {
        let a = policy.next(clean.state());
        let (fc, tc) = clean.step(a).unwrap();
        let (fn_, tn) = noisy.step(a).unwrap();
        assert_eq!(map_band(&fc), map_band(&fn_));
        assert_eq!(tc.true_player_pos, tn.true_player_pos);
        assert_eq!(tc.true_score, tn.true_score);
        differing += (fc != fn_) as usize;
    }
    assert!(differing > 50);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn same_seed_same_frames(
        game in prop::sample::select(GameId::ALL.to_vec()),
        seed in any::<u64>(),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..80),
    ) {
        let legal = Action::legal_actions(game);
        let (mut a, mut b) = (fresh(game, seed), fresh(game, seed));
        prop_assert_eq!(a.render(), b.render());
        for p in picks {
            if a.is_exhausted() {
                break;
            }
            let action = *p.get(&legal);
            prop_assert_eq!(a.step(action).unwrap().frame, b.step(action).unwrap().frame);
        }
    }

    /// Between events, any position the player returns to shows exactly what
    /// it showed before. Events build on empty slots, so they reset the record.
    #[test]
    fn traveler_revisits_are_immutable(
        seed in any::<u64>(),
        moves in prop::collection::vec(prop::bool::ANY, 1..120),
    ) {
        let mut state = fresh(GameId::Traveler, seed);
        let mut seen = HashMap::new();
        seen.insert(state.player_pos().unwrap(), map_band(&state.render()));
        for right in moves {
            let out = state.step(if right { Action::Right } else { Action::Left }).unwrap();
            if out.event {
                seen.clear();
            }
            let band = map_band(&out.frame);
            let prev = seen.entry(state.player_pos().unwrap()).or_insert_with(|| band.clone());
            prop_assert_eq!(&*prev, &band);
        }
    }
}
