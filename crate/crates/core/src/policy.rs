//! Scripted players used for data collection and evaluation.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Action, EngineState, GameId, PaddleMove, World};

/// Probability that a Pong paddle follows the ball on a given step.
pub const PONG_FOLLOW_PROB: f64 = 0.8;
/// Half-height of the band around the paddle center where the AI stays put.
pub const PONG_DEADBAND: i64 = 2;

/// Traveler and Pac-Man: uniform random actions. Pong: each paddle follows
/// the ball with probability [`PONG_FOLLOW_PROB`], otherwise moves at random.
#[derive(Clone, Debug)]
pub struct ActionPolicy {
    game: GameId,
    rng: ChaCha8Rng,
    actions: Vec<Action>,
}

impl ActionPolicy {
    pub fn new(game: GameId, seed: u64) -> Self {
        Self { game, rng: ChaCha8Rng::seed_from_u64(seed), actions: Action::legal_actions(game) }
    }

    pub fn next(&mut self, state: &EngineState) -> Action {
        match (self.game, state.world()) {
            (GameId::Pong, World::Pong(w)) => {
                let cfg = &state.config().pong;
                let ball_center = w.ball.1 + cfg.ball_size / 2;
                let mut pick = |paddle_y: i64| {
                    if self.rng.random_bool(PONG_FOLLOW_PROB) {
                        let center = paddle_y + cfg.paddle_height / 2;
                        if ball_center < center - PONG_DEADBAND {
                            PaddleMove::Up
                        } else if ball_center > center + PONG_DEADBAND {
                            PaddleMove::Down
                        } else {
                            PaddleMove::Stay
                        }
                    } else {
                        *PaddleMove::ALL.choose(&mut self.rng).unwrap()
                    }
                };
                let l = pick(w.left_y);
                let r = pick(w.right_y);
                Action::Paddles(l, r)
            }
            _ => *self.actions.choose(&mut self.rng).unwrap(),
        }
    }
}
