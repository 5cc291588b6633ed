//! Event rules evaluated on world state alone, without stepping or
//! rendering the engine.

use crate::engine::pacman::direction;
use crate::engine::{Action, Cell, EngineState, Slot, World};
use crate::error::Result;

/// Whether `action` applied to `state` triggers a scoring event.
pub fn oracle_event(state: &EngineState, action: Action) -> Result<bool> {
    action.check(state.game())?;
    if state.is_terminal() {
        return Ok(false);
    }
    let config = state.config();
    Ok(match state.world() {
        World::Traveler(w) => {
            let cfg = &config.traveler;
            let dx = match action {
                Action::Left => -cfg.speed,
                Action::Right => cfg.speed,
                _ => return Ok(false),
            };
            let b = cfg.slot_width as i64;
            let x = w.player_x();
            let (from, to) = (x.div_euclid(b), (x + dx).div_euclid(b));
            from != to && w.slot(state.seed(), cfg, to) == Slot::Empty
        }
        World::Pong(w) => w.advance(config, action).hit,
        World::PacMan(w) => {
            let (dr, dc) = direction(action);
            if (dr, dc) == (0, 0) {
                return Ok(false);
            }
            let (r, c) = w.pac_cell();
            w.cell(r + dr, c + dc) == Cell::Dot
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{engine_init, EngineConfig, GameId};

    #[test]
    fn stay_never_fires() {
        for game in GameId::ALL {
            let s = engine_init(game, 1, &EngineConfig::for_game(game)).unwrap();
            assert!(!oracle_event(&s, Action::noop(game)).unwrap());
        }
    }

    #[test]
    fn illegal_action_is_rejected() {
        let s = engine_init(GameId::Pong, 1, &EngineConfig::for_game(GameId::Pong)).unwrap();
        assert!(oracle_event(&s, Action::Left).is_err());
    }
}
