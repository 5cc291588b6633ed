//! Deterministic reference engines for Traveler, Pong and Pac-Man.
//!
//! An [`EngineState`] owns everything needed to reproduce a game: the seed,
//! the world description, the score ledger and the terminal bookkeeping.
//! Randomness is derived from the seed only, so replaying an action script
//! from the same `(game, seed, config)` gives bit-identical frames.

pub mod pacman;
pub mod pong;
pub mod traveler;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::glyphs::{draw_score_strip, SCORE_STRIP_H};
use crate::numeric::ledger::{logic_calculate, ScoreRecord};
use crate::spatial::{BandGeometry, WorldMap};

pub use pacman::{Cell, PacManConfig, PacManWorld};
pub use pong::{PongConfig, PongWorld};
pub use traveler::{Slot, TravelerConfig, TravelerPreset, TravelerWorld};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GameId {
    #[serde(rename = "traveler")]
    Traveler,
    #[serde(rename = "pong")]
    Pong,
    #[serde(rename = "pacman")]
    PacMan,
}

impl GameId {
    pub const ALL: [GameId; 3] = [GameId::Traveler, GameId::Pong, GameId::PacMan];

    /// Side of the square frame the game renders.
    pub fn canonical_size(self) -> usize {
        match self {
            GameId::Traveler => 96,
            GameId::Pong | GameId::PacMan => 128,
        }
    }

    pub fn has_map(self) -> bool {
        !matches!(self, GameId::Pong)
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GameId::Traveler => "traveler",
            GameId::Pong => "pong",
            GameId::PacMan => "pacman",
        })
    }
}

impl FromStr for GameId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "traveler" => Ok(GameId::Traveler),
            "pong" => Ok(GameId::Pong),
            "pacman" | "pac-man" => Ok(GameId::PacMan),
            other => Err(Error::InvalidConfig(format!("unknown game `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PaddleMove {
    Up,
    Down,
    Stay,
}

impl PaddleMove {
    pub const ALL: [PaddleMove; 3] = [PaddleMove::Up, PaddleMove::Down, PaddleMove::Stay];

    fn as_str(self) -> &'static str {
        match self {
            PaddleMove::Up => "up",
            PaddleMove::Down => "down",
            PaddleMove::Stay => "stay",
        }
    }

    pub fn index(self) -> usize {
        match self {
            PaddleMove::Up => 0,
            PaddleMove::Down => 1,
            PaddleMove::Stay => 2,
        }
    }
}

/// Player input. Pong actions always carry both paddles.
///
/// Serialized as a lowercase string: `"left"`, `"stay"`, or `"up/down"` for a
/// Pong (left paddle, right paddle) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Left,
    Right,
    Up,
    Down,
    Stay,
    Paddles(PaddleMove, PaddleMove),
}

impl Action {
    pub fn is_legal(&self, game: GameId) -> bool {
        match game {
            GameId::Traveler => matches!(self, Action::Left | Action::Right | Action::Stay),
            GameId::Pong => matches!(self, Action::Paddles(..)),
            GameId::PacMan => !matches!(self, Action::Paddles(..)),
        }
    }

    pub fn check(&self, game: GameId) -> Result<()> {
        if self.is_legal(game) {
            Ok(())
        } else {
            Err(Error::IllegalAction { game, action: self.to_string() })
        }
    }

    /// Every legal action of `game`, in the order used by [`Action::index`].
    pub fn legal_actions(game: GameId) -> Vec<Action> {
        match game {
            GameId::Traveler => vec![Action::Left, Action::Right, Action::Stay],
            GameId::PacMan => {
                vec![Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay]
            }
            GameId::Pong => PaddleMove::ALL
                .iter()
                .flat_map(|&l| PaddleMove::ALL.iter().map(move |&r| Action::Paddles(l, r)))
                .collect(),
        }
    }

    /// The no-op action for `game`.
    pub fn noop(game: GameId) -> Action {
        match game {
            GameId::Pong => Action::Paddles(PaddleMove::Stay, PaddleMove::Stay),
            _ => Action::Stay,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Left => f.write_str("left"),
            Action::Right => f.write_str("right"),
            Action::Up => f.write_str("up"),
            Action::Down => f.write_str("down"),
            Action::Stay => f.write_str("stay"),
            Action::Paddles(l, r) => write!(f, "{}/{}", l.as_str(), r.as_str()),
        }
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let paddle = |p: &str| match p {
            "up" => Ok(PaddleMove::Up),
            "down" => Ok(PaddleMove::Down),
            "stay" => Ok(PaddleMove::Stay),
            _ => Err(Error::UnknownAction(s.to_string())),
        };
        let lower = s.trim().to_ascii_lowercase();
        if let Some((l, r)) = lower.split_once('/') {
            return Ok(Action::Paddles(paddle(l)?, paddle(r)?));
        }
        match lower.as_str() {
            "left" => Ok(Action::Left),
            "right" => Ok(Action::Right),
            "up" => Ok(Action::Up),
            "down" => Ok(Action::Down),
            "stay" => Ok(Action::Stay),
            _ => Err(Error::UnknownAction(s.to_string())),
        }
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub width: usize,
    pub height: usize,
    /// Frames produced after a game-ending event.
    pub tail_frames: u32,
    pub traveler: TravelerConfig,
    pub pong: PongConfig,
    pub pacman: PacManConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self::for_game(GameId::Traveler)
    }
}

impl EngineConfig {
    pub fn for_game(game: GameId) -> Self {
        let size = game.canonical_size();
        Self {
            width: size,
            height: size,
            tail_frames: 30,
            traveler: TravelerConfig::default(),
            pong: PongConfig::default(),
            pacman: PacManConfig::default(),
        }
    }

    pub fn validate(&self, game: GameId) -> Result<()> {
        let size = game.canonical_size();
        if self.width != size || self.height != size {
            return Err(Error::InvalidConfig(format!(
                "{game} renders {size}x{size} frames, config asks for {}x{}",
                self.width, self.height
            )));
        }
        match game {
            GameId::Traveler => self.traveler.validate(self),
            GameId::Pong => self.pong.validate(self),
            GameId::PacMan => self.pacman.validate(self),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum World {
    Traveler(TravelerWorld),
    Pong(PongWorld),
    PacMan(PacManWorld),
}

/// Full state of one game instance. Exclusive-access value; clone to fork.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineState {
    game: GameId,
    seed: u64,
    config: EngineConfig,
    step_index: u64,
    world: World,
    score: ScoreRecord,
    terminal: bool,
    post_terminal_remaining: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub frame: Frame,
    pub event: bool,
    /// The event arrived with the ledger already at 999.
    pub saturated: bool,
}

/// Builds the initial state of `game`.
pub fn engine_init(game: GameId, seed: u64, config: &EngineConfig) -> Result<EngineState> {
    EngineState::new(game, seed, config.clone())
}

impl EngineState {
    pub fn new(game: GameId, seed: u64, config: EngineConfig) -> Result<Self> {
        config.validate(game)?;
        let world = match game {
            GameId::Traveler => World::Traveler(TravelerWorld::new(&config, None)),
            GameId::Pong => World::Pong(PongWorld::new(seed, &config)),
            GameId::PacMan => World::PacMan(PacManWorld::new(seed, &config)),
        };
        Ok(Self::from_world(game, seed, config, world))
    }

    /// Traveler instance whose world starts from a designer-supplied preset.
    pub fn with_traveler_preset(
        seed: u64,
        config: EngineConfig,
        preset: TravelerPreset,
    ) -> Result<Self> {
        config.validate(GameId::Traveler)?;
        let world = World::Traveler(TravelerWorld::new(&config, Some(preset)));
        Ok(Self::from_world(GameId::Traveler, seed, config, world))
    }

    /// Traveler instance initialized from a fully observed strip map.
    pub fn from_preset_map(seed: u64, config: EngineConfig, map: &WorldMap) -> Result<Self> {
        let preset = TravelerPreset::from_map(map, &config)?;
        Self::with_traveler_preset(seed, config, preset)
    }

    fn from_world(game: GameId, seed: u64, config: EngineConfig, world: World) -> Self {
        Self {
            game,
            seed,
            config,
            step_index: 0,
            world,
            score: ScoreRecord::default(),
            terminal: false,
            post_terminal_remaining: 0,
        }
    }

    pub fn game(&self) -> GameId {
        self.game
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn score(&self) -> ScoreRecord {
        self.score
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn post_terminal_remaining(&self) -> u32 {
        self.post_terminal_remaining
    }

    /// No further frames may be produced.
    pub fn is_exhausted(&self) -> bool {
        self.terminal && self.post_terminal_remaining == 0
    }

    /// World pixel coordinate of the player / camera center. `None` for Pong.
    pub fn player_pos(&self) -> Option<(i64, i64)> {
        match &self.world {
            World::Traveler(w) => Some((w.player_x(), 0)),
            World::PacMan(w) => Some(w.player_pixel()),
            World::Pong(_) => None,
        }
    }

    /// Player position at step 0; map coordinates are measured from here.
    pub fn origin_pos(&self) -> Option<(i64, i64)> {
        match &self.world {
            World::Traveler(_) => Some((0, 0)),
            World::PacMan(w) => Some(w.start_pixel()),
            World::Pong(_) => None,
        }
    }

    /// Advances one step. Game-ending events start a tail of
    /// `config.tail_frames` frozen frames; stepping past the tail fails.
    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        action.check(self.game)?;
        if self.is_exhausted() {
            return Err(Error::Exhausted);
        }
        self.step_index += 1;
        if self.terminal {
            self.post_terminal_remaining -= 1;
            return Ok(StepOutcome { frame: self.render(), event: false, saturated: false });
        }
        let (event, game_over) = match &mut self.world {
            World::Traveler(w) => (w.step(self.seed, &self.config, action), false),
            World::Pong(w) => w.step(&self.config, action),
            World::PacMan(w) => w.step(action),
        };
        let update = logic_calculate(self.score, event);
        self.score = update.record;
        if game_over {
            self.terminal = true;
            self.post_terminal_remaining = self.config.tail_frames;
        }
        Ok(StepOutcome { frame: self.render(), event, saturated: update.saturated })
    }

    /// Renders the current state. Pure.
    pub fn render(&self) -> Frame {
        let mut frame = Frame::new(self.config.width, self.config.height);
        self.render_world_into(&mut frame);
        draw_score_strip(&mut frame, self.score.value());
        frame
    }

    /// Renders everything below the score strip into `frame`.
    pub(crate) fn render_world_into(&self, frame: &mut Frame) {
        match &self.world {
            World::Traveler(w) => w.render_into(self.seed, &self.config, frame, None),
            World::Pong(w) => w.render_into(&self.config, frame),
            World::PacMan(w) => w.render_into(&self.config, frame, None),
        }
    }

    /// Map of the explored extent rendered straight from the world
    /// description: no score strip, no player, fully observed.
    pub fn ground_truth_map(&self) -> Result<WorldMap> {
        let geometry = BandGeometry::for_game(self.game, &self.config)?;
        match &self.world {
            World::Traveler(w) => {
                let (x0, x1) = w.explored_span(&geometry);
                Ok(w.ground_truth_span(self.seed, &self.config, x0, x1))
            }
            World::PacMan(w) => Ok(w.ground_truth_map(&self.config, &geometry)),
            World::Pong(_) => Err(Error::NoMap(self.game)),
        }
    }

    /// Ground truth of an arbitrary Traveler span `[x0, x1)` of world columns.
    /// Slots outside the explored extent are generated on demand.
    pub fn traveler_ground_truth_span(&self, x0: i64, x1: i64) -> Result<WorldMap> {
        match &self.world {
            World::Traveler(w) => Ok(w.ground_truth_span(self.seed, &self.config, x0, x1)),
            _ => Err(Error::InvalidConfig(format!("{} has no strip world", self.game))),
        }
    }
}

/// Rows of the map band (everything below the score strip).
pub fn map_band(frame: &Frame) -> Frame {
    frame.rows(SCORE_STRIP_H, frame.height())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_strings_roundtrip() {
        for game in GameId::ALL {
            for a in Action::legal_actions(game) {
                let s = a.to_string();
                assert_eq!(s.parse::<Action>().unwrap(), a);
                let json = serde_json::to_string(&a).unwrap();
                assert_eq!(serde_json::from_str::<Action>(&json).unwrap(), a);
            }
        }
        assert!("jump".parse::<Action>().is_err());
    }

    #[test]
    fn legality_per_game() {
        assert!(Action::Left.is_legal(GameId::Traveler));
        assert!(!Action::Up.is_legal(GameId::Traveler));
        assert!(!Action::Stay.is_legal(GameId::Pong));
        assert!(Action::noop(GameId::Pong).is_legal(GameId::Pong));
        assert_eq!(Action::legal_actions(GameId::Pong).len(), 9);
    }

    #[test]
    fn config_dimensions_must_match_game() {
        let cfg = EngineConfig::for_game(GameId::Traveler);
        assert!(engine_init(GameId::Pong, 1, &cfg).is_err());
        assert!(engine_init(GameId::Traveler, 1, &cfg).is_ok());
    }

    #[test]
    fn stepping_exhausted_state_fails() {
        let mut cfg = EngineConfig::for_game(GameId::Pong);
        cfg.tail_frames = 2;
        let mut s = engine_init(GameId::Pong, 3, &cfg).unwrap();
        // Nobody moves the paddles' way forever; the ball is eventually missed.
        let noop = Action::noop(GameId::Pong);
        let mut guard = 0;
        while !s.is_terminal() {
            s.step(noop).unwrap();
            guard += 1;
            assert!(guard < 10_000);
        }
        let terminal_frame = s.render();
        assert_eq!(s.step(noop).unwrap().frame, terminal_frame);
        assert_eq!(s.step(noop).unwrap().frame, terminal_frame);
        assert!(matches!(s.step(noop), Err(Error::Exhausted)));
    }
}
