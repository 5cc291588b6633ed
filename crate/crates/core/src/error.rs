use thiserror::Error;

use crate::engine::GameId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid probability {name}={value}: must lie in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("action `{action}` is not legal for {game}")]
    IllegalAction { game: GameId, action: String },

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("episode exhausted: terminal tail already fully produced")]
    Exhausted,

    #[error("{0} has no spatial map")]
    NoMap(GameId),

    #[error("local map half-width {delta1} too small: 2*delta1 must exceed observation width {width}")]
    WindowTooNarrow { delta1: usize, width: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mask selects no pixels")]
    EmptyMask,

    #[error("map has no linked observation")]
    EmptyMap,

    #[error("score {0} exceeds the three-digit range")]
    ScoreOutOfRange(u32),

    #[error("preset map column at world x={x} is neither a building nor empty")]
    UnparsablePreset { x: i64 },

    #[error("preset map is {width} px wide, narrower than one {frame_width} px frame")]
    PresetTooNarrow { width: usize, frame_width: usize },

    #[error("score strip digit {digit} matches no glyph")]
    UnreadableScore { digit: usize },

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
