//! Two-paddle Pong. Every paddle hit scores one shared point; a miss ends
//! the game.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Action, EngineConfig, PaddleMove};
use crate::error::{Error, Result};
use crate::frame::{Frame, BLACK, WHITE};
use crate::glyphs::SCORE_STRIP_H;
use crate::seed::stream_rng;

pub const BACKGROUND: [u8; 3] = BLACK;
pub const PADDLE: [u8; 3] = WHITE;
pub const BALL: [u8; 3] = WHITE;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PongConfig {
    pub paddle_height: i64,
    pub paddle_width: i64,
    /// Gap between the frame edge and a paddle.
    pub paddle_margin: i64,
    pub paddle_speed: i64,
    pub ball_size: i64,
    /// Per-axis ball speed; the ball always moves diagonally.
    pub ball_speed: i64,
}

impl Default for PongConfig {
    fn default() -> Self {
        Self {
            paddle_height: 24,
            paddle_width: 4,
            paddle_margin: 4,
            paddle_speed: 4,
            ball_size: 4,
            ball_speed: 3,
        }
    }
}

impl PongConfig {
    pub(crate) fn validate(&self, engine: &EngineConfig) -> Result<()> {
        let field = engine.height as i64 - SCORE_STRIP_H as i64;
        if self.paddle_height <= 0 || self.paddle_height > field {
            return Err(Error::InvalidConfig("paddle must fit the field".into()));
        }
        if self.ball_speed <= 0 || self.ball_size <= 0 || self.paddle_speed < 0 {
            return Err(Error::InvalidConfig("ball size and speeds must be positive".into()));
        }
        if 2 * (self.paddle_margin + self.paddle_width) + self.ball_size >= engine.width as i64 {
            return Err(Error::InvalidConfig("paddles leave no room for the ball".into()));
        }
        Ok(())
    }

    pub fn left_face(&self) -> i64 {
        self.paddle_margin + self.paddle_width
    }

    pub fn right_face(&self, width: i64) -> i64 {
        width - self.paddle_margin - self.paddle_width
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PongWorld {
    /// Top rows of the paddles, frame coordinates.
    pub left_y: i64,
    pub right_y: i64,
    /// Top-left corner of the ball, frame coordinates.
    pub ball: (i64, i64),
    pub velocity: (i64, i64),
    pub hits: u32,
}

/// Ball kinematics of one step, before it is committed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PongAdvance {
    pub left_y: i64,
    pub right_y: i64,
    pub ball: (i64, i64),
    pub velocity: (i64, i64),
    pub hit: bool,
    pub miss: bool,
}

impl PongWorld {
    pub(crate) fn new(seed: u64, config: &EngineConfig) -> Self {
        let cfg = &config.pong;
        let top = SCORE_STRIP_H as i64;
        let h = config.height as i64;
        let mut rng = stream_rng(seed, 0);
        let sign = |b: bool| if b { 1 } else { -1 };
        let velocity = (
            sign(rng.random_bool(0.5)) * cfg.ball_speed,
            sign(rng.random_bool(0.5)) * cfg.ball_speed,
        );
        let paddle_y = (top + h - cfg.paddle_height) / 2;
        Self {
            left_y: paddle_y,
            right_y: paddle_y,
            ball: ((config.width as i64 - cfg.ball_size) / 2, (top + h - cfg.ball_size) / 2),
            velocity,
            hits: 0,
        }
    }

    /// Computes the next paddle and ball positions for `action` without
    /// changing the world.
    pub fn advance(&self, config: &EngineConfig, action: Action) -> PongAdvance {
        let cfg = &config.pong;
        let top = SCORE_STRIP_H as i64;
        let bottom = config.height as i64;
        let (lm, rm) = match action {
            Action::Paddles(l, r) => (l, r),
            _ => (PaddleMove::Stay, PaddleMove::Stay),
        };
        let move_paddle = |y: i64, m: PaddleMove| {
            let dy = match m {
                PaddleMove::Up => -cfg.paddle_speed,
                PaddleMove::Down => cfg.paddle_speed,
                PaddleMove::Stay => 0,
            };
            (y + dy).clamp(top, bottom - cfg.paddle_height)
        };
        let left_y = move_paddle(self.left_y, lm);
        let right_y = move_paddle(self.right_y, rm);

        let (mut vx, mut vy) = self.velocity;
        let mut bx = self.ball.0 + vx;
        let mut by = self.ball.1 + vy;
        let bs = cfg.ball_size;
        if by < top {
            by = 2 * top - by;
            vy = -vy;
        } else if by + bs > bottom {
            by = 2 * (bottom - bs) - by;
            vy = -vy;
        }
        let overlaps = |py: i64| by + bs > py && by < py + cfg.paddle_height;
        let (mut hit, mut miss) = (false, false);
        let lf = cfg.left_face();
        let rf = cfg.right_face(config.width as i64);
        if vx < 0 && bx < lf {
            if overlaps(left_y) {
                bx = 2 * lf - bx;
                vx = -vx;
                hit = true;
            } else {
                miss = true;
            }
        } else if vx > 0 && bx + bs > rf {
            if overlaps(right_y) {
                bx = 2 * (rf - bs) - bx;
                vx = -vx;
                hit = true;
            } else {
                miss = true;
            }
        }
        PongAdvance { left_y, right_y, ball: (bx, by), velocity: (vx, vy), hit, miss }
    }

    /// Returns (paddle hit, ball missed).
    pub(crate) fn step(&mut self, config: &EngineConfig, action: Action) -> (bool, bool) {
        let next = self.advance(config, action);
        self.left_y = next.left_y;
        self.right_y = next.right_y;
        self.ball = next.ball;
        self.velocity = next.velocity;
        if next.hit {
            self.hits += 1;
        }
        (next.hit, next.miss)
    }

    pub(crate) fn render_into(&self, config: &EngineConfig, frame: &mut Frame) {
        let cfg = &config.pong;
        let top = SCORE_STRIP_H as i64;
        let w = config.width as i64;
        let h = config.height as i64;
        frame.fill_rect(0, top, w, h - top, BACKGROUND);
        let ph = cfg.paddle_height;
        frame.fill_rect(cfg.paddle_margin, self.left_y, cfg.paddle_width, ph, PADDLE);
        frame.fill_rect(cfg.right_face(w), self.right_y, cfg.paddle_width, ph, PADDLE);
        // The ball may sit on a paddle row after a miss; clip it to the field.
        let (bx, by) = self.ball;
        let y0 = by.max(top);
        let y1 = (by + cfg.ball_size).min(h);
        frame.fill_rect(bx, y0, cfg.ball_size, y1 - y0, BALL);
    }
}
