//! Action inference from two consecutive frames.

use serde::{Deserialize, Serialize};

use crate::engine::pong::PADDLE;
use crate::engine::{Action, EngineConfig, GameId, PaddleMove};
use crate::frame::Frame;
use crate::glyphs::SCORE_STRIP_H;
use crate::spatial::{blue_mask, BandGeometry, MatchConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Wrong,
    /// The logged action could not have a visible effect, or the frame
    /// could not be read.
    Excluded,
}

/// Mean squared difference between `next` and `prev` shifted by (dx, dy):
/// next(c, r) is compared with prev(c + dx, r + dy). Pixels where `skip`
/// holds in either frame are ignored.
fn shifted_mse(
    prev: &[u8],
    next: &[u8],
    w: usize,
    h: usize,
    ch: usize,
    (dx, dy): (i64, i64),
    skip: impl Fn(usize, usize) -> bool,
) -> Option<f64> {
    let mut sse = 0u64;
    let mut n = 0u64;
    for r in 0..h {
        let pr = r as i64 + dy;
        if pr < 0 || pr >= h as i64 {
            continue;
        }
        for c in 0..w {
            let pc = c as i64 + dx;
            if pc < 0 || pc >= w as i64 || skip(c, r) || skip(pc as usize, pr as usize) {
                continue;
            }
            let i = (r * w + c) * ch;
            let j = (pr as usize * w + pc as usize) * ch;
            for k in 0..ch {
                let d = next[i + k] as i64 - prev[j + k] as i64;
                sse += (d * d) as u64;
            }
            n += ch as u64;
        }
    }
    (n > 0).then(|| sse as f64 / n as f64)
}

/// Picks the candidate with the smallest error; earlier candidates win ties.
fn best_of<T: Copy>(candidates: &[(T, Option<f64>)]) -> Option<T> {
    let mut best: Option<(T, f64)> = None;
    for &(t, e) in candidates {
        if let Some(e) = e {
            if best.is_none_or(|(_, b)| e < b) {
                best = Some((t, e));
            }
        }
    }
    best.map(|(t, _)| t)
}

fn band(frame: &Frame) -> &[u8] {
    &frame.pixels()[SCORE_STRIP_H * frame.width() * 3..]
}

fn infer_traveler(config: &EngineConfig, prev: &Frame, next: &Frame) -> Option<Action> {
    let g = BandGeometry::traveler(config);
    let v = config.traveler.speed;
    let fp = g.player_footprint;
    let err = |dx: i64| {
        shifted_mse(band(prev), band(next), g.width, g.height, 3, (dx, 0), |c, r| fp.contains(c, r))
    };
    best_of(&[(Action::Stay, err(0)), (Action::Left, err(-v)), (Action::Right, err(v))])
}

fn blue_plane(frame: &Frame, mc: &MatchConfig) -> Vec<u8> {
    band(frame)
        .chunks_exact(3)
        .map(|p| blue_mask([p[0], p[1], p[2]], mc.blue_floor, mc.blue_margin) as u8)
        .collect()
}

fn infer_pacman(config: &EngineConfig, prev: &Frame, next: &Frame) -> Option<Action> {
    let g = BandGeometry::pacman(config);
    let mc = MatchConfig::for_game(GameId::PacMan);
    let (p, n) = (blue_plane(prev, &mc), blue_plane(next, &mc));
    let cs = config.pacman.cell_size as i64;
    let err = |d: (i64, i64)| shifted_mse(&p, &n, g.width, g.height, 1, d, |_, _| false);
    best_of(&[
        (Action::Stay, err((0, 0))),
        (Action::Up, err((0, -cs))),
        (Action::Down, err((0, cs))),
        (Action::Left, err((-cs, 0))),
        (Action::Right, err((cs, 0))),
    ])
}

/// Top row of the paddle whose columns start at `x`: the first row that
/// opens a paddle-high run of paddle color.
fn paddle_top(config: &EngineConfig, frame: &Frame, x: i64) -> Option<i64> {
    let cfg = &config.pong;
    let col = (x + cfg.paddle_width / 2) as usize;
    let ph = cfg.paddle_height as usize;
    let mut run = 0usize;
    for y in SCORE_STRIP_H..frame.height() {
        if frame.get(col, y) == PADDLE {
            run += 1;
            if run == ph {
                return Some((y + 1 - ph) as i64);
            }
        } else {
            run = 0;
        }
    }
    None
}

fn paddle_move(prev: Option<i64>, next: Option<i64>) -> Option<PaddleMove> {
    let d = next? - prev?;
    Some(match d.signum() {
        -1 => PaddleMove::Up,
        1 => PaddleMove::Down,
        _ => PaddleMove::Stay,
    })
}

fn infer_pong(config: &EngineConfig, prev: &Frame, next: &Frame) -> Option<Action> {
    let cfg = &config.pong;
    let (lx, rx) = (cfg.paddle_margin, cfg.right_face(config.width as i64));
    let l = paddle_move(paddle_top(config, prev, lx), paddle_top(config, next, lx))?;
    let r = paddle_move(paddle_top(config, prev, rx), paddle_top(config, next, rx))?;
    Some(Action::Paddles(l, r))
}

/// Action that most plausibly turned `prev` into `next`; `None` when the
/// frames carry no usable signal.
pub fn infer_action(
    game: GameId,
    config: &EngineConfig,
    prev: &Frame,
    next: &Frame,
) -> Option<Action> {
    match game {
        GameId::Traveler => infer_traveler(config, prev, next),
        GameId::PacMan => infer_pacman(config, prev, next),
        GameId::Pong => infer_pong(config, prev, next),
    }
}

/// Whether `logged` could have had a visible effect starting from `prev`.
fn observable(game: GameId, config: &EngineConfig, prev: &Frame, logged: Action) -> bool {
    match (game, logged) {
        (GameId::PacMan, a) => {
            let (dx, dy) = match a {
                Action::Up => (0, -1),
                Action::Down => (0, 1),
                Action::Left => (-1, 0),
                Action::Right => (1, 0),
                _ => return true,
            };
            let g = BandGeometry::pacman(config);
            let cs = config.pacman.cell_size as i64;
            let x = g.anchor.0 + dx * cs;
            let y = g.anchor.1 + dy * cs + SCORE_STRIP_H as i64;
            let mc = MatchConfig::for_game(GameId::PacMan);
            !blue_mask(prev.get(x as usize, y as usize), mc.blue_floor, mc.blue_margin)
        }
        (GameId::Pong, Action::Paddles(l, r)) => {
            let cfg = &config.pong;
            let top = SCORE_STRIP_H as i64;
            let bottom = config.height as i64 - cfg.paddle_height;
            let free = |x: i64, m: PaddleMove| match (paddle_top(config, prev, x), m) {
                (Some(y), PaddleMove::Up) => y > top,
                (Some(y), PaddleMove::Down) => y < bottom,
                (Some(_), PaddleMove::Stay) => true,
                (None, _) => false,
            };
            free(cfg.paddle_margin, l) && free(cfg.right_face(config.width as i64), r)
        }
        _ => true,
    }
}

/// Judges one step for ActAcc. Tail frames and moves without a visible
/// effect (into a wall, paddle against the border) are excluded.
pub fn judge_action(
    game: GameId,
    config: &EngineConfig,
    prev: &Frame,
    next: &Frame,
    logged: Action,
    tail: bool,
) -> Verdict {
    if tail || !observable(game, config, prev, logged) {
        return Verdict::Excluded;
    }
    match infer_action(game, config, prev, next) {
        Some(a) if a == logged => Verdict::Correct,
        Some(_) => Verdict::Wrong,
        None => Verdict::Excluded,
    }
}
