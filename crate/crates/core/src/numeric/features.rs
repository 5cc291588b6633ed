//! Frame features for the event predictor: the map band in grayscale,
//! average-pooled to a 24x24 grid, followed by a one-hot action code.

use crate::engine::{Action, GameId, PaddleMove};
use crate::error::{Error, Result};
use crate::frame::{luma, Frame};
use crate::glyphs::SCORE_STRIP_H;

/// Side of the pooled grid.
pub const POOL: usize = 24;

pub fn action_dim(game: GameId) -> usize {
    match game {
        GameId::Traveler => 3,
        GameId::PacMan => 5,
        // One one-hot block per paddle.
        GameId::Pong => 2 * PaddleMove::ALL.len(),
    }
}

pub fn feature_len(game: GameId) -> usize {
    POOL * POOL + action_dim(game)
}

/// Adaptive average pooling of an `h`-by-`w` plane to `POOL`x`POOL`; bin i
/// covers rows `floor(i*h/POOL)..ceil((i+1)*h/POOL)`.
pub fn pool(plane: &[f32], w: usize, h: usize) -> Vec<f32> {
    let bins = |n: usize, i: usize| (i * n / POOL, ((i + 1) * n).div_ceil(POOL));
    let mut out = Vec::with_capacity(POOL * POOL);
    for i in 0..POOL {
        let (y0, y1) = bins(h, i);
        for j in 0..POOL {
            let (x0, x1) = bins(w, j);
            let mut sum = 0.0f32;
            for y in y0..y1 {
                sum += plane[y * w + x0..y * w + x1].iter().sum::<f32>();
            }
            out.push(sum / ((y1 - y0) * (x1 - x0)) as f32);
        }
    }
    out
}

fn one_hot(game: GameId, action: Action) -> Result<Vec<f32>> {
    action.check(game)?;
    let mut v = vec![0.0; action_dim(game)];
    match action {
        Action::Paddles(l, r) => {
            v[l.index()] = 1.0;
            v[PaddleMove::ALL.len() + r.index()] = 1.0;
        }
        a => {
            let i = Action::legal_actions(game).iter().position(|&x| x == a).unwrap();
            v[i] = 1.0;
        }
    }
    Ok(v)
}

pub fn featurize(game: GameId, frame: &Frame, action: Action) -> Result<Vec<f32>> {
    let size = game.canonical_size();
    if frame.width() != size || frame.height() != size {
        return Err(Error::DimensionMismatch {
            expected: size * size,
            got: frame.width() * frame.height(),
        });
    }
    let (w, h) = (size, size - SCORE_STRIP_H);
    let plane: Vec<f32> = frame.pixels()[SCORE_STRIP_H * w * 3..]
        .chunks_exact(3)
        .map(|p| luma([p[0], p[1], p[2]]) / 255.0)
        .collect();
    let mut out = pool(&plane, w, h);
    out.extend(one_hot(game, action)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::WHITE;

    #[test]
    fn white_frame_pools_to_ones() {
        let f = Frame::filled(96, 96, WHITE);
        let v = featurize(GameId::Traveler, &f, Action::Right).unwrap();
        assert_eq!(v.len(), 576 + 3);
        assert!(v[..576].iter().all(|&x| (x - 1.0).abs() < 1e-6));
        assert_eq!(&v[576..], &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn constant_block_pools_to_constant() {
        let plane = vec![0.25f32; 48 * 48];
        assert!(pool(&plane, 48, 48).iter().all(|&x| x == 0.25));
    }

    #[test]
    fn pong_encodes_both_paddles() {
        let f = Frame::new(128, 128);
        let v = featurize(
            GameId::Pong,
            &f,
            Action::Paddles(PaddleMove::Down, PaddleMove::Stay),
        )
        .unwrap();
        assert_eq!(&v[576..], &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn wrong_size_is_rejected() {
        assert!(featurize(GameId::Pong, &Frame::new(96, 96), Action::noop(GameId::Pong)).is_err());
    }
}
