//! Score readback by exact glyph template matching.

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::glyphs::{
    digit_origins, glyph_ink, DIGIT_CELL_H, DIGIT_CELL_W, DIGIT_TOP, INK, SCORE_DIGITS,
    STRIP_BACKGROUND,
};

fn matches_digit(frame: &Frame, digit: u8, x0: usize) -> bool {
    (0..DIGIT_CELL_H).all(|y| {
        (0..DIGIT_CELL_W).all(|x| {
            let want = if glyph_ink(digit, x, y) { INK } else { STRIP_BACKGROUND };
            frame.get(x0 + x, DIGIT_TOP + y) == want
        })
    })
}

/// Reads the three-digit score strip. Every digit cell must equal one glyph
/// template exactly.
pub fn readback_score(frame: &Frame) -> Result<u16> {
    let mut value = 0u16;
    for (i, x0) in digit_origins(frame.width()).into_iter().enumerate().take(SCORE_DIGITS) {
        let d = (0..10u8)
            .find(|&d| matches_digit(frame, d, x0))
            .ok_or(Error::UnreadableScore { digit: i })?;
        value = value * 10 + d as u16;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyphs::draw_score_strip;

    #[test]
    fn reads_94() {
        let mut f = Frame::new(96, 96);
        draw_score_strip(&mut f, 94);
        assert_eq!(readback_score(&f).unwrap(), 94);
    }

    #[test]
    fn smudged_digit_is_unreadable() {
        let mut f = Frame::new(128, 128);
        draw_score_strip(&mut f, 0);
        let x0 = digit_origins(128)[1];
        f.set(x0 + 4, DIGIT_TOP + 6, [200, 0, 0]);
        assert!(matches!(readback_score(&f), Err(Error::UnreadableScore { digit: 1 })));
    }
}
