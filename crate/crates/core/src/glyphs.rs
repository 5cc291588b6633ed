//! Built-in 5x7 digit font and the score strip layout.
//!
//! Every game reserves the top [`SCORE_STRIP_H`] rows of a frame for the
//! score: a white band with three zero-padded digits drawn at 2x scale.

use crate::frame::{Frame, Rgb, BLACK, WHITE};

pub const SCORE_STRIP_H: usize = 16;
pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;
pub const GLYPH_SCALE: usize = 2;
pub const DIGIT_CELL_W: usize = GLYPH_W * GLYPH_SCALE;
pub const DIGIT_CELL_H: usize = GLYPH_H * GLYPH_SCALE;
pub const DIGIT_GAP: usize = 2;
pub const DIGIT_TOP: usize = 1;
pub const SCORE_DIGITS: usize = 3;

pub const STRIP_BACKGROUND: Rgb = WHITE;
pub const INK: Rgb = BLACK;

#[rustfmt::skip]
const DIGITS: [[u8; GLYPH_H]; 10] = [
    [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110],
    [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
    [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111],
    [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110],
    [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010],
    [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110],
    [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110],
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000],
    [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110],
    [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100],
];

/// Whether the scaled glyph for `digit` has ink at cell pixel (`x`, `y`).
#[inline]
pub fn glyph_ink(digit: u8, x: usize, y: usize) -> bool {
    let row = DIGITS[digit as usize][y / GLYPH_SCALE];
    let col = x / GLYPH_SCALE;
    row & (1 << (GLYPH_W - 1 - col)) != 0
}

/// Left edge of each digit cell for a frame of the given width.
pub fn digit_origins(frame_width: usize) -> [usize; SCORE_DIGITS] {
    let total = SCORE_DIGITS * DIGIT_CELL_W + (SCORE_DIGITS - 1) * DIGIT_GAP;
    let left = (frame_width - total) / 2;
    std::array::from_fn(|i| left + i * (DIGIT_CELL_W + DIGIT_GAP))
}

/// Draws one digit cell (background and ink) with its top-left at (`x0`, `y0`).
pub fn draw_digit(frame: &mut Frame, digit: u8, x0: usize, y0: usize) {
    for y in 0..DIGIT_CELL_H {
        for x in 0..DIGIT_CELL_W {
            let c = if glyph_ink(digit, x, y) { INK } else { STRIP_BACKGROUND };
            frame.set(x0 + x, y0 + y, c);
        }
    }
}

/// Repaints the score strip with `value` (clamped to 999).
pub fn draw_score_strip(frame: &mut Frame, value: u16) {
    let value = value.min(999);
    frame.fill_rect(0, 0, frame.width() as i64, SCORE_STRIP_H as i64, STRIP_BACKGROUND);
    let digits = [(value / 100) as u8, (value / 10 % 10) as u8, (value % 10) as u8];
    for (d, x0) in digits.into_iter().zip(digit_origins(frame.width())) {
        draw_digit(frame, d, x0, DIGIT_TOP);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glyphs_are_pairwise_distinct() {
        for a in 0..10 {
            for b in (a + 1)..10 {
                assert_ne!(DIGITS[a], DIGITS[b], "digits {a} and {b} collide");
            }
        }
    }

    #[test]
    fn strip_fits_smallest_frame() {
        let o = digit_origins(96);
        assert!(o[2] + DIGIT_CELL_W <= 96);
        assert!(DIGIT_TOP + DIGIT_CELL_H <= SCORE_STRIP_H);
    }
}
