//! Explicit pixel map of everything observed so far.
//!
//! World coordinates are pixels measured from the player's position at the
//! first linked observation, so a map built by the matcher and the ground
//! truth rendered by the engine share one coordinate system.

mod io;
pub mod matcher;
pub mod psnr;

use serde::{Deserialize, Serialize};

use crate::engine::{EngineConfig, GameId};
use crate::error::{Error, Result};
use crate::frame::{Frame, Rgb, BLACK};
use crate::glyphs::SCORE_STRIP_H;

pub use io::MapSidecar;
pub use matcher::{
    blue_mask, candidate_offsets, integrate, link_observation, locate, MatchConfig, MatchResult,
    PlayerMasking,
};
pub use psnr::{psnr, psnr_from_sse, PSNR_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Strip1D,
    Grid2D,
}

/// Axis-aligned rectangle in band pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BandRect {
    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

/// How a game's map band relates to world coordinates.
///
/// Band pixel (c, r) observed with the player at world (px, py) lies at world
/// (px + c - anchor.0, py + r - anchor.1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandGeometry {
    pub topology: Topology,
    /// Rows removed from the top of every frame.
    pub strip_h: usize,
    pub width: usize,
    pub height: usize,
    pub anchor: (i64, i64),
    pub player_footprint: BandRect,
}

impl BandGeometry {
    pub fn for_game(game: GameId, config: &EngineConfig) -> Result<Self> {
        match game {
            GameId::Traveler => Ok(Self::traveler(config)),
            GameId::PacMan => Ok(Self::pacman(config)),
            GameId::Pong => Err(Error::NoMap(game)),
        }
    }

    pub fn traveler(config: &EngineConfig) -> Self {
        let cfg = &config.traveler;
        let center = cfg.center_column(config.width);
        let s = cfg.sprite_size;
        Self {
            topology: Topology::Strip1D,
            strip_h: SCORE_STRIP_H,
            width: config.width,
            height: config.height - SCORE_STRIP_H,
            anchor: (center as i64, 0),
            player_footprint: BandRect {
                x: center - s / 2,
                y: cfg.ground_y - s - SCORE_STRIP_H,
                w: s,
                h: s,
            },
        }
    }

    pub fn pacman(config: &EngineConfig) -> Self {
        let width = config.width;
        let height = config.height - SCORE_STRIP_H;
        let cs = config.pacman.cell_size;
        let anchor = ((width / 2) as i64, (height / 2) as i64);
        Self {
            topology: Topology::Grid2D,
            strip_h: SCORE_STRIP_H,
            width,
            height,
            anchor,
            player_footprint: BandRect {
                x: width / 2 - cs / 2,
                y: height / 2 - cs / 2,
                w: cs,
                h: cs,
            },
        }
    }

    /// World coordinate of band pixel (0, 0) with the player at `pos`.
    #[inline]
    pub fn band_origin(&self, pos: (i64, i64)) -> (i64, i64) {
        (pos.0 - self.anchor.0, pos.1 - self.anchor.1)
    }

    /// Map band of a full frame.
    pub fn band_of(&self, frame: &Frame) -> Result<Frame> {
        if frame.width() != self.width || frame.height() != self.height + self.strip_h {
            return Err(Error::ShapeMismatch(format!(
                "expected a {}x{} frame, got {}x{}",
                self.width,
                self.height + self.strip_h,
                frame.width(),
                frame.height()
            )));
        }
        Ok(frame.rows(self.strip_h, frame.height()))
    }
}

/// Growable RGB raster with an observed mask.
///
/// Raster element (x, y) sits at world (origin.0 + x, origin.1 + y).
/// Unobserved elements are black.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldMap {
    topology: Topology,
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    observed: Vec<bool>,
    origin: (i64, i64),
    player_pos: Option<(i64, i64)>,
}

impl WorldMap {
    pub fn new(topology: Topology) -> Self {
        Self {
            topology,
            width: 0,
            height: 0,
            pixels: Vec::new(),
            observed: Vec::new(),
            origin: (0, 0),
            player_pos: None,
        }
    }

    /// Map whose every pixel is observed, e.g. a ground truth or a preset.
    pub fn fully_observed(
        topology: Topology,
        raster: Frame,
        origin: (i64, i64),
        player_pos: Option<(i64, i64)>,
    ) -> Self {
        let (width, height) = (raster.width(), raster.height());
        Self {
            topology,
            width,
            height,
            pixels: raster.into_raw(),
            observed: vec![true; width * height],
            origin,
            player_pos,
        }
    }

    pub(crate) fn from_parts(
        topology: Topology,
        raster: Frame,
        observed: Vec<bool>,
        origin: (i64, i64),
        player_pos: Option<(i64, i64)>,
    ) -> Result<Self> {
        let (width, height) = (raster.width(), raster.height());
        if observed.len() != width * height {
            return Err(Error::ShapeMismatch("mask and raster sizes differ".into()));
        }
        let mut pixels = raster.into_raw();
        for (i, &o) in observed.iter().enumerate() {
            if !o {
                pixels[i * 3..i * 3 + 3].copy_from_slice(&BLACK);
            }
        }
        Ok(Self { topology, width, height, pixels, observed, origin, player_pos })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    pub fn player_pos(&self) -> Option<(i64, i64)> {
        self.player_pos
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn observed_mask(&self) -> &[bool] {
        &self.observed
    }

    pub fn is_empty(&self) -> bool {
        self.player_pos.is_none()
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// Observed pixel at raster (`x`, `y`); `None` outside or unobserved.
    pub fn pixel_at_raster(&self, x: usize, y: usize) -> Option<Rgb> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let i = y * self.width + x;
        self.observed[i].then(|| [self.pixels[i * 3], self.pixels[i * 3 + 1], self.pixels[i * 3 + 2]])
    }

    /// Observed pixel at world (`wx`, `wy`).
    pub fn observed_pixel(&self, wx: i64, wy: i64) -> Option<Rgb> {
        let x = wx - self.origin.0;
        let y = wy - self.origin.1;
        if x < 0 || y < 0 {
            return None;
        }
        self.pixel_at_raster(x as usize, y as usize)
    }

    /// The raster as a frame (unobserved pixels black).
    pub fn to_frame(&self) -> Frame {
        Frame::from_raw(self.width, self.height, self.pixels.clone())
            .expect("map buffer matches its dimensions")
    }

    /// Current player position.
    pub fn export_position(&self) -> Result<(i64, i64)> {
        self.player_pos.ok_or(Error::EmptyMap)
    }

    pub(crate) fn set_player_pos(&mut self, pos: (i64, i64)) {
        self.player_pos = Some(pos);
    }

    /// Grows the raster so the world rectangle `[x0, x1) x [y0, y1)` is
    /// inside it. Existing content keeps its world coordinates.
    pub fn ensure_covers(&mut self, x0: i64, y0: i64, x1: i64, y1: i64) {
        if x1 <= x0 || y1 <= y0 {
            return;
        }
        if self.width == 0 || self.height == 0 {
            let (w, h) = ((x1 - x0) as usize, (y1 - y0) as usize);
            self.width = w;
            self.height = h;
            self.origin = (x0, y0);
            self.pixels = vec![0; w * h * 3];
            self.observed = vec![false; w * h];
            return;
        }
        let nx0 = x0.min(self.origin.0);
        let ny0 = y0.min(self.origin.1);
        let nx1 = x1.max(self.origin.0 + self.width as i64);
        let ny1 = y1.max(self.origin.1 + self.height as i64);
        if (nx0, ny0) == self.origin
            && nx1 == self.origin.0 + self.width as i64
            && ny1 == self.origin.1 + self.height as i64
        {
            return;
        }
        let (w, h) = ((nx1 - nx0) as usize, (ny1 - ny0) as usize);
        let mut pixels = vec![0; w * h * 3];
        let mut observed = vec![false; w * h];
        let dx = (self.origin.0 - nx0) as usize;
        let dy = (self.origin.1 - ny0) as usize;
        for y in 0..self.height {
            let src = y * self.width;
            let dst = (y + dy) * w + dx;
            pixels[dst * 3..(dst + self.width) * 3]
                .copy_from_slice(&self.pixels[src * 3..(src + self.width) * 3]);
            observed[dst..dst + self.width].copy_from_slice(&self.observed[src..src + self.width]);
        }
        self.width = w;
        self.height = h;
        self.origin = (nx0, ny0);
        self.pixels = pixels;
        self.observed = observed;
    }

    /// Writes `band` with its top-left at world `at`, overwriting older
    /// content. Pixels inside `skip` are left untouched.
    pub fn write(&mut self, band: &Frame, at: (i64, i64), skip: Option<BandRect>) {
        let (bw, bh) = (band.width(), band.height());
        self.ensure_covers(at.0, at.1, at.0 + bw as i64, at.1 + bh as i64);
        let x0 = (at.0 - self.origin.0) as usize;
        let y0 = (at.1 - self.origin.1) as usize;
        let src = band.pixels();
        for r in 0..bh {
            for c in 0..bw {
                if skip.is_some_and(|s| s.contains(c, r)) {
                    continue;
                }
                let i = (y0 + r) * self.width + x0 + c;
                let j = (r * bw + c) * 3;
                self.pixels[i * 3..i * 3 + 3].copy_from_slice(&src[j..j + 3]);
                self.observed[i] = true;
            }
        }
    }

    /// Copy of the world rectangle `[x0, x0 + w) x [y0, y0 + h)`; parts
    /// outside the raster come back unobserved.
    pub fn crop(&self, x0: i64, y0: i64, w: usize, h: usize) -> WorldMap {
        let mut pixels = vec![0; w * h * 3];
        let mut observed = vec![false; w * h];
        for r in 0..h {
            let y = y0 + r as i64 - self.origin.1;
            if y < 0 || y >= self.height as i64 {
                continue;
            }
            let xa = (self.origin.0 - x0).clamp(0, w as i64) as usize;
            let xb = (self.origin.0 + self.width as i64 - x0).clamp(0, w as i64) as usize;
            if xa >= xb {
                continue;
            }
            let sx = (x0 + xa as i64 - self.origin.0) as usize;
            let src = y as usize * self.width + sx;
            let dst = r * w + xa;
            let n = xb - xa;
            pixels[dst * 3..(dst + n) * 3].copy_from_slice(&self.pixels[src * 3..(src + n) * 3]);
            observed[dst..dst + n].copy_from_slice(&self.observed[src..src + n]);
        }
        WorldMap {
            topology: self.topology,
            width: w,
            height: h,
            pixels,
            observed,
            origin: (x0, y0),
            player_pos: self.player_pos,
        }
    }

    /// Local map around the player: `2 * delta1` wide (and, in 2D, tall),
    /// band-high in 1D. Unobserved or out-of-map pixels are black.
    pub fn retrieve_local_map(
        &self,
        delta1: usize,
        geometry: &BandGeometry,
    ) -> Result<LocalMapWindow> {
        if 2 * delta1 <= geometry.width
            || (self.topology == Topology::Grid2D && 2 * delta1 <= geometry.height)
        {
            return Err(Error::WindowTooNarrow { delta1, width: geometry.width });
        }
        let (px, py) = self.export_position()?;
        let d = delta1 as i64;
        let map = match self.topology {
            Topology::Strip1D => {
                let y0 = py - geometry.anchor.1;
                self.crop(px - d, y0, 2 * delta1, geometry.height)
            }
            Topology::Grid2D => self.crop(px - d, py - d, 2 * delta1, 2 * delta1),
        };
        Ok(LocalMapWindow { map, delta1 })
    }
}

/// The map region consulted when linking the next observation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalMapWindow {
    pub map: WorldMap,
    pub delta1: usize,
}

impl LocalMapWindow {
    /// World extent `[x0, x1) x [y0, y1)`.
    pub fn extent(&self) -> ((i64, i64), (i64, i64)) {
        let (x0, y0) = self.map.origin();
        ((x0, x0 + self.map.width() as i64), (y0, y0 + self.map.height() as i64))
    }

    pub fn pixels(&self) -> Frame {
        self.map.to_frame()
    }
}

/// Fully observed strip map from a designer image. Column 0 of the image
/// is the left edge of the first viewport.
pub fn load_preset_map(image: &Frame, geometry: &BandGeometry) -> Result<WorldMap> {
    if image.height() != geometry.height {
        return Err(Error::ShapeMismatch(format!(
            "preset is {} px tall, the map band is {}",
            image.height(),
            geometry.height
        )));
    }
    if image.width() < geometry.width {
        return Err(Error::PresetTooNarrow { width: image.width(), frame_width: geometry.width });
    }
    let origin = geometry.band_origin((0, 0));
    let origin = match geometry.topology {
        Topology::Strip1D => (origin.0, 0),
        Topology::Grid2D => origin,
    };
    Ok(WorldMap::fully_observed(geometry.topology, image.clone(), origin, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::WHITE;

    fn band(w: usize, h: usize, seed: u8) -> Frame {
        let mut f = Frame::new(w, h);
        for y in 0..h {
            for x in 0..w {
                f.set(x, y, [(x as u8).wrapping_mul(7) ^ seed, y as u8, seed]);
            }
        }
        f
    }

    #[test]
    fn growth_keeps_world_coordinates() {
        let mut m = WorldMap::new(Topology::Grid2D);
        let a = band(4, 3, 1);
        m.write(&a, (10, 20), None);
        let before = m.observed_pixel(11, 21).unwrap();
        m.write(&band(2, 2, 2), (-5, 30), None);
        assert_eq!(m.origin(), (-5, 20));
        assert_eq!(m.observed_pixel(11, 21), Some(before));
        assert_eq!(m.observed_pixel(0, 0), None);
        assert_eq!(m.observed_count(), 12 + 4);
    }

    #[test]
    fn skipped_footprint_stays_unobserved() {
        let mut m = WorldMap::new(Topology::Strip1D);
        m.write(&Frame::filled(5, 5, WHITE), (0, 0), Some(BandRect { x: 1, y: 1, w: 2, h: 2 }));
        assert_eq!(m.observed_count(), 21);
        assert_eq!(m.pixel_at_raster(1, 1), None);
        assert_eq!(&m.pixels()[(5 + 1) * 3..(5 + 1) * 3 + 3], &BLACK);
    }

    #[test]
    fn window_must_be_wider_than_observation() {
        let cfg = EngineConfig::for_game(GameId::Traveler);
        let g = BandGeometry::traveler(&cfg);
        let mut m = WorldMap::new(Topology::Strip1D);
        m.write(&band(96, 80, 3), g.band_origin((0, 0)), None);
        m.set_player_pos((0, 0));
        assert!(matches!(m.retrieve_local_map(48, &g), Err(Error::WindowTooNarrow { .. })));
        let w = m.retrieve_local_map(64, &g).unwrap();
        assert_eq!((w.map.width(), w.map.height()), (128, 80));
    }

    #[test]
    fn fresh_map_window_is_black() {
        let cfg = EngineConfig::for_game(GameId::Traveler);
        let g = BandGeometry::traveler(&cfg);
        let mut m = WorldMap::new(Topology::Strip1D);
        m.set_player_pos((0, 0));
        let w = m.retrieve_local_map(64, &g).unwrap();
        assert!(w.pixels().pixels().iter().all(|&v| v == 0));
        assert_eq!(w.map.observed_count(), 0);
    }

    #[test]
    fn window_on_full_strip_is_a_crop() {
        let cfg = EngineConfig::for_game(GameId::Traveler);
        let g = BandGeometry::traveler(&cfg);
        let raster = band(400, 80, 9);
        let mut m = WorldMap::fully_observed(Topology::Strip1D, raster.clone(), (-200, 0), None);
        m.set_player_pos((0, 0));
        let w = m.retrieve_local_map(64, &g).unwrap();
        assert_eq!(w.pixels(), raster.crop(200 - 64, 0, 128, 80));
        assert_eq!(w.extent(), ((-64, 64), (0, 80)));
    }

    #[test]
    fn export_position_needs_a_link() {
        assert!(matches!(WorldMap::new(Topology::Strip1D).export_position(), Err(Error::EmptyMap)));
    }

    #[test]
    fn preset_must_cover_a_frame() {
        let cfg = EngineConfig::for_game(GameId::Traveler);
        let g = BandGeometry::traveler(&cfg);
        assert!(matches!(
            load_preset_map(&Frame::new(64, 80), &g),
            Err(Error::PresetTooNarrow { .. })
        ));
        assert!(load_preset_map(&Frame::new(128, 79), &g).is_err());
        let m = load_preset_map(&Frame::new(128, 80), &g).unwrap();
        assert_eq!(m.origin(), (-48, 0));
    }
}
