//! Traveler: a black square walking over an infinite strip of building slots.
//!
//! The world is a row of fixed-width slots, each holding a building or an
//! empty space. Walking the square's center into an empty slot raises a new
//! building there and scores a point. The camera always keeps the square at
//! the horizontal center of the frame.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Action, EngineConfig};
use crate::error::{Error, Result};
use crate::frame::{Frame, Rgb, BLACK, WHITE};
use crate::glyphs::SCORE_STRIP_H;
use crate::seed::stream_rng;
use crate::spatial::{BandGeometry, Topology, WorldMap};

pub const PALETTE: [Rgb; 10] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 170, 170],
    [220, 40, 210],
    [128, 128, 0],
    [0, 110, 110],
    [170, 110, 40],
];
pub const SKY: Rgb = WHITE;
pub const GROUND: Rgb = [96, 96, 96];
pub const TRAVELER: Rgb = BLACK;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TravelerConfig {
    pub slot_width: usize,
    pub min_height: usize,
    pub max_height: usize,
    pub empty_prob: f64,
    /// Camera motion per Left/Right step, in pixels.
    pub speed: i64,
    /// First ground row, in frame coordinates.
    pub ground_y: usize,
    pub sprite_size: usize,
}

impl Default for TravelerConfig {
    fn default() -> Self {
        Self {
            slot_width: 8,
            min_height: 24,
            max_height: 72,
            empty_prob: 0.15,
            speed: 4,
            ground_y: 88,
            sprite_size: 12,
        }
    }
}

impl TravelerConfig {
    pub(crate) fn validate(&self, engine: &EngineConfig) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.empty_prob) || self.empty_prob.is_nan() {
            return Err(Error::InvalidProbability { name: "empty_prob", value: self.empty_prob });
        }
        if self.slot_width == 0 || self.speed <= 0 {
            return bad("slot width and speed must be positive".into());
        }
        if self.ground_y > engine.height || self.ground_y <= SCORE_STRIP_H {
            return bad(format!("ground row {} outside the map band", self.ground_y));
        }
        if self.min_height == 0
            || self.min_height > self.max_height
            || self.max_height > self.ground_y - SCORE_STRIP_H
        {
            return bad(format!(
                "building heights [{}, {}] must fit above the ground",
                self.min_height, self.max_height
            ));
        }
        if self.sprite_size == 0 || self.sprite_size > self.ground_y - SCORE_STRIP_H {
            return bad(format!("sprite size {} does not fit the band", self.sprite_size));
        }
        Ok(())
    }

    /// Screen column of the traveler's center.
    pub fn center_column(&self, width: usize) -> usize {
        width / 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    Empty,
    Building { color: u8, height: u8 },
}

impl Slot {
    pub fn is_empty(&self) -> bool {
        matches!(self, Slot::Empty)
    }
}

/// A designer-supplied run of slots starting at `first_slot`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TravelerPreset {
    pub first_slot: i64,
    pub slots: Vec<Slot>,
}

impl TravelerPreset {
    /// Parses a fully observed strip map back into slots.
    ///
    /// A slot whose columns differ, whose color is outside the palette, or
    /// which floats above the ground is rejected.
    pub fn from_map(map: &WorldMap, config: &EngineConfig) -> Result<Self> {
        let cfg = &config.traveler;
        let band_h = config.height - SCORE_STRIP_H;
        let ground = cfg.ground_y - SCORE_STRIP_H;
        let (ox, oy) = map.origin();
        if map.topology() != Topology::Strip1D || map.height() != band_h || oy != 0 {
            return Err(Error::ShapeMismatch(format!(
                "preset must be a strip map {band_h} rows tall"
            )));
        }
        if map.width() < config.width {
            return Err(Error::PresetTooNarrow { width: map.width(), frame_width: config.width });
        }
        let b = cfg.slot_width as i64;
        let pixel = |x: usize, y: usize| -> Result<Rgb> {
            map.pixel_at_raster(x, y).ok_or(Error::UnparsablePreset { x: ox + x as i64 })
        };
        let right = ox + map.width() as i64;
        let first_slot = ox.div_euclid(b);
        let last_slot = (right - 1).div_euclid(b);
        let mut slots = Vec::with_capacity((last_slot - first_slot + 1) as usize);
        // Edge slots may be cut by the map border; they are parsed from the
        // columns that are present.
        for k in first_slot..=last_slot {
            let xa = (k * b).max(ox);
            let xb = ((k + 1) * b).min(right);
            let x0 = (xa - ox) as usize;
            let x1 = (xb - ox) as usize;
            for x in x0..x1 {
                for y in 0..band_h {
                    if pixel(x, y)? != pixel(x0, y)? {
                        return Err(Error::UnparsablePreset { x: ox + x as i64 });
                    }
                }
            }
            for y in ground..band_h {
                if pixel(x0, y)? != GROUND {
                    return Err(Error::UnparsablePreset { x: xa });
                }
            }
            let top = (0..ground).find(|&y| pixel(x0, y).map(|c| c != SKY).unwrap_or(true));
            let slot = match top {
                None => Slot::Empty,
                Some(t) => {
                    let c = pixel(x0, t)?;
                    let color = PALETTE
                        .iter()
                        .position(|&p| p == c)
                        .ok_or(Error::UnparsablePreset { x: xa })?;
                    for y in t..ground {
                        if pixel(x0, y)? != c {
                            return Err(Error::UnparsablePreset { x: xa });
                        }
                    }
                    Slot::Building { color: color as u8, height: (ground - t) as u8 }
                }
            };
            slots.push(slot);
        }
        Ok(Self { first_slot, slots })
    }

    fn get(&self, k: i64) -> Option<Slot> {
        let i = k - self.first_slot;
        (0..self.slots.len() as i64).contains(&i).then(|| self.slots[i as usize])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TravelerWorld {
    player_x: i64,
    /// Slots changed by events; take precedence over preset and generated slots.
    built: BTreeMap<i64, Slot>,
    preset: Option<TravelerPreset>,
    min_x: i64,
    max_x: i64,
}

impl TravelerWorld {
    pub(crate) fn new(_config: &EngineConfig, preset: Option<TravelerPreset>) -> Self {
        Self { player_x: 0, built: BTreeMap::new(), preset, min_x: 0, max_x: 0 }
    }

    pub fn player_x(&self) -> i64 {
        self.player_x
    }

    /// Slots raised by events so far.
    pub fn built_slots(&self) -> &BTreeMap<i64, Slot> {
        &self.built
    }

    pub fn slot_index(&self, config: &TravelerConfig, x: i64) -> i64 {
        x.div_euclid(config.slot_width as i64)
    }

    /// Current content of slot `k`. Slots are generated lazily from the seed,
    /// so the answer does not depend on which slots were looked at before.
    pub fn slot(&self, seed: u64, config: &TravelerConfig, k: i64) -> Slot {
        if let Some(s) = self.built.get(&k) {
            return *s;
        }
        if let Some(s) = self.preset.as_ref().and_then(|p| p.get(k)) {
            return s;
        }
        generated_slot(seed, config, k).0
    }

    /// Event rule: the center enters a different slot and that slot is empty.
    pub fn would_trigger(&self, seed: u64, config: &TravelerConfig, action: Action) -> bool {
        let dx = motion(config, action);
        if dx == 0 {
            return false;
        }
        let from = self.slot_index(config, self.player_x);
        let to = self.slot_index(config, self.player_x + dx);
        from != to && self.slot(seed, config, to).is_empty()
    }

    pub(crate) fn step(&mut self, seed: u64, config: &EngineConfig, action: Action) -> bool {
        let cfg = &config.traveler;
        let event = self.would_trigger(seed, cfg, action);
        self.player_x += motion(cfg, action);
        if event {
            let k = self.slot_index(cfg, self.player_x);
            self.built.insert(k, generated_slot(seed, cfg, k).1);
        }
        self.min_x = self.min_x.min(self.player_x);
        self.max_x = self.max_x.max(self.player_x);
        event
    }

    /// World columns `[x0, x1)` ever inside the viewport.
    pub fn explored_span(&self, geometry: &BandGeometry) -> (i64, i64) {
        let ax = geometry.anchor.0;
        (self.min_x - ax, self.max_x - ax + geometry.width as i64)
    }

    /// Slot indices with at least one column inside the viewport.
    pub fn visible_slots(&self, config: &EngineConfig) -> std::ops::RangeInclusive<i64> {
        let cfg = &config.traveler;
        let left = self.player_x - cfg.center_column(config.width) as i64;
        let right = left + config.width as i64 - 1;
        self.slot_index(cfg, left)..=self.slot_index(cfg, right)
    }

    /// Draws the map band (sky, buildings, ground) for world columns starting
    /// at `x0` into `frame` rows `y_offset..`, using `overrides` in place of
    /// the true slots where present.
    fn draw_band(
        &self,
        seed: u64,
        config: &EngineConfig,
        frame: &mut Frame,
        x0: i64,
        y_offset: usize,
        overrides: Option<&BTreeMap<i64, Slot>>,
    ) {
        let cfg = &config.traveler;
        let b = cfg.slot_width as i64;
        let ground = cfg.ground_y - SCORE_STRIP_H + y_offset;
        let band_end = config.height - SCORE_STRIP_H + y_offset;
        let width = frame.width() as i64;
        let mut c = 0i64;
        while c < width {
            let x = x0 + c;
            let k = x.div_euclid(b);
            let run = (b - x.rem_euclid(b)).min(width - c);
            let slot = overrides
                .and_then(|o| o.get(&k).copied())
                .unwrap_or_else(|| self.slot(seed, cfg, k));
            let (top, color) = match slot {
                Slot::Empty => (ground, SKY),
                Slot::Building { color, height } => {
                    (ground - height as usize, PALETTE[color as usize % PALETTE.len()])
                }
            };
            for y in y_offset..band_end {
                let px = if y >= ground {
                    GROUND
                } else if y >= top {
                    color
                } else {
                    SKY
                };
                for cc in c..c + run {
                    frame.set(cc as usize, y, px);
                }
            }
            c += run;
        }
    }

    pub(crate) fn render_into(
        &self,
        seed: u64,
        config: &EngineConfig,
        frame: &mut Frame,
        overrides: Option<&BTreeMap<i64, Slot>>,
    ) {
        let cfg = &config.traveler;
        let center = cfg.center_column(config.width) as i64;
        self.draw_band(seed, config, frame, self.player_x - center, SCORE_STRIP_H, overrides);
        let s = cfg.sprite_size as i64;
        frame.fill_rect(center - s / 2, cfg.ground_y as i64 - s, s, s, TRAVELER);
    }

    pub(crate) fn ground_truth_span(
        &self,
        seed: u64,
        config: &EngineConfig,
        x0: i64,
        x1: i64,
    ) -> WorldMap {
        let mut band = Frame::new((x1 - x0).max(0) as usize, config.height - SCORE_STRIP_H);
        self.draw_band(seed, config, &mut band, x0, 0, None);
        WorldMap::fully_observed(Topology::Strip1D, band, (x0, 0), None)
    }
}

fn motion(config: &TravelerConfig, action: Action) -> i64 {
    match action {
        Action::Left => -config.speed,
        Action::Right => config.speed,
        _ => 0,
    }
}

/// (initial slot, building raised if an event fills it). Slot 0, where the
/// traveler starts, is always a building.
fn generated_slot(seed: u64, config: &TravelerConfig, k: i64) -> (Slot, Slot) {
    let mut rng = stream_rng(seed, k as u64);
    let empty = rng.random_bool(config.empty_prob);
    let building = |rng: &mut rand_chacha::ChaCha8Rng| Slot::Building {
        color: rng.random_range(0..PALETTE.len() as u8),
        height: rng.random_range(config.min_height..=config.max_height) as u8,
    };
    let initial = building(&mut rng);
    let fill = building(&mut rng);
    if empty && k != 0 {
        (Slot::Empty, fill)
    } else {
        (initial, fill)
    }
}
