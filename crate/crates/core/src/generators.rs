//! Frame generators: the reference engine behind a generator interface, and
//! wrappers that inject controlled numerical or spatial inconsistencies.
//!
//! Wrappers only change what is drawn. The engine underneath always follows
//! the true rules, and every trace entry carries that truth.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::traveler::PALETTE;
use crate::engine::{Action, Cell, EngineConfig, EngineState, GameId, Slot, World};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::glyphs::draw_score_strip;
use crate::numeric::SCORE_MAX;
use crate::seed::{stream, stream_rng};
use crate::spatial::BandGeometry;

/// Largest score offset drawn by the numeric jitter.
pub const JITTER_MAX: i32 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    Reference,
    NumericJitter { p: f64 },
    SpatialReshuffle { q: f64 },
    /// Wrappers listed outermost first.
    Composite { layers: Vec<GeneratorKind> },
}

impl GeneratorKind {
    /// Leaf wrappers, outermost first. `Reference` contributes nothing.
    pub fn flatten(&self) -> Vec<GeneratorKind> {
        match self {
            GeneratorKind::Reference => vec![],
            GeneratorKind::Composite { layers } => layers.iter().flat_map(|l| l.flatten()).collect(),
            leaf => vec![leaf.clone()],
        }
    }

    pub fn validate(&self, game: GameId) -> Result<()> {
        for layer in self.flatten() {
            match layer {
                GeneratorKind::NumericJitter { p } if !(0.0..=1.0).contains(&p) => {
                    return Err(Error::InvalidProbability { name: "p", value: p });
                }
                GeneratorKind::SpatialReshuffle { q } => {
                    if !(0.0..=1.0).contains(&q) {
                        return Err(Error::InvalidProbability { name: "q", value: q });
                    }
                    if !game.has_map() {
                        return Err(Error::NoMap(game));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn from_layers(mut layers: Vec<GeneratorKind>) -> Self {
        match layers.len() {
            0 => GeneratorKind::Reference,
            1 => layers.pop().unwrap(),
            _ => GeneratorKind::Composite { layers },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub game: GameId,
    pub seed: u64,
    #[serde(flatten)]
    pub kind: GeneratorKind,
}

impl GeneratorSpec {
    pub fn reference(game: GameId, seed: u64) -> Self {
        Self { game, seed, kind: GeneratorKind::Reference }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Ground truth and injected corruption for one produced frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: u64,
    /// Action that produced this frame; `None` for the initial frame.
    pub action: Option<Action>,
    pub rendered_score: u16,
    pub true_score: u16,
    pub true_event: bool,
    pub injected_numeric_corruption: bool,
    pub injected_spatial_corruption: bool,
    /// Player position relative to its start; `None` for Pong.
    pub true_player_pos: Option<(i64, i64)>,
    /// Produced after the game ended.
    pub tail: bool,
    pub saturated: bool,
}

#[derive(Clone, Debug)]
enum Reshuffle {
    Traveler {
        overrides: BTreeMap<i64, Slot>,
        prev: (i64, i64),
        seen: (i64, i64),
    },
    PacMan {
        overrides: BTreeMap<(i64, i64), Cell>,
        prev: ((i64, i64), (i64, i64)),
        seen: Vec<bool>,
    },
}

#[derive(Clone, Debug)]
enum Layer {
    Jitter { p: f64, rng: ChaCha8Rng },
    Reshuffle { q: f64, rng: ChaCha8Rng, state: Reshuffle },
}

/// A running generator. Exclusive-access; clone to fork.
#[derive(Clone, Debug)]
pub struct GeneratorHandle {
    spec: GeneratorSpec,
    state: EngineState,
    /// Outermost first.
    layers: Vec<Layer>,
    frame: Frame,
    rendered_score: u16,
}

fn visible_slots(state: &EngineState) -> (i64, i64) {
    match state.world() {
        World::Traveler(w) => {
            let r = w.visible_slots(state.config());
            (*r.start(), *r.end())
        }
        _ => unreachable!("strip reshuffle on a non-strip game"),
    }
}

fn visible_cells(state: &EngineState) -> ((i64, i64), (i64, i64)) {
    match state.world() {
        World::PacMan(w) => w.visible_cells(&BandGeometry::pacman(state.config())),
        _ => unreachable!("grid reshuffle on a non-grid game"),
    }
}

impl Layer {
    fn new(kind: &GeneratorKind, index: usize, state: &EngineState) -> Self {
        let rng = stream_rng(state.seed(), stream::CORRUPTION + index as u64);
        match *kind {
            GeneratorKind::NumericJitter { p } => Layer::Jitter { p, rng },
            GeneratorKind::SpatialReshuffle { q } => {
                let shuffle = match state.game() {
                    GameId::Traveler => {
                        let v = visible_slots(state);
                        Reshuffle::Traveler { overrides: BTreeMap::new(), prev: v, seen: v }
                    }
                    _ => {
                        let v = visible_cells(state);
                        let side = state.config().pacman.maze_cells;
                        let mut seen = vec![false; side * side];
                        mark_cells(&mut seen, side, v);
                        Reshuffle::PacMan { overrides: BTreeMap::new(), prev: v, seen }
                    }
                };
                Layer::Reshuffle { q, rng, state: shuffle }
            }
            _ => unreachable!("layers are flattened leaves"),
        }
    }

    fn kind(&self) -> GeneratorKind {
        match self {
            Layer::Jitter { p, .. } => GeneratorKind::NumericJitter { p: *p },
            Layer::Reshuffle { q, .. } => GeneratorKind::SpatialReshuffle { q: *q },
        }
    }
}

fn mark_cells(seen: &mut [bool], side: usize, ((r0, c0), (r1, c1)): ((i64, i64), (i64, i64))) {
    for r in r0.max(0)..=r1.min(side as i64 - 1) {
        for c in c0.max(0)..=c1.min(side as i64 - 1) {
            seen[r as usize * side + c as usize] = true;
        }
    }
}

fn in_rect(((r0, c0), (r1, c1)): ((i64, i64), (i64, i64)), r: i64, c: i64) -> bool {
    (r0..=r1).contains(&r) && (c0..=c1).contains(&c)
}

/// How a cell looks, ignoring dots already eaten.
fn cell_look(c: Cell) -> Cell {
    match c {
        Cell::EatenDot => Cell::Corridor,
        other => other,
    }
}

impl Reshuffle {
    /// Redraws re-entering content when `fire`; always advances the
    /// visibility bookkeeping. Returns whether anything was substituted.
    fn advance(&mut self, state: &EngineState, fire: bool, rng: &mut ChaCha8Rng) -> bool {
        let mut changed = false;
        match self {
            Reshuffle::Traveler { overrides, prev, seen } => {
                let cfg = &state.config().traveler;
                let world = match state.world() {
                    World::Traveler(w) => w,
                    _ => unreachable!(),
                };
                let now = visible_slots(state);
                for k in now.0..=now.1 {
                    let entering = k < prev.0 || k > prev.1;
                    let revisit = k >= seen.0 && k <= seen.1;
                    if !(fire && entering && revisit) {
                        continue;
                    }
                    let shown = overrides.get(&k).copied().unwrap_or_else(|| world.slot(state.seed(), cfg, k));
                    if let Slot::Building { color, .. } = shown {
                        let shift = rng.random_range(1..PALETTE.len() as u8);
                        let new = Slot::Building {
                            color: (color + shift) % PALETTE.len() as u8,
                            height: rng.random_range(cfg.min_height..=cfg.max_height) as u8,
                        };
                        overrides.insert(k, new);
                        changed = true;
                    }
                }
                *prev = now;
                *seen = (seen.0.min(now.0), seen.1.max(now.1));
            }
            Reshuffle::PacMan { overrides, prev, seen } => {
                let world = match state.world() {
                    World::PacMan(w) => w,
                    _ => unreachable!(),
                };
                let side = world.side();
                let now = visible_cells(state);
                let ((r0, c0), (r1, c1)) = now;
                for r in r0.max(0)..=r1.min(side as i64 - 1) {
                    for c in c0.max(0)..=c1.min(side as i64 - 1) {
                        let entering = !in_rect(*prev, r, c);
                        let revisit = seen[r as usize * side + c as usize];
                        if !(fire && entering && revisit) {
                            continue;
                        }
                        let shown = cell_look(
                            overrides.get(&(r, c)).copied().unwrap_or_else(|| world.cell(r, c)),
                        );
                        let options: Vec<Cell> = [Cell::Wall, Cell::Dot, Cell::Corridor]
                            .into_iter()
                            .filter(|&x| x != shown)
                            .collect();
                        overrides.insert((r, c), options[rng.random_range(0..options.len())]);
                        changed = true;
                    }
                }
                mark_cells(seen, side, now);
                *prev = now;
            }
        }
        changed
    }
}

impl GeneratorHandle {
    pub fn new(spec: GeneratorSpec) -> Result<Self> {
        let state = EngineState::new(spec.game, spec.seed, EngineConfig::for_game(spec.game))?;
        Self::with_state(spec, state)
    }

    /// Wraps an already initialized engine (custom config or preset world).
    pub fn with_state(spec: GeneratorSpec, state: EngineState) -> Result<Self> {
        if state.game() != spec.game || state.seed() != spec.seed {
            return Err(Error::InvalidConfig("engine state does not match the spec".into()));
        }
        spec.kind.validate(spec.game)?;
        let layers = spec
            .kind
            .flatten()
            .iter()
            .enumerate()
            .map(|(i, k)| Layer::new(k, i, &state))
            .collect();
        let frame = state.render();
        let rendered_score = state.score().value();
        Ok(Self { spec, state, layers, frame, rendered_score })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    /// Most recently produced frame.
    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn is_exhausted(&self) -> bool {
        self.state.is_exhausted()
    }

    fn true_pos(&self) -> Option<(i64, i64)> {
        let p = self.state.player_pos()?;
        let o = self.state.origin_pos()?;
        Some((p.0 - o.0, p.1 - o.1))
    }

    /// Trace entry describing the initial frame.
    pub fn initial_entry(&self) -> TraceEntry {
        TraceEntry {
            step: 0,
            action: None,
            rendered_score: self.rendered_score,
            true_score: self.state.score().value(),
            true_event: false,
            injected_numeric_corruption: false,
            injected_spatial_corruption: false,
            true_player_pos: self.true_pos(),
            tail: false,
            saturated: false,
        }
    }

    pub fn step(&mut self, action: Action) -> Result<(Frame, TraceEntry)> {
        let was_terminal = self.state.is_terminal();
        let out = self.state.step(action)?;
        let true_score = self.state.score().value();
        let mut rendered = true_score;
        let mut numeric = false;
        let mut spatial = false;
        for layer in self.layers.iter_mut().rev() {
            match layer {
                Layer::Jitter { p, rng } => {
                    if rng.random_bool(*p) {
                        rendered = jitter(true_score, rng);
                        numeric = true;
                    }
                }
                Layer::Reshuffle { q, rng, state } => {
                    let fire = rng.random_bool(*q);
                    spatial |= state.advance(&self.state, fire, rng);
                }
            }
        }
        let frame = if self.layers.is_empty() {
            out.frame
        } else {
            self.render_layers(rendered)
        };
        self.frame = frame.clone();
        self.rendered_score = rendered;
        let entry = TraceEntry {
            step: self.state.step_index(),
            action: Some(action),
            rendered_score: rendered,
            true_score,
            true_event: out.event,
            injected_numeric_corruption: numeric,
            injected_spatial_corruption: spatial,
            true_player_pos: self.true_pos(),
            tail: was_terminal,
            saturated: out.saturated,
        };
        Ok((frame, entry))
    }

    fn render_layers(&self, score: u16) -> Frame {
        let config = self.state.config();
        let mut frame = Frame::new(config.width, config.height);
        match self.state.world() {
            World::Traveler(w) => {
                let mut merged = BTreeMap::new();
                for layer in self.layers.iter().rev() {
                    if let Layer::Reshuffle { state: Reshuffle::Traveler { overrides, .. }, .. } = layer {
                        merged.extend(overrides.iter().map(|(k, v)| (*k, *v)));
                    }
                }
                w.render_into(self.state.seed(), config, &mut frame, Some(&merged));
            }
            World::PacMan(w) => {
                let mut merged = BTreeMap::new();
                for layer in self.layers.iter().rev() {
                    if let Layer::Reshuffle { state: Reshuffle::PacMan { overrides, .. }, .. } = layer {
                        merged.extend(overrides.iter().map(|(k, v)| (*k, *v)));
                    }
                }
                w.render_into(config, &mut frame, Some(&merged));
            }
            World::Pong(_) => {
                frame = self.state.render();
            }
        }
        draw_score_strip(&mut frame, score);
        frame
    }

    /// Changes corruption levels mid-run. Existing wrappers of the given
    /// type get the new probability; a missing wrapper is added.
    pub fn set_corruption(&mut self, p: Option<f64>, q: Option<f64>) -> Result<()> {
        let mut kinds: Vec<GeneratorKind> = self.layers.iter().map(Layer::kind).collect();
        if let Some(p) = p {
            kinds.push(GeneratorKind::NumericJitter { p });
        }
        if let Some(q) = q {
            kinds.push(GeneratorKind::SpatialReshuffle { q });
        }
        GeneratorKind::from_layers(kinds).validate(self.spec.game)?;
        for (value, is_jitter) in [(p, true), (q, false)] {
            let Some(value) = value else { continue };
            let mut found = false;
            for layer in &mut self.layers {
                match (layer, is_jitter) {
                    (Layer::Jitter { p, .. }, true) => {
                        *p = value;
                        found = true;
                    }
                    (Layer::Reshuffle { q, .. }, false) => {
                        *q = value;
                        found = true;
                    }
                    _ => {}
                }
            }
            if !found {
                let kind = if is_jitter {
                    GeneratorKind::NumericJitter { p: value }
                } else {
                    GeneratorKind::SpatialReshuffle { q: value }
                };
                let layer = Layer::new(&kind, self.layers.len(), &self.state);
                self.layers.push(layer);
            }
        }
        self.spec.kind = GeneratorKind::from_layers(self.layers.iter().map(Layer::kind).collect());
        Ok(())
    }
}

/// `value + u` with `u` uniform in `[-5, 5] \ {0}`; reflected to `value - u`
/// when that leaves the displayable range, so the result always differs.
fn jitter(value: u16, rng: &mut ChaCha8Rng) -> u16 {
    let mag = (rng.next_u32() % JITTER_MAX as u32) as i32 + 1;
    let u = if rng.random_bool(0.5) { mag } else { -mag };
    let v = value as i32;
    let shifted = if (0..=SCORE_MAX as i32).contains(&(v + u)) { v + u } else { v - u };
    shifted as u16
}
