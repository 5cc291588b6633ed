//! Pac-Man on a seeded maze larger than the viewport. The camera follows
//! Pac-Man, so the maze scrolls in both axes. Eating a dot scores; touching
//! a monster ends the game.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Action, EngineConfig};
use crate::error::{Error, Result};
use crate::frame::{Frame, Rgb, BLACK, WHITE};
use crate::glyphs::SCORE_STRIP_H;
use crate::seed::stream_rng;
use crate::spatial::{BandGeometry, Topology, WorldMap};

pub const WALL: Rgb = [33, 33, 222];
pub const FLOOR: Rgb = BLACK;
pub const DOT: Rgb = WHITE;
pub const PACMAN: Rgb = [255, 230, 0];
pub const MONSTERS: [Rgb; 4] = [[255, 0, 0], [255, 184, 222], [255, 184, 82], [0, 255, 255]];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PacManConfig {
    /// Maze side in cells; must be odd.
    pub maze_cells: usize,
    pub cell_size: usize,
    pub monsters: usize,
    /// Probability of opening a wall at each dead end, creating loops.
    pub braid_prob: f64,
    /// Minimum Manhattan distance (cells) between Pac-Man and a monster at start.
    pub monster_clearance: usize,
}

impl Default for PacManConfig {
    fn default() -> Self {
        Self { maze_cells: 21, cell_size: 8, monsters: 3, braid_prob: 0.5, monster_clearance: 10 }
    }
}

impl PacManConfig {
    pub(crate) fn validate(&self, _engine: &EngineConfig) -> Result<()> {
        if self.maze_cells < 7 || self.maze_cells % 2 == 0 {
            return Err(Error::InvalidConfig("maze side must be odd and at least 7".into()));
        }
        if self.cell_size < 4 {
            return Err(Error::InvalidConfig("cells must be at least 4 px".into()));
        }
        if !(0.0..=1.0).contains(&self.braid_prob) {
            return Err(Error::InvalidProbability { name: "braid_prob", value: self.braid_prob });
        }
        if self.monsters > MONSTERS.len() {
            return Err(Error::InvalidConfig(format!("at most {} monsters", MONSTERS.len())));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Wall,
    Dot,
    EatenDot,
    Corridor,
}

impl Cell {
    pub fn is_open(self) -> bool {
        self != Cell::Wall
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Monster {
    pub row: i64,
    pub col: i64,
    pub heading: (i64, i64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PacManWorld {
    side: usize,
    cell_size: usize,
    cells: Vec<Cell>,
    pac: (i64, i64),
    start: (i64, i64),
    monsters: Vec<Monster>,
    rng: ChaCha8Rng,
    /// Pixel-position bounding box ever held by Pac-Man: (min, max).
    explored: ((i64, i64), (i64, i64)),
}

const DIRS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

pub fn direction(action: Action) -> (i64, i64) {
    match action {
        Action::Up => (-1, 0),
        Action::Down => (1, 0),
        Action::Left => (0, -1),
        Action::Right => (0, 1),
        _ => (0, 0),
    }
}

impl PacManWorld {
    pub(crate) fn new(seed: u64, config: &EngineConfig) -> Self {
        let cfg = &config.pacman;
        let n = cfg.maze_cells;
        let mut rng = stream_rng(seed, 0);
        let mut cells = carve_maze(n, &mut rng);
        braid(&mut cells, n, cfg.braid_prob, &mut rng);

        let open: Vec<(i64, i64)> = (0..n as i64)
            .flat_map(|r| (0..n as i64).map(move |c| (r, c)))
            .filter(|&(r, c)| cells[r as usize * n + c as usize].is_open())
            .collect();
        let pac = *open.choose(&mut rng).expect("maze has open cells");
        cells[pac.0 as usize * n + pac.1 as usize] = Cell::Corridor;

        let far: Vec<(i64, i64)> = open
            .iter()
            .copied()
            .filter(|&(r, c)| {
                ((r - pac.0).abs() + (c - pac.1).abs()) as usize >= cfg.monster_clearance
            })
            .collect();
        let pool = if far.len() >= cfg.monsters { &far } else { &open };
        let mut monsters = Vec::with_capacity(cfg.monsters);
        for &(row, col) in pool.choose_multiple(&mut rng, cfg.monsters) {
            monsters.push(Monster { row, col, heading: *DIRS.choose(&mut rng).unwrap() });
        }
        let start = cell_center(pac, cfg.cell_size);
        Self {
            side: n,
            cell_size: cfg.cell_size,
            cells,
            pac,
            start,
            monsters,
            rng,
            explored: (start, start),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cell(&self, row: i64, col: i64) -> Cell {
        if row < 0 || col < 0 || row >= self.side as i64 || col >= self.side as i64 {
            Cell::Wall
        } else {
            self.cells[row as usize * self.side + col as usize]
        }
    }

    pub fn pac_cell(&self) -> (i64, i64) {
        self.pac
    }

    pub fn monsters(&self) -> &[Monster] {
        &self.monsters
    }

    pub fn player_pixel(&self) -> (i64, i64) {
        cell_center(self.pac, self.cell_size)
    }

    pub fn start_pixel(&self) -> (i64, i64) {
        self.start
    }

    /// Cell Pac-Man would occupy after `action` (unchanged when blocked).
    pub fn target_cell(&self, action: Action) -> (i64, i64) {
        let (dr, dc) = direction(action);
        let t = (self.pac.0 + dr, self.pac.1 + dc);
        if self.cell(t.0, t.1).is_open() {
            t
        } else {
            self.pac
        }
    }

    /// Returns (dot eaten, monster contact).
    pub(crate) fn step(&mut self, action: Action) -> (bool, bool) {
        let old = self.pac;
        self.pac = self.target_cell(action);
        let idx = self.pac.0 as usize * self.side + self.pac.1 as usize;
        let ate = self.cells[idx] == Cell::Dot;
        if ate {
            self.cells[idx] = Cell::EatenDot;
        }
        let p = self.player_pixel();
        self.explored.0 = (self.explored.0 .0.min(p.0), self.explored.0 .1.min(p.1));
        self.explored.1 = (self.explored.1 .0.max(p.0), self.explored.1 .1.max(p.1));

        let mut contact = false;
        for i in 0..self.monsters.len() {
            let m = self.monsters[i];
            let back = (-m.heading.0, -m.heading.1);
            let mut options: Vec<(i64, i64)> = DIRS
                .iter()
                .copied()
                .filter(|&d| d != back && self.cell(m.row + d.0, m.col + d.1).is_open())
                .collect();
            if options.is_empty() {
                options.push(back);
            }
            let d = *options.choose(&mut self.rng).unwrap();
            let next = Monster { row: m.row + d.0, col: m.col + d.1, heading: d };
            let swapped = (next.row, next.col) == old && (m.row, m.col) == self.pac;
            if (next.row, next.col) == self.pac || swapped {
                contact = true;
            }
            self.monsters[i] = next;
        }
        (ate, contact)
    }

    fn draw_cells(&self, frame: &mut Frame, world_x0: i64, world_y0: i64, y_offset: usize) {
        let cs = self.cell_size as i64;
        for y in y_offset..frame.height() {
            let wy = world_y0 + (y - y_offset) as i64;
            for x in 0..frame.width() {
                let wx = world_x0 + x as i64;
                let color = if wx < 0 || wy < 0 {
                    FLOOR
                } else {
                    let (r, c) = (wy.div_euclid(cs), wx.div_euclid(cs));
                    if r >= self.side as i64 || c >= self.side as i64 {
                        FLOOR
                    } else {
                        match self.cell(r, c) {
                            Cell::Wall => WALL,
                            Cell::Dot => {
                                let (lx, ly) = (wx.rem_euclid(cs), wy.rem_euclid(cs));
                                let lo = cs / 2 - 1;
                                if (lo..lo + 2).contains(&lx) && (lo..lo + 2).contains(&ly) {
                                    DOT
                                } else {
                                    FLOOR
                                }
                            }
                            Cell::EatenDot | Cell::Corridor => FLOOR,
                        }
                    }
                };
                frame.set(x, y, color);
            }
        }
    }

    pub(crate) fn render_into(
        &self,
        config: &EngineConfig,
        frame: &mut Frame,
        overrides: Option<&std::collections::BTreeMap<(i64, i64), Cell>>,
    ) {
        let geometry = BandGeometry::pacman(config);
        let (px, py) = self.player_pixel();
        let (ax, ay) = geometry.anchor;
        let (wx0, wy0) = (px - ax, py - ay);
        match overrides {
            Some(o) if !o.is_empty() => {
                let mut shadow = self.clone();
                for (&(r, c), &cell) in o {
                    if r >= 0 && c >= 0 && r < self.side as i64 && c < self.side as i64 {
                        shadow.cells[r as usize * self.side + c as usize] = cell;
                    }
                }
                shadow.draw_cells(frame, wx0, wy0, SCORE_STRIP_H);
            }
            _ => self.draw_cells(frame, wx0, wy0, SCORE_STRIP_H),
        }
        let cs = self.cell_size as i64;
        let to_frame = |(r, c): (i64, i64)| (c * cs - wx0, r * cs - wy0 + SCORE_STRIP_H as i64);
        for (i, m) in self.monsters.iter().enumerate() {
            let (fx, fy) = to_frame((m.row, m.col));
            draw_sprite(frame, fx, fy, cs, MONSTERS[i % MONSTERS.len()], false);
        }
        let (fx, fy) = to_frame(self.pac);
        draw_sprite(frame, fx, fy, cs, PACMAN, true);
    }

    pub(crate) fn ground_truth_map(
        &self,
        _config: &EngineConfig,
        geometry: &BandGeometry,
    ) -> WorldMap {
        let (ax, ay) = geometry.anchor;
        let ((minx, miny), (maxx, maxy)) = self.explored;
        let (x0, y0) = (minx - ax, miny - ay);
        let w = (maxx - minx) as usize + geometry.width;
        let h = (maxy - miny) as usize + geometry.height;
        let mut band = Frame::new(w, h);
        self.draw_cells(&mut band, x0, y0, 0);
        let origin = (x0 - self.start.0, y0 - self.start.1);
        WorldMap::fully_observed(Topology::Grid2D, band, origin, None)
    }

    /// Cells with at least one pixel inside the viewport.
    pub fn visible_cells(&self, geometry: &BandGeometry) -> ((i64, i64), (i64, i64)) {
        let cs = self.cell_size as i64;
        let (px, py) = self.player_pixel();
        let (ax, ay) = geometry.anchor;
        let (x0, y0) = (px - ax, py - ay);
        let x1 = x0 + geometry.width as i64 - 1;
        let y1 = y0 + geometry.height as i64 - 1;
        ((y0.div_euclid(cs), x0.div_euclid(cs)), (y1.div_euclid(cs), x1.div_euclid(cs)))
    }
}

fn cell_center((r, c): (i64, i64), cs: usize) -> (i64, i64) {
    let cs = cs as i64;
    (c * cs + cs / 2, r * cs + cs / 2)
}

/// Rounded-square sprite (monsters) or disk (Pac-Man) filling one cell.
fn draw_sprite(frame: &mut Frame, x0: i64, y0: i64, cs: i64, color: Rgb, disk: bool) {
    let half = cs as f64 / 2.0;
    for y in 0..cs {
        for x in 0..cs {
            let inside = if disk {
                let dx = x as f64 + 0.5 - half;
                let dy = y as f64 + 0.5 - half;
                dx * dx + dy * dy <= half * half
            } else {
                let corner = (x == 0 || x == cs - 1) && (y == 0 || y == cs - 1);
                !corner
            };
            let (fx, fy) = (x0 + x, y0 + y);
            if inside
                && fx >= 0
                && fy >= SCORE_STRIP_H as i64
                && (fx as usize) < frame.width()
                && (fy as usize) < frame.height()
            {
                frame.set(fx as usize, fy as usize, color);
            }
        }
    }
}

/// Randomized depth-first maze on an odd grid: rooms at odd coordinates,
/// one-cell walls between them, solid border.
fn carve_maze(n: usize, rng: &mut ChaCha8Rng) -> Vec<Cell> {
    let mut cells = vec![Cell::Wall; n * n];
    let mut stack = vec![(1usize, 1usize)];
    cells[n + 1] = Cell::Dot;
    while let Some(&(r, c)) = stack.last() {
        let mut next = Vec::with_capacity(4);
        for (dr, dc) in DIRS {
            let (nr, nc) = (r as i64 + 2 * dr, c as i64 + 2 * dc);
            if nr > 0 && nc > 0 && nr < n as i64 - 1 && nc < n as i64 - 1 {
                let (nr, nc) = (nr as usize, nc as usize);
                if cells[nr * n + nc] == Cell::Wall {
                    next.push((nr, nc));
                }
            }
        }
        match next.choose(rng) {
            Some(&(nr, nc)) => {
                cells[((r + nr) / 2) * n + (c + nc) / 2] = Cell::Dot;
                cells[nr * n + nc] = Cell::Dot;
                stack.push((nr, nc));
            }
            None => {
                stack.pop();
            }
        }
    }
    cells
}

/// Opens a random interior wall at dead ends with probability `p`.
fn braid(cells: &mut [Cell], n: usize, p: f64, rng: &mut ChaCha8Rng) {
    for r in (1..n - 1).step_by(2) {
        for c in (1..n - 1).step_by(2) {
            let open = DIRS
                .iter()
                .filter(|(dr, dc)| {
                    cells[(r as i64 + dr) as usize * n + (c as i64 + dc) as usize].is_open()
                })
                .count();
            if open != 1 || !rng.random_bool(p) {
                continue;
            }
            let walls: Vec<(usize, usize)> = DIRS
                .iter()
                .map(|(dr, dc)| ((r as i64 + dr) as usize, (c as i64 + dc) as usize))
                .filter(|&(wr, wc)| {
                    wr > 0 && wc > 0 && wr < n - 1 && wc < n - 1 && cells[wr * n + wc] == Cell::Wall
                })
                .collect();
            if let Some(&(wr, wc)) = walls.choose(rng) {
                cells[wr * n + wc] = Cell::Dot;
            }
        }
    }
}
