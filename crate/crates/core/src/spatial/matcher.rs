//! Sliding-window linking of a new observation into the map.
//!
//! Every integer offset within `delta2` of the previous player position is
//! scored by PSNR over pixels that are both valid in the observation and
//! already observed in the local map window. Strip maps compare RGB; grid
//! maps compare binary blue-wall masks.

use serde::{Deserialize, Serialize};

use crate::engine::GameId;
use crate::error::{Error, Result};
use crate::frame::{Frame, Rgb};
use crate::spatial::psnr::{psnr_from_sse, PSNR_CAP};
use crate::spatial::{BandGeometry, Topology, WorldMap};

/// Which pixels of the player sprite take part in linking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerMasking {
    /// Sprite pixels are scored and written into the map.
    None,
    /// Sprite pixels are scored but never written.
    WriteOnly,
    /// Sprite pixels are neither scored nor written.
    ScoreAndWrite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Half-width of the local map window.
    pub delta1: usize,
    /// Search radius per axis.
    pub delta2: usize,
    /// Winner-to-runner-up margin (dB) below which a match is ambiguous.
    pub ambiguity_epsilon: f64,
    pub blue_floor: u8,
    pub blue_margin: u8,
    pub player_masking: PlayerMasking,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            delta1: 64,
            delta2: 10,
            ambiguity_epsilon: 0.5,
            blue_floor: 128,
            blue_margin: 48,
            player_masking: PlayerMasking::ScoreAndWrite,
        }
    }
}

impl MatchConfig {
    pub fn for_game(game: GameId) -> Self {
        match game {
            GameId::PacMan => Self { delta1: 74, ..Self::default() },
            _ => Self::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Winning displacement from the previous position; `dy` is 0 on strips.
    pub offset: (i64, i64),
    /// New player position.
    pub position: (i64, i64),
    pub best_psnr: f64,
    /// Best score minus the best score more than 1 px (Chebyshev) away from
    /// the winner; infinite when no such candidate overlaps the map.
    pub runner_up_margin: f64,
    pub ambiguous: bool,
    /// Scored pixels over band pixels of the winner.
    pub overlap_fraction: f64,
}

impl MatchResult {
    fn anchor() -> Self {
        Self {
            offset: (0, 0),
            position: (0, 0),
            best_psnr: PSNR_CAP,
            runner_up_margin: f64::INFINITY,
            ambiguous: false,
            overlap_fraction: 1.0,
        }
    }
}

/// Wall-blue test used by grid maps.
#[inline]
pub fn blue_mask(c: Rgb, floor: u8, margin: u8) -> bool {
    let b = c[2] as i16;
    b >= floor as i16 && b - (c[0].max(c[1]) as i16) >= margin as i16
}

/// Feature raster: `channels` values per pixel plus a validity byte (0/1).
struct Plane {
    w: usize,
    h: usize,
    channels: usize,
    data: Vec<u8>,
    valid: Vec<u8>,
}

fn features(
    rgb: &[u8],
    w: usize,
    h: usize,
    valid: impl Fn(usize, usize) -> bool,
    topology: Topology,
    config: &MatchConfig,
) -> Plane {
    let mut valid_v = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            valid_v.push(valid(x, y) as u8);
        }
    }
    match topology {
        Topology::Strip1D => Plane { w, h, channels: 3, data: rgb.to_vec(), valid: valid_v },
        Topology::Grid2D => {
            let data = rgb
                .chunks_exact(3)
                .map(|p| {
                    if blue_mask([p[0], p[1], p[2]], config.blue_floor, config.blue_margin) {
                        255
                    } else {
                        0
                    }
                })
                .collect();
            Plane { w, h, channels: 1, data, valid: valid_v }
        }
    }
}

/// Binary planes: every mismatch costs 255^2.
#[inline]
fn binary_row(od: &[u8], wd: &[u8], ov: &[u8], wv: &[u8]) -> (u64, u64) {
    let mut miss = 0u32;
    let mut n = 0u32;
    for k in 0..ov.len() {
        let v = ov[k] & wv[k];
        miss += (((od[k] ^ wd[k]) >> 7) & v) as u32;
        n += v as u32;
    }
    (miss as u64 * 65025, n as u64)
}

#[inline]
fn rgb_row(od: &[u8], wd: &[u8], ov: &[u8], wv: &[u8]) -> (u64, u64) {
    let mut sse = 0u32;
    let mut n = 0u32;
    for (((o, w), a), b) in od.chunks_exact(3).zip(wd.chunks_exact(3)).zip(ov).zip(wv) {
        let v = (a & b) as u32;
        let d0 = o[0] as i32 - w[0] as i32;
        let d1 = o[1] as i32 - w[1] as i32;
        let d2 = o[2] as i32 - w[2] as i32;
        sse += (d0 * d0 + d1 * d1 + d2 * d2) as u32 * v;
        n += v;
    }
    (sse as u64, n as u64)
}

/// (sse, pixels) of `obs` placed with its top-left at raster (`ox`, `oy`) of `win`.
fn score(obs: &Plane, win: &Plane, ox: i64, oy: i64) -> (u64, u64) {
    let ch = obs.channels;
    let c0 = (-ox).clamp(0, obs.w as i64) as usize;
    let c1 = (win.w as i64 - ox).clamp(0, obs.w as i64) as usize;
    if c0 >= c1 {
        return (0, 0);
    }
    let mut sse = 0u64;
    let mut n = 0u64;
    for r in 0..obs.h {
        let wy = oy + r as i64;
        if wy < 0 || wy >= win.h as i64 {
            continue;
        }
        let oi = r * obs.w;
        let wi = wy as usize * win.w + (ox + c0 as i64) as usize - c0;
        let ov = &obs.valid[oi + c0..oi + c1];
        let wv = &win.valid[wi + c0..wi + c1];
        let od = &obs.data[(oi + c0) * ch..(oi + c1) * ch];
        let wd = &win.data[(wi + c0) * ch..(wi + c1) * ch];
        let (row_sse, row_n) = match ch {
            1 => binary_row(od, wd, ov, wv),
            _ => rgb_row(od, wd, ov, wv),
        };
        sse += row_sse;
        n += row_n;
    }
    (sse, n)
}

/// Candidate offsets in tie-break order: smaller |dx| + |dy| first, then
/// smaller dx, then smaller dy.
pub fn candidate_offsets(topology: Topology, delta2: usize) -> Vec<(i64, i64)> {
    let d = delta2 as i64;
    let ys = match topology {
        Topology::Strip1D => 0..=0,
        Topology::Grid2D => -d..=d,
    };
    let mut out: Vec<(i64, i64)> =
        ys.flat_map(|dy| (-d..=d).map(move |dx| (dx, dy))).collect();
    out.sort_by_key(|&(dx, dy)| (dx.abs() + dy.abs(), dx, dy));
    out
}

/// Finds where `band` (a frame with the score strip already removed) sits
/// on `map`. Pure.
pub fn locate(
    map: &WorldMap,
    band: &Frame,
    geometry: &BandGeometry,
    config: &MatchConfig,
) -> Result<MatchResult> {
    if band.width() != geometry.width || band.height() != geometry.height {
        return Err(Error::ShapeMismatch(format!(
            "observation band is {}x{}, expected {}x{}",
            band.width(),
            band.height(),
            geometry.width,
            geometry.height
        )));
    }
    let Some(prev) = map.player_pos() else {
        return Ok(MatchResult::anchor());
    };
    let window = map.retrieve_local_map(config.delta1, geometry)?.map;
    let fp = geometry.player_footprint;
    let mask_sprite = config.player_masking == PlayerMasking::ScoreAndWrite;
    let obs = features(
        band.pixels(),
        band.width(),
        band.height(),
        |x, y| !(mask_sprite && fp.contains(x, y)),
        geometry.topology,
        config,
    );
    let observed = window.observed_mask();
    let ww = window.width();
    let win = features(
        window.pixels(),
        ww,
        window.height(),
        |x, y| observed[y * ww + x],
        geometry.topology,
        config,
    );
    let (wox, woy) = window.origin();
    let samples_per_px = obs.channels as u64;

    let candidates = candidate_offsets(geometry.topology, config.delta2);
    let mut scores: Vec<Option<(f64, u64)>> = Vec::with_capacity(candidates.len());
    let mut best: Option<usize> = None;
    for (i, &(dx, dy)) in candidates.iter().enumerate() {
        let (bx, by) = geometry.band_origin((prev.0 + dx, prev.1 + dy));
        let (sse, n) = score(&obs, &win, bx - wox, by - woy);
        let s = (n > 0).then(|| (psnr_from_sse(sse, n * samples_per_px), n));
        if let Some((p, _)) = s {
            if best.is_none_or(|b| p > scores[b].unwrap().0) {
                best = Some(i);
            }
        }
        scores.push(s);
    }

    let band_px = (geometry.width * geometry.height) as f64;
    let Some(b) = best else {
        // Nothing overlaps: keep the previous position and flag it.
        return Ok(MatchResult {
            offset: (0, 0),
            position: prev,
            best_psnr: 0.0,
            runner_up_margin: 0.0,
            ambiguous: true,
            overlap_fraction: 0.0,
        });
    };
    let (best_psnr, n) = scores[b].unwrap();
    let win_off = candidates[b];
    let runner_up = candidates
        .iter()
        .zip(&scores)
        .filter(|(&(dx, dy), _)| (dx - win_off.0).abs().max((dy - win_off.1).abs()) > 1)
        .filter_map(|(_, s)| s.map(|s| s.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = best_psnr - runner_up;
    Ok(MatchResult {
        offset: win_off,
        position: (prev.0 + win_off.0, prev.1 + win_off.1),
        best_psnr,
        runner_up_margin: margin,
        ambiguous: margin < config.ambiguity_epsilon,
        overlap_fraction: n as f64 / band_px,
    })
}

/// Writes `band` at `result.position` and moves the player there.
pub fn integrate(
    map: &mut WorldMap,
    band: &Frame,
    result: &MatchResult,
    geometry: &BandGeometry,
    config: &MatchConfig,
) {
    let skip = match config.player_masking {
        PlayerMasking::None => None,
        _ => Some(geometry.player_footprint),
    };
    map.write(band, geometry.band_origin(result.position), skip);
    map.set_player_pos(result.position);
}

/// Locates `band` on the map and integrates it; newest observation wins.
pub fn link_observation(
    map: &mut WorldMap,
    band: &Frame,
    geometry: &BandGeometry,
    config: &MatchConfig,
) -> Result<MatchResult> {
    if map.topology() != geometry.topology {
        return Err(Error::ShapeMismatch("map and band topologies differ".into()));
    }
    let result = locate(map, band, geometry, config)?;
    integrate(map, band, &result, geometry, config);
    Ok(result)
}
