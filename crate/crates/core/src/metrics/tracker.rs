//! Streaming computation of SpaCon, NumCon and ActAcc over one episode.

use serde::{Deserialize, Serialize};

use crate::engine::{EngineConfig, GameId};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::generators::TraceEntry;
use crate::metrics::actacc::{judge_action, Verdict};
use crate::metrics::readback::readback_score;
use crate::spatial::{
    integrate, locate, psnr_from_sse, BandGeometry, MatchConfig, MatchResult, Topology, WorldMap,
};

/// Raw per-episode counts. All aggregate metrics are derived from these.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub frames: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    /// Steps skipped by NumCon because a score strip could not be read.
    pub unreadable: u64,
    pub actacc_correct: u64,
    pub actacc_wrong: u64,
    pub actacc_excluded: u64,
    /// Sum of per-step SpaCon PSNRs and the number of contributing steps.
    pub spacon_sum: f64,
    pub spacon_steps: u64,
    pub links: u64,
    pub ambiguous_links: u64,
    /// Linked steps whose exported position differs from the true one.
    pub position_mismatches: u64,
}

/// What one observed frame contributed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTelemetry {
    pub readback: Option<u16>,
    pub predicted_event: Option<bool>,
    pub spacon: Option<f64>,
    pub verdict: Option<Verdict>,
    pub matched: Option<MatchResult>,
}

/// F-measure with the conventions: 1.0 when neither side has events, 0.0
/// when exactly one side has none.
pub fn f_measure(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 { if fn_ == 0 { 1.0 } else { 0.0 } } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { if fp == 0 { 1.0 } else { 0.0 } } else { tp as f64 / (tp + fn_) as f64 };
    let f = if tp + fp + fn_ == 0 {
        1.0
    } else if tp == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (f, precision, recall)
}

impl EpisodeMetrics {
    pub fn numcon(&self) -> f64 {
        f_measure(self.tp, self.fp, self.fn_).0
    }

    pub fn spacon(&self) -> Option<f64> {
        (self.spacon_steps > 0).then(|| self.spacon_sum / self.spacon_steps as f64)
    }

    pub fn actacc(&self) -> Option<f64> {
        let n = self.actacc_correct + self.actacc_wrong;
        (n > 0).then(|| self.actacc_correct as f64 / n as f64)
    }
}

/// Feeds frames one at a time; keeps the map, the previous frame and the
/// running counts.
#[derive(Clone, Debug)]
pub struct MetricTracker {
    game: GameId,
    engine_config: EngineConfig,
    match_config: MatchConfig,
    geometry: Option<BandGeometry>,
    map: Option<WorldMap>,
    prev_frame: Option<Frame>,
    prev_read: Option<u16>,
    counts: EpisodeMetrics,
}

impl MetricTracker {
    pub fn new(game: GameId, engine_config: EngineConfig, match_config: MatchConfig) -> Self {
        let geometry = BandGeometry::for_game(game, &engine_config).ok();
        let map = geometry.map(|g| WorldMap::new(g.topology));
        Self {
            game,
            engine_config,
            match_config,
            geometry,
            map,
            prev_frame: None,
            prev_read: None,
            counts: EpisodeMetrics::default(),
        }
    }

    pub fn for_game(game: GameId) -> Self {
        Self::new(game, EngineConfig::for_game(game), MatchConfig::for_game(game))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.counts.seed = seed;
        self
    }

    pub fn counts(&self) -> &EpisodeMetrics {
        &self.counts
    }

    pub fn map(&self) -> Option<&WorldMap> {
        self.map.as_ref()
    }

    pub fn into_counts(self) -> EpisodeMetrics {
        self.counts
    }

    /// Links the frame into the map and scores the pixels that came into
    /// view this step against what the map already held for them.
    fn link(&mut self, frame: &Frame, entry: &TraceEntry) -> Result<(MatchResult, Option<f64>)> {
        let g = self.geometry.expect("map games have a geometry");
        let map = self.map.as_mut().expect("map games have a map");
        let band = g.band_of(frame)?;
        let prev_pos = map.player_pos();
        let result = locate(map, &band, &g, &self.match_config)?;
        let mut spacon = None;
        if let Some(prev) = prev_pos {
            let (bx, by) = g.band_origin(result.position);
            let (px, py) = g.band_origin(prev);
            let (w, h) = (g.width as i64, g.height as i64);
            let mut sse = 0u64;
            let mut n = 0u64;
            let pixels = band.pixels();
            for r in 0..g.height {
                for c in 0..g.width {
                    if g.player_footprint.contains(c, r) {
                        continue;
                    }
                    let (wx, wy) = (bx + c as i64, by + r as i64);
                    let before = (px..px + w).contains(&wx)
                        && (g.topology == Topology::Strip1D || (py..py + h).contains(&wy));
                    if before {
                        continue;
                    }
                    if let Some(m) = map.observed_pixel(wx, wy) {
                        let i = (r * g.width + c) * 3;
                        for k in 0..3 {
                            let d = pixels[i + k] as i64 - m[k] as i64;
                            sse += (d * d) as u64;
                        }
                        n += 3;
                    }
                }
            }
            if n > 0 {
                spacon = Some(psnr_from_sse(sse, n));
            }
            self.counts.links += 1;
            self.counts.ambiguous_links += result.ambiguous as u64;
        }
        integrate(map, &band, &result, &g, &self.match_config);
        if entry.true_player_pos.is_some_and(|p| p != result.position) {
            self.counts.position_mismatches += 1;
        }
        Ok((result, spacon))
    }

    /// Accounts for one frame and the trace entry that produced it. The
    /// first call must carry the initial frame.
    pub fn observe(&mut self, frame: &Frame, entry: &TraceEntry) -> Result<StepTelemetry> {
        if entry.action.is_none() != self.prev_frame.is_none() {
            return Err(Error::Malformed("initial frame must come first, exactly once".into()));
        }
        self.counts.frames += 1;
        let read = readback_score(frame).ok();
        let mut tel = StepTelemetry {
            readback: read,
            predicted_event: None,
            spacon: None,
            verdict: None,
            matched: None,
        };
        if self.map.is_some() {
            let (m, s) = self.link(frame, entry)?;
            tel.matched = Some(m);
            tel.spacon = s;
            if let Some(s) = s {
                self.counts.spacon_sum += s;
                self.counts.spacon_steps += 1;
            }
        }
        if let (Some(prev), Some(action)) = (self.prev_frame.as_ref(), entry.action) {
            match (self.prev_read, read) {
                (Some(a), Some(b)) => {
                    let predicted = b as i32 - a as i32 == 1;
                    tel.predicted_event = Some(predicted);
                    match (predicted, entry.true_event) {
                        (true, true) => self.counts.tp += 1,
                        (true, false) => self.counts.fp += 1,
                        (false, true) => self.counts.fn_ += 1,
                        (false, false) => self.counts.tn += 1,
                    }
                }
                _ => self.counts.unreadable += 1,
            }
            let v = judge_action(self.game, &self.engine_config, prev, frame, action, entry.tail);
            match v {
                Verdict::Correct => self.counts.actacc_correct += 1,
                Verdict::Wrong => self.counts.actacc_wrong += 1,
                Verdict::Excluded => self.counts.actacc_excluded += 1,
            }
            tel.verdict = Some(v);
        }
        self.prev_frame = Some(frame.clone());
        self.prev_read = read;
        Ok(tel)
    }
}
