//! Episode collection, the on-disk episode container, splits and offline
//! map stitching.
//!
//! Layout of a collection directory:
//!
//! ```text
//! collection.json
//! episode_00000/manifest.json
//! episode_00000/frames/frame_0000.png ...
//! episode_00000/gt_map.png, gt_map_mask.png, gt_map.json   (map games)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{Action, GameId};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::generators::{GeneratorHandle, GeneratorKind, GeneratorSpec};
use crate::numeric::{featurize, Sample};
use crate::policy::ActionPolicy;
use crate::seed::{derive_seed, stream};
use crate::spatial::{link_observation, psnr, BandGeometry, MatchConfig, MatchResult, WorldMap};

pub const FPS: u32 = 30;
/// Frame cap for games whose episodes end on their own.
pub const VARIABLE_LENGTH_CAP: usize = 512;
pub const COLLECTION_FILE: &str = "collection.json";
pub const GT_MAP_STEM: &str = "gt_map";

/// Per-episode record. Frame n was produced by `actions[n - 1]`; the last
/// action is never applied and is stored as the game's no-op.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeManifest {
    pub game: GameId,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub fps: u32,
    pub length: usize,
    pub max_len: usize,
    pub generator: GeneratorSpec,
    pub actions: Vec<Action>,
    pub events: Vec<bool>,
    /// True ledger values.
    pub scores: Vec<u16>,
    /// Values drawn in the score strip (differ from `scores` only under
    /// numeric corruption).
    pub rendered_scores: Vec<u16>,
    /// Player position relative to its start; absent for Pong.
    pub player_x: Option<Vec<i64>>,
    pub player_y: Option<Vec<i64>>,
}

impl EpisodeManifest {
    /// Checks the length and score/event invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.length;
        let lens = [self.actions.len(), self.events.len(), self.scores.len(), self.rendered_scores.len()];
        let pos_ok = [&self.player_x, &self.player_y].iter().all(|p| p.as_ref().is_none_or(|v| v.len() == n));
        if lens.iter().any(|&l| l != n) || !pos_ok || n == 0 {
            return Err(Error::Malformed("manifest lists disagree with its length".into()));
        }
        if self.events[0] {
            return Err(Error::Malformed("the initial frame carries no event".into()));
        }
        for i in 1..n {
            let d = self.scores[i] as i32 - self.scores[i - 1] as i32;
            let saturated = self.scores[i] == crate::numeric::SCORE_MAX && d == 0;
            if d != self.events[i] as i32 && !(saturated && self.events[i]) {
                return Err(Error::Malformed(format!("score and event disagree at frame {i}")));
            }
        }
        Ok(())
    }

    pub fn position(&self, n: usize) -> Option<(i64, i64)> {
        Some((self.player_x.as_ref()?[n], self.player_y.as_ref()?[n]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub manifest: EpisodeManifest,
    pub frames: Vec<Frame>,
    pub gt_map: Option<WorldMap>,
}

impl Episode {
    /// Plays `handle` with a seeded policy for up to `max_len` frames.
    pub fn record(mut handle: GeneratorHandle, policy_seed: u64, max_len: usize) -> Result<Self> {
        let game = handle.spec().game;
        let mut policy = ActionPolicy::new(game, policy_seed);
        let first = handle.initial_entry();
        let mut frames = vec![handle.frame().clone()];
        let mut actions = Vec::new();
        let mut events = vec![false];
        let mut scores = vec![first.true_score];
        let mut rendered = vec![first.rendered_score];
        let mut pos = vec![first.true_player_pos];
        while frames.len() < max_len && !handle.is_exhausted() {
            let a = policy.next(handle.state());
            let (frame, entry) = handle.step(a)?;
            actions.push(a);
            frames.push(frame);
            events.push(entry.true_event);
            scores.push(entry.true_score);
            rendered.push(entry.rendered_score);
            pos.push(entry.true_player_pos);
        }
        actions.push(Action::noop(game));
        let (player_x, player_y) = if game.has_map() {
            let p: Vec<(i64, i64)> = pos.into_iter().map(|p| p.unwrap_or_default()).collect();
            (Some(p.iter().map(|p| p.0).collect()), Some(p.iter().map(|p| p.1).collect()))
        } else {
            (None, None)
        };
        let gt_map = game.has_map().then(|| handle.state().ground_truth_map()).transpose()?;
        let config = handle.state().config();
        let manifest = EpisodeManifest {
            game,
            seed: handle.spec().seed,
            width: config.width,
            height: config.height,
            fps: FPS,
            length: frames.len(),
            max_len,
            generator: handle.spec().clone(),
            actions,
            events,
            scores,
            rendered_scores: rendered,
            player_x,
            player_y,
        };
        Ok(Self { manifest, frames, gt_map })
    }

    /// Regenerates the frames from the manifest alone.
    pub fn replay(manifest: &EpisodeManifest) -> Result<Vec<Frame>> {
        let mut handle = GeneratorHandle::new(manifest.generator.clone())?;
        let mut frames = vec![handle.frame().clone()];
        for &a in &manifest.actions[..manifest.length.saturating_sub(1)] {
            frames.push(handle.step(a)?.0);
        }
        Ok(frames)
    }

    /// Whether the stored frames equal a fresh replay.
    pub fn replays_exactly(&self) -> Result<bool> {
        Ok(Self::replay(&self.manifest)? == self.frames)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let frames_dir = dir.join("frames");
        fs::create_dir_all(&frames_dir)?;
        fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&self.manifest)?)?;
        for (i, f) in self.frames.iter().enumerate() {
            f.save_png(frames_dir.join(format!("frame_{i:04}.png")))?;
        }
        if let Some(m) = &self.gt_map {
            m.save(dir, GT_MAP_STEM)?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: EpisodeManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        manifest.validate()?;
        let frames = (0..manifest.length)
            .map(|i| Frame::load_png(dir.join("frames").join(format!("frame_{i:04}.png"))))
            .collect::<Result<Vec<_>>>()?;
        let gt_map = if dir.join(format!("{GT_MAP_STEM}.json")).exists() {
            Some(WorldMap::load(dir, GT_MAP_STEM)?)
        } else {
            None
        };
        Ok(Self { manifest, frames, gt_map })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectConfig {
    pub game: GameId,
    pub n_episodes: usize,
    /// Frames per episode; an upper bound for games that end on their own.
    pub episode_len: usize,
    pub seed: u64,
    pub parallelism: usize,
    pub generator: GeneratorKind,
}

impl CollectConfig {
    pub fn new(game: GameId, n_episodes: usize, episode_len: usize, seed: u64) -> Self {
        Self { game, n_episodes, episode_len, seed, parallelism: 1, generator: GeneratorKind::Reference }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_episodes == 0 || self.episode_len == 0 || self.parallelism == 0 {
            return Err(Error::InvalidConfig(
                "episodes, episode length and parallelism must be positive".into(),
            ));
        }
        if self.game != GameId::Traveler && self.episode_len > VARIABLE_LENGTH_CAP {
            return Err(Error::InvalidConfig(format!(
                "{} episodes are capped at {VARIABLE_LENGTH_CAP} frames",
                self.game
            )));
        }
        self.generator.validate(self.game)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEntry {
    pub id: usize,
    pub dir: String,
    pub seed: u64,
    pub length: usize,
    pub events: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectionSummary {
    pub config: CollectConfig,
    pub total_frames: usize,
    pub total_events: usize,
    pub episodes: Vec<EpisodeEntry>,
}

impl CollectionSummary {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(dir.as_ref().join(COLLECTION_FILE))?)?)
    }

    pub fn episode_dir(&self, root: impl AsRef<Path>, id: usize) -> PathBuf {
        root.as_ref().join(&self.episodes[id].dir)
    }
}

pub fn episode_dir_name(i: usize) -> String {
    format!("episode_{i:05}")
}

/// Records episode `i` of a collection.
pub fn collect_episode(config: &CollectConfig, i: usize) -> Result<Episode> {
    let seed = derive_seed(config.seed, i as u64);
    let spec = GeneratorSpec { game: config.game, seed, kind: config.generator.clone() };
    Episode::record(GeneratorHandle::new(spec)?, derive_seed(seed, stream::POLICY), config.episode_len)
}

/// Records and writes a whole collection. Output bytes depend only on
/// `config` minus its parallelism.
pub fn collect(config: &CollectConfig, out_dir: impl AsRef<Path>) -> Result<CollectionSummary> {
    config.validate()?;
    let out = out_dir.as_ref();
    fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let episodes = pool.install(|| {
        (0..config.n_episodes)
            .into_par_iter()
            .map(|i| {
                let ep = collect_episode(config, i)?;
                let dir = episode_dir_name(i);
                ep.save(out.join(&dir))?;
                Ok(EpisodeEntry {
                    id: i,
                    dir,
                    seed: ep.manifest.seed,
                    length: ep.manifest.length,
                    events: ep.manifest.events.iter().filter(|&&e| e).count(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = CollectionSummary {
        config: CollectConfig { parallelism: 1, ..config.clone() },
        total_frames: episodes.iter().map(|e| e.length).sum(),
        total_events: episodes.iter().map(|e| e.events).sum(),
        episodes,
    };
    fs::write(out.join(COLLECTION_FILE), serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}

/// Partitions episode ids into (train, eval). Episodes are ordered by a hash
/// of their seed and the first `round(n * eval_fraction)` go to eval.
pub fn split(episodes: &[EpisodeEntry], eval_fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if episodes.is_empty() {
        return Err(Error::InvalidConfig("cannot split an empty collection".into()));
    }
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("eval fraction {eval_fraction} outside (0, 1)")));
    }
    let mut keyed: Vec<(u64, usize)> =
        episodes.iter().map(|e| (derive_seed(e.seed, stream::SPLIT), e.id)).collect();
    keyed.sort_unstable();
    let n_eval = (episodes.len() as f64 * eval_fraction).round() as usize;
    let mut eval: Vec<usize> = keyed[..n_eval].iter().map(|k| k.1).collect();
    let mut train: Vec<usize> = keyed[n_eval..].iter().map(|k| k.1).collect();
    eval.sort_unstable();
    train.sort_unstable();
    Ok((train, eval))
}

/// Labeled (frame n, action n, event n+1) triples for the event predictor.
pub fn event_samples(episode: &Episode) -> Result<Vec<Sample>> {
    let m = &episode.manifest;
    (0..m.length.saturating_sub(1))
        .map(|n| {
            Ok(Sample {
                features: featurize(m.game, &episode.frames[n], m.actions[n])?,
                label: m.events[n + 1],
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct StitchReport {
    pub map: WorldMap,
    /// PSNR of the stitched map against the ground truth over pixels both
    /// observed; `None` without a ground truth or any overlap.
    pub psnr_vs_gt: Option<f64>,
    pub compared_pixels: usize,
    /// Exported minus logged position after each frame.
    pub position_errors: Vec<(i64, i64)>,
    pub matches: Vec<MatchResult>,
}

impl StitchReport {
    pub fn exact_steps(&self) -> usize {
        self.position_errors.iter().filter(|&&e| e == (0, 0)).count()
    }

    /// Links after the anchor that were flagged ambiguous, and their count.
    pub fn ambiguous_links(&self) -> (usize, usize) {
        let links = &self.matches[self.matches.len().min(1)..];
        (links.iter().filter(|m| m.ambiguous).count(), links.len())
    }
}

/// Folds every frame of `episode` into a fresh map.
pub fn stitch_episode(episode: &Episode, config: &MatchConfig) -> Result<StitchReport> {
    let game = episode.manifest.game;
    let engine = crate::engine::EngineConfig::for_game(game);
    let geometry = BandGeometry::for_game(game, &engine)?;
    let mut map = WorldMap::new(geometry.topology);
    let mut position_errors = Vec::with_capacity(episode.frames.len());
    let mut matches = Vec::with_capacity(episode.frames.len());
    for (n, frame) in episode.frames.iter().enumerate() {
        let band = geometry.band_of(frame)?;
        let m = link_observation(&mut map, &band, &geometry, config)?;
        if let Some(truth) = episode.manifest.position(n) {
            position_errors.push((m.position.0 - truth.0, m.position.1 - truth.1));
        }
        matches.push(m);
    }
    let (psnr_vs_gt, compared_pixels) = match &episode.gt_map {
        Some(gt) => compare_maps(&map, gt)?,
        None => (None, 0),
    };
    Ok(StitchReport { map, psnr_vs_gt, compared_pixels, position_errors, matches })
}

/// PSNR between two maps over the world pixels observed in both.
pub fn compare_maps(built: &WorldMap, gt: &WorldMap) -> Result<(Option<f64>, usize)> {
    let (x0, y0) = gt.origin();
    let crop = built.crop(x0, y0, gt.width(), gt.height());
    let mask: Vec<bool> =
        crop.observed_mask().iter().zip(gt.observed_mask()).map(|(&a, &b)| a && b).collect();
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Ok((None, 0));
    }
    let value = psnr(crop.pixels(), gt.pixels(), &mask, 3)?;
    Ok((Some(value), count))
}
