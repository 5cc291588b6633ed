//! Consistency metrics over generated episodes.

pub mod actacc;
pub mod readback;
pub mod tracker;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{Action, GameId};
use crate::error::Result;
use crate::generators::{GeneratorHandle, GeneratorSpec};
use crate::policy::ActionPolicy;
use crate::seed::{derive_seed, stream};

pub use actacc::{infer_action, judge_action, Verdict};
pub use readback::readback_score;
pub use tracker::{f_measure, EpisodeMetrics, MetricTracker, StepTelemetry};

/// Aggregate metrics for one generator configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub game: GameId,
    pub generator: GeneratorSpec,
    pub n_episodes: usize,
    pub episode_len: usize,
    pub seed: u64,
    /// Mean per-step PSNR over every linked step of every episode; `None`
    /// for games without a map.
    pub spacon: Option<f64>,
    pub spacon_steps: u64,
    pub numcon: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub actacc: Option<f64>,
    pub actacc_steps: u64,
    pub actacc_excluded: u64,
    pub unreadable_steps: u64,
    pub links: u64,
    pub ambiguous_links: u64,
    pub not_computed: Vec<String>,
    pub episodes: Vec<EpisodeMetrics>,
}

impl MetricReport {
    pub fn from_episodes(
        generator: GeneratorSpec,
        episode_len: usize,
        seed: u64,
        episodes: Vec<EpisodeMetrics>,
    ) -> Self {
        let sum = |f: fn(&EpisodeMetrics) -> u64| episodes.iter().map(f).sum::<u64>();
        let (tp, fp, fn_) = (sum(|e| e.tp), sum(|e| e.fp), sum(|e| e.fn_));
        let (numcon, precision, recall) = f_measure(tp, fp, fn_);
        let spacon_steps = sum(|e| e.spacon_steps);
        let spacon_sum: f64 = episodes.iter().map(|e| e.spacon_sum).sum();
        let correct = sum(|e| e.actacc_correct);
        let actacc_steps = correct + sum(|e| e.actacc_wrong);
        Self {
            game: generator.game,
            n_episodes: episodes.len(),
            episode_len,
            seed,
            spacon: (generator.game.has_map() && spacon_steps > 0)
                .then(|| spacon_sum / spacon_steps as f64),
            spacon_steps,
            numcon,
            precision,
            recall,
            tp,
            fp,
            fn_,
            actacc: (actacc_steps > 0).then(|| correct as f64 / actacc_steps as f64),
            actacc_steps,
            actacc_excluded: sum(|e| e.actacc_excluded),
            unreadable_steps: sum(|e| e.unreadable),
            links: sum(|e| e.links),
            ambiguous_links: sum(|e| e.ambiguous_links),
            not_computed: vec!["fid".into(), "fvd".into()],
            generator,
            episodes,
        }
    }

    /// Plain-text summary for terminals.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>, digits: usize| match v {
            Some(v) => format!("{v:.digits$}"),
            None => "n/a".to_string(),
        };
        let rows = [
            ("game", self.game.to_string()),
            ("generator", serde_json::to_string(&self.generator.kind).unwrap_or_default()),
            ("episodes", self.n_episodes.to_string()),
            ("episode_len", self.episode_len.to_string()),
            ("seed", self.seed.to_string()),
            ("spacon_db", opt(self.spacon, 3)),
            ("numcon", format!("{:.4}", self.numcon)),
            ("precision", format!("{:.4}", self.precision)),
            ("recall", format!("{:.4}", self.recall)),
            ("actacc", opt(self.actacc, 4)),
            ("unreadable_steps", self.unreadable_steps.to_string()),
            ("ambiguous_links", format!("{}/{}", self.ambiguous_links, self.links)),
            ("fid", "n/a".into()),
            ("fvd", "n/a".into()),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}

/// Runs one episode of `len` frames (or fewer if the game ends) and scores it.
fn run_episode(spec: &GeneratorSpec, len: usize) -> Result<EpisodeMetrics> {
    let mut handle = GeneratorHandle::new(spec.clone())?;
    let mut policy = ActionPolicy::new(spec.game, derive_seed(spec.seed, stream::POLICY));
    let mut tracker = MetricTracker::for_game(spec.game).with_seed(spec.seed);
    tracker.observe(&handle.frame().clone(), &handle.initial_entry())?;
    for _ in 1..len {
        if handle.is_exhausted() {
            break;
        }
        let action = policy.next(handle.state());
        let (frame, entry) = handle.step(action)?;
        tracker.observe(&frame, &entry)?;
    }
    Ok(tracker.into_counts())
}

/// Scores `n_episodes` episodes of `spec`, episode i seeded with
/// `derive_seed(seed, i)`. The report does not depend on thread count.
pub fn evaluate(
    spec: &GeneratorSpec,
    n_episodes: usize,
    episode_len: usize,
    seed: u64,
) -> Result<MetricReport> {
    spec.kind.validate(spec.game)?;
    let episodes = (0..n_episodes)
        .into_par_iter()
        .map(|i| run_episode(&spec.with_seed(derive_seed(seed, i as u64)), episode_len))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_episodes(spec.clone(), episode_len, seed, episodes))
}

/// Scores a single episode driven by a fixed action script.
pub fn evaluate_script(spec: &GeneratorSpec, actions: &[Action]) -> Result<MetricReport> {
    let mut handle = GeneratorHandle::new(spec.clone())?;
    let mut tracker = MetricTracker::for_game(spec.game).with_seed(spec.seed);
    tracker.observe(&handle.frame().clone(), &handle.initial_entry())?;
    for &a in actions {
        if handle.is_exhausted() {
            break;
        }
        let (frame, entry) = handle.step(a)?;
        tracker.observe(&frame, &entry)?;
    }
    let counts = tracker.into_counts();
    let len = counts.frames as usize;
    Ok(MetricReport::from_episodes(spec.clone(), len, spec.seed, vec![counts]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GeneratorKind;

    #[test]
    fn reference_traveler_is_fully_consistent() {
        let spec = GeneratorSpec::reference(GameId::Traveler, 0);
        let r = evaluate(&spec, 4, 48, 9).unwrap();
        assert_eq!(r.numcon, 1.0);
        assert_eq!(r.spacon, Some(99.0));
        assert_eq!(r.unreadable_steps, 0);
        assert!(r.episodes.iter().all(|e| e.position_mismatches == 0));
    }

    #[test]
    fn pong_has_no_spacon() {
        let r = evaluate(&GeneratorSpec::reference(GameId::Pong, 0), 2, 48, 1).unwrap();
        assert_eq!(r.spacon, None);
        assert_eq!(r.numcon, 1.0);
        assert!(r.table().contains("spacon_db") && r.table().contains("n/a"));
    }

    #[test]
    fn jitter_lowers_numcon() {
        let spec = GeneratorSpec {
            game: GameId::Traveler,
            seed: 0,
            kind: GeneratorKind::NumericJitter { p: 0.5 },
        };
        let r = evaluate(&spec, 4, 48, 9).unwrap();
        assert!(r.numcon < 1.0);
        assert_eq!(r.spacon, Some(99.0));
    }
}
