//! `gamecon`: collect episodes, stitch maps, score generators and serve
//! interactive sessions.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use gamecon_core::dataset::{
    collect, event_samples, split, stitch_episode, CollectConfig, CollectionSummary, Episode,
};
use gamecon_core::metrics::evaluate;
use gamecon_core::numeric::{train_event_predictor, TrainConfig};
use gamecon_core::spatial::PlayerMasking;
use gamecon_core::{Error as CoreError, GameId, GeneratorKind, GeneratorSpec, MatchConfig};

#[derive(Parser, Debug)]
#[command(name = "gamecon", version, about = "Consistency harness for generative games")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with defaults for any flag; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory or file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Record a collection of episodes.
    Collect(CollectArgs),
    /// Split a collection into train and eval ids.
    Split(SplitArgs),
    /// Rebuild the map of recorded episodes and compare it to the ground truth.
    Stitch(StitchArgs),
    /// Score a generator configuration.
    Eval(EvalArgs),
    /// Train the event predictor on a collection.
    Train(TrainArgs),
    /// Run the session service.
    Serve(ServeArgs),
    /// Check that a recorded episode replays exactly.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct GeneratorArgs {
    #[arg(long)]
    game: Option<GameId>,
    /// Numeric jitter probability.
    #[arg(long)]
    jitter: Option<f64>,
    /// Spatial reshuffle probability.
    #[arg(long)]
    reshuffle: Option<f64>,
}

#[derive(Args, Debug)]
struct CollectArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long)]
    episodes: Option<usize>,
    /// Frames per episode (an upper bound for Pong and Pac-Man).
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    collection: PathBuf,
    #[arg(long)]
    eval_fraction: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Masking {
    /// Sprite neither scored nor written.
    ScoreAndWrite,
    /// Sprite scored, never written.
    WriteOnly,
    /// Sprite scored and written.
    None,
}

impl From<Masking> for PlayerMasking {
    fn from(m: Masking) -> Self {
        match m {
            Masking::ScoreAndWrite => PlayerMasking::ScoreAndWrite,
            Masking::WriteOnly => PlayerMasking::WriteOnly,
            Masking::None => PlayerMasking::None,
        }
    }
}

#[derive(Args, Debug)]
struct StitchArgs {
    /// One episode directory.
    #[arg(long, conflicts_with = "collection")]
    episode: Option<PathBuf>,
    /// Every episode of a collection.
    #[arg(long)]
    collection: Option<PathBuf>,
    #[arg(long, value_enum)]
    masking: Option<Masking>,
    /// Print JSON instead of a summary line.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    len: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    collection: PathBuf,
    #[arg(long)]
    eval_fraction: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long)]
    addr: Option<String>,
    /// Seconds before an idle session is dropped.
    #[arg(long)]
    idle_timeout: Option<u64>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    episode: PathBuf,
}

/// Values a `--config` file may set.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    game: Option<GameId>,
    jitter: Option<f64>,
    reshuffle: Option<f64>,
    episodes: Option<usize>,
    len: Option<usize>,
    parallelism: Option<usize>,
    eval_fraction: Option<f64>,
    masking: Option<Masking>,
    epochs: Option<usize>,
    addr: Option<String>,
    idle_timeout: Option<u64>,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidConfig(_)
            | CoreError::InvalidProbability { .. }
            | CoreError::NoMap(_)
            | CoreError::IllegalAction { .. }
            | CoreError::UnknownAction(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

type CliResult<T> = Result<T, CliError>;

fn load_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

struct Ctx {
    common: Common,
    file: FileConfig,
}

impl Ctx {
    fn seed(&self) -> u64 {
        self.common.seed.or(self.file.seed).unwrap_or(0)
    }

    fn out(&self) -> Option<PathBuf> {
        self.common.out.clone().or(self.file.out.clone())
    }

    fn require_out(&self) -> CliResult<PathBuf> {
        self.out().ok_or_else(|| CliError::Usage("--out is required".into()))
    }

    fn spec(&self, g: &GeneratorArgs) -> GeneratorSpec {
        let game = g.game.or(self.file.game).unwrap_or(GameId::Traveler);
        let mut layers = Vec::new();
        if let Some(p) = g.jitter.or(self.file.jitter) {
            layers.push(GeneratorKind::NumericJitter { p });
        }
        if let Some(q) = g.reshuffle.or(self.file.reshuffle) {
            layers.push(GeneratorKind::SpatialReshuffle { q });
        }
        let kind = match layers.len() {
            0 => GeneratorKind::Reference,
            1 => layers.pop().unwrap(),
            _ => GeneratorKind::Composite { layers },
        };
        GeneratorSpec { game, seed: self.seed(), kind }
    }
}

fn default_len(game: GameId) -> usize {
    match game {
        GameId::Traveler => 48,
        _ => gamecon_core::dataset::VARIABLE_LENGTH_CAP,
    }
}

fn print_json(value: &impl serde::Serialize) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value).map_err(runtime)?);
    Ok(())
}

fn cmd_collect(ctx: &Ctx, a: &CollectArgs) -> CliResult<()> {
    let spec = ctx.spec(&a.generator);
    let config = CollectConfig {
        game: spec.game,
        n_episodes: a.episodes.or(ctx.file.episodes).unwrap_or(1000),
        episode_len: a.len.or(ctx.file.len).unwrap_or(default_len(spec.game)),
        seed: spec.seed,
        parallelism: a.parallelism.or(ctx.file.parallelism).unwrap_or(1),
        generator: spec.kind,
    };
    config.validate()?;
    let out = ctx.require_out()?;
    let summary = collect(&config, &out)?;
    eprintln!(
        "collected {} episodes, {} frames, {} events into {}",
        summary.episodes.len(),
        summary.total_frames,
        summary.total_events,
        out.display()
    );
    Ok(())
}

fn cmd_split(ctx: &Ctx, a: &SplitArgs) -> CliResult<()> {
    let summary = CollectionSummary::load(&a.collection).map_err(runtime)?;
    let fraction = a.eval_fraction.or(ctx.file.eval_fraction).unwrap_or(0.05);
    let (train, eval) = split(&summary.episodes, fraction)?;
    let value = serde_json::json!({ "eval_fraction": fraction, "train": train, "eval": eval });
    match ctx.out() {
        Some(path) => std::fs::write(&path, serde_json::to_vec_pretty(&value).map_err(runtime)?)
            .map_err(runtime)?,
        None => print_json(&value)?,
    }
    eprintln!("train {} / eval {}", train.len(), eval.len());
    Ok(())
}

fn cmd_stitch(ctx: &Ctx, a: &StitchArgs) -> CliResult<()> {
    let dirs: Vec<PathBuf> = match (&a.episode, &a.collection) {
        (Some(e), None) => vec![e.clone()],
        (None, Some(c)) => {
            let summary = CollectionSummary::load(c).map_err(runtime)?;
            (0..summary.episodes.len()).map(|i| summary.episode_dir(c, i)).collect()
        }
        _ => return Err(CliError::Usage("give --episode or --collection".into())),
    };
    let masking = a.masking.or(ctx.file.masking).unwrap_or(Masking::ScoreAndWrite);
    let mut rows = Vec::new();
    let (mut psnr_sum, mut psnr_n, mut exact, mut steps, mut amb, mut links) = (0.0, 0, 0, 0, 0, 0);
    for dir in &dirs {
        let episode = Episode::load(dir)?;
        let config =
            MatchConfig { player_masking: masking.into(), ..MatchConfig::for_game(episode.manifest.game) };
        let r = stitch_episode(&episode, &config)?;
        if let Some(p) = r.psnr_vs_gt {
            psnr_sum += p;
            psnr_n += 1;
        }
        let (a_n, l_n) = r.ambiguous_links();
        exact += r.exact_steps();
        steps += r.position_errors.len();
        amb += a_n;
        links += l_n;
        if let (Some(out), true) = (ctx.out(), dirs.len() == 1) {
            r.map.save(&out, "stitched_map")?;
        }
        rows.push(serde_json::json!({
            "episode": dir.display().to_string(),
            "psnr_vs_gt_db": r.psnr_vs_gt,
            "exact_positions": r.exact_steps(),
            "steps": r.position_errors.len(),
            "ambiguous_links": a_n,
            "links": l_n,
        }));
    }
    let mean = (psnr_n > 0).then(|| psnr_sum / psnr_n as f64);
    if a.json {
        print_json(&serde_json::json!({
            "mean_psnr_vs_gt_db": mean,
            "exact_positions": exact,
            "steps": steps,
            "ambiguous_links": amb,
            "links": links,
            "episodes": rows,
        }))?;
    } else {
        let psnr = mean.map_or("n/a".to_string(), |m| format!("{m:.3}"));
        println!(
            "psnr_vs_gt_db={psnr} exact_positions={exact}/{steps} ambiguous_links={amb}/{links} episodes={}",
            dirs.len()
        );
    }
    Ok(())
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> CliResult<()> {
    let spec = ctx.spec(&a.generator);
    spec.kind.validate(spec.game)?;
    let episodes = a.episodes.or(ctx.file.episodes).unwrap_or(100);
    let len = a.len.or(ctx.file.len).unwrap_or(48);
    if episodes == 0 || len == 0 {
        return Err(CliError::Usage("episodes and len must be positive".into()));
    }
    let report = evaluate(&spec, episodes, len, spec.seed)?;
    match a.format {
        Format::Json => print_json(&report)?,
        Format::Table => print!("{}", report.table()),
    }
    if let Some(out) = ctx.out() {
        std::fs::write(out, serde_json::to_vec_pretty(&report).map_err(runtime)?).map_err(runtime)?;
    }
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> CliResult<()> {
    let summary = CollectionSummary::load(&a.collection).map_err(runtime)?;
    let fraction = a.eval_fraction.or(ctx.file.eval_fraction).unwrap_or(0.05);
    let (train_ids, eval_ids) = split(&summary.episodes, fraction)?;
    let samples = |ids: &[usize]| -> CliResult<Vec<_>> {
        let mut out = Vec::new();
        for &i in ids {
            out.extend(event_samples(&Episode::load(summary.episode_dir(&a.collection, i))?)?);
        }
        Ok(out)
    };
    let (train, held_out) = (samples(&train_ids)?, samples(&eval_ids)?);
    let mut config = TrainConfig { seed: ctx.seed(), ..TrainConfig::default() };
    if let Some(e) = a.epochs.or(ctx.file.epochs) {
        config.epochs = e;
    }
    let model = train_event_predictor(summary.config.game, &train, &held_out, &config)?;
    if let Some(out) = ctx.out() {
        model.save(&out)?;
    }
    print_json(&model.meta)
}

fn cmd_serve(ctx: &Ctx, a: &ServeArgs) -> CliResult<()> {
    let addr = a.addr.clone().or(ctx.file.addr.clone()).unwrap_or_else(|| "127.0.0.1:8080".into());
    let addr: std::net::SocketAddr =
        addr.parse().map_err(|e| CliError::Usage(format!("bad address {addr}: {e}")))?;
    let mut config = gamecon_service::ServiceConfig::default();
    if let Some(s) = a.idle_timeout.or(ctx.file.idle_timeout) {
        config.idle_timeout = Duration::from_secs(s);
    }
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    eprintln!("listening on http://{addr}");
    rt.block_on(gamecon_service::serve(addr, config)).map_err(runtime)
}

fn cmd_replay(_ctx: &Ctx, a: &ReplayArgs) -> CliResult<()> {
    let episode = Episode::load(&a.episode)?;
    let frames = Episode::replay(&episode.manifest)?;
    match frames.iter().zip(&episode.frames).position(|(a, b)| a != b) {
        None if frames.len() == episode.frames.len() => {
            println!("replay ok: {} frames bit-identical", frames.len());
            Ok(())
        }
        None => Err(runtime(format!(
            "replay produced {} frames, episode stores {}",
            frames.len(),
            episode.frames.len()
        ))),
        Some(n) => Err(runtime(format!("replay diverges at frame {n}"))),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let file = load_config(cli.common.config.as_deref())?;
    let ctx = Ctx { common: cli.common, file };
    match &cli.command {
        Command::Collect(a) => cmd_collect(&ctx, a),
        Command::Split(a) => cmd_split(&ctx, a),
        Command::Stitch(a) => cmd_stitch(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Serve(a) => cmd_serve(&ctx, a),
        Command::Replay(a) => cmd_replay(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
