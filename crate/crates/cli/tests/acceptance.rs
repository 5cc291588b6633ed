//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use rand::Rng;
use tokio_tungstenite::tungstenite::Message;

use gamecon_core::dataset::{
    collect, collect_episode, event_samples, split, stitch_episode, CollectConfig, Episode,
    EpisodeEntry, StitchReport,
};
use gamecon_core::engine::{Slot, TravelerPreset};
use gamecon_core::frame::Frame;
use gamecon_core::glyphs::draw_score_strip;
use gamecon_core::metrics::{evaluate, readback_score};
use gamecon_core::numeric::{train_event_predictor, Mlp, Sample, TrainConfig};
use gamecon_core::seed::{derive_seed, stream, stream_rng};
use gamecon_core::spatial::{
    blue_mask, link_observation, locate, BandGeometry, MatchConfig, PlayerMasking, Topology, WorldMap,
};
use gamecon_core::{
    EngineConfig, EngineState, GameId, GeneratorHandle, GeneratorKind, GeneratorSpec, MetricReport,
};
use gamecon_service::{serve_listener, CreatedSession, ServerMessage, ServiceConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reference_episode(seed: u64) -> Episode {
    let handle = GeneratorHandle::new(GeneratorSpec::reference(GameId::Traveler, seed)).unwrap();
    Episode::record(handle, derive_seed(seed, stream::POLICY), 48).unwrap()
}

struct StitchTotals {
    mean_psnr: f64,
    exact: usize,
    steps: usize,
    ambiguous: usize,
    links: usize,
}

fn stitch_all(episodes: &[Episode], masking: PlayerMasking) -> StitchTotals {
    let config = MatchConfig { player_masking: masking, ..MatchConfig::default() };
    let reports: Vec<StitchReport> = episodes.iter().map(|e| stitch_episode(e, &config).unwrap()).collect();
    let mut t = StitchTotals { mean_psnr: 0.0, exact: 0, steps: 0, ambiguous: 0, links: 0 };
    for r in &reports {
        t.mean_psnr += r.psnr_vs_gt.expect("reference episodes overlap their ground truth");
        t.exact += r.exact_steps();
        t.steps += r.position_errors.len();
        let (a, l) = r.ambiguous_links();
        t.ambiguous += a;
        t.links += l;
    }
    t.mean_psnr /= reports.len() as f64;
    t
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let episodes: Vec<Episode> = (0..100).map(reference_episode).collect();
    let masked = stitch_all(&episodes, PlayerMasking::ScoreAndWrite);
    let included = stitch_all(&episodes, PlayerMasking::WriteOnly);
    let elapsed = start.elapsed();
    let drawn = stitch_all(&episodes, PlayerMasking::None);
    let exact_ok = |t: &StitchTotals| t.exact as f64 >= 0.99 * t.steps as f64;
    let pass = masked.mean_psnr >= 35.0
        && included.mean_psnr >= 35.0
        && exact_ok(&masked)
        && exact_ok(&included)
        && elapsed <= Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "mean PSNR {:.2} dB (sprite masked) / {:.2} dB (sprite matched, not written); exact positions {}/{} and {}/{}; {:.1}s [sprite written into map: {:.2} dB]",
            masked.mean_psnr,
            included.mean_psnr,
            masked.exact,
            masked.steps,
            included.exact,
            included.steps,
            elapsed.as_secs_f64(),
            drawn.mean_psnr
        ),
    )
}

/// Exhaustive matcher written independently of the library: scores every
/// offset against the map through its public pixel accessor.
fn brute_force_offset(
    map: &WorldMap,
    band: &Frame,
    geometry: &BandGeometry,
    config: &MatchConfig,
) -> (i64, i64) {
    let prev = map.player_pos().unwrap();
    let d = config.delta2 as i64;
    let dys = if geometry.topology == Topology::Grid2D { -d..=d } else { 0..=0 };
    // (sse, n, key) of the best candidate so far; lower mse wins, then key.
    let mut best: Option<(u128, u128, (i64, i64, i64))> = None;
    let fp = geometry.player_footprint;
    let skip_sprite = config.player_masking == PlayerMasking::ScoreAndWrite;
    let blue = |c: [u8; 3]| if blue_mask(c, config.blue_floor, config.blue_margin) { 255i64 } else { 0 };
    for dy in dys {
        for dx in -d..=d {
            let (ox, oy) = geometry.band_origin((prev.0 + dx, prev.1 + dy));
            let (mut sse, mut n) = (0u128, 0u128);
            for r in 0..geometry.height {
                for c in 0..geometry.width {
                    if skip_sprite && fp.contains(c, r) {
                        continue;
                    }
                    let Some(m) = map.observed_pixel(ox + c as i64, oy + r as i64) else { continue };
                    let o = band.get(c, r);
                    match geometry.topology {
                        Topology::Strip1D => {
                            for k in 0..3 {
                                let e = o[k] as i64 - m[k] as i64;
                                sse += (e * e) as u128;
                            }
                            n += 3;
                        }
                        Topology::Grid2D => {
                            let e = blue(o) - blue(m);
                            sse += (e * e) as u128;
                            n += 1;
                        }
                    }
                }
            }
            if n == 0 {
                continue;
            }
            let key = (dx.abs() + dy.abs(), dx, dy);
            let better = match best {
                None => true,
                // Compare sse/n exactly as rationals.
                Some((bs, bn, bk)) => {
                    let (l, r) = (sse * bn, bs * n);
                    l < r || (l == r && key < bk)
                }
            };
            if better {
                best = Some((sse, n, key));
            }
        }
    }
    let (_, _, (_, dx, dy)) = best.unwrap();
    (dx, dy)
}

/// A random world raster large enough for any instance.
struct World {
    x0: i64,
    y0: i64,
    w: usize,
    px: Vec<[u8; 3]>,
}

impl World {
    fn random(rng: &mut impl Rng, topology: Topology, band_h: usize) -> Self {
        let (x0, y0, w, h): (i64, i64, usize, usize) = match topology {
            Topology::Strip1D => (-160, 0, 320, band_h),
            Topology::Grid2D => (-160, -160, 320, 320),
        };
        // Blocky content from a small palette so ties do occur.
        let palette: Vec<[u8; 3]> = match rng.random_range(0..3) {
            0 => vec![[0, 0, 0], [33, 33, 222], [255, 255, 255]],
            1 => vec![[33, 33, 222]],
            _ => (0..6).map(|_| [rng.random(), rng.random(), rng.random()]).collect(),
        };
        let block = rng.random_range(1..=12usize);
        let cols = w.div_ceil(block);
        let rows = h.div_ceil(block);
        let blocks: Vec<[u8; 3]> =
            (0..cols * rows).map(|_| palette[rng.random_range(0..palette.len())]).collect();
        let px = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                let by = if topology == Topology::Strip1D { 0 } else { y / block };
                blocks[by * cols + x / block]
            })
            .collect();
        Self { x0, y0, w, px }
    }

    fn band(&self, geometry: &BandGeometry, pos: (i64, i64), rng: &mut impl Rng, noise: f64) -> Frame {
        let (ox, oy) = geometry.band_origin(pos);
        let mut f = Frame::new(geometry.width, geometry.height);
        for r in 0..geometry.height {
            for c in 0..geometry.width {
                let x = (ox + c as i64 - self.x0) as usize;
                let y = (oy + r as i64 - self.y0) as usize;
                let mut p = self.px[y * self.w + x];
                if rng.random_bool(noise) {
                    p = [rng.random(), rng.random(), rng.random()];
                }
                f.set(c, r, p);
            }
        }
        f
    }
}

fn matcher_instances(game: GameId, n: usize) -> (usize, usize) {
    let engine = EngineConfig::for_game(game);
    let geometry = BandGeometry::for_game(game, &engine).unwrap();
    let mut rng = stream_rng(0xACCE, game as u64);
    let mut agree = 0;
    for _ in 0..n {
        let world = World::random(&mut rng, geometry.topology, geometry.height);
        let delta2 = rng.random_range(1..=10usize);
        let masking = [PlayerMasking::ScoreAndWrite, PlayerMasking::WriteOnly, PlayerMasking::None]
            [rng.random_range(0..3)];
        let config = MatchConfig { delta2, player_masking: masking, ..MatchConfig::for_game(game) };
        let mut map = WorldMap::new(geometry.topology);
        let noise = rng.random_range(0.0..0.2);
        link_observation(&mut map, &world.band(&geometry, (0, 0), &mut rng, 0.0), &geometry, &config).unwrap();
        // Optionally grow the map with a second, correctly placed view.
        let mut prev = (0, 0);
        if rng.random_bool(0.5) {
            let step = |rng: &mut rand_chacha::ChaCha8Rng| rng.random_range(-8..=8i64);
            let p = (step(&mut rng), if geometry.topology == Topology::Grid2D { step(&mut rng) } else { 0 });
            let band = world.band(&geometry, p, &mut rng, 0.0);
            let mut r = locate(&map, &band, &geometry, &config).unwrap();
            r.position = p;
            gamecon_core::spatial::integrate(&mut map, &band, &r, &geometry, &config);
            prev = p;
        }
        let d = delta2 as i64;
        let truth = (
            prev.0 + rng.random_range(-d..=d),
            if geometry.topology == Topology::Grid2D { prev.1 + rng.random_range(-d..=d) } else { 0 },
        );
        let obs = world.band(&geometry, truth, &mut rng, noise);
        let got = locate(&map, &obs, &geometry, &config).unwrap().offset;
        let want = brute_force_offset(&map, &obs, &geometry, &config);
        agree += (got == want) as usize;
    }
    (agree, n)
}

fn criterion_2() -> Outcome {
    let (a1, n1) = matcher_instances(GameId::Traveler, 1000);
    let (a2, n2) = matcher_instances(GameId::PacMan, 1000);
    outcome(a1 == n1 && a2 == n2, format!("strip {a1}/{n1}, grid {a2}/{n2} offsets equal brute force"))
}

fn spec(kind: GeneratorKind) -> GeneratorSpec {
    GeneratorSpec { game: GameId::Traveler, seed: 0, kind }
}

fn discrimination_reports() -> Vec<MetricReport> {
    let kinds = [
        GeneratorKind::Reference,
        GeneratorKind::NumericJitter { p: 0.1 },
        GeneratorKind::NumericJitter { p: 0.5 },
        GeneratorKind::NumericJitter { p: 1.0 },
        GeneratorKind::SpatialReshuffle { q: 0.1 },
        GeneratorKind::SpatialReshuffle { q: 0.5 },
        GeneratorKind::SpatialReshuffle { q: 1.0 },
    ];
    kinds.into_iter().map(|k| evaluate(&spec(k), 100, 48, 2024).unwrap()).collect()
}

fn criterion_3(reports: &[MetricReport]) -> Outcome {
    let num: Vec<f64> = reports[..4].iter().map(|r| r.numcon).collect();
    let spa: Vec<f64> = [&reports[0], &reports[4], &reports[5], &reports[6]]
        .iter()
        .map(|r| r.spacon.unwrap())
        .collect();
    let strictly_down = |v: &[f64]| v.windows(2).all(|w| w[0] > w[1]);
    let jitter_keeps_spacon = reports[1..4].iter().all(|r| r.spacon == Some(99.0));
    let reshuffle_keeps_numcon = reports[4..].iter().all(|r| r.numcon == 1.0);
    let pass = num[0] == 1.0
        && spa[0] == 99.0
        && strictly_down(&num)
        && strictly_down(&spa)
        && jitter_keeps_spacon
        && reshuffle_keeps_numcon;
    outcome(
        pass,
        format!(
            "numcon {:.4} > {:.4} > {:.4} > {:.4}; spacon {:.2} > {:.2} > {:.2} > {:.2}; jitter spacon at cap: {}; reshuffle numcon 1.0: {}; unreadable steps {}",
            num[0], num[1], num[2], num[3], spa[0], spa[1], spa[2], spa[3],
            jitter_keeps_spacon, reshuffle_keeps_numcon,
            reports.iter().map(|r| r.unreadable_steps).sum::<u64>()
        ),
    )
}

/// Worst relative error between analytic and central-difference gradients
/// over sampled coordinates of random minibatches.
fn gradient_check(samples: &[Sample], input: usize) -> f64 {
    let mut rng = stream_rng(0x6AAD, 0);
    let hidden = 128;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mut net = Mlp::<f64>::zeros(input, hidden);
        for p in net.params.iter_mut() {
            *p = rng.random_range(-0.1..0.1);
        }
        let batch: Vec<&Sample> = (0..64).map(|_| &samples[rng.random_range(0..samples.len())]).collect();
        let xs64: Vec<Vec<f64>> = batch.iter().map(|s| s.features.iter().map(|&v| v as f64).collect()).collect();
        let xs: Vec<&[f64]> = xs64.iter().map(|v| v.as_slice()).collect();
        let ys: Vec<f64> = batch.iter().map(|s| s.label as u8 as f64).collect();
        let (_, grad) = net.loss_and_grad(&xs, &ys);
        let h = 1e-5;
        for _ in 0..40 {
            let i = rng.random_range(0..net.params.len());
            let orig = net.params[i];
            net.params[i] = orig + h;
            let up = net.loss(&xs, &ys);
            net.params[i] = orig - h;
            let down = net.loss(&xs, &ys);
            net.params[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let scale = grad[i].abs().max(numeric.abs());
            if scale > 1e-7 {
                worst = worst.max((grad[i] - numeric).abs() / scale);
            }
        }
    }
    worst
}

fn criterion_4() -> Outcome {
    let cfg = CollectConfig::new(GameId::Traveler, 1000, 48, 2024);
    let episodes: Vec<Episode> = (0..1000).map(|i| collect_episode(&cfg, i).unwrap()).collect();
    let entries: Vec<EpisodeEntry> = episodes
        .iter()
        .enumerate()
        .map(|(i, e)| EpisodeEntry { id: i, dir: String::new(), seed: e.manifest.seed, length: e.manifest.length, events: 0 })
        .collect();
    let (train_ids, eval_ids) = split(&entries, 0.05).unwrap();
    let gather = |ids: &[usize]| -> Vec<Sample> {
        ids.iter().flat_map(|&i| event_samples(&episodes[i]).unwrap()).collect()
    };
    let (train, held_out) = (gather(&train_ids), gather(&eval_ids));
    let start = Instant::now();
    let model = train_event_predictor(GameId::Traveler, &train, &held_out, &TrainConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let acc = model.meta.held_out_accuracy.unwrap();
    let majority = held_out.iter().filter(|s| !s.label).count() as f64 / held_out.len() as f64;
    let curve = &model.meta.loss_curve;
    let worst = gradient_check(&train, model.input_dim());
    let pass = acc >= 0.99 && worst < 1e-4 && elapsed <= Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "split {}/{} episodes; held-out accuracy {:.4} (always-false baseline {:.4}); worst gradient rel. error {:.2e}; training {:.1}s; loss {:.4} -> {:.4} -> {:.4}",
            train_ids.len(), eval_ids.len(), acc, majority, worst, elapsed.as_secs_f64(),
            curve[0], curve[1], curve[2]
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut exact = 0;
    for game in GameId::ALL {
        let background = EngineState::new(game, 5, EngineConfig::for_game(game)).unwrap().render();
        for s in 0..=999u16 {
            let mut f = background.clone();
            draw_score_strip(&mut f, s);
            exact += (readback_score(&f).ok() == Some(s)) as usize;
        }
    }
    outcome(exact == 3000, format!("{exact}/3000 exact readbacks (1000 scores x 3 games)"))
}

fn same_tree(a: &Path, b: &Path) -> bool {
    let files = |root: &Path| -> BTreeMap<String, Vec<u8>> {
        let mut out = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
                }
            }
        }
        out
    };
    let (fa, fb) = (files(a), files(b));
    !fa.is_empty() && fa == fb
}

fn criterion_6(first: &[MetricReport]) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut replays = 0;
    let mut stored = 0;
    for game in GameId::ALL {
        let cfg = CollectConfig::new(game, 5, 64, 77);
        let dir = tmp.path().join(format!("replay_{game}"));
        let summary = collect(&cfg, &dir).unwrap();
        for i in 0..summary.episodes.len() {
            let ep = Episode::load(summary.episode_dir(&dir, i)).unwrap();
            stored += 1;
            replays += ep.replays_exactly().unwrap() as usize;
        }
    }
    let mut identical_collections = 0;
    for game in GameId::ALL {
        let one = CollectConfig { parallelism: 1, ..CollectConfig::new(game, 16, 48, 5) };
        let eight = CollectConfig { parallelism: 8, ..one.clone() };
        let (a, b) = (tmp.path().join(format!("p1_{game}")), tmp.path().join(format!("p8_{game}")));
        collect(&one, &a).unwrap();
        collect(&eight, &b).unwrap();
        identical_collections += same_tree(&a, &b) as usize;
    }
    let reference = serde_json::to_string(first).unwrap();
    let mut identical_runs = 1;
    for _ in 1..10 {
        identical_runs += (serde_json::to_string(&discrimination_reports()).unwrap() == reference) as usize;
    }
    let pass = replays == stored && identical_collections == 3 && identical_runs == 10;
    outcome(
        pass,
        format!(
            "{replays}/{stored} stored episodes replay bit-exactly; parallelism 1 vs 8 byte-identical for {identical_collections}/3 games; {identical_runs}/10 discrimination runs identical"
        ),
    )
}

/// Traveler episode over a preset where every slot is the same building,
/// so every column of the background looks alike.
fn uniform_episode(seed: u64) -> Episode {
    let config = EngineConfig::for_game(GameId::Traveler);
    let preset = TravelerPreset { first_slot: -150, slots: vec![Slot::Building { color: 3, height: 40 }; 300] };
    let state = EngineState::with_traveler_preset(seed, config, preset).unwrap();
    let handle = GeneratorHandle::with_state(GeneratorSpec::reference(GameId::Traveler, seed), state).unwrap();
    Episode::record(handle, derive_seed(seed, stream::POLICY), 48).unwrap()
}

fn criterion_7() -> Outcome {
    let uniform: Vec<Episode> = (0..20).map(uniform_episode).collect();
    let u = stitch_all(&uniform, PlayerMasking::ScoreAndWrite);
    // With the sprite scored its constant error is divided by an overlap
    // that varies per offset, which tilts the flat landscape.
    let scored = stitch_all(&uniform, PlayerMasking::WriteOnly);
    let normal: Vec<Episode> = (0..100).map(reference_episode).collect();
    let n = stitch_all(&normal, PlayerMasking::ScoreAndWrite);
    let u_rate = u.ambiguous as f64 / u.links as f64;
    let n_rate = n.ambiguous as f64 / n.links as f64;
    outcome(
        u_rate >= 0.95 && n_rate < 0.01,
        format!(
            "uniform background: {}/{} links ambiguous ({:.1}%); reference episodes: {}/{} ({:.2}%) [sprite scored: uniform {}/{}, exact positions {}/{}]",
            u.ambiguous, u.links, 100.0 * u_rate, n.ambiguous, n.links, 100.0 * n_rate,
            scored.ambiguous, scored.links, scored.exact, scored.steps
        ),
    )
}

async fn throughput() -> (usize, Duration) {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("127.0.0.1:{}", listener.local_addr().unwrap().port());
    tokio::spawn(serve_listener(listener, ServiceConfig::default()));
    let created: CreatedSession = reqwest::Client::new()
        .post(format!("http://{base}/sessions"))
        .json(&serde_json::json!({"game": "traveler", "seed": 1, "kind": "reference"}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let (mut ws, _) =
        tokio_tungstenite::connect_async(format!("ws://{base}/sessions/{}/stream", created.id)).await.unwrap();
    ws.next().await.unwrap().unwrap();
    let steps = 300;
    let start = Instant::now();
    let mut frames = 0;
    for i in 0..steps {
        let action = if (i / 25) % 2 == 0 { "right" } else { "left" };
        let msg = serde_json::json!({"type": "action", "action": action}).to_string();
        ws.send(Message::text(msg)).await.unwrap();
        if let Message::Text(t) = ws.next().await.unwrap().unwrap() {
            if let Ok(ServerMessage::Frame(_)) = serde_json::from_str(t.as_str()) {
                frames += 1;
            }
        }
    }
    (frames, start.elapsed())
}

fn criterion_8() -> Outcome {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let (frames, elapsed) = rt.block_on(throughput());
    let rate = frames as f64 / elapsed.as_secs_f64();
    outcome(
        frames == 300 && rate >= 30.0,
        format!("{frames} frames over WebSocket in {:.2}s = {rate:.0} steps/s", elapsed.as_secs_f64()),
    )
}

fn main() {
    let mut all = true;
    let mut report = |n: usize, o: Outcome| {
        all &= o.pass;
        println!("criterion {n}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };
    report(1, criterion_1());
    report(2, criterion_2());
    let reports = discrimination_reports();
    report(3, criterion_3(&reports));
    report(4, criterion_4());
    report(5, criterion_5());
    report(6, criterion_6(&reports));
    report(7, criterion_7());
    report(8, criterion_8());
    if !all {
        std::process::exit(1);
    }
}
