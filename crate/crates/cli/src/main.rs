use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use posespace::engine::{self, EngineConfig, Session};
use posespace::geometry::{self, WindowMode};
use posespace::musicspace::{self, EmbeddingSource};
use posespace::nets::{AdamConfig, Checkpoint};
use posespace::service::{Server, Shared};
use posespace::synth::{self, SynthParams};
use posespace::training::{self, TrainConfig};
use posespace::GestureClass;

#[derive(Parser)]
#[command(name = "posespace", version, about = "Hand-pose gesture embedding and music-space interaction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labeled synthetic gesture clips, and optionally a catalog and a stream.
    SynthData(SynthArgs),
    /// Jointly train the autoencoder and classifier on labeled clips.
    Train(TrainArgs),
    /// Score a checkpoint on labeled clips.
    Eval(EvalArgs),
    /// Build the 2D music space from a track catalog.
    EmbedMusic(EmbedArgs),
    /// Run the live session service.
    Serve(ServeArgs),
    /// Feed a recorded landmark stream through a session and log its events.
    Replay(ReplayArgs),
}

/// A comma-separated list of gesture classes.
#[derive(Debug, Clone)]
struct ClassList(Vec<GestureClass>);

fn parse_classes(s: &str) -> Result<ClassList, String> {
    if s == "all" {
        return Ok(ClassList(GestureClass::ALL.to_vec()));
    }
    s.split(',')
        .map(|c| c.trim().parse::<GestureClass>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()
        .map(ClassList)
}

#[derive(Args)]
struct SynthArgs {
    /// Comma-separated class names or labels 1-6, or `all`.
    #[arg(long, default_value = "all", value_parser = parse_classes)]
    classes: ClassList,
    /// Clips generated per class.
    #[arg(long, default_value_t = 40)]
    clips: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Labeled clip file (JSON lines).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 45)]
    frames_per_clip: usize,
    #[arg(long, default_value_t = 0.003)]
    jitter: f64,
    /// Also write a planted track catalog (CSV).
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 600)]
    tracks: usize,
    /// Also write the planted 2D coordinates of the catalog (CSV).
    #[arg(long, requires = "catalog")]
    embedding: Option<PathBuf>,
    /// Also write one continuous landmark stream (JSON lines).
    #[arg(long)]
    stream: Option<PathBuf>,
    /// Gestures performed back to back in the stream.
    #[arg(
        long,
        default_value = "pinch,continuous-arm-open,continuous-arm-close,double-pinch,pinch",
        value_parser = parse_classes
    )]
    stream_gestures: ClassList,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Window length: 1, 2 or 8.
    #[arg(long, default_value_t = 2)]
    frames: usize,
    #[arg(long, default_value = "concat")]
    mode: WindowMode,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cross-entropy weight; 0 trains the autoencoder alone.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Fraction of clips per class used for training.
    #[arg(long, default_value_t = 0.82)]
    split: f64,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch history (JSON lines).
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Report path (JSON).
    #[arg(long)]
    report: PathBuf,
    /// Score every clip instead of the checkpoint's held-out clips.
    #[arg(long)]
    all: bool,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    catalog: PathBuf,
    /// Precomputed 2D coordinates (CSV with track_id,x,y) instead of PCA.
    #[arg(long = "import")]
    import: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone, Copy)]
struct DebounceArgs {
    /// Minimum class probability counted toward a trigger.
    #[arg(long, default_value_t = 0.8)]
    tau: f64,
    /// Consecutive agreeing windows needed to trigger.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Seconds between triggers.
    #[arg(long, default_value_t = 0.5)]
    cooldown: f64,
}

impl DebounceArgs {
    fn config(self) -> Result<EngineConfig> {
        let config =
            EngineConfig { confidence_threshold: self.tau, consecutive_windows: self.k, cooldown: self.cooldown };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    space: PathBuf,
    /// host:port
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    #[command(flatten)]
    debounce: DebounceArgs,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    space: PathBuf,
    /// Landmark stream (JSON lines).
    #[arg(long)]
    stream: PathBuf,
    /// Playback rate relative to the stream clock; 0 runs unpaced.
    #[arg(long, default_value_t = 0.0)]
    speed: f64,
    /// Event log (JSON lines).
    #[arg(long)]
    events: PathBuf,
    #[command(flatten)]
    debounce: DebounceArgs,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn synth_data(args: SynthArgs) -> Result<()> {
    let params = SynthParams {
        seed: args.seed,
        frames_per_clip: args.frames_per_clip,
        jitter: args.jitter,
        ..SynthParams::default()
    };
    let clips = synth::synth_dataset(&args.classes.0, args.clips, &params)?;
    training::write_clips(create(&args.out)?, &clips).with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} clips to {}", clips.len(), args.out.display());

    if let Some(path) = &args.catalog {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(0xCA7A));
        let catalog = synth::synth_catalog(args.tracks, &mut rng)?;
        musicspace::write_catalog(create(path)?, &catalog.tracks)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {} tracks to {}", catalog.tracks.len(), path.display());
        if let Some(path) = &args.embedding {
            musicspace::write_embedding(create(path)?, &catalog.embedding)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if let Some(path) = &args.stream {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(0x57AE));
        let frames = synth::synth_stream(&args.stream_gestures.0, &params, &mut rng)?;
        geometry::write_stream(create(path)?, &frames).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {} stream frames to {}", frames.len(), path.display());
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let clips = training::load_clips(&args.data)?;
    let dataset = training::make_windows(&clips, args.frames)?;
    let config = TrainConfig {
        frames: args.frames,
        mode: args.mode,
        lambda: args.lambda,
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        adam: AdamConfig { learning_rate: args.lr, ..AdamConfig::default() },
        split: args.split,
    };
    let started = Instant::now();
    let outcome = training::train_joint(&dataset, &config)?;
    outcome.checkpoint.save(&args.out)?;
    if let Some(path) = &args.history {
        let mut w = create(path)?;
        for record in &outcome.history {
            serde_json::to_writer(&mut w, record)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    let last = outcome.history.last().expect("at least one epoch");
    println!(
        "trained {} epochs on {} windows in {:.1}s: loss {:.5}, test precision {}",
        outcome.history.len(),
        dataset.len(),
        started.elapsed().as_secs_f64(),
        last.train_loss,
        last.test_precision.map_or("n/a".into(), |p| format!("{p:.2}%")),
    );
    println!("checkpoint written to {}", args.out.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let checkpoint = Checkpoint::load(&args.ckpt)?;
    let clips = training::load_clips(&args.data)?;
    let mut dataset = training::make_windows(&clips, checkpoint.model.frames())?;
    if !args.all && !checkpoint.held_out_clips.is_empty() {
        let keep: BTreeSet<String> = checkpoint.held_out_clips.iter().cloned().collect();
        dataset = dataset.subset(&keep);
        if dataset.is_empty() {
            bail!(
                "none of the checkpoint's held-out clips are in {}; pass --all to score every clip",
                args.data.display()
            );
        }
    }
    let report = training::evaluate(&checkpoint, &dataset)?;
    std::fs::write(&args.report, report.to_json()).with_context(|| format!("writing {}", args.report.display()))?;
    println!(
        "{} windows: precision {:.2}%, mAP {:.2}%, p95 latency {:.3} ms",
        report.windows, report.precision, report.map, report.latency_p95_ms
    );
    Ok(())
}

fn embed_music(args: EmbedArgs) -> Result<()> {
    let profiles = musicspace::load_catalog(open(&args.catalog)?)
        .with_context(|| format!("reading catalog {}", args.catalog.display()))?;
    let (coords, source) = match &args.import {
        Some(path) => (
            musicspace::import_embedding(open(path)?, &profiles)
                .with_context(|| format!("reading embedding {}", path.display()))?,
            EmbeddingSource::Imported,
        ),
        None => (musicspace::pca2(&profiles)?, EmbeddingSource::Pca),
    };
    let space = musicspace::build_space(&coords, &profiles, source)?;
    space.save(&args.out)?;
    println!(
        "{} tracks, {} emotion centers, written to {}",
        space.tracks.len(),
        space.center_count(),
        args.out.display()
    );
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let checkpoint = Checkpoint::load(&args.ckpt)?;
    let space = musicspace::MusicSpace::load(&args.space)?;
    let shared = Shared::new(checkpoint, space, args.debounce.config()?)?;
    let server =
        Server::bind(args.listen.as_str(), shared).with_context(|| format!("cannot listen on {}", args.listen))?;
    println!("listening on {}", server.local_addr()?);
    server.run()?;
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    if args.speed.is_nan() || args.speed < 0.0 {
        bail!("--speed must be >= 0");
    }
    let checkpoint = Checkpoint::load(&args.ckpt)?;
    let space = musicspace::MusicSpace::load(&args.space)?;
    let frames =
        geometry::read_stream(open(&args.stream)?).with_context(|| format!("reading {}", args.stream.display()))?;
    let mut session = Session::for_model(args.debounce.config()?, &checkpoint.model, checkpoint.calibration)?;
    let mut out = create(&args.events)?;
    let started = Instant::now();
    let t0 = frames.first().map_or(0.0, |f| f.timestamp);
    let mut count = 0usize;
    for frame in &frames {
        if args.speed > 0.0 {
            let due = Duration::from_secs_f64(((frame.timestamp - t0) / args.speed).max(0.0));
            if let Some(wait) = due.checked_sub(started.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        let events = session.push_frame(frame, &checkpoint.model, &space)?;
        count += events.len();
        engine::write_events(&mut out, &events).with_context(|| format!("writing {}", args.events.display()))?;
    }
    out.flush()?;
    if session.skipped_frames() > 0 {
        log::warn!("{} degenerate frames skipped", session.skipped_frames());
    }
    println!("{} frames replayed, {count} events written to {}", frames.len(), args.events.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POSESPACE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SynthData(a) => synth_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::EmbedMusic(a) => embed_music(a),
        Command::Serve(a) => serve(a),
        Command::Replay(a) => replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
