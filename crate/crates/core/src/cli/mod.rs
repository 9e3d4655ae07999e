//! Command-line front end: `synth`, `train`, `reconstruct`, `eval` and
//! `coherence`.
//!
//! Every command that writes a file also writes `<out>.manifest.toml`, the
//! fully resolved configuration. Passing it back with `--config` repeats the
//! run exactly.

mod config;

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use sha2::{Digest, Sha256};

pub use config::{parse_layers, OptimizerKind, RunConfig, ShapeSource, SynthConfig, TrainSection};

use crate::data::{
    add_noise, load_landmarks, planted_model, read_mocap_csv, save_landmarks, skeleton_shapes, synthesize_projections,
    LandmarkDataset,
};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::metrics::{coherence_report, evaluate, reconstruct, FrameReconstruction};
use crate::train::{read_checkpoint, train, write_checkpoint};

#[derive(Debug, Parser)]
#[command(name = "deep-nrsfm", version, about = "Deep block-sparse auto-encoder for non-rigid structure from motion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// RNG seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; a `.manifest.toml` is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for per-frame parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a landmark dataset with ground truth.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Shape generator (default skeleton).
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
        /// Motion-capture CSV (one skeleton per row) for `--source mocap`.
        #[arg(long)]
        mocap: Option<PathBuf>,
        /// Number of frames (default 100).
        #[arg(long)]
        frames: Option<usize>,
        /// Noise ratio `‖N‖_F / ‖W‖_F`.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Train a model on a landmark file.
    Train {
        #[command(flatten)]
        common: Common,
        /// Landmark file.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Passes over the data (default 1000).
        #[arg(long)]
        epochs: Option<usize>,
        /// Frames per step (default 64).
        #[arg(long)]
        batch_size: Option<usize>,
        /// Learning rate (default 1e-3).
        #[arg(long)]
        lr: Option<f64>,
        /// Layer widths `k₁,…,kₙ`.
        #[arg(long, value_parser = parse_layer_arg)]
        layers: Option<Layers>,
    },
    /// Write per-frame shapes and cameras for a landmark file.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Landmark file.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output format.
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Report reconstruction metrics against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Landmark file.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Report mutual coherence of every dictionary.
    Coherence {
        #[command(flatten)]
        common: Common,
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

/// Comma-separated layer widths as a single flag value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layers(pub Vec<usize>);

fn parse_layer_arg(s: &str) -> std::result::Result<Layers, String> {
    parse_layers(s).map(Layers)
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SourceArg {
    Skeleton,
    Planted,
    Mocap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
}

fn resolve_common(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if cfg.threads == 0 {
        return Err(Error::Usage("--threads must be at least 1".into()));
    }
    Ok(cfg)
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| Error::Usage(format!("missing --{flag}")))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.toml");
    PathBuf::from(name)
}

fn write_manifest(cfg: &RunConfig, command: &str) -> Result<()> {
    if let Some(out) = &cfg.out {
        let text = format!("# deep-nrsfm {command}\n{}", cfg.to_toml());
        std::fs::write(manifest_path(out), text)?;
    }
    Ok(())
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Parses the arguments and runs the command, writing reports to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    execute(cli.command, stdout)
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(f)
}

pub fn execute(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Synth { common, source, mocap, frames, noise } => {
            let mut cfg = resolve_common(&common)?;
            if let Some(s) = source {
                cfg.synth.source = match s {
                    SourceArg::Skeleton => ShapeSource::Skeleton,
                    SourceArg::Planted => ShapeSource::Planted,
                    SourceArg::Mocap => ShapeSource::Mocap,
                };
            }
            if let Some(m) = mocap {
                cfg.synth.mocap = Some(m);
            }
            if let Some(f) = frames {
                cfg.synth.frames = f;
            }
            if let Some(n) = noise {
                cfg.synth.noise = n;
            }
            cmd_synth(&cfg, stdout)
        }
        Command::Train { common, data, epochs, batch_size, lr, layers } => {
            let mut cfg = resolve_common(&common)?;
            if data.is_some() {
                cfg.data = data;
            }
            let t = &mut cfg.train;
            if let Some(e) = epochs {
                t.epochs = e;
            }
            if let Some(b) = batch_size {
                t.batch_size = b;
            }
            if let Some(lr) = lr {
                t.learning_rate = lr;
            }
            if let Some(Layers(l)) = layers {
                t.layers = l;
            }
            cmd_train(&cfg, stdout)
        }
        Command::Reconstruct { common, checkpoint, data, format } => {
            let mut cfg = resolve_common(&common)?;
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint;
            }
            if data.is_some() {
                cfg.data = data;
            }
            cmd_reconstruct(&cfg, format, stdout)
        }
        Command::Eval { common, checkpoint, data } => {
            let mut cfg = resolve_common(&common)?;
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint;
            }
            if data.is_some() {
                cfg.data = data;
            }
            cmd_eval(&cfg, stdout)
        }
        Command::Coherence { common, checkpoint } => {
            let mut cfg = resolve_common(&common)?;
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint;
            }
            cmd_coherence(&cfg, stdout)
        }
    }
}

/// Builds the dataset described by `cfg.synth`. Shapes, cameras and noise
/// use the seeds `seed`, `seed + 1` and `seed + 2`.
pub fn synthesize(cfg: &RunConfig) -> Result<LandmarkDataset> {
    let s = &cfg.synth;
    let shapes = match s.source {
        ShapeSource::Skeleton => skeleton_shapes(s.frames, cfg.seed),
        ShapeSource::Planted => {
            planted_model(s.points, &s.planted_layers, s.frames, s.active, cfg.seed)
                .map_err(|e| Error::Usage(format!("planted model: {e}")))?
                .shapes
        }
        ShapeSource::Mocap => {
            let path = s.mocap.as_deref().ok_or_else(|| Error::Usage("source = mocap needs --mocap <file>".into()))?;
            let mut shapes = read_mocap_csv(path)?;
            shapes.truncate(s.frames);
            shapes
        }
    };
    let ds = synthesize_projections(&shapes, cfg.seed.wrapping_add(1))?;
    add_noise(&ds, s.noise, cfg.seed.wrapping_add(2)).map_err(|e| Error::Usage(e.to_string()))
}

fn cmd_synth(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let out = required(&cfg.out, "out")?;
    let ds = synthesize(cfg)?;
    save_landmarks(out, &ds)?;
    let bytes = std::fs::read(out)?;
    write_manifest(cfg, "synth")?;
    writeln!(stdout, "frames = {}", ds.len())?;
    writeln!(stdout, "points = {}", ds.p)?;
    writeln!(stdout, "sha256 = {}", sha256_hex(&bytes))?;
    Ok(())
}

fn cmd_train(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.out, "out")?;
    let ds = load_landmarks(data, true)?;
    if ds.is_empty() {
        return Err(Error::Schema(format!("{} holds no frames", data.display())));
    }
    let tcfg = cfg.train.to_train_config(ds.p, cfg.seed)?;
    write_manifest(cfg, "train")?;
    let outcome = with_threads(cfg.threads, || train(&ds, &tcfg))?;
    let ck = &outcome.checkpoint;
    write_checkpoint(out, ck)?;
    if outcome.degenerate_frames > 0 {
        warn!("{} frame evaluations had degenerate cameras and were skipped", outcome.degenerate_frames);
    }
    writeln!(stdout, "steps = {}", ck.step)?;
    if let Some((_, loss)) = ck.loss_history.last() {
        writeln!(stdout, "final_loss = {loss}")?;
    }
    if let Some((_, c)) = ck.coherence_history.last() {
        writeln!(stdout, "final_coherence = {c}")?;
    }
    writeln!(stdout, "sha256 = {}", sha256_hex(&std::fs::read(out)?))?;
    if let Some(step) = outcome.diverged_at {
        return Err(Error::NonFinite(format!(
            "training diverged at step {step}; last finite checkpoint (step {}) written",
            ck.step
        )));
    }
    info!("checkpoint written to {}", out.display());
    Ok(())
}

fn load_pair(cfg: &RunConfig) -> Result<(crate::train::Checkpoint, LandmarkDataset)> {
    let ck = read_checkpoint(required(&cfg.checkpoint, "checkpoint")?)?;
    let ds = load_landmarks(required(&cfg.data, "data")?, true)?;
    if !ds.is_empty() && ds.p != ck.params.dims.p {
        return Err(Error::Schema(format!("dataset has p = {}, checkpoint expects {}", ds.p, ck.params.dims.p)));
    }
    Ok((ck, ds))
}

/// Text layout, per frame:
///
/// ```text
/// frame <id> p=<p> [degenerate]
/// x y z                 <- p lines
/// m11 m12               <- 3 lines, absent when degenerate
/// ```
pub fn format_reconstructions(recon: &[FrameReconstruction]) -> String {
    let mut out = String::new();
    for r in recon {
        let _ = write!(out, "frame {} p={}", r.id, r.shape.rows());
        out.push_str(if r.camera.is_none() { " degenerate\n" } else { "\n" });
        for i in 0..r.shape.rows() {
            let _ = writeln!(out, "{} {} {}", r.shape[(i, 0)], r.shape[(i, 1)], r.shape[(i, 2)]);
        }
        if let Some(m) = &r.camera {
            for i in 0..3 {
                let _ = writeln!(out, "{} {}", m[(i, 0)], m[(i, 1)]);
            }
        }
    }
    out
}

/// Reads the output of [`format_reconstructions`].
pub fn parse_reconstructions(text: &str) -> Result<Vec<FrameReconstruction>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let numbers = |line: usize, row: &str, n: usize| -> Result<Vec<f64>> {
        let vals: Vec<f64> = row.split_whitespace().filter_map(|t| t.parse().ok()).collect();
        if vals.len() != n || row.split_whitespace().count() != n {
            return Err(Error::Parse { line, msg: format!("expected {n} numbers") });
        }
        Ok(vals)
    };
    let mut out = Vec::new();
    while let Some((line, header)) = lines.next() {
        let toks: Vec<&str> = header.split_whitespace().collect();
        let p = match toks.as_slice() {
            ["frame", _, p, rest @ ..] if rest.is_empty() || rest == ["degenerate"] => {
                p.strip_prefix("p=").and_then(|v| v.parse::<usize>().ok())
            }
            _ => None,
        };
        let p = p.ok_or_else(|| Error::Parse { line, msg: "expected `frame <id> p=<count>`".into() })?;
        let degenerate = toks.len() == 4;
        let mut read = |rows: usize, cols: usize| -> Result<Mat> {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, row) = lines.next().ok_or(Error::Parse { line, msg: "frame ends early".into() })?;
                data.extend(numbers(ln, row, cols)?);
            }
            Mat::from_vec(rows, cols, data)
        };
        let shape = read(p, 3)?;
        let camera = if degenerate { None } else { Some(read(3, 2)?) };
        out.push(FrameReconstruction { id: toks[1].to_string(), shape, camera, reprojection_error: None });
    }
    Ok(out)
}

/// One row per landmark: `frame,point,x,y,z,m11,m12,m21,m22,m31,m32`, camera
/// fields left empty for degenerate frames.
pub fn reconstructions_csv(recon: &[FrameReconstruction]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = ["frame", "point", "x", "y", "z", "m11", "m12", "m21", "m22", "m31", "m32"];
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    for r in recon {
        for i in 0..r.shape.rows() {
            let mut row = vec![r.id.clone(), i.to_string()];
            row.extend((0..3).map(|c| r.shape[(i, c)].to_string()));
            match &r.camera {
                Some(m) => row.extend(m.as_slice().iter().map(f64::to_string)),
                None => row.extend(std::iter::repeat_n(String::new(), 6)),
            }
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn cmd_reconstruct(cfg: &RunConfig, format: OutputFormat, stdout: &mut dyn Write) -> Result<()> {
    let (ck, ds) = load_pair(cfg)?;
    let recon = with_threads(cfg.threads, || reconstruct(&ck.params, &ds))?;
    let text = match format {
        OutputFormat::Text => format_reconstructions(&recon),
        OutputFormat::Csv => reconstructions_csv(&recon)?,
    };
    match &cfg.out {
        Some(out) => {
            std::fs::write(out, &text)?;
            write_manifest(cfg, "reconstruct")?;
        }
        None => stdout.write_all(text.as_bytes())?,
    }
    let degenerate = recon.iter().filter(|r| r.camera.is_none()).count();
    if cfg.out.is_some() {
        writeln!(stdout, "frames = {}", recon.len())?;
        writeln!(stdout, "frames_degenerate = {degenerate}")?;
    }
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let (ck, ds) = load_pair(cfg)?;
    let report = with_threads(cfg.threads, || evaluate(&ck.params, &ds))?;
    if report.shape_error_ratio.is_none() {
        warn!("dataset has no ground-truth shapes; 3D metrics omitted");
    }
    let text = report.to_string();
    stdout.write_all(text.as_bytes())?;
    if let Some(out) = &cfg.out {
        std::fs::write(out, &text)?;
        write_manifest(cfg, "eval")?;
    }
    Ok(())
}

fn cmd_coherence(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let ck = read_checkpoint(required(&cfg.checkpoint, "checkpoint")?)?;
    let text = coherence_report(&ck.params).to_string();
    stdout.write_all(text.as_bytes())?;
    if let Some(out) = &cfg.out {
        std::fs::write(out, &text)?;
        write_manifest(cfg, "coherence")?;
    }
    Ok(())
}
