use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zeroflood::config::{parse_counts, PipelineConfig};
use zeroflood::model::parse_modalities;
use zeroflood::pipeline;
use zeroflood::synthetic::{write_fixture, FixtureSpec};
use zeroflood::Error;

/// Flood susceptibility mapping pipeline.
#[derive(Parser)]
#[command(name = "zeroflood", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline configuration file.
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Zonal statistics and sample selection; writes selection.json.
    Select {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Seeded train/val/test split of a selection; writes manifest.json.
    Split {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Selection file (default: <output_dir>/selection.json).
        #[arg(long)]
        selection: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Explicit train,val,test counts.
        #[arg(long)]
        counts: Option<String>,
    },
    /// Trains the model; writes model.zfm and train_log.csv.
    Train {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Manifest file (default: <output_dir>/manifest.json).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Model seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Imaginary modalities, e.g. `s2,dem`; `none` disables them.
        #[arg(long)]
        tim: Option<String>,
    },
    /// Predicts the test split and writes report.json and pred/*.zfr.
    Eval {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Renders rasters or masks to PGM. Without --input, renders every
    /// prediction under <output_dir>/pred to <output_dir>/render.
    Render {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Rasters (.zfr, ASCII grid) or .pgm images; several are composed
        /// side by side.
        #[arg(long, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Output image; required with --input.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Separator width between composed images.
        #[arg(long, default_value_t = 2)]
        gap: usize,
    },
    /// Writes a synthetic fixture (rasters, metadata and config) to a directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Candidate cells per side.
        #[arg(long)]
        grid: Option<usize>,
        /// Write an FSM with no flood or water pixels.
        #[arg(long)]
        dry: bool,
    },
}

enum Outcome {
    Done,
    Empty(String),
}

fn run(command: Command) -> Result<Outcome, Error> {
    let load = |c: &ConfigArg| PipelineConfig::load(&c.config);
    match command {
        Command::Select { cfg } => {
            let cfg = load(&cfg)?;
            let sel = pipeline::run_select(&cfg)?;
            let r = sel.report;
            println!(
                "cells {} | stage 1 removed {} | quartile removed {} | ratio removed {} | selected {}",
                r.input, r.stage1_removed, r.stage3_removed, r.ratio_removed, r.selected
            );
            if sel.keys.is_empty() {
                return Ok(Outcome::Empty("no cell survived selection".into()));
            }
        }
        Command::Split { cfg, selection, seed, counts } => {
            let cfg = load(&cfg)?;
            let counts = counts.as_deref().map(parse_counts).transpose()?;
            let selection = selection.unwrap_or_else(|| cfg.selection_path());
            let m = pipeline::run_split(&cfg, &selection, seed, counts)?;
            println!("train {} | val {} | test {}", m.counts.train, m.counts.val, m.counts.test);
            if m.entries.is_empty() {
                return Ok(Outcome::Empty("selection is empty".into()));
            }
        }
        Command::Train { cfg, manifest, seed, tim } => {
            let mut cfg = load(&cfg)?;
            if let Some(seed) = seed {
                cfg.model.seed = seed;
            }
            if let Some(tim) = tim {
                cfg.model.tim_modalities = parse_modalities(&tim)?;
            }
            cfg.model.validate()?;
            let manifest = manifest.unwrap_or_else(|| cfg.manifest_path());
            let (_, state) = pipeline::run_train(&cfg, &manifest)?;
            println!(
                "epochs {} | best epoch {} | best val loss {:.6}",
                state.epoch,
                state.best_epoch,
                state.val_loss[state.best_epoch - 1]
            );
        }
        Command::Eval { cfg, checkpoint, manifest, threshold } => {
            let cfg = load(&cfg)?;
            let checkpoint = checkpoint.unwrap_or_else(|| cfg.checkpoint_path());
            let manifest = manifest.unwrap_or_else(|| cfg.manifest_path());
            let report = pipeline::run_eval(&cfg, &checkpoint, &manifest, threshold)?;
            let show = |v: Option<f64>| v.map_or("undefined".to_owned(), |v| format!("{v:.2}"));
            println!(
                "micro HR {} | TAR {} | F1 {}",
                show(report.micro.hr),
                show(report.micro.tar),
                show(report.micro.f1)
            );
        }
        Command::Render { cfg, input, out, gap } => {
            if input.is_empty() {
                let cfg = load(&cfg)?;
                let keys = pipeline::run_render(&cfg)?;
                println!("rendered {} predictions", keys.len());
                if keys.is_empty() {
                    return Ok(Outcome::Empty("no predictions to render".into()));
                }
            } else {
                let out = out.ok_or_else(|| Error::Validation("--out is required with --input".into()))?;
                let img = pipeline::render_files(&input, &out, gap)?;
                println!("wrote {}x{} image to {}", img.width, img.height, out.display());
            }
        }
        Command::Synth { out, seed, grid, dry } => {
            let mut spec = FixtureSpec { dry, ..FixtureSpec::default() };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if let Some(grid) = grid {
                spec.grid = grid;
            }
            write_fixture(&out, &spec)?;
            println!("fixture written to {}", out.display());
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Empty(msg)) => {
            eprintln!("zeroflood: {msg}");
            ExitCode::from(2)
        }
        Err(Error::EmptyPopulation) => {
            eprintln!("zeroflood: nothing to evaluate");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("zeroflood: error: {e}");
            ExitCode::from(1)
        }
    }
}
