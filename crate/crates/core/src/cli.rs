//! The `sat` command line.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use crate::eval::{
    bench, compute_ope, load_color_table, load_sequence_with, run_sequence, synth_sequence, LoadOptions,
    RunOptions, Scenario, SynthParams, TrackRun,
};
use crate::tracker::TrackerConfig;

#[derive(Debug, Parser)]
#[command(name = "sat", version, about = "Correlation filter tracking and one-pass evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GtFormat {
    /// Ground truth is already 0-based (skip the 1-based correction).
    #[arg(long)]
    zero_based: bool,
}

impl GtFormat {
    fn options(&self) -> LoadOptions {
        LoadOptions {
            one_based: !self.zero_based,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track one sequence and write the results JSON.
    Track {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write one PNG per frame with the reported box.
        #[arg(long)]
        render: Option<PathBuf>,
        /// Write window/posterior/mask panels for frames that trained.
        #[arg(long)]
        dump_masks: Option<PathBuf>,
        #[command(flatten)]
        gt: GtFormat,
    },
    /// Score a results file against a sequence's ground truth.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the precision and success curves as CSV.
        #[arg(long)]
        curves: Option<PathBuf>,
        #[command(flatten)]
        gt: GtFormat,
    },
    /// Render a synthetic sequence.
    Synth {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        target_w: Option<f64>,
        #[arg(long)]
        target_h: Option<f64>,
        /// Target center in the first frame, `x,y`.
        #[arg(long, value_parser = parse_pair)]
        start: Option<(f64, f64)>,
        /// Center displacement per frame, `dx,dy`.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        velocity: Option<(f64, f64)>,
        /// Per-frame size growth factor.
        #[arg(long)]
        zoom: Option<f64>,
        /// Hidden frame interval, `first-last` (1-based, inclusive).
        #[arg(long, value_parser = parse_interval)]
        occlude: Option<(usize, usize)>,
        /// Reflect off the frame borders.
        #[arg(long)]
        bounce: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Track and score every sequence under a directory, in parallel.
    Bench {
        #[arg(long)]
        seqs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        gt: GtFormat,
    },
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_interval(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("expected `first-last`, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(a)?, num(b)?))
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<TrackerConfig> {
    match path {
        Some(p) => TrackerConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(TrackerConfig::default()),
    }
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Track {
            seq,
            out,
            config,
            render,
            dump_masks,
            gt,
        } => {
            let cfg = load_config(config.as_ref())?;
            let spec = load_sequence_with(&seq, gt.options())?;
            let table = load_color_table(&cfg)?;
            let opts = RunOptions {
                render_dir: render,
                mask_dir: dump_masks,
            };
            let run = run_sequence(&spec, &cfg, table, &opts)
                .with_context(|| format!("tracking {}", seq.display()))?;
            run.save(&out)?;
        }
        Command::Eval {
            run,
            seq,
            out,
            curves,
            gt,
        } => {
            let run = TrackRun::load(&run)?;
            let spec = load_sequence_with(&seq, gt.options())?;
            let metrics = compute_ope(&run.boxes(), &spec.ground_truth)?;
            let text = serde_json::to_string_pretty(&metrics)? + "\n";
            std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = curves {
                std::fs::write(&path, metrics.curves_csv())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Synth {
            scenario,
            out,
            frames,
            width,
            height,
            target_w,
            target_h,
            start,
            velocity,
            zoom,
            occlude,
            bounce,
            seed,
        } => {
            let mut p = SynthParams::new(scenario);
            macro_rules! set {
                ($($field:ident <- $value:expr),* $(,)?) => {
                    $( if let Some(v) = $value { p.$field = v; } )*
                };
            }
            set!(frames <- frames, width <- width, height <- height, target_w <- target_w,
                 target_h <- target_h, start <- start, velocity <- velocity, zoom <- zoom,
                 seed <- seed);
            if occlude.is_some() {
                p.occlusion = occlude;
            }
            p.bounce |= bounce;
            synth_sequence(&p, &out)?;
        }
        Command::Bench {
            seqs,
            out,
            config,
            threads,
            gt,
        } => {
            let cfg = load_config(config.as_ref())?;
            let report = match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()?
                    .install(|| bench(&seqs, &cfg, gt.options()))?,
                None => bench(&seqs, &cfg, gt.options())?,
            };
            report.save(&out)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; diagnostics go to stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
