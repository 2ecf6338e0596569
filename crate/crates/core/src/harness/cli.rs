use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::metrics::write_text;
use super::render::write_svg_frames;
use super::{
    compare, evaluate, format_table, metrics_csv, render, run_episode, verify_trace, EpisodeId,
    EpisodeTrace, HarnessError, PlannerMode, RenderStyle, RunConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "ltlplan",
    version,
    about = "Rule-monitored option planning at a four-way stop"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write its trace.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_planner)]
        planner: Option<PlannerMode>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, default_value_t = 0)]
        episode: usize,
        /// Also render the episode (ascii to stdout, svg into OUT/frames).
        #[arg(long, value_parser = parse_style)]
        render: Option<RenderStyle>,
    },
    /// Outcome rates over trials x episodes.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// manual, mcts, or compare (both on matched seeds).
        #[arg(long, default_value = "compare")]
        planner: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Write one trace per episode under OUT/traces.
        #[arg(long)]
        traces: bool,
    },
    /// Check a property against a JSONL trace of valuations.
    Verify {
        #[arg(long)]
        property: String,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Turn a trace into frames.
    Render {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "ascii", value_parser = parse_style)]
        style: RenderStyle,
        #[arg(long, default_value = "out/frames")]
        out: PathBuf,
    },
}

fn parse_planner(s: &str) -> Result<PlannerMode, String> {
    s.parse()
}

fn parse_style(s: &str) -> Result<RenderStyle, String> {
    s.parse()
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, HarnessError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), HarnessError> {
    let stdout_err = |e: std::io::Error| HarnessError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    match cmd {
        Command::Run {
            config,
            seed,
            planner,
            out: dir,
            trial,
            episode,
            render: style,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = planner {
                cfg.planner.mode = p;
            }
            cfg.validate()?;
            let ctx = cfg.sim_context()?;
            let id = EpisodeId {
                seed: cfg.seed,
                trial,
                episode,
            };
            let result = match run_episode(&cfg, &ctx, cfg.planner.mode, id, true) {
                Ok(r) => r,
                Err(HarnessError::Simulation { t, source, partial }) => {
                    let path = dir.join("error_trace.jsonl");
                    partial.write(&path)?;
                    return Err(HarnessError::Simulation { t, source, partial });
                }
                Err(e) => return Err(e),
            };
            let trace = result.trace.expect("recorded");
            let path = dir.join("trace.jsonl");
            trace.write(&path)?;
            writeln!(
                out,
                "outcome={:?} steps={} decisions={} value={:.4} trace={}",
                result.outcome,
                result.steps,
                result.decision_times.len(),
                result.value,
                path.display()
            )
            .map_err(stdout_err)?;
            match style {
                Some(RenderStyle::Ascii) => {
                    for f in render(&trace, RenderStyle::Ascii)? {
                        out.write_all(f.as_bytes()).map_err(stdout_err)?;
                    }
                }
                Some(RenderStyle::Svg) => {
                    let n =
                        write_svg_frames(&render(&trace, RenderStyle::Svg)?, &dir.join("frames"))?;
                    writeln!(out, "wrote {n} frames").map_err(stdout_err)?;
                }
                None => {}
            }
        }
        Command::Evaluate {
            config,
            seed,
            planner,
            out: dir,
            threads,
            trials,
            episodes,
            traces,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            cfg.out_dir = Some(dir.clone());
            cfg.write_traces |= traces;
            if planner == "compare" {
                cfg.validate()?;
                let c = compare(&cfg)?;
                let (mcts_only, manual_only) = c.paired_wins();
                write!(out, "{}", c.table()).map_err(stdout_err)?;
                writeln!(
                    out,
                    "paired: mcts-only successes {mcts_only}, manual-only successes {manual_only}"
                )
                .map_err(stdout_err)?;
            } else {
                let mode: PlannerMode = planner.parse().map_err(HarnessError::Config)?;
                cfg.planner.mode = mode;
                cfg.validate()?;
                let m = evaluate(&cfg, mode)?;
                write_text(
                    &dir.join(format!("table_{}.txt", mode.name())),
                    &format_table(&[&m]),
                )?;
                write!(out, "{}", metrics_csv(&m)).map_err(stdout_err)?;
                write!(out, "{}", format_table(&[&m])).map_err(stdout_err)?;
            }
        }
        Command::Verify { property, trace } => {
            let f = std::fs::File::open(&trace).map_err(super::io_err(&trace))?;
            let report = verify_trace(&property, std::io::BufReader::new(f))?;
            match report.violated_at {
                Some(i) => writeln!(out, "Violated at step {i}"),
                None => writeln!(out, "{}", report.verdict),
            }
            .map_err(stdout_err)?;
        }
        Command::Render {
            trace,
            style,
            out: dir,
        } => {
            let f = std::fs::File::open(&trace).map_err(super::io_err(&trace))?;
            let t = EpisodeTrace::from_jsonl(std::io::BufReader::new(f))?;
            let frames = render(&t, style)?;
            match style {
                RenderStyle::Ascii => {
                    for f in &frames {
                        out.write_all(f.as_bytes()).map_err(stdout_err)?;
                    }
                }
                RenderStyle::Svg => {
                    let n = write_svg_frames(&frames, &dir)?;
                    writeln!(out, "wrote {n} frames to {}", dir.display()).map_err(stdout_err)?;
                }
            }
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 on usage errors, 2 on runtime errors.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let _ = writeln!(err, "  caused by: {s}");
                source = s.source();
            }
            2
        }
    }
}
