use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use safedecode_core::embed::{DEFAULT_DIMS, DEFAULT_SEED, EMBEDDER_VERSION};
use safedecode_core::harness::{compare, evaluate, Clock, EvalOptions, GenerationReport, NoClock};
use safedecode_core::{HashingEmbedder, Sampler, TimingStrategy};

use crate::config::{Overrides, RunConfig, Workload};
use crate::report::RunReport;
use crate::{corpus, snapshot, store_file, Error, Result, WallClock};

#[derive(Debug, Parser)]
#[command(
    name = "safedecode",
    version,
    about = "Similarity-guarded decoding over toy n-gram models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed a corpus (one example per line) into a demonstration store.
    BuildStore {
        corpus: PathBuf,
        store: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DIMS)]
        dims: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        hash_seed: u64,
    },
    /// Train an n-gram model on a corpus and write a snapshot.
    Train {
        corpus: PathBuf,
        snapshot: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
    },
    /// Decode every prompt with one timing strategy and write a report.
    Generate {
        config: PathBuf,
        #[arg(long)]
        strategy: Option<TimingStrategy>,
        /// Decode without any validation.
        #[arg(long)]
        unguarded: bool,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Decode every prompt once per strategy and write an ablation table.
    Compare {
        config: PathBuf,
        /// Strategies to compare, comma separated; replaces the config list.
        #[arg(long = "strategy", value_delimiter = ',')]
        strategies: Vec<TimingStrategy>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Print version and file-format information.
    Version,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    #[arg(long)]
    pub thrv: Option<f64>,
    #[arg(long)]
    pub thr_rb: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub sampler: Option<Sampler>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Record wall-clock time per run (makes reports non-reproducible).
    #[arg(long)]
    pub timings: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            thr_v: self.thrv,
            thr_rb: self.thr_rb,
            lambda: self.lambda,
            k: self.k,
            max_tokens: self.max_tokens,
            sampler: self.sampler,
            seed: self.seed,
            repeats: self.repeats,
            timings: self.timings,
            output: self.output.clone(),
            table: self.table.clone(),
            ..Overrides::default()
        }
    }
}

/// How a successful invocation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success,
    /// The report was written but some runs failed outright.
    RunsFailed,
}

impl Exit {
    pub fn code(self) -> u8 {
        match self {
            Self::Success => 0,
            Self::RunsFailed => 1,
        }
    }
}

/// Exit code for errors: 2 for bad configuration or input contents, 3 for I/O.
pub fn error_code(err: &Error) -> u8 {
    if err.is_io() {
        3
    } else {
        2
    }
}

pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<Exit> {
    match cli.command {
        Command::BuildStore {
            corpus: src,
            store,
            dims,
            hash_seed,
        } => {
            let docs = corpus::read_lines(&src)?;
            if docs.is_empty() {
                return Err(Error::Config(format!("{}: corpus has no examples", src.display())));
            }
            let embedder = HashingEmbedder::new(dims, hash_seed)?;
            let built = store_file::build_store(&docs, embedder)?;
            store_file::save_store(&built, &store)?;
            let noun = if built.len() == 1 { "example" } else { "examples" };
            say(out, format_args!("wrote {} {noun} to {}", built.len(), store.display()))?;
        }
        Command::Train {
            corpus: src,
            snapshot: dst,
            order,
            alpha,
        } => {
            let docs = corpus::read_lines(&src)?;
            let lm = safedecode_core::train_ngram(&docs, order, alpha).map_err(|e| Error::Invalid {
                path: src.clone(),
                source: e,
            })?;
            snapshot::save_lm(&lm, &dst)?;
            say(
                out,
                format_args!(
                    "trained order-{order} model: {} tokens, {} contexts -> {}",
                    lm.vocab_size(),
                    lm.contexts().len(),
                    dst.display()
                ),
            )?;
        }
        Command::Generate {
            config,
            strategy,
            unguarded,
            run,
        } => {
            let mut o = run.overrides();
            o.strategy = strategy;
            o.unguarded = unguarded;
            let cfg = load(&config, &o)?;
            let w = Workload::open(&cfg)?;
            let options = EvalOptions {
                repeats: cfg.repeats,
                unguarded: cfg.unguarded,
            };
            let report = with_clock(cfg.timings, |clock| {
                vec![evaluate(&w.cases, &w.lm, &w.store, &w.decode, &options, clock)]
            });
            return finish("generate", report, &cfg, out);
        }
        Command::Compare {
            config,
            strategies,
            run,
        } => {
            let mut o = run.overrides();
            if !strategies.is_empty() {
                o.strategies = Some(strategies);
            }
            let cfg = load(&config, &o)?;
            if cfg.strategies.len() < 2 {
                return Err(Error::Config("compare needs at least two strategies".into()));
            }
            let w = Workload::open(&cfg)?;
            let options = EvalOptions {
                repeats: cfg.repeats,
                unguarded: false,
            };
            let reports = with_clock(cfg.timings, |clock| {
                compare(&w.cases, &w.lm, &w.store, &w.decode, &cfg.strategies, &options, clock)
            });
            return finish("compare", reports, &cfg, out);
        }
        Command::Version => {
            say(out, format_args!("safedecode {}", env!("CARGO_PKG_VERSION")))?;
            say(
                out,
                format_args!("embedder {EMBEDDER_VERSION} (dims {DEFAULT_DIMS}, seed {DEFAULT_SEED:#x})"),
            )?;
            say(
                out,
                format_args!(
                    "formats {} v{}, {} v{}, {}",
                    store_file::STORE_FORMAT,
                    store_file::STORE_FORMAT_VERSION,
                    snapshot::LM_FORMAT,
                    snapshot::LM_FORMAT_VERSION,
                    crate::report::REPORT_FORMAT
                ),
            )?;
        }
    }
    Ok(Exit::Success)
}

fn load(path: &std::path::Path, o: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(o)?;
    Ok(cfg)
}

fn with_clock<T>(timings: bool, f: impl FnOnce(&mut dyn Clock) -> T) -> T {
    if timings {
        f(&mut WallClock::default())
    } else {
        f(&mut NoClock)
    }
}

fn finish<W: Write>(command: &str, reports: Vec<GenerationReport>, cfg: &RunConfig, out: &mut W) -> Result<Exit> {
    let report = RunReport::new(command, reports, cfg.timings);
    report.write(&cfg.output)?;
    if let Some(table) = &cfg.table {
        std::fs::write(table, &report.table).map_err(|e| Error::io(table, e))?;
    }
    write!(out, "{}", report.table).map_err(|e| Error::io(std::path::Path::new("<stdout>"), e))?;
    let failed = report.failed_runs();
    say(
        out,
        format_args!(
            "{} of {} runs failed; report written to {}",
            failed,
            report.total_runs(),
            cfg.output.display()
        ),
    )?;
    Ok(if failed == 0 { Exit::Success } else { Exit::RunsFailed })
}

fn say<W: Write>(out: &mut W, args: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{args}").map_err(|e| Error::io(std::path::Path::new("<stdout>"), e))
}
