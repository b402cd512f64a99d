//! Repeated decoding over a prompt set with per-run metrics and averages.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::decode::{decode, unguarded_decode, DecodeConfig, GenerationOutcome, Status};
use crate::lm::ToyLm;
use crate::metrics::{lcs, lcs_norm, perplexity, unsafety_score, MetricsRecord};
use crate::timing::TimingStrategy;
use crate::tokenize::split;
use crate::validate::SimilarityOracle;

pub const DEFAULT_REPEATS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptCase {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

/// Millisecond time source. The core never reads a clock on its own.
pub trait Clock {
    fn now_ms(&mut self) -> f64;
}

/// Always reads zero, which keeps reports reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&mut self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub repeats: usize,
    /// Run the baseline without any validation.
    pub unguarded: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            repeats: DEFAULT_REPEATS,
            unguarded: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub seed: u64,
    pub status: Option<Status>,
    pub texts: Vec<String>,
    pub metrics: MetricsRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Arithmetic means of [`MetricsRecord`] fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub lcs: f64,
    pub lcs_norm: f64,
    pub ppl: f64,
    pub unsafe_sim: f64,
    pub s_count: f64,
    pub v_count: f64,
    pub rb_count: f64,
    pub wall_time_ms: f64,
}

impl MetricsSummary {
    pub fn mean<'r, I: IntoIterator<Item = &'r MetricsRecord>>(records: I) -> Self {
        let mut sum = Self::default();
        let mut n = 0usize;
        for r in records {
            n += 1;
            sum.lcs += r.lcs as f64;
            sum.lcs_norm += r.lcs_norm;
            sum.ppl += r.ppl;
            sum.unsafe_sim += r.unsafe_sim;
            sum.s_count += r.s_count as f64;
            sum.v_count += r.v_count as f64;
            sum.rb_count += r.rb_count as f64;
            sum.wall_time_ms += r.wall_time_ms;
        }
        if n == 0 {
            return sum;
        }
        let d = n as f64;
        Self {
            lcs: sum.lcs / d,
            lcs_norm: sum.lcs_norm / d,
            ppl: sum.ppl / d,
            unsafe_sim: sum.unsafe_sim / d,
            s_count: sum.s_count / d,
            v_count: sum.v_count / d,
            rb_count: sum.rb_count / d,
            wall_time_ms: sum.wall_time_ms / d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptReport {
    pub id: String,
    pub runs: Vec<RunRecord>,
    pub mean: MetricsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    /// Strategy label, or `unguarded`.
    pub label: String,
    pub config: DecodeConfig,
    pub options: EvalOptions,
    pub prompts: Vec<PromptReport>,
    pub aggregate: MetricsSummary,
    /// Runs that ended with [`Status::Failed`] or a decode error.
    pub failed_runs: usize,
}

impl GenerationReport {
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.prompts.iter().flat_map(|p| p.runs.iter())
    }
}

/// Scores the first output of `outcome`; an empty completion when there is none.
pub fn score_outcome<O: SimilarityOracle + ?Sized>(
    outcome: &GenerationOutcome,
    oracle: &O,
    reference: Option<&str>,
) -> MetricsRecord {
    let (text, logprob, len) = match outcome.outputs.first() {
        Some(c) => (c.text.as_str(), c.logprob, c.tokens.len()),
        None => ("", 0.0, 0),
    };
    let pieces = split(text);
    let reference = reference.map(split).unwrap_or_default();
    MetricsRecord {
        lcs: lcs(&pieces, &reference),
        lcs_norm: lcs_norm(&pieces, &reference),
        ppl: perplexity(logprob, len),
        unsafe_sim: unsafety_score(text, oracle),
        s_count: outcome.steps,
        v_count: outcome.validations,
        rb_count: outcome.rollbacks,
        wall_time_ms: outcome.wall_time_ms,
    }
}

/// Decodes every case `options.repeats` times; repetition `r` uses seed `cfg.seed + r`.
pub fn evaluate<O, C>(
    cases: &[PromptCase],
    lm: &ToyLm,
    oracle: &O,
    cfg: &DecodeConfig,
    options: &EvalOptions,
    clock: &mut C,
) -> GenerationReport
where
    O: SimilarityOracle + ?Sized,
    C: Clock + ?Sized,
{
    let mut prompts = Vec::with_capacity(cases.len());
    let mut failed_runs = 0;
    for case in cases {
        let mut runs = Vec::with_capacity(options.repeats);
        for repeat in 0..options.repeats {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = cfg.seed.wrapping_add(repeat as u64);
            let start = clock.now_ms();
            let result = if options.unguarded {
                unguarded_decode(lm, &case.prompt, &run_cfg)
            } else {
                decode(lm, oracle, &case.prompt, &run_cfg)
            };
            let elapsed = clock.now_ms() - start;
            let record = match result {
                Ok(mut outcome) => {
                    outcome.wall_time_ms = elapsed;
                    if outcome.status == Status::Failed {
                        failed_runs += 1;
                    }
                    RunRecord {
                        repeat,
                        seed: run_cfg.seed,
                        status: Some(outcome.status),
                        texts: outcome.texts().into_iter().map(String::from).collect(),
                        metrics: score_outcome(&outcome, oracle, case.reference.as_deref()),
                        error: None,
                    }
                }
                Err(e) => {
                    failed_runs += 1;
                    RunRecord {
                        repeat,
                        seed: run_cfg.seed,
                        status: None,
                        texts: Vec::new(),
                        metrics: MetricsRecord::default(),
                        error: Some(format!("{e}")),
                    }
                }
            };
            runs.push(record);
        }
        prompts.push(PromptReport {
            id: case.id.clone(),
            mean: MetricsSummary::mean(runs.iter().map(|r| &r.metrics)),
            runs,
        });
    }
    let aggregate = MetricsSummary::mean(prompts.iter().flat_map(|p| p.runs.iter().map(|r| &r.metrics)));
    GenerationReport {
        label: if options.unguarded {
            String::from("unguarded")
        } else {
            cfg.strategy.label()
        },
        config: cfg.clone(),
        options: *options,
        prompts,
        aggregate,
        failed_runs,
    }
}

/// One report per strategy over the identical workload and seeds.
pub fn compare<O, C>(
    cases: &[PromptCase],
    lm: &ToyLm,
    oracle: &O,
    cfg: &DecodeConfig,
    strategies: &[TimingStrategy],
    options: &EvalOptions,
    clock: &mut C,
) -> Vec<GenerationReport>
where
    O: SimilarityOracle + ?Sized,
    C: Clock + ?Sized,
{
    strategies
        .iter()
        .map(|strategy| {
            let cfg = DecodeConfig {
                strategy: *strategy,
                ..cfg.clone()
            };
            evaluate(cases, lm, oracle, &cfg, options, clock)
        })
        .collect()
}

/// Plain-text table with one row per report: PPL, unsafety, time, #S, #V, #RB.
pub fn ablation_table(reports: &[GenerationReport], show_time: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>9} {:>9} {:>10} {:>8} {:>8} {:>6}",
        "Approach", "PPL", "Unsafety", "Time(ms)", "#S", "#V", "#RB"
    );
    for r in reports {
        let m = &r.aggregate;
        let time = if show_time {
            format!("{:.2}", m.wall_time_ms)
        } else {
            String::from("-")
        };
        let _ = writeln!(
            out,
            "{:<16} {:>9.3} {:>9.3} {:>10} {:>8.1} {:>8.1} {:>6.2}",
            r.label, m.ppl, m.unsafe_sim, time, m.s_count, m.v_count, m.rb_count
        );
    }
    out
}
