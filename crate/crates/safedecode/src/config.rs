//! TOML run configurations.
//!
//! ```toml
//! corpus = "corpus.txt"        # or: snapshot = "lm.json"
//! store = "store.jsonl"
//! prompts = "prompts.jsonl"
//! output = "report.json"
//! table = "table.txt"          # optional
//! repeats = 5
//! strategies = ["step1", "stepN:5", "expo2", "contextwise"]
//!
//! [lm]
//! order = 3
//! alpha = 0.1
//!
//! [decode]
//! k = 2
//! max_tokens = 50
//! thr_v = 0.3
//! strategy = "contextwise:100"
//! sampler = "beam"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use safedecode_core::harness::{PromptCase, DEFAULT_REPEATS};
use safedecode_core::{DecodeConfig, DemoStore, Sampler, TimingStrategy, ToyLm};
use serde::{Deserialize, Serialize};

use crate::{corpus, prompts, snapshot, store_file, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub snapshot: Option<PathBuf>,
    pub store: PathBuf,
    pub prompts: PathBuf,
    /// JSON lines of `{"id", "reference"}` overriding inline references.
    #[serde(default)]
    pub references: Option<PathBuf>,
    pub output: PathBuf,
    #[serde(default)]
    pub table: Option<PathBuf>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Strategies for `compare`; `generate` uses `decode.strategy`.
    #[serde(default)]
    pub strategies: Vec<TimingStrategy>,
    #[serde(default)]
    pub unguarded: bool,
    /// Measure wall time. Off by default so reports are byte-reproducible.
    #[serde(default)]
    pub timings: bool,
    #[serde(default)]
    pub lm: LmSection,
    #[serde(default)]
    pub decode: DecodeSection,
}

fn default_repeats() -> usize {
    DEFAULT_REPEATS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmSection {
    pub order: usize,
    pub alpha: f64,
}

impl Default for LmSection {
    fn default() -> Self {
        Self { order: 3, alpha: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeSection {
    pub k: usize,
    pub max_tokens: usize,
    pub thr_v: f64,
    pub thr_rb: f64,
    pub strategy: TimingStrategy,
    pub sampler: Sampler,
    pub seed: u64,
    pub max_rollbacks_per_step: usize,
    /// Surface form of the token that ends a completion, e.g. `"."`.
    pub end_token: Option<String>,
}

impl Default for DecodeSection {
    fn default() -> Self {
        let d = DecodeConfig::default();
        Self {
            k: d.k,
            max_tokens: d.max_tokens,
            thr_v: d.thr_v,
            thr_rb: d.thr_rb,
            strategy: d.strategy,
            sampler: d.sampler,
            seed: d.seed,
            max_rollbacks_per_step: d.max_rollbacks_per_step,
            end_token: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub thr_v: Option<f64>,
    pub thr_rb: Option<f64>,
    pub lambda: Option<f64>,
    pub k: Option<usize>,
    pub max_tokens: Option<usize>,
    pub strategy: Option<TimingStrategy>,
    pub strategies: Option<Vec<TimingStrategy>>,
    pub sampler: Option<Sampler>,
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub unguarded: bool,
    pub timings: bool,
    pub output: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|span| text[..span.start].matches('\n').count() + 1)
                .unwrap_or(1);
            Error::parse(path, line, e.message())
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.corpus,
            &mut self.snapshot,
            &mut self.references,
            &mut self.table,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
        join(&mut self.store);
        join(&mut self.prompts);
        join(&mut self.output);
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        let d = &mut self.decode;
        if let Some(v) = o.thr_v {
            d.thr_v = v;
        }
        if let Some(v) = o.thr_rb {
            d.thr_rb = v;
        }
        if let Some(v) = o.k {
            d.k = v;
        }
        if let Some(v) = o.max_tokens {
            d.max_tokens = v;
        }
        if let Some(v) = o.strategy {
            d.strategy = v;
        }
        if let Some(v) = o.sampler {
            d.sampler = v;
        }
        if let Some(v) = o.seed {
            d.seed = v;
        }
        if let Some(v) = &o.strategies {
            self.strategies = v.clone();
        }
        if let Some(v) = o.repeats {
            self.repeats = v;
        }
        if let Some(v) = &o.output {
            self.output = v.clone();
        }
        if let Some(v) = &o.table {
            self.table = Some(v.clone());
        }
        self.unguarded |= o.unguarded;
        self.timings |= o.timings;
        if let Some(lambda) = o.lambda {
            let mut touched = false;
            for s in std::iter::once(&mut self.decode.strategy).chain(self.strategies.iter_mut()) {
                if let TimingStrategy::ContextWise { lambda: l } = s {
                    *l = lambda;
                    touched = true;
                }
            }
            if !touched {
                return Err(Error::Config(
                    "--lambda given but no contextwise strategy is configured".into(),
                ));
            }
        }
        Ok(())
    }

    /// Fails on the first missing input or output directory, before any work.
    pub fn check_paths(&self) -> Result<()> {
        match (&self.corpus, &self.snapshot) {
            (Some(_), Some(_)) => return Err(Error::Config("set either `corpus` or `snapshot`, not both".into())),
            (None, None) => return Err(Error::Config("one of `corpus` or `snapshot` is required".into())),
            _ => {}
        }
        let inputs = [&self.corpus, &self.snapshot, &self.references]
            .into_iter()
            .flatten()
            .chain([&self.store, &self.prompts]);
        for p in inputs {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        for p in std::iter::once(&self.output).chain(self.table.as_ref()) {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            if !dir.is_dir() {
                return Err(Error::Config(format!(
                    "output directory {} does not exist",
                    dir.display()
                )));
            }
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything a run needs, loaded and validated.
#[derive(Debug)]
pub struct Workload {
    pub lm: ToyLm,
    pub store: DemoStore,
    pub cases: Vec<PromptCase>,
    pub decode: DecodeConfig,
}

impl Workload {
    pub fn open(cfg: &RunConfig) -> Result<Self> {
        cfg.check_paths()?;
        let lm = match (&cfg.corpus, &cfg.snapshot) {
            (Some(path), _) => {
                let docs = corpus::read_lines(path)?;
                safedecode_core::train_ngram(&docs, cfg.lm.order, cfg.lm.alpha).map_err(|e| Error::invalid(path, e))?
            }
            (None, Some(path)) => snapshot::load_lm(path)?,
            (None, None) => unreachable!("checked above"),
        };
        let store = store_file::load_store(&cfg.store)?;
        let mut cases = prompts::read_prompts(&cfg.prompts)?;
        if let Some(path) = &cfg.references {
            prompts::attach_references(&mut cases, path)?;
        }
        let d = &cfg.decode;
        let end_token = match &d.end_token {
            Some(surface) => Some(
                lm.vocab()
                    .id(&surface.to_lowercase())
                    .ok_or_else(|| Error::Config(format!("end_token `{surface}` is not in the model vocabulary")))?,
            ),
            None => None,
        };
        let decode = DecodeConfig {
            k: d.k,
            max_tokens: d.max_tokens,
            thr_v: d.thr_v,
            thr_rb: d.thr_rb,
            strategy: d.strategy,
            sampler: d.sampler,
            seed: d.seed,
            max_rollbacks_per_step: d.max_rollbacks_per_step,
            end_token,
        };
        decode.check()?;
        for s in &cfg.strategies {
            s.check()?;
        }
        Ok(Self {
            lm,
            store,
            cases,
            decode,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("/runs/exp/run.toml"))
    }

    const MINIMAL: &str = "corpus = 'c.txt'\nstore = 's.jsonl'\nprompts = 'p.jsonl'\noutput = '/tmp/r.json'\n";

    #[test]
    fn relative_paths_follow_the_config_file() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.corpus.as_deref(), Some(Path::new("/runs/exp/c.txt")));
        assert_eq!(cfg.output, Path::new("/tmp/r.json"));
        assert_eq!(cfg.repeats, DEFAULT_REPEATS);
        assert_eq!(cfg.decode, DecodeSection::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse(&format!("{MINIMAL}thrv = 0.3\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
        assert!(parse(&format!("{MINIMAL}[decode]\nbeam = 3\n")).is_err());
    }

    #[test]
    fn strategies_parse_from_strings() {
        let cfg = parse(&format!(
            "{MINIMAL}strategies = ['step1', 'stepN:5', 'expo2', 'contextwise:50']\n[decode]\nstrategy = 'step5'\n"
        ))
        .unwrap();
        assert_eq!(
            cfg.strategies,
            [
                TimingStrategy::Step1,
                TimingStrategy::StepN(5),
                TimingStrategy::Expo2,
                TimingStrategy::ContextWise { lambda: 50.0 }
            ]
        );
        assert_eq!(cfg.decode.strategy, TimingStrategy::StepN(5));
    }

    #[test]
    fn lambda_override_needs_a_contextwise_strategy() {
        let mut cfg = parse(&format!("{MINIMAL}[decode]\nstrategy = 'expo2'\n")).unwrap();
        let o = Overrides {
            lambda: Some(10.0),
            ..Overrides::default()
        };
        assert!(cfg.apply(&o).is_err());
        cfg.strategies = vec![TimingStrategy::Step1, TimingStrategy::default()];
        cfg.apply(&o).unwrap();
        assert_eq!(cfg.strategies[1], TimingStrategy::ContextWise { lambda: 10.0 });
    }
}
