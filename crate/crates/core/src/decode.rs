//! Safeguarded decoding loops: beam search, greedy search and top-k sampling.
//!
//! At every validation step the decoder proposes the most likely
//! extensions, validates the resulting completions and replaces the invalid
//! ones with the next most likely extensions until the pool is full. When
//! the invalid fraction of one refill round reaches `thr_rb` it rolls back
//! to the previous validation checkpoint, poisons the tokens its current
//! continuations had chosen at that step and retries from there.
//!
//! Rejected and poisoned tokens are remembered per completion prefix. A
//! prefix of length `t` only occurs at step `t`, so every entry is consulted
//! at its own step only.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::lm::{CandidateToken, ToyLm};
use crate::timing::TimingStrategy;
use crate::tokenize::TokenId;
use crate::validate::{SimilarityOracle, Validator};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    TopK,
    Beam,
    /// Beam search with a beam of one.
    Greedy,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TopK => "topk",
            Self::Beam => "beam",
            Self::Greedy => "greedy",
        })
    }
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "topk" | "top-k" => Ok(Self::TopK),
            "beam" => Ok(Self::Beam),
            "greedy" => Ok(Self::Greedy),
            _ => Err(Error::Config(format!("unknown sampler `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// Sample size for top-k, beam size for beam search.
    pub k: usize,
    pub max_tokens: usize,
    pub thr_v: f64,
    pub thr_rb: f64,
    pub strategy: TimingStrategy,
    pub sampler: Sampler,
    pub seed: u64,
    pub max_rollbacks_per_step: usize,
    /// Token that freezes a candidate once emitted.
    #[serde(default)]
    pub end_token: Option<TokenId>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_tokens: 50,
            thr_v: 0.3,
            thr_rb: 0.5,
            strategy: TimingStrategy::default(),
            sampler: Sampler::Beam,
            seed: 0,
            max_rollbacks_per_step: 3,
            end_token: None,
        }
    }
}

impl DecodeConfig {
    pub fn check(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.thr_v.is_nan() || self.thr_v <= 0.0 {
            return Err(Error::Config(format!("thr_v must be positive, got {}", self.thr_v)));
        }
        if !(self.thr_rb > 0.0 && self.thr_rb <= 1.0) {
            return Err(Error::Config(format!("thr_rb must lie in (0, 1], got {}", self.thr_rb)));
        }
        self.strategy.check()
    }

    /// Number of hypotheses kept between steps.
    pub fn width(&self) -> usize {
        match self.sampler {
            Sampler::Greedy => 1,
            _ => self.k,
        }
    }

    /// Number of validated candidates a validation step tries to collect.
    pub fn pool_size(&self) -> usize {
        match self.sampler {
            Sampler::TopK => self.k,
            Sampler::Beam | Sampler::Greedy => 2 * self.width(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Complete,
    ExhaustedBestEffort,
    Failed,
}

/// One passed validation in a completion's history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    /// Validation step; `max_tokens` for the closing check.
    pub step: usize,
    pub s_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub tokens: Vec<TokenId>,
    /// Cumulative log-probability of `tokens` given the prompt.
    pub logprob: f64,
    pub checks: Vec<CheckRecord>,
}

/// A proposed candidate inside one refill round.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub prefix: Vec<TokenId>,
    /// `None` when a frozen candidate is re-checked unchanged.
    pub token: Option<TokenId>,
    pub s_max: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeEvent {
    Round {
        step: usize,
        closing: bool,
        proposals: Vec<Proposal>,
    },
    Rollback {
        from_step: usize,
        to_step: usize,
        poisoned: Vec<(Vec<TokenId>, TokenId)>,
    },
    Exhausted {
        step: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    pub outputs: Vec<Completion>,
    /// Validation steps visited (#S).
    pub steps: usize,
    /// Validator calls (#V).
    pub validations: usize,
    /// Rollbacks (#RB).
    pub rollbacks: usize,
    /// Filled in by callers that own a clock.
    pub wall_time_ms: f64,
    pub status: Status,
    pub trace: Vec<DecodeEvent>,
}

impl GenerationOutcome {
    pub fn texts(&self) -> Vec<&str> {
        self.outputs.iter().map(|c| c.text.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    tokens: Vec<TokenId>,
    logprob: f64,
    finished: bool,
    checked_len: usize,
    checks: Vec<CheckRecord>,
}

impl Candidate {
    fn empty() -> Self {
        Self {
            tokens: Vec::new(),
            logprob: 0.0,
            finished: false,
            checked_len: 0,
            checks: Vec::new(),
        }
    }

    fn extended(&self, next: &CandidateToken, end_token: Option<TokenId>) -> Self {
        let mut c = self.clone();
        c.tokens.push(next.token);
        c.logprob += next.logprob;
        c.finished = end_token == Some(next.token);
        c
    }

    fn passed(&mut self, step: usize, s_max: f64) {
        self.checked_len = self.tokens.len();
        self.checks.push(CheckRecord { step, s_max });
    }
}

#[derive(Debug, Clone)]
struct Checkpoint {
    step: usize,
    /// Candidates before the step's extension.
    parents: Vec<Candidate>,
    rng: ChaCha8Rng,
}

/// A beam extension: `parent` followed by `next`, or `parent` itself when frozen.
struct Extension {
    parent: usize,
    next: Option<CandidateToken>,
    score: f64,
}

fn rank_extensions(a: &Extension, b: &Extension) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.parent.cmp(&b.parent))
        .then(a.next.map(|n| n.token).cmp(&b.next.map(|n| n.token)))
}

enum StepOutcome {
    Accepted { s_max_valid: f64 },
    Rollback,
}

struct Exhaustion;

struct Run<'a, O: ?Sized> {
    lm: &'a ToyLm,
    validator: Option<Validator<'a, O>>,
    cfg: &'a DecodeConfig,
    prompt: Vec<TokenId>,
    rng: ChaCha8Rng,
    candidates: Vec<Candidate>,
    skip: BTreeMap<Vec<TokenId>, BTreeSet<TokenId>>,
    checkpoints: Vec<Checkpoint>,
    root: Checkpoint,
    rollbacks_at: BTreeMap<usize, usize>,
    steps: usize,
    rollbacks: usize,
    last_valid: Option<Vec<Candidate>>,
    trace: Vec<DecodeEvent>,
}

/// Safeguarded decoding of `prompt` against `oracle`.
pub fn decode<O: SimilarityOracle + ?Sized>(
    lm: &ToyLm,
    oracle: &O,
    prompt: &str,
    cfg: &DecodeConfig,
) -> Result<GenerationOutcome> {
    cfg.check()?;
    let validator = Validator::new(oracle, cfg.thr_v)?;
    Ok(Run::new(lm, Some(validator), prompt, cfg).execute())
}

/// The same sampler mechanics with validation disabled.
pub fn unguarded_decode(lm: &ToyLm, prompt: &str, cfg: &DecodeConfig) -> Result<GenerationOutcome> {
    cfg.check()?;
    Ok(Run::<dyn SimilarityOracle>::new(lm, None, prompt, cfg).execute())
}

impl<'a, O: SimilarityOracle + ?Sized> Run<'a, O> {
    fn new(lm: &'a ToyLm, validator: Option<Validator<'a, O>>, prompt: &str, cfg: &'a DecodeConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let initial = match cfg.sampler {
            Sampler::TopK => alloc::vec![Candidate::empty(); cfg.k],
            Sampler::Beam | Sampler::Greedy => alloc::vec![Candidate::empty()],
        };
        Self {
            lm,
            validator,
            cfg,
            prompt: lm.tokenize(prompt).into_inner(),
            root: Checkpoint {
                step: 0,
                parents: initial.clone(),
                rng: rng.clone(),
            },
            rng,
            candidates: initial,
            skip: BTreeMap::new(),
            checkpoints: Vec::new(),
            rollbacks_at: BTreeMap::new(),
            steps: 0,
            rollbacks: 0,
            last_valid: None,
            trace: Vec::new(),
        }
    }

    fn execute(mut self) -> GenerationOutcome {
        let max_tokens = self.cfg.max_tokens;
        let mut cur = 0;
        let mut next_check = self.cfg.strategy.first_step();
        loop {
            while cur < max_tokens && !self.candidates.iter().all(|c| c.finished) {
                if self.validator.is_some() && cur == next_check {
                    let snapshot = Checkpoint {
                        step: cur,
                        parents: self.candidates.clone(),
                        rng: self.rng.clone(),
                    };
                    match self.validation_step(cur) {
                        StepOutcome::Accepted { s_max_valid } => {
                            self.checkpoints.push(snapshot);
                            self.last_valid = Some(self.candidates.clone());
                            next_check = self
                                .cfg
                                .strategy
                                .next_step(cur, s_max_valid, max_tokens, self.cfg.thr_v);
                            cur += 1;
                        }
                        StepOutcome::Rollback => match self.rollback(cur) {
                            Ok(step) => {
                                cur = step;
                                next_check = step;
                            }
                            Err(Exhaustion) => return self.exhausted(cur),
                        },
                    }
                } else {
                    if self.plain_step().is_err() {
                        return self.exhausted(cur);
                    }
                    cur += 1;
                }
            }
            if self.validator.is_none() {
                break;
            }
            match self.closing_check(max_tokens) {
                StepOutcome::Accepted { .. } => break,
                StepOutcome::Rollback => match self.rollback(max_tokens) {
                    Ok(step) => {
                        cur = step;
                        next_check = step;
                    }
                    Err(Exhaustion) => return self.exhausted(max_tokens),
                },
            }
        }
        let candidates = core::mem::take(&mut self.candidates);
        self.finish(candidates, Status::Complete)
    }

    fn history_tail(&self, tokens: &[TokenId]) -> Vec<TokenId> {
        let n = self.lm.order() - 1;
        let from_completion = tokens.len().min(n);
        let from_prompt = n - from_completion;
        let mut tail: Vec<TokenId> = self.prompt[self.prompt.len().saturating_sub(from_prompt)..].to_vec();
        tail.extend_from_slice(&tokens[tokens.len() - from_completion..]);
        tail
    }

    fn skipped(&self, prefix: &[TokenId]) -> BTreeSet<TokenId> {
        self.skip.get(prefix).cloned().unwrap_or_default()
    }

    fn text_of(&self, tokens: &[TokenId]) -> String {
        self.lm.detokenize(tokens)
    }

    fn options(&self, parent: &Candidate, k: usize, exclude: &BTreeSet<TokenId>) -> Option<Vec<CandidateToken>> {
        self.lm
            .top_candidates(&self.history_tail(&parent.tokens), k, exclude)
            .ok()
    }

    /// Top `need` extensions over all beams, excluding per-parent token sets.
    fn beam_extensions(
        &self,
        need: usize,
        exclude: impl Fn(usize, &Candidate) -> Option<BTreeSet<TokenId>>,
    ) -> Vec<Extension> {
        let mut exts = Vec::new();
        for (i, parent) in self.candidates.iter().enumerate() {
            let Some(excluded) = exclude(i, parent) else {
                continue;
            };
            if parent.finished {
                exts.push(Extension {
                    parent: i,
                    next: None,
                    score: parent.logprob,
                });
                continue;
            }
            for next in self.options(parent, need, &excluded).unwrap_or_default() {
                exts.push(Extension {
                    parent: i,
                    next: Some(next),
                    score: parent.logprob + next.logprob,
                });
            }
        }
        exts.sort_by(rank_extensions);
        exts.truncate(need);
        exts
    }

    fn materialize(&self, ext: &Extension) -> Candidate {
        let parent = &self.candidates[ext.parent];
        match &ext.next {
            Some(next) => parent.extended(next, self.cfg.end_token),
            None => parent.clone(),
        }
    }

    fn draw(&mut self, options: &[CandidateToken]) -> CandidateToken {
        let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let total: f64 = options.iter().map(|c| c.prob).sum();
        let target = u * total;
        let mut acc = 0.0;
        for c in options {
            acc += c.prob;
            if target < acc {
                return *c;
            }
        }
        options[options.len() - 1]
    }

    fn plain_step(&mut self) -> core::result::Result<(), Exhaustion> {
        match self.cfg.sampler {
            Sampler::Beam | Sampler::Greedy => {
                let exts = self.beam_extensions(self.cfg.pool_size(), |_, p| Some(self.skipped(&p.tokens)));
                if exts.is_empty() {
                    return Err(Exhaustion);
                }
                let next: Vec<Candidate> = exts
                    .iter()
                    .take(self.cfg.width())
                    .map(|e| self.materialize(e))
                    .collect();
                self.candidates = next;
            }
            Sampler::TopK => {
                let mut next = Vec::with_capacity(self.candidates.len());
                for cand in core::mem::take(&mut self.candidates) {
                    if cand.finished {
                        next.push(cand);
                        continue;
                    }
                    let skip = self.skipped(&cand.tokens);
                    if let Some(options) = self.options(&cand, self.cfg.k, &skip) {
                        let token = self.draw(&options);
                        next.push(cand.extended(&token, self.cfg.end_token));
                    }
                }
                if next.is_empty() {
                    return Err(Exhaustion);
                }
                self.candidates = next;
            }
        }
        Ok(())
    }

    /// Validates `texts` once, counting the step on its first call.
    fn check_round(&mut self, first: &mut bool, texts: &[String]) -> Vec<(f64, bool)> {
        if *first {
            self.steps += 1;
            *first = false;
        }
        let validator = self.validator.as_mut().expect("validation requires a validator");
        validator
            .validate(texts)
            .into_iter()
            .map(|r| (r.s_max, r.valid))
            .collect()
    }

    fn reject(&mut self, prefix: &[TokenId], token: TokenId) {
        self.skip.entry(prefix.to_vec()).or_default().insert(token);
    }

    fn triggers_rollback(&self, invalid: usize, total: usize) -> bool {
        total > 0 && invalid as f64 / total as f64 >= self.cfg.thr_rb
    }

    fn validation_step(&mut self, step: usize) -> StepOutcome {
        match self.cfg.sampler {
            Sampler::Beam | Sampler::Greedy => self.beam_validation_step(step),
            Sampler::TopK => self.topk_validation_step(step),
        }
    }

    fn beam_validation_step(&mut self, step: usize) -> StepOutcome {
        let pool = self.cfg.pool_size();
        let mut first = true;
        let mut accepted: Vec<(Extension, Candidate, f64)> = Vec::new();
        let mut used: BTreeMap<usize, BTreeSet<TokenId>> = BTreeMap::new();
        let mut frozen_seen: BTreeSet<usize> = BTreeSet::new();
        while accepted.len() < pool {
            let need = pool - accepted.len();
            let exts = self.beam_extensions(need, |i, parent| {
                if parent.finished {
                    return (!frozen_seen.contains(&i)).then(BTreeSet::new);
                }
                let mut excluded = self.skipped(&parent.tokens);
                if let Some(u) = used.get(&i) {
                    excluded.extend(u.iter().copied());
                }
                Some(excluded)
            });
            if exts.is_empty() {
                break;
            }
            let cands: Vec<Candidate> = exts.iter().map(|e| self.materialize(e)).collect();
            let texts: Vec<String> = cands.iter().map(|c| self.text_of(&c.tokens)).collect();
            let verdicts = self.check_round(&mut first, &texts);
            let mut proposals = Vec::with_capacity(exts.len());
            let mut invalid = 0;
            for ((ext, cand), (s_max, valid)) in exts.into_iter().zip(cands).zip(verdicts) {
                let prefix = self.candidates[ext.parent].tokens.clone();
                let token = ext.next.map(|n| n.token);
                proposals.push(Proposal {
                    prefix: prefix.clone(),
                    token,
                    s_max,
                    valid,
                });
                match token {
                    None => {
                        frozen_seen.insert(ext.parent);
                    }
                    Some(t) if valid => {
                        used.entry(ext.parent).or_default().insert(t);
                    }
                    Some(t) => self.reject(&prefix, t),
                }
                if valid {
                    accepted.push((ext, cand, s_max));
                } else {
                    invalid += 1;
                }
            }
            let total = proposals.len();
            self.trace.push(DecodeEvent::Round {
                step,
                closing: false,
                proposals,
            });
            if self.triggers_rollback(invalid, total) {
                return StepOutcome::Rollback;
            }
        }
        if accepted.is_empty() {
            return StepOutcome::Rollback;
        }
        accepted.sort_by(|a, b| rank_extensions(&a.0, &b.0));
        let s_max_valid = accepted.iter().map(|a| a.2).fold(f64::NEG_INFINITY, f64::max);
        self.candidates = accepted
            .into_iter()
            .take(self.cfg.width())
            .map(|(_, mut cand, s_max)| {
                cand.passed(step, s_max);
                cand
            })
            .collect();
        StepOutcome::Accepted { s_max_valid }
    }

    fn topk_validation_step(&mut self, step: usize) -> StepOutcome {
        let mut first = true;
        let slots = self.candidates.len();
        let mut accepted: Vec<Option<(Candidate, f64)>> = alloc::vec![None; slots];
        let mut pending: Vec<usize> = (0..slots).collect();
        while !pending.is_empty() {
            let mut batch: Vec<(usize, Option<TokenId>, Candidate)> = Vec::new();
            let mut still_pending = Vec::new();
            for &slot in &pending {
                let parent = self.candidates[slot].clone();
                if parent.finished {
                    // A frozen candidate gets a single chance per step.
                    batch.push((slot, None, parent));
                    continue;
                }
                let skip = self.skipped(&parent.tokens);
                if let Some(options) = self.options(&parent, self.cfg.k, &skip) {
                    let next = self.draw(&options);
                    batch.push((slot, Some(next.token), parent.extended(&next, self.cfg.end_token)));
                }
            }
            if batch.is_empty() {
                break;
            }
            let texts: Vec<String> = batch.iter().map(|b| self.text_of(&b.2.tokens)).collect();
            let verdicts = self.check_round(&mut first, &texts);
            let mut proposals = Vec::with_capacity(batch.len());
            let mut invalid = 0;
            for ((slot, token, cand), (s_max, valid)) in batch.into_iter().zip(verdicts) {
                let prefix = self.candidates[slot].tokens.clone();
                proposals.push(Proposal {
                    prefix: prefix.clone(),
                    token,
                    s_max,
                    valid,
                });
                if valid {
                    accepted[slot] = Some((cand, s_max));
                    continue;
                }
                invalid += 1;
                if let Some(t) = token {
                    self.reject(&prefix, t);
                    still_pending.push(slot);
                }
            }
            let total = proposals.len();
            self.trace.push(DecodeEvent::Round {
                step,
                closing: false,
                proposals,
            });
            if self.triggers_rollback(invalid, total) {
                return StepOutcome::Rollback;
            }
            pending = still_pending;
        }
        let survivors: Vec<(Candidate, f64)> = accepted.into_iter().flatten().collect();
        if survivors.is_empty() {
            return StepOutcome::Rollback;
        }
        let s_max_valid = survivors.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        self.candidates = survivors
            .into_iter()
            .map(|(mut cand, s_max)| {
                cand.passed(step, s_max);
                cand
            })
            .collect();
        StepOutcome::Accepted { s_max_valid }
    }

    /// Validates whatever was generated after the last validation step.
    fn closing_check(&mut self, max_tokens: usize) -> StepOutcome {
        let unchecked: Vec<usize> = (0..self.candidates.len())
            .filter(|&i| self.candidates[i].checked_len < self.candidates[i].tokens.len())
            .collect();
        if unchecked.is_empty() {
            return StepOutcome::Accepted { s_max_valid: 0.0 };
        }
        let texts: Vec<String> = unchecked
            .iter()
            .map(|&i| self.text_of(&self.candidates[i].tokens))
            .collect();
        let validator = self.validator.as_mut().expect("validation requires a validator");
        let verdicts = validator.validate(&texts);
        let mut keep = alloc::vec![true; self.candidates.len()];
        let mut proposals = Vec::with_capacity(unchecked.len());
        let mut invalid = 0;
        for (&i, v) in unchecked.iter().zip(&verdicts) {
            let tokens = &self.candidates[i].tokens;
            proposals.push(Proposal {
                prefix: tokens[..tokens.len() - 1].to_vec(),
                token: tokens.last().copied(),
                s_max: v.s_max,
                valid: v.valid,
            });
            if v.valid {
                self.candidates[i].passed(max_tokens, v.s_max);
            } else {
                keep[i] = false;
                invalid += 1;
                let tokens = &self.candidates[i].tokens;
                let (prefix, last) = (tokens[..tokens.len() - 1].to_vec(), tokens[tokens.len() - 1]);
                self.reject(&prefix, last);
            }
        }
        self.trace.push(DecodeEvent::Round {
            step: max_tokens,
            closing: true,
            proposals,
        });
        if self.triggers_rollback(invalid, unchecked.len()) || invalid == self.candidates.len() {
            return StepOutcome::Rollback;
        }
        let mut idx = 0;
        self.candidates.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
        self.last_valid = Some(self.candidates.clone());
        StepOutcome::Accepted { s_max_valid: 0.0 }
    }

    /// Restores the previous checkpoint (or the prompt) and poisons the
    /// tokens the current continuations chose at that step.
    fn rollback(&mut self, from_step: usize) -> core::result::Result<usize, Exhaustion> {
        let checkpoint = self.checkpoints.pop().unwrap_or_else(|| self.root.clone());
        let target = checkpoint.step;
        let mut poisoned = Vec::new();
        for cand in &self.candidates {
            if cand.tokens.len() > target {
                let entry = (cand.tokens[..target].to_vec(), cand.tokens[target]);
                if !poisoned.contains(&entry) {
                    poisoned.push(entry);
                }
            }
        }
        for (prefix, token) in &poisoned {
            self.reject(prefix, *token);
        }
        self.rollbacks += 1;
        self.trace.push(DecodeEvent::Rollback {
            from_step,
            to_step: target,
            poisoned,
        });
        let count = self.rollbacks_at.entry(target).or_default();
        *count += 1;
        if *count > self.cfg.max_rollbacks_per_step {
            return Err(Exhaustion);
        }
        self.candidates = checkpoint.parents;
        self.rng = checkpoint.rng;
        Ok(target)
    }

    fn exhausted(mut self, step: usize) -> GenerationOutcome {
        self.trace.push(DecodeEvent::Exhausted { step });
        match self.last_valid.take() {
            Some(best) if !best.is_empty() => self.finish(best, Status::ExhaustedBestEffort),
            _ => self.finish(Vec::new(), Status::Failed),
        }
    }

    fn finish(self, mut candidates: Vec<Candidate>, status: Status) -> GenerationOutcome {
        if self.cfg.sampler != Sampler::TopK {
            candidates.sort_by(|a, b| b.logprob.total_cmp(&a.logprob));
        }
        candidates.truncate(self.cfg.k);
        let outputs = candidates
            .into_iter()
            .map(|c| Completion {
                text: self.lm.detokenize(&c.tokens),
                tokens: c.tokens,
                logprob: c.logprob,
                checks: c.checks,
            })
            .collect();
        GenerationOutcome {
            outputs,
            steps: self.steps,
            validations: self.validator.as_ref().map_or(0, |v| v.calls()),
            rollbacks: self.rollbacks,
            wall_time_ms: 0.0,
            status,
            trace: self.trace,
        }
    }
}
