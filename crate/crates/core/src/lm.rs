//! Additively smoothed n-gram model standing in for a neural LM.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::tokenize::{TokenId, TokenSeq, Vocabulary};
use crate::{Error, Result};

/// One next-token option with its probability under the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateToken {
    pub token: TokenId,
    pub prob: f64,
    pub logprob: f64,
}

/// Successor counts observed after one context.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextCounts {
    total: u64,
    next: BTreeMap<TokenId, u64>,
}

impl ContextCounts {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn next(&self) -> &BTreeMap<TokenId, u64> {
        &self.next
    }

    pub fn from_next(next: BTreeMap<TokenId, u64>) -> Self {
        let total = next.values().sum();
        Self { total, next }
    }
}

/// Immutable after training; cheap to share behind a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyLm {
    order: usize,
    alpha: f64,
    vocab: Vocabulary,
    table: BTreeMap<Vec<TokenId>, ContextCounts>,
}

/// Trains an `order`-gram model on `corpus`, one document per item.
///
/// Contexts never cross document boundaries; the first tokens of a document
/// are counted under the shorter context that precedes them.
pub fn train_ngram<I, S>(corpus: I, order: usize, alpha: f64) -> Result<ToyLm>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if order == 0 {
        return Err(Error::Config("n-gram order must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
    }
    let mut vocab = Vocabulary::new();
    let mut table: BTreeMap<Vec<TokenId>, ContextCounts> = BTreeMap::new();
    let mut seen_tokens = 0usize;
    for doc in corpus {
        let seq = vocab.encode_interning(doc.as_ref());
        seen_tokens += seq.len();
        for i in 0..seq.len() {
            let start = i.saturating_sub(order - 1);
            let entry = table.entry(seq[start..i].to_vec()).or_default();
            entry.total += 1;
            *entry.next.entry(seq[i]).or_default() += 1;
        }
    }
    if seen_tokens == 0 {
        return Err(Error::Config("training corpus is empty".into()));
    }
    Ok(ToyLm {
        order,
        alpha,
        vocab,
        table,
    })
}

impl ToyLm {
    /// Reassembles a model from persisted parts, checking every invariant.
    pub fn from_parts(
        order: usize,
        alpha: f64,
        vocab: Vocabulary,
        table: BTreeMap<Vec<TokenId>, ContextCounts>,
    ) -> Result<Self> {
        if order == 0 || !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config("order must be >= 1 and alpha > 0".into()));
        }
        let v = vocab.len() as u64;
        for (ctx, counts) in &table {
            if ctx.len() >= order {
                return Err(Error::Config(format!("context {ctx:?} is longer than order - 1")));
            }
            let in_range = |t: &TokenId| u64::from(*t) < v;
            if !ctx.iter().all(in_range) || !counts.next.keys().all(in_range) {
                return Err(Error::Config(format!("context {ctx:?} references an unknown token")));
            }
            if counts.next.values().any(|&c| c == 0) || counts.next.values().sum::<u64>() != counts.total {
                return Err(Error::Config(format!("inconsistent counts for context {ctx:?}")));
            }
        }
        Ok(Self {
            order,
            alpha,
            vocab,
            table,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn contexts(&self) -> &BTreeMap<Vec<TokenId>, ContextCounts> {
        &self.table
    }

    pub fn tokenize(&self, text: &str) -> TokenSeq {
        self.vocab.encode(text)
    }

    pub fn detokenize(&self, tokens: &[TokenId]) -> alloc::string::String {
        self.vocab.decode(tokens)
    }

    /// The conditioning window for the next token after `history`.
    pub fn context_of<'h>(&self, history: &'h [TokenId]) -> &'h [TokenId] {
        &history[history.len().saturating_sub(self.order - 1)..]
    }

    fn counts(&self, context: &[TokenId]) -> (u64, Option<&ContextCounts>) {
        match self.table.get(context) {
            Some(c) => (c.total, Some(c)),
            None => (0, None),
        }
    }

    fn smoothed(&self, count: u64, total: u64) -> f64 {
        (count as f64 + self.alpha) / (total as f64 + self.alpha * self.vocab.len() as f64)
    }

    /// P(token | context) where `context` is already trimmed by [`Self::context_of`].
    pub fn prob(&self, context: &[TokenId], token: TokenId) -> f64 {
        let (total, counts) = self.counts(context);
        let count = counts.and_then(|c| c.next.get(&token)).copied().unwrap_or(0);
        self.smoothed(count, total)
    }

    /// Probability of every vocabulary entry, indexed by token id.
    pub fn distribution(&self, context: &[TokenId]) -> Vec<f64> {
        (0..self.vocab.len() as TokenId)
            .map(|t| self.prob(context, t))
            .collect()
    }

    /// The `k` most probable tokens after `history` that are not in `skip`.
    ///
    /// Sorted by probability descending, ties by ascending id. Fails with
    /// [`Error::Exhausted`] when `skip` covers the vocabulary.
    pub fn top_candidates(
        &self,
        history: &[TokenId],
        k: usize,
        skip: &BTreeSet<TokenId>,
    ) -> Result<Vec<CandidateToken>> {
        if k == 0 {
            return Err(Error::Domain("k must be at least 1".into()));
        }
        let context = self.context_of(history);
        let (total, counts) = self.counts(context);
        let mut out = Vec::with_capacity(k);
        let candidate = |token, count| {
            let prob = self.smoothed(count, total);
            CandidateToken {
                token,
                prob,
                logprob: libm::log(prob),
            }
        };
        if let Some(counts) = counts {
            let mut seen: Vec<(TokenId, u64)> = counts
                .next
                .iter()
                .filter(|(t, _)| !skip.contains(t))
                .map(|(t, c)| (*t, *c))
                .collect();
            seen.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            out.extend(seen.into_iter().take(k).map(|(t, c)| candidate(t, c)));
        }
        // Unseen successors all share the smallest probability.
        let mut token: TokenId = 0;
        while out.len() < k && (token as usize) < self.vocab.len() {
            let observed = counts.is_some_and(|c| c.next.contains_key(&token));
            if !observed && !skip.contains(&token) {
                out.push(candidate(token, 0));
            }
            token += 1;
        }
        if out.is_empty() {
            return Err(Error::Exhausted);
        }
        Ok(out)
    }

    /// Sum of ln P over `tokens`, each conditioned on the tokens before it.
    pub fn sequence_logprob(&self, tokens: &[TokenId]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::Domain("log-probability of an empty sequence".into()));
        }
        Ok(self.conditional_logprob(&[], tokens))
    }

    /// Sum of ln P over `continuation` given `prefix` as preceding history.
    pub fn conditional_logprob(&self, prefix: &[TokenId], continuation: &[TokenId]) -> f64 {
        let mut history: Vec<TokenId> = prefix.to_vec();
        let mut total = 0.0;
        for &t in continuation {
            total += libm::log(self.prob(self.context_of(&history), t));
            history.push(t);
        }
        total
    }
}
