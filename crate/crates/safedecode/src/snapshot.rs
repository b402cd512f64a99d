//! JSON snapshots of trained n-gram models.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use safedecode_core::lm::ContextCounts;
use safedecode_core::{TokenId, ToyLm, Vocabulary};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const LM_FORMAT: &str = "safedecode-lm";
pub const LM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmSnapshot {
    pub format: String,
    pub version: u32,
    pub order: usize,
    pub alpha: f64,
    /// Surfaces in identifier order, starting with `<unk>`.
    pub vocab: Vec<String>,
    pub contexts: Vec<ContextEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextEntry {
    pub context: Vec<TokenId>,
    /// `(token, count)` pairs in ascending token order.
    pub next: Vec<(TokenId, u64)>,
}

impl LmSnapshot {
    pub fn of(lm: &ToyLm) -> Self {
        Self {
            format: LM_FORMAT.into(),
            version: LM_FORMAT_VERSION,
            order: lm.order(),
            alpha: lm.alpha(),
            vocab: lm.vocab().surfaces().to_vec(),
            contexts: lm
                .contexts()
                .iter()
                .map(|(context, counts)| ContextEntry {
                    context: context.clone(),
                    next: counts.next().iter().map(|(&t, &c)| (t, c)).collect(),
                })
                .collect(),
        }
    }

    pub fn into_lm(self) -> safedecode_core::Result<ToyLm> {
        if self.format != LM_FORMAT || self.version != LM_FORMAT_VERSION {
            return Err(safedecode_core::Error::Config(format!(
                "unsupported model format {} v{}",
                self.format, self.version
            )));
        }
        let vocab = Vocabulary::from_surfaces(self.vocab)?;
        let mut table = BTreeMap::new();
        for entry in self.contexts {
            let next: BTreeMap<TokenId, u64> = entry.next.into_iter().collect();
            if table
                .insert(entry.context.clone(), ContextCounts::from_next(next))
                .is_some()
            {
                return Err(safedecode_core::Error::Config(format!(
                    "context {:?} listed twice",
                    entry.context
                )));
            }
        }
        ToyLm::from_parts(self.order, self.alpha, vocab, table)
    }
}

pub fn save_lm(lm: &ToyLm, path: &Path) -> Result<()> {
    let mut json = serde_json::to_vec(&LmSnapshot::of(lm)).expect("snapshot serializes");
    json.push(b'\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_lm(path: &Path) -> Result<ToyLm> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let snapshot: LmSnapshot = serde_json::from_str(&raw).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    snapshot.into_lm().map_err(|e| Error::invalid(path, e))
}
