//! In-memory store of unsafe demonstration examples with exact retrieval.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::embed::{cosine, Embedder, EmbeddingVector, HashingEmbedder};
use crate::{Error, Result};

/// Largest per-component difference accepted between a stored embedding
/// and a recomputed one.
pub const EMBEDDING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoExample {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryHit {
    pub id: String,
    pub similarity: f64,
}

fn rank(a: &QueryHit, b: &QueryHit) -> Ordering {
    b.similarity.total_cmp(&a.similarity).then_with(|| a.id.cmp(&b.id))
}

#[derive(Debug, Clone)]
pub struct DemoStore<E = HashingEmbedder> {
    embedder: E,
    examples: Vec<DemoExample>,
    ids: BTreeSet<String>,
}

impl Default for DemoStore<HashingEmbedder> {
    fn default() -> Self {
        Self::new(HashingEmbedder::default())
    }
}

impl<E: Embedder> DemoStore<E> {
    pub fn new(embedder: E) -> Self {
        Self {
            embedder,
            examples: Vec::new(),
            ids: BTreeSet::new(),
        }
    }

    pub fn embedder(&self) -> &E {
        &self.embedder
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[DemoExample] {
        &self.examples
    }

    pub fn get(&self, id: &str) -> Option<&DemoExample> {
        self.examples.iter().find(|e| e.id == id)
    }

    /// Embeds and inserts `text` under a generated id (`demo-000000`, ...).
    pub fn add(&mut self, text: &str, meta: BTreeMap<String, String>) -> Result<String> {
        let mut n = self.examples.len();
        let id = loop {
            let candidate = format!("demo-{n:06}");
            if !self.ids.contains(&candidate) {
                break candidate;
            }
            n += 1;
        };
        self.insert(&id, text, meta)?;
        Ok(id)
    }

    pub fn insert(&mut self, id: &str, text: &str, meta: BTreeMap<String, String>) -> Result<()> {
        if text.trim().is_empty() {
            return Err(Error::Invariant {
                id: id.into(),
                reason: "empty text".into(),
            });
        }
        if self.ids.contains(id) {
            return Err(Error::DuplicateId(id.into()));
        }
        let embedding = self.embedder.embed(text);
        self.push(DemoExample {
            id: id.into(),
            text: text.into(),
            meta,
            embedding,
        });
        Ok(())
    }

    /// Inserts a persisted example after recomputing and checking its embedding.
    pub fn insert_verified(&mut self, example: DemoExample) -> Result<()> {
        if self.ids.contains(&example.id) {
            return Err(Error::DuplicateId(example.id));
        }
        let expected = self.embedder.embed(&example.text);
        let matches = expected.dims() == example.embedding.dims()
            && expected
                .values()
                .iter()
                .zip(example.embedding.values())
                .all(|(a, b)| (a - b).abs() <= EMBEDDING_TOLERANCE);
        if !matches {
            return Err(Error::Invariant {
                id: example.id,
                reason: "stored embedding does not match embed(text)".into(),
            });
        }
        if example.text.trim().is_empty() {
            return Err(Error::Invariant {
                id: example.id,
                reason: "empty text".into(),
            });
        }
        self.push(example);
        Ok(())
    }

    fn push(&mut self, example: DemoExample) {
        self.ids.insert(example.id.clone());
        self.examples.push(example);
    }

    /// The `m` examples most similar to `v`, by exact scan.
    pub fn query(&self, v: &EmbeddingVector, m: usize) -> Result<Vec<QueryHit>> {
        if m == 0 {
            return Err(Error::Domain("query width must be at least 1".into()));
        }
        if v.dims() != self.embedder.dims() {
            return Err(Error::Domain(format!(
                "query has {} dimensions, store has {}",
                v.dims(),
                self.embedder.dims()
            )));
        }
        let mut best: Vec<QueryHit> = Vec::with_capacity(m.min(self.len()) + 1);
        for e in &self.examples {
            let hit = QueryHit {
                id: e.id.clone(),
                similarity: cosine(v, &e.embedding)?,
            };
            if best.len() == m && rank(&hit, &best[m - 1]) != Ordering::Less {
                continue;
            }
            let pos = best.partition_point(|h| rank(h, &hit) == Ordering::Less);
            best.insert(pos, hit);
            best.truncate(m);
        }
        Ok(best)
    }

    /// Highest similarity of `text` to any example, with that example's id.
    pub fn nearest(&self, text: &str) -> (f64, Option<String>) {
        let v = self.embedder.embed(text);
        match self.query(&v, 1) {
            Ok(mut hits) if !hits.is_empty() => {
                let hit = hits.swap_remove(0);
                (hit.similarity, Some(hit.id))
            }
            _ => (0.0, None),
        }
    }
}
