//! JSON-lines persistence for demonstration stores.
//!
//! The first line is a header naming the embedder; every following line is
//! one example with its embedding. Loading recomputes each embedding and
//! refuses the file if any of them disagrees with the stored vector.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use safedecode_core::embed::{Embedder, EMBEDDER_VERSION};
use safedecode_core::store::DemoExample;
use safedecode_core::{DemoStore, HashingEmbedder};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const STORE_FORMAT: &str = "safedecode-store";
pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreHeader {
    pub format: String,
    pub version: u32,
    pub embedder: String,
    pub dims: usize,
    pub seed: u64,
}

impl StoreHeader {
    pub fn for_embedder(embedder: &HashingEmbedder) -> Self {
        Self {
            format: STORE_FORMAT.into(),
            version: STORE_FORMAT_VERSION,
            embedder: EMBEDDER_VERSION.into(),
            dims: embedder.dims(),
            seed: embedder.seed(),
        }
    }
}

/// Builds a store with one example per document, ids `demo-000000`, ...
pub fn build_store<S: AsRef<str>>(docs: &[S], embedder: HashingEmbedder) -> Result<DemoStore> {
    let mut store = DemoStore::new(embedder);
    for doc in docs {
        store.add(doc.as_ref(), BTreeMap::new())?;
    }
    Ok(store)
}

pub fn write_store<W: Write>(store: &DemoStore, mut out: W) -> io::Result<()> {
    let header = StoreHeader::for_embedder(store.embedder());
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for example in store.examples() {
        serde_json::to_writer(&mut out, example)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_store(store: &DemoStore, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_store(store, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_store(path: &Path) -> Result<DemoStore> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_store(&raw, path)
}

/// Parses the contents of a store file; `path` is only used in messages.
pub fn parse_store(raw: &str, path: &Path) -> Result<DemoStore> {
    let mut lines = raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing store header"))?;
    let header: StoreHeader =
        serde_json::from_str(first).map_err(|e| Error::parse(path, 1, format!("bad store header: {e}")))?;
    if header.format != STORE_FORMAT || header.version != STORE_FORMAT_VERSION {
        return Err(Error::parse(
            path,
            1,
            format!("unsupported store format {} v{}", header.format, header.version),
        ));
    }
    if header.embedder != EMBEDDER_VERSION {
        return Err(Error::parse(
            path,
            1,
            format!(
                "store was built with embedder `{}`, expected `{EMBEDDER_VERSION}`",
                header.embedder
            ),
        ));
    }
    let embedder = HashingEmbedder::new(header.dims, header.seed).map_err(|e| Error::invalid(path, e))?;
    let mut store = DemoStore::new(embedder);
    for (idx, line) in lines {
        let example: DemoExample = serde_json::from_str(line).map_err(|e| {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(str::to_owned));
            let message = match id {
                Some(id) => format!("example `{id}`: {e}"),
                None => e.to_string(),
            };
            Error::parse(path, idx + 1, message)
        })?;
        store
            .insert_verified(example)
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
    }
    Ok(store)
}
