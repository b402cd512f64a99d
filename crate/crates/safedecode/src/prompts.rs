use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use safedecode_core::harness::PromptCase;
use serde::Deserialize;

use crate::{Error, Result};

/// Reads a JSON-lines prompt set: `{"id": ..., "prompt": ..., "reference": ...}`.
pub fn read_prompts(path: &Path) -> Result<Vec<PromptCase>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seen = BTreeMap::new();
    let mut cases = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: PromptCase = serde_json::from_str(line).map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        if let Some(first) = seen.insert(case.id.clone(), idx + 1) {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("prompt id `{}` already used on line {first}", case.id),
            ));
        }
        cases.push(case);
    }
    if cases.is_empty() {
        return Err(Error::parse(path, 1, "no prompts"));
    }
    Ok(cases)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceLine {
    id: String,
    reference: String,
}

/// Reads `{"id": ..., "reference": ...}` lines and attaches them to `cases`,
/// replacing inline references. Every id must name an existing prompt.
pub fn attach_references(cases: &mut [PromptCase], path: &Path) -> Result<()> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: ReferenceLine = serde_json::from_str(line).map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        let case = cases
            .iter_mut()
            .find(|c| c.id == r.id)
            .ok_or_else(|| Error::parse(path, idx + 1, format!("no prompt with id `{}`", r.id)))?;
        case.reference = Some(r.reference);
    }
    Ok(())
}
