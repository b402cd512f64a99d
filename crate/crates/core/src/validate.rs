//! Similarity-threshold validity check for candidate completions.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embed::Embedder;
use crate::store::DemoStore;

/// Source of the maximum similarity between a text and the unsafe examples.
pub trait SimilarityOracle {
    /// Returns the highest similarity and the id it came from, or `(0, None)`
    /// when there is nothing to compare against.
    fn max_similarity(&self, text: &str) -> (f64, Option<String>);
}

impl<E: Embedder> SimilarityOracle for DemoStore<E> {
    fn max_similarity(&self, text: &str) -> (f64, Option<String>) {
        self.nearest(text)
    }
}

impl<O: SimilarityOracle + ?Sized> SimilarityOracle for &O {
    fn max_similarity(&self, text: &str) -> (f64, Option<String>) {
        (**self).max_similarity(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub candidate_index: usize,
    pub s_max: f64,
    pub nearest_id: Option<String>,
    /// `s_max < thr_v`. A tie counts as invalid.
    pub valid: bool,
}

/// Checks every candidate independently; results keep input order.
pub fn validate<O, S>(candidates: &[S], oracle: &O, thr_v: f64) -> Vec<ValidationResult>
where
    O: SimilarityOracle + ?Sized,
    S: AsRef<str>,
{
    candidates
        .iter()
        .enumerate()
        .map(|(candidate_index, text)| {
            let (s_max, nearest_id) = oracle.max_similarity(text.as_ref());
            ValidationResult {
                candidate_index,
                s_max,
                nearest_id,
                valid: s_max < thr_v,
            }
        })
        .collect()
}

/// Wraps an oracle with a fixed threshold and counts validator calls.
pub struct Validator<'a, O: ?Sized> {
    oracle: &'a O,
    thr_v: f64,
    calls: usize,
}

impl<'a, O: SimilarityOracle + ?Sized> Validator<'a, O> {
    pub fn new(oracle: &'a O, thr_v: f64) -> crate::Result<Self> {
        if thr_v.is_nan() || thr_v <= 0.0 {
            return Err(crate::Error::Config(alloc::format!(
                "validity threshold must be positive, got {thr_v}"
            )));
        }
        Ok(Self {
            oracle,
            thr_v,
            calls: 0,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.thr_v
    }

    /// One call, whatever the batch size.
    pub fn validate<S: AsRef<str>>(&mut self, candidates: &[S]) -> Vec<ValidationResult> {
        self.calls += 1;
        validate(candidates, self.oracle, self.thr_v)
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;

    #[test]
    fn identical_text_is_invalid() {
        let mut store = DemoStore::default();
        store.add("you stupid idiot", BTreeMap::new()).unwrap();
        let r = validate(&["you stupid idiot", "have a nice day"], &store, 0.3);
        assert!((r[0].s_max - 1.0).abs() < 1e-12);
        assert!(!r[0].valid);
        assert_eq!(r[0].nearest_id.as_deref(), Some("demo-000000"));
        assert_eq!(r[1].candidate_index, 1);
    }

    #[test]
    fn empty_store_and_empty_candidate() {
        let store = DemoStore::default();
        let r = validate(&["x", ""], &store, 0.3);
        assert!(r.iter().all(|v| v.valid && v.s_max == 0.0 && v.nearest_id.is_none()));
        let mut full = DemoStore::default();
        full.add("abc", BTreeMap::new()).unwrap();
        let r = validate(&[""], &full, 0.3);
        assert!(r[0].valid && r[0].s_max == 0.0);
        assert!(validate::<_, &str>(&[], &full, 0.3).is_empty());
    }

    #[test]
    fn tie_is_invalid() {
        struct Fixed(f64);
        impl SimilarityOracle for Fixed {
            fn max_similarity(&self, _: &str) -> (f64, Option<String>) {
                (self.0, None)
            }
        }
        assert!(!validate(&["a"], &Fixed(0.3), 0.3)[0].valid);
        assert!(validate(&["a"], &Fixed(0.3), 0.30001)[0].valid);
    }

    #[test]
    fn counter_counts_calls() {
        let store = DemoStore::default();
        let mut v = Validator::new(&store, 0.3).unwrap();
        v.validate(&["a", "b", "c"]);
        v.validate::<&str>(&[]);
        assert_eq!(v.calls(), 2);
        assert!(Validator::new(&store, 0.0).is_err());
        assert!(Validator::new(&store, f64::NAN).is_err());
    }
}
