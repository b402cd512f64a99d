//! Whitespace and punctuation splitting plus the token vocabulary.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Deref;

use serde::{Deserialize, Serialize};

pub type TokenId = u32;

/// Reserved identifier for surface strings never seen during training.
pub const UNK: TokenId = 0;
/// Surface string of [`UNK`]. It cannot be produced by [`split`] as a single piece.
pub const UNK_SURFACE: &str = "<unk>";

/// Splits `text` into lower-cased pieces.
///
/// Runs of alphanumeric characters form one piece, every other
/// non-whitespace character is a piece of its own and whitespace only
/// separates.
pub fn split(text: &str) -> Vec<String> {
    let mut pieces = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            pieces.push(core::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            pieces.push(ch.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        pieces.push(word);
    }
    pieces
}

/// An ordered list of token identifiers.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<TokenId>);

impl TokenSeq {
    pub fn new(tokens: Vec<TokenId>) -> Self {
        Self(tokens)
    }

    pub fn into_inner(self) -> Vec<TokenId> {
        self.0
    }
}

impl Deref for TokenSeq {
    type Target = [TokenId];

    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

impl From<Vec<TokenId>> for TokenSeq {
    fn from(tokens: Vec<TokenId>) -> Self {
        Self(tokens)
    }
}

/// Bidirectional map between surface strings and token identifiers.
///
/// Identifier 0 is always [`UNK`]; the rest are assigned in interning order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    index: BTreeMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut index = BTreeMap::new();
        index.insert(UNK_SURFACE.to_string(), UNK);
        Self {
            surfaces: alloc::vec![UNK_SURFACE.to_string()],
            index,
        }
    }

    /// Rebuilds a vocabulary from surfaces listed in identifier order.
    pub fn from_surfaces(surfaces: Vec<String>) -> crate::Result<Self> {
        if surfaces.first().map(String::as_str) != Some(UNK_SURFACE) {
            return Err(crate::Error::Config(alloc::format!(
                "vocabulary must start with {UNK_SURFACE}"
            )));
        }
        let mut index = BTreeMap::new();
        for (id, surface) in surfaces.iter().enumerate() {
            if index.insert(surface.clone(), id as TokenId).is_some() {
                return Err(crate::Error::Config(alloc::format!(
                    "surface `{surface}` appears twice in the vocabulary"
                )));
            }
        }
        Ok(Self { surfaces, index })
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    /// Never true: [`UNK`] is always present.
    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn surfaces(&self) -> &[String] {
        &self.surfaces
    }

    pub fn id(&self, surface: &str) -> Option<TokenId> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.surfaces.get(id as usize).map(String::as_str)
    }

    pub fn intern(&mut self, surface: &str) -> TokenId {
        if let Some(id) = self.index.get(surface) {
            return *id;
        }
        let id = self.surfaces.len() as TokenId;
        self.surfaces.push(surface.to_string());
        self.index.insert(surface.to_string(), id);
        id
    }

    /// Tokenizes `text`, interning unseen pieces. Used while training.
    pub fn encode_interning(&mut self, text: &str) -> TokenSeq {
        TokenSeq(split(text).iter().map(|p| self.intern(p)).collect())
    }

    /// Tokenizes `text`, mapping unseen pieces to [`UNK`].
    pub fn encode(&self, text: &str) -> TokenSeq {
        TokenSeq(split(text).iter().map(|p| self.id(p).unwrap_or(UNK)).collect())
    }

    /// Joins the surfaces of `tokens` with single spaces.
    pub fn decode(&self, tokens: &[TokenId]) -> String {
        let mut out = String::new();
        for (i, id) in tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(self.surface(*id).unwrap_or(UNK_SURFACE));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    /// Character-class reference splitter, written independently of `split`.
    fn reference_split(text: &str) -> Vec<String> {
        #[derive(PartialEq)]
        enum Class {
            Space,
            Word,
            Punct,
        }
        let class = |c: char| {
            if c.is_whitespace() {
                Class::Space
            } else if c.is_alphanumeric() {
                Class::Word
            } else {
                Class::Punct
            }
        };
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            match class(chars[i]) {
                Class::Space => i += 1,
                Class::Punct => {
                    out.push(chars[i].to_lowercase().collect());
                    i += 1;
                }
                Class::Word => {
                    let start = i;
                    while i < chars.len() && class(chars[i]) == Class::Word {
                        i += 1;
                    }
                    out.push(chars[start..i].iter().flat_map(|c| c.to_lowercase()).collect());
                }
            }
        }
        out
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(split("").is_empty());
        assert!(Vocabulary::new().encode("").is_empty());
    }

    #[test]
    fn hello_world_splits_into_three() {
        assert_eq!(split("Hello, world"), vec!["hello", ",", "world"]);
    }

    #[test]
    fn unknown_maps_to_unk_at_inference() {
        let mut vocab = Vocabulary::new();
        let seq = vocab.encode_interning("the cat");
        assert_eq!(&*seq, &[1, 2]);
        assert_eq!(&*vocab.encode("the dog"), &[1, UNK]);
        assert_eq!(vocab.decode(&[1, UNK]), "the <unk>");
    }

    #[test]
    fn from_surfaces_rejects_missing_unk_and_duplicates() {
        assert!(Vocabulary::from_surfaces(vec!["a".into()]).is_err());
        assert!(Vocabulary::from_surfaces(vec![UNK_SURFACE.into(), "a".into(), "a".into()]).is_err());
        let v = Vocabulary::from_surfaces(vec![UNK_SURFACE.into(), "a".into()]).unwrap();
        assert_eq!(v.id("a"), Some(1));
    }

    proptest! {
        #[test]
        fn split_matches_reference(s in "[ -~\t\n]{0,40}") {
            prop_assert_eq!(split(&s), reference_split(&s));
        }

        #[test]
        fn round_trip_preserves_tokens(s in "[ -~]{0,60}") {
            let mut vocab = Vocabulary::new();
            let seq = vocab.encode_interning(&s);
            let text = vocab.decode(&seq);
            prop_assert_eq!(vocab.encode(&text), seq.clone());
            prop_assert!(seq.iter().all(|&t| (t as usize) < vocab.len()));
        }
    }
}
