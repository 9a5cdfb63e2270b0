//! Marker categories, tokenization and per-utterance marker presence.
//!
//! Lexicon files are plain text. `#name` opens a category, every following
//! non-empty line is one entry, and lines starting with `%` are comments.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Utterance;
use crate::error::{Error, Result};

/// The shipped marker lists: the eight function-word categories.
pub const DEFAULT_LEXICON: &str = include_str!("../data/default.lex");

pub const MAX_CATEGORIES: usize = 64;

/// Lowercases `text` and splits it on every character that is neither
/// alphanumeric nor an apostrophe. Apostrophes survive only inside a token;
/// the typographic apostrophe U+2019 is folded to `'`.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut flush = |current: &mut String| {
        let t = current.trim_matches('\'');
        if !t.is_empty() {
            tokens.push(t.to_string());
        }
        current.clear();
    };
    for ch in lower.chars() {
        let ch = if ch == '\u{2019}' { '\'' } else { ch };
        if ch.is_alphanumeric() || ch == '\'' {
            current.push(ch);
        } else if !current.is_empty() {
            flush(&mut current);
        }
    }
    flush(&mut current);
    tokens
}

/// Bit set over the categories of one lexicon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MarkerSet(u64);

impl MarkerSet {
    pub const EMPTY: MarkerSet = MarkerSet(0);

    pub fn from_bits(bits: u64) -> Self {
        MarkerSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, marker: usize) -> bool {
        self.0 >> marker & 1 == 1
    }

    pub fn insert(&mut self, marker: usize) {
        self.0 |= 1 << marker;
    }

    pub fn with(mut self, marker: usize) -> Self {
        self.insert(marker);
        self
    }

    pub fn union(self, other: MarkerSet) -> Self {
        MarkerSet(self.0 | other.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerCategory {
    pub name: String,
    pub entries: BTreeSet<String>,
}

impl MarkerCategory {
    pub fn new<I, S>(name: impl Into<String>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let name = name.into();
        let mut set = BTreeSet::new();
        for e in entries {
            set.insert(validate_entry(e.as_ref()).map_err(Error::InvalidConfig)?);
        }
        if set.is_empty() {
            return Err(Error::EmptyCategory(name));
        }
        Ok(MarkerCategory { name, entries: set })
    }
}

fn validate_entry(raw: &str) -> std::result::Result<String, String> {
    let entry = raw.trim().to_lowercase();
    if entry.split_whitespace().count() > 1 {
        return Err(format!("multi-word entry `{entry}`; markers are single tokens"));
    }
    let toks = tokenize(&entry);
    if toks.len() != 1 || toks[0] != entry {
        return Err(format!("entry `{entry}` is not a single token"));
    }
    Ok(entry)
}

/// Presence bits of one utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerPresence {
    pub utterance_id: String,
    pub markers: MarkerSet,
    pub categories: usize,
}

impl MarkerPresence {
    pub fn bits(&self) -> Vec<bool> {
        (0..self.categories).map(|m| self.markers.contains(m)).collect()
    }
}

/// An ordered set of marker categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    categories: Vec<MarkerCategory>,
    index: HashMap<String, MarkerSet>,
}

impl Lexicon {
    pub fn new(categories: Vec<MarkerCategory>) -> Result<Self> {
        if categories.len() > MAX_CATEGORIES {
            return Err(Error::InvalidConfig(format!(
                "{} categories; at most {MAX_CATEGORIES} are supported",
                categories.len()
            )));
        }
        let mut names = HashSet::new();
        let mut index: HashMap<String, MarkerSet> = HashMap::new();
        for (m, cat) in categories.iter().enumerate() {
            if !names.insert(cat.name.as_str()) {
                return Err(Error::DuplicateCategoryName(cat.name.clone()));
            }
            if cat.entries.is_empty() {
                return Err(Error::EmptyCategory(cat.name.clone()));
            }
            for e in &cat.entries {
                index.entry(e.clone()).or_default().insert(m);
            }
        }
        Ok(Lexicon { categories, index })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cats: Vec<(String, BTreeSet<String>)> = Vec::new();
        let mut names = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            if let Some(name) = line.strip_prefix('#') {
                let name = name.trim();
                if name.is_empty() {
                    return Err(Error::LexiconFormat {
                        line: line_no,
                        reason: "empty category name".into(),
                    });
                }
                if !names.insert(name.to_string()) {
                    return Err(Error::DuplicateCategoryName(name.to_string()));
                }
                cats.push((name.to_string(), BTreeSet::new()));
                continue;
            }
            let Some((_, entries)) = cats.last_mut() else {
                return Err(Error::LexiconFormat {
                    line: line_no,
                    reason: "entry before any category header".into(),
                });
            };
            let entry = validate_entry(line).map_err(|reason| Error::LexiconFormat { line: line_no, reason })?;
            entries.insert(entry);
        }
        let categories = cats
            .into_iter()
            .map(|(name, entries)| {
                if entries.is_empty() {
                    Err(Error::EmptyCategory(name))
                } else {
                    Ok(MarkerCategory { name, entries })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Lexicon::new(categories)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Lexicon::parse(&text)
    }

    /// The eight shipped function-word categories.
    pub fn default_markers() -> Self {
        Lexicon::parse(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }

    pub fn categories(&self) -> &[MarkerCategory] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.name.as_str())
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c.name == name)
    }

    /// Categories a single token belongs to.
    pub fn lookup(&self, token: &str) -> MarkerSet {
        self.index.get(token).copied().unwrap_or_default()
    }

    pub fn mark_text(&self, text: &str) -> MarkerSet {
        tokenize(text)
            .iter()
            .fold(MarkerSet::EMPTY, |acc, t| acc.union(self.lookup(t)))
    }

    pub fn mark(&self, utterance: &Utterance) -> MarkerPresence {
        MarkerPresence {
            utterance_id: utterance.id.clone(),
            markers: self.mark_text(&utterance.text),
            categories: self.len(),
        }
    }
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    Lexicon::load(path)
}
