#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use stylesync::corpus::{Corpus, IngestOptions, Record};
use stylesync::lexicon::Lexicon;
use stylesync::synth::{generate, GeneratorConfig};

pub type Who = (String, String);

/// Marker presence by whitespace splitting and direct lookup in the word
/// lists. Only valid for generated text, which is lowercase tokens separated
/// by single spaces.
pub fn naive_marks(lexicon: &Lexicon, text: &str) -> Vec<bool> {
    let words: Vec<&str> = text.split(' ').collect();
    lexicon
        .categories()
        .iter()
        .map(|c| words.iter().any(|w| c.entries.contains(*w)))
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Counts {
    pub both: u64,
    pub target: u64,
    pub reply: u64,
    pub total: u64,
}

/// Per-replier counts toward `targets`, by scanning every ordered pair of
/// records for a parent link.
pub fn naive_counts(records: &[Record], lexicon: &Lexicon, targets: &BTreeSet<Who>) -> BTreeMap<Who, Vec<Counts>> {
    let marks: Vec<Vec<bool>> = records.iter().map(|r| naive_marks(lexicon, &r.text)).collect();
    let mut out: BTreeMap<Who, Vec<Counts>> = BTreeMap::new();
    for (j, reply) in records.iter().enumerate() {
        for (i, target) in records.iter().enumerate() {
            if reply.parent_id.as_deref() != Some(target.id.as_str())
                || reply.conversation_id != target.conversation_id
                || reply.speaker == target.speaker
                || !targets.contains(&(target.speaker.clone(), target.conversation_id.clone()))
            {
                continue;
            }
            let slot = out
                .entry((reply.speaker.clone(), reply.conversation_id.clone()))
                .or_insert_with(|| vec![Counts::default(); lexicon.len()]);
            for (m, c) in slot.iter_mut().enumerate() {
                let (t, r) = (marks[i][m], marks[j][m]);
                c.total += 1;
                c.target += t as u64;
                c.reply += r as u64;
                c.both += (t && r) as u64;
            }
        }
    }
    out
}

pub fn naive_value(c: &Counts, min_support: u64) -> Option<f64> {
    (c.target > min_support).then(|| c.both as f64 / c.target as f64 - c.reply as f64 / c.total as f64)
}

pub fn synth(config: &GeneratorConfig) -> Corpus {
    generate(config, &Lexicon::default_markers()).expect("valid generator config")
}

pub fn corpus_of(records: Vec<Record>) -> Corpus {
    Corpus::from_records(records.into_iter().enumerate().map(|(i, r)| (i + 1, r)), &IngestOptions::default())
        .expect("valid fixture")
}

pub fn rec(id: &str, conv: &str, parent: Option<&str>, speaker: &str, ts: i64, text: &str, delta_to: Option<&str>) -> Record {
    Record {
        id: id.into(),
        conversation_id: conv.into(),
        parent_id: parent.map(Into::into),
        speaker: speaker.into(),
        timestamp: ts,
        text: text.into(),
        delta_to: delta_to.map(Into::into),
    }
}
