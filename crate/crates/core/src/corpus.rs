//! Threaded discussion data model and ingestion.
//!
//! A corpus file holds one JSON record per line:
//!
//! ```text
//! {"id":"c1","conversation_id":"t1","parent_id":"r","speaker":"jess","timestamp":1500000100,"text":"...","delta_to":null}
//! ```
//!
//! Every field is required; `parent_id` and `delta_to` may be `null`. Each
//! conversation is a tree rooted at the single record without a parent.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// A delta awarded by the enclosing utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaAward {
    pub recipient: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub id: String,
    pub conversation_id: String,
    pub parent_id: Option<String>,
    pub speaker: String,
    pub timestamp: i64,
    pub text: String,
    pub delta_award: Option<DeltaAward>,
}

fn required<'de, D, T>(de: D) -> std::result::Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(de)
}

/// One line of the corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub conversation_id: String,
    #[serde(deserialize_with = "required")]
    pub parent_id: Option<String>,
    pub speaker: String,
    pub timestamp: i64,
    pub text: String,
    #[serde(deserialize_with = "required")]
    pub delta_to: Option<String>,
}

impl From<&Utterance> for Record {
    fn from(u: &Utterance) -> Self {
        Record {
            id: u.id.clone(),
            conversation_id: u.conversation_id.clone(),
            parent_id: u.parent_id.clone(),
            speaker: u.speaker.clone(),
            timestamp: u.timestamp,
            text: u.text.clone(),
            delta_to: u.delta_award.as_ref().map(|d| d.recipient.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// Trust the `delta_to` field of each record.
    #[default]
    MetadataOnly,
    /// Additionally scan utterance text for delta tokens.
    TokenScan,
}

impl FromStr for DeltaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metadata" | "metadata_only" => Ok(DeltaMode::MetadataOnly),
            "scan" | "token_scan" => Ok(DeltaMode::TokenScan),
            other => Err(Error::InvalidConfig(format!("unknown delta mode `{other}`"))),
        }
    }
}

pub const DEFAULT_EXCLUDED_SPEAKERS: &[&str] = &["DeltaBot", "[deleted]"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOptions {
    /// Speakers whose replies are dropped; their children are re-parented
    /// to the nearest retained ancestor. Roots are never dropped.
    pub exclude_speakers: Vec<String>,
    pub delta_mode: DeltaMode,
    /// Accept replies timestamped before their parent.
    pub lax: bool,
    /// Remove lines starting with `>` from utterance text.
    pub strip_quotes: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            exclude_speakers: DEFAULT_EXCLUDED_SPEAKERS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            delta_mode: DeltaMode::MetadataOnly,
            lax: false,
            strip_quotes: false,
        }
    }
}

/// A validated conversation tree. Utterances keep their file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    id: String,
    utterances: Vec<Utterance>,
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    // root first, every parent before its children
    order: Vec<usize>,
}

impl Conversation {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn root(&self) -> &Utterance {
        &self.utterances[self.root]
    }

    pub fn root_index(&self) -> usize {
        self.root
    }

    pub fn op_speaker(&self) -> &str {
        &self.root().speaker
    }

    pub fn parent_index(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Utterance indices with every parent listed before its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.utterances.iter().position(|u| u.id == id)
    }

    /// `(parent, reply)` index pairs, one per non-root utterance.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(c, p)| p.map(|p| (p, c)))
    }

    pub fn delta_count(&self) -> usize {
        self.utterances
            .iter()
            .filter(|u| u.delta_award.is_some())
            .count()
    }

    /// Per reply index, whether the edge into it lies on at least one
    /// root-to-leaf branch that carries a delta. The root's entry is `false`.
    pub fn delta_branch_mask(&self) -> Vec<bool> {
        let n = self.len();
        let awarded: Vec<bool> = self
            .utterances
            .iter()
            .map(|u| u.delta_award.is_some())
            .collect();
        let mut above = vec![false; n];
        for &i in &self.order {
            above[i] = awarded[i] || self.parent[i].is_some_and(|p| above[p]);
        }
        let mut below = awarded.clone();
        for &i in self.order.iter().rev() {
            if let Some(p) = self.parent[i] {
                below[p] |= below[i];
            }
        }
        (0..n)
            .map(|i| self.parent[i].is_some() && (above[i] || below[i]))
            .collect()
    }

    /// Earliest delta-award timestamp per awarding speaker.
    pub fn earliest_awards(&self) -> HashMap<&str, i64> {
        let mut out: HashMap<&str, i64> = HashMap::new();
        for u in &self.utterances {
            if u.delta_award.is_some() {
                out.entry(u.speaker.as_str())
                    .and_modify(|t| *t = (*t).min(u.timestamp))
                    .or_insert(u.timestamp);
            }
        }
        out
    }

    /// Per reply index, whether the edge into it is admitted by `scope`.
    pub fn scope_mask(&self, scope: Scope) -> Vec<bool> {
        match scope {
            Scope::All => self.parent.iter().map(Option::is_some).collect(),
            Scope::DeltaBranches => self.delta_branch_mask(),
            Scope::NonDeltaBranches => {
                let delta = self.delta_branch_mask();
                (0..self.len())
                    .map(|i| self.parent[i].is_some() && !delta[i])
                    .collect()
            }
            Scope::PreDelta => {
                let earliest = self.earliest_awards();
                (0..self.len())
                    .map(|c| match self.parent[c] {
                        None => false,
                        Some(p) => match earliest.get(self.utterances[p].speaker.as_str()) {
                            Some(&t) => self.utterances[c].timestamp < t,
                            None => true,
                        },
                    })
                    .collect()
            }
        }
    }
}

/// A root-to-leaf path through a conversation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub conversation_id: String,
    pub path: Vec<String>,
    pub has_delta: bool,
}

/// One branch per leaf, leftmost first.
pub fn branches(conversation: &Conversation) -> Vec<Branch> {
    let mut out = Vec::new();
    let mut path: Vec<usize> = Vec::new();
    let mut stack = vec![(conversation.root, 0usize)];
    while let Some((node, depth)) = stack.pop() {
        path.truncate(depth);
        path.push(node);
        let kids = conversation.children(node);
        if kids.is_empty() {
            let utts = conversation.utterances();
            out.push(Branch {
                conversation_id: conversation.id.clone(),
                path: path.iter().map(|&i| utts[i].id.clone()).collect(),
                has_delta: path.iter().any(|&i| utts[i].delta_award.is_some()),
            });
        } else {
            stack.extend(kids.iter().rev().map(|&k| (k, depth + 1)));
        }
    }
    out
}

/// Which reply edges an analysis runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    All,
    /// Edges on at least one branch carrying a delta.
    DeltaBranches,
    /// Edges on no branch carrying a delta.
    NonDeltaBranches,
    /// Edges whose target was written by a delta giver are kept only when the
    /// reply strictly precedes that giver's earliest award in the conversation.
    PreDelta,
}

impl Scope {
    pub const ALL: [Scope; 4] = [
        Scope::All,
        Scope::DeltaBranches,
        Scope::NonDeltaBranches,
        Scope::PreDelta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::All => "all",
            Scope::DeltaBranches => "delta_branches",
            Scope::NonDeltaBranches => "non_delta_branches",
            Scope::PreDelta => "pre_delta",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "all" => Ok(Scope::All),
            "delta" | "delta_branches" => Ok(Scope::DeltaBranches),
            "non_delta" | "non_delta_branches" => Ok(Scope::NonDeltaBranches),
            "pre_delta" => Ok(Scope::PreDelta),
            _ => Err(Error::UnknownScope(s.to_string())),
        }
    }
}

/// Counts recorded at ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub conversations: usize,
    pub utterances: usize,
    pub speakers: usize,
    pub deltas: usize,
    pub non_op_deltas: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    conversations: Vec<Conversation>,
    delta_mode: Option<DeltaMode>,
}

impl Corpus {
    /// Validates records into a corpus. Deltas are resolved according to
    /// `options.delta_mode`.
    pub fn from_records<I>(records: I, options: &IngestOptions) -> Result<Corpus>
    where
        I: IntoIterator<Item = (usize, Record)>,
    {
        let mut corpus = Self::from_records_undetected(records, options)?;
        corpus = corpus.detect_deltas(options.delta_mode);
        Ok(corpus)
    }

    /// Validates records without marking deltas as detected. Group
    /// construction refuses such a corpus until [`Corpus::detect_deltas`]
    /// has run.
    pub fn from_records_undetected<I>(records: I, options: &IngestOptions) -> Result<Corpus>
    where
        I: IntoIterator<Item = (usize, Record)>,
    {
        let mut seen: HashSet<String> = HashSet::new();
        let mut order: Vec<String> = Vec::new();
        let mut grouped: HashMap<String, Vec<(usize, Record)>> = HashMap::new();
        for (line, rec) in records {
            if !seen.insert(rec.id.clone()) {
                return Err(Error::DuplicateId { line, id: rec.id });
            }
            let slot = grouped.entry(rec.conversation_id.clone()).or_insert_with(|| {
                order.push(rec.conversation_id.clone());
                Vec::new()
            });
            slot.push((line, rec));
        }
        let excluded: HashSet<&str> = options.exclude_speakers.iter().map(String::as_str).collect();
        let conversations = order
            .into_iter()
            .map(|id| {
                let recs = grouped.remove(&id).unwrap_or_default();
                build_conversation(id, recs, &excluded, options)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            conversations,
            delta_mode: None,
        })
    }

    pub fn conversations(&self) -> &[Conversation] {
        &self.conversations
    }

    pub fn conversation(&self, id: &str) -> Option<&Conversation> {
        self.conversations.iter().find(|c| c.id == id)
    }

    pub fn utterance_count(&self) -> usize {
        self.conversations.iter().map(Conversation::len).sum()
    }

    pub fn delta_mode(&self) -> Option<DeltaMode> {
        self.delta_mode
    }

    pub fn deltas_detected(&self) -> bool {
        self.delta_mode.is_some()
    }

    pub fn detect_deltas(mut self, mode: DeltaMode) -> Corpus {
        self.conversations = self
            .conversations
            .iter()
            .map(|c| detect_deltas(c, mode))
            .collect();
        self.delta_mode = Some(mode);
        self
    }

    pub fn summary(&self) -> CorpusSummary {
        let mut speakers: BTreeSet<&str> = BTreeSet::new();
        let mut deltas = 0;
        let mut non_op_deltas = 0;
        for c in &self.conversations {
            let op = c.op_speaker();
            for u in &c.utterances {
                speakers.insert(&u.speaker);
                if u.delta_award.is_some() {
                    deltas += 1;
                    if u.speaker != op {
                        non_op_deltas += 1;
                    }
                }
            }
        }
        CorpusSummary {
            conversations: self.conversations.len(),
            utterances: self.utterance_count(),
            speakers: speakers.len(),
            deltas,
            non_op_deltas,
        }
    }

    pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
        self.conversations
            .iter()
            .flat_map(|c| c.utterances.iter().map(Record::from))
    }

    /// Canonical serialization in the ingest format.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

fn strip_quote_lines(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('>'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn build_conversation(
    id: String,
    recs: Vec<(usize, Record)>,
    excluded: &HashSet<&str>,
    options: &IngestOptions,
) -> Result<Conversation> {
    let n = recs.len();
    let index: HashMap<&str, usize> = recs
        .iter()
        .enumerate()
        .map(|(i, (_, r))| (r.id.as_str(), i))
        .collect();

    let mut parent = vec![None; n];
    let mut roots = Vec::new();
    for (i, (line, rec)) in recs.iter().enumerate() {
        match &rec.parent_id {
            None => roots.push(i),
            Some(p) => match index.get(p.as_str()) {
                Some(&pi) => parent[i] = Some(pi),
                None => {
                    return Err(Error::OrphanUtterance {
                        line: *line,
                        id: rec.id.clone(),
                        parent: p.clone(),
                    })
                }
            },
        }
    }
    if roots.len() != 1 {
        return Err(Error::RootCount {
            conversation: id,
            count: roots.len(),
        });
    }
    let root = roots[0];

    // Every node must be reachable from the root; anything else sits on a cycle.
    let mut children = vec![Vec::new(); n];
    for (c, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(c);
        }
    }
    let mut reached = vec![false; n];
    let mut stack = vec![root];
    let mut seen = 0;
    while let Some(i) = stack.pop() {
        reached[i] = true;
        seen += 1;
        stack.extend(children[i].iter().copied());
    }
    if seen != n {
        return Err(Error::CycleDetected { conversation: id });
    }

    let keep: Vec<bool> = recs
        .iter()
        .enumerate()
        .map(|(i, (_, r))| i == root || !excluded.contains(r.speaker.as_str()))
        .collect();
    let mut new_index = vec![usize::MAX; n];
    let mut kept = Vec::new();
    for i in 0..n {
        if keep[i] {
            new_index[i] = kept.len();
            kept.push(i);
        }
    }
    let retained_parent = |mut i: usize| -> Option<usize> {
        loop {
            let p = parent[i]?;
            if keep[p] {
                return Some(p);
            }
            i = p;
        }
    };

    let mut utterances = Vec::with_capacity(kept.len());
    let mut new_parent = Vec::with_capacity(kept.len());
    for &i in &kept {
        let (line, rec) = &recs[i];
        let p = retained_parent(i);
        if let Some(p) = p {
            if !options.lax && rec.timestamp < recs[p].1.timestamp {
                return Err(Error::TimestampOrder {
                    line: *line,
                    id: rec.id.clone(),
                });
            }
        }
        new_parent.push(p.map(|p| new_index[p]));
        let text = if options.strip_quotes {
            strip_quote_lines(&rec.text)
        } else {
            rec.text.clone()
        };
        utterances.push(Utterance {
            id: rec.id.clone(),
            conversation_id: rec.conversation_id.clone(),
            parent_id: p.map(|p| recs[p].1.id.clone()),
            speaker: rec.speaker.clone(),
            timestamp: rec.timestamp,
            text,
            delta_award: rec
                .delta_to
                .as_ref()
                .filter(|to| **to != rec.speaker)
                .map(|to| DeltaAward {
                    recipient: to.clone(),
                }),
        });
    }

    let m = utterances.len();
    let mut children = vec![Vec::new(); m];
    for (c, p) in new_parent.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(c);
        }
    }
    let root = new_index[root];
    let mut order = Vec::with_capacity(m);
    order.push(root);
    let mut head = 0;
    while head < order.len() {
        let i = order[head];
        head += 1;
        order.extend(children[i].iter().copied());
    }

    Ok(Conversation {
        id,
        utterances,
        root,
        parent: new_parent,
        children,
        order,
    })
}

const DELTA_SYMBOLS: &[&str] = &["\u{394}", "\u{2206}"];
const DELTA_ASCII_TOKENS: &[&str] = &["&amp;#8710;", "!delta"];

/// Whether `text` contains a delta token. ASCII tokens match case-insensitively.
pub fn contains_delta_token(text: &str) -> bool {
    if DELTA_SYMBOLS.iter().any(|s| text.contains(s)) {
        return true;
    }
    let lower = text.to_ascii_lowercase();
    DELTA_ASCII_TOKENS.iter().any(|t| lower.contains(t))
}

/// Resolves delta awards. In token-scan mode a reply containing a delta token
/// awards the author of its parent, unless that author is the replier.
/// Awards already present are kept.
pub fn detect_deltas(conversation: &Conversation, mode: DeltaMode) -> Conversation {
    let mut out = conversation.clone();
    if mode == DeltaMode::MetadataOnly {
        return out;
    }
    for i in 0..out.len() {
        let Some(p) = out.parent[i] else { continue };
        if out.utterances[i].delta_award.is_some() || !contains_delta_token(&out.utterances[i].text) {
            continue;
        }
        let recipient = out.utterances[p].speaker.clone();
        if recipient != out.utterances[i].speaker {
            out.utterances[i].delta_award = Some(DeltaAward { recipient });
        }
    }
    out
}

/// Deduplicated `(parent_id, reply_id)` edges admitted by `scope`, over the
/// whole corpus.
pub fn scoped_edge_set(corpus: &Corpus, scope: Scope) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for conv in corpus.conversations() {
        let mask = conv.scope_mask(scope);
        for (p, c) in conv.edges() {
            if mask[c] {
                out.insert((conv.utterances[p].id.clone(), conv.utterances[c].id.clone()));
            }
        }
    }
    out
}

fn parse_line(line_no: usize, line: &str) -> Result<Record> {
    serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
        line: line_no,
        reason: e.to_string(),
    })
}

/// Reads the line-oriented corpus format. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn ingest_reader<R: BufRead>(reader: R, options: &IngestOptions) -> Result<Corpus> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        records.push((line_no, parse_line(line_no, &line)?));
    }
    Corpus::from_records(records, options)
}

pub fn ingest_str(text: &str, options: &IngestOptions) -> Result<Corpus> {
    ingest_reader(text.as_bytes(), options)
}

pub fn ingest(path: impl AsRef<Path>, options: &IngestOptions) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file), options)
}
