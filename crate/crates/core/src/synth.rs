//! Synthetic threaded conversations with known coordination.
//!
//! Roots carry each marker independently with probability `r`. A reply
//! carries marker `m` with probability `echo[m]` when its parent carries `m`
//! and `base[m]` otherwise, so a replier's expected coordination is
//! `(echo - base) * (1 - r')` where `r'` is the marker rate among the targets
//! it answers. Every utterance has rate `r` when `r = base / (1 - echo + base)`,
//! and in trees of depth one.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coordination::{CoordinationParams, CoordinationScore, SupportRule};
use crate::corpus::{Corpus, IngestOptions, Record};
use crate::error::{Error, Result};
use crate::lexicon::{tokenize, Lexicon, MarkerSet};
use crate::roles::DummyUser;

/// Reply behavior: per-marker echo and base probabilities. A single value
/// applies to every marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub echo: Vec<f64>,
    pub base: Vec<f64>,
}

impl Behavior {
    pub fn uniform(echo: f64, base: f64) -> Self {
        Behavior {
            echo: vec![echo],
            base: vec![base],
        }
    }

    fn echo(&self, m: usize) -> f64 {
        if self.echo.len() == 1 {
            self.echo[0]
        } else {
            self.echo[m]
        }
    }

    fn base(&self, m: usize) -> f64 {
        if self.base.len() == 1 {
            self.base[0]
        } else {
            self.base[m]
        }
    }

    fn validate(&self, what: &str, markers: usize) -> Result<()> {
        for (field, v) in [("echo", &self.echo), ("base", &self.base)] {
            if v.len() != 1 && v.len() != markers {
                return Err(Error::InvalidConfig(format!(
                    "{what} {field}: expected 1 or {markers} probabilities, got {}",
                    v.len()
                )));
            }
            check_prob(&format!("{what} {field}"), v)?;
        }
        Ok(())
    }
}

fn check_prob(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(p) => Err(Error::InvalidConfig(format!("{what}: {p} is not a probability"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_conversations: usize,
    /// Size of the account pool conversations draw from.
    pub n_speakers: usize,
    /// Participants per conversation, OP included.
    pub speakers_per_conversation: usize,
    /// Mean of the geometric child-count distribution.
    pub branching: f64,
    pub max_children: usize,
    pub depth_limit: usize,
    pub max_utterances: usize,
    /// Probability that a reply to a non-OP utterance is written by the OP.
    pub op_reply_share: f64,
    /// Marker rate of root utterances.
    pub target_marker_rate: f64,
    /// The OP replying to anyone.
    pub op: Behavior,
    /// A non-OP replying to a non-OP.
    pub others: Behavior,
    /// A non-OP replying to the OP; `others` when absent.
    pub toward_op: Option<Behavior>,
    pub op_delta_prob: f64,
    pub reg_delta_prob: f64,
    pub filler_tokens: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_conversations: 20,
            n_speakers: 100,
            speakers_per_conversation: 8,
            branching: 1.5,
            max_children: 8,
            depth_limit: 12,
            max_utterances: 60,
            op_reply_share: 0.3,
            target_marker_rate: 0.5,
            op: Behavior::uniform(0.8, 0.2),
            others: Behavior::uniform(0.8, 0.2),
            toward_op: None,
            op_delta_prob: 0.02,
            reg_delta_prob: 0.01,
            filler_tokens: 3,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self, markers: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.speakers_per_conversation < 2 {
            return bad("speakers_per_conversation must be at least 2");
        }
        if self.n_speakers < self.speakers_per_conversation {
            return bad("n_speakers must be at least speakers_per_conversation");
        }
        if !(self.branching.is_finite() && self.branching >= 0.0) {
            return bad("branching must be a non-negative number");
        }
        if self.max_utterances == 0 {
            return bad("max_utterances must be positive");
        }
        check_prob("op_reply_share", &[self.op_reply_share])?;
        check_prob("target_marker_rate", &[self.target_marker_rate])?;
        check_prob("op_delta_prob", &[self.op_delta_prob])?;
        check_prob("reg_delta_prob", &[self.reg_delta_prob])?;
        self.op.validate("op", markers)?;
        self.others.validate("others", markers)?;
        if let Some(b) = &self.toward_op {
            b.validate("toward_op", markers)?;
        }
        Ok(())
    }
}

/// `(echo - base) * (1 - r)`: expected coordination when targets carry the
/// marker at rate `r`.
pub fn expected_coordination(echo: f64, base: f64, target_rate: f64) -> f64 {
    (echo - base) * (1.0 - target_rate)
}

const FILLERS: &[&str] = &[
    "argument", "policy", "money", "vote", "tax", "market", "law", "reason", "point", "evidence", "study",
    "system", "cost", "view", "example", "people", "debate", "claim", "source", "data",
];

/// One token per category that belongs to that category alone.
fn exclusive_tokens(lexicon: &Lexicon) -> Result<Vec<String>> {
    lexicon
        .categories()
        .iter()
        .enumerate()
        .map(|(m, c)| {
            c.entries
                .iter()
                .find(|e| lexicon.lookup(e) == MarkerSet::EMPTY.with(m))
                .cloned()
                .ok_or_else(|| Error::InvalidConfig(format!("category `{}` has no entry unique to it", c.name)))
        })
        .collect()
}

struct Node {
    parent: Option<usize>,
    depth: usize,
    speaker: usize,
    markers: MarkerSet,
    timestamp: i64,
    delta: bool,
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

fn child_count(rng: &mut ChaCha8Rng, mean: f64, cap: usize) -> usize {
    let keep_going = mean / (1.0 + mean);
    let mut k = 0;
    while k < cap && bernoulli(rng, keep_going) {
        k += 1;
    }
    k
}

fn generate_conversation(config: &GeneratorConfig, markers: usize, index: usize) -> (Vec<usize>, Vec<Node>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);

    let mut pool: Vec<usize> = (0..config.n_speakers).collect();
    let (chosen, _) = pool.partial_shuffle(&mut rng, config.speakers_per_conversation);
    let participants = chosen.to_vec();

    let base_ts = 1_500_000_000 + index as i64 * 1_000_000;
    let mut root_markers = MarkerSet::EMPTY;
    for m in 0..markers {
        if bernoulli(&mut rng, config.target_marker_rate) {
            root_markers.insert(m);
        }
    }
    let mut nodes = vec![Node {
        parent: None,
        depth: 0,
        speaker: 0,
        markers: root_markers,
        timestamp: base_ts,
        delta: false,
    }];
    let mut head = 0;
    while head < nodes.len() && nodes.len() < config.max_utterances {
        let parent = head;
        head += 1;
        if nodes[parent].depth >= config.depth_limit {
            continue;
        }
        let mut k = child_count(&mut rng, config.branching, config.max_children);
        if parent == 0 {
            k = k.max(1);
        }
        for _ in 0..k {
            if nodes.len() >= config.max_utterances {
                break;
            }
            let target = nodes[parent].speaker;
            let speaker = if target != 0 && bernoulli(&mut rng, config.op_reply_share) {
                0
            } else {
                // any non-OP participant other than the target
                let choices: Vec<usize> = (1..participants.len()).filter(|&s| s != target).collect();
                if choices.is_empty() {
                    0
                } else {
                    choices[rng.random_range(0..choices.len())]
                }
            };
            let behavior = if speaker == 0 {
                &config.op
            } else if target == 0 {
                config.toward_op.as_ref().unwrap_or(&config.others)
            } else {
                &config.others
            };
            let mut set = MarkerSet::EMPTY;
            for m in 0..markers {
                let p = if nodes[parent].markers.contains(m) {
                    behavior.echo(m)
                } else {
                    behavior.base(m)
                };
                if bernoulli(&mut rng, p) {
                    set.insert(m);
                }
            }
            let delta_prob = if speaker == 0 {
                config.op_delta_prob
            } else {
                config.reg_delta_prob
            };
            let delta = bernoulli(&mut rng, delta_prob);
            let timestamp = nodes[parent].timestamp + 1 + rng.random_range(0..600);
            nodes.push(Node {
                parent: Some(parent),
                depth: nodes[parent].depth + 1,
                speaker,
                markers: set,
                timestamp,
                delta,
            });
        }
    }
    (participants, nodes)
}

fn render_text(rng: &mut ChaCha8Rng, markers: MarkerSet, tokens: &[String], fillers: &[&str], n_fillers: usize, delta: bool) -> String {
    let mut words: Vec<&str> = tokens
        .iter()
        .enumerate()
        .filter(|(m, _)| markers.contains(*m))
        .map(|(_, t)| t.as_str())
        .collect();
    for _ in 0..n_fillers {
        words.push(fillers[rng.random_range(0..fillers.len())]);
    }
    if delta {
        words.push("Δ");
    }
    words.join(" ")
}

/// Corpus records for `config`, in conversation order.
pub fn generate_records(config: &GeneratorConfig, lexicon: &Lexicon) -> Result<Vec<Record>> {
    config.validate(lexicon.len())?;
    let tokens = exclusive_tokens(lexicon)?;
    let fillers: Vec<&str> = FILLERS
        .iter()
        .copied()
        .filter(|f| lexicon.lookup(f) == MarkerSet::EMPTY && tokenize(f).len() == 1)
        .collect();
    let per_conversation: Vec<Vec<Record>> = (0..config.n_conversations)
        .into_par_iter()
        .map(|ci| {
            let (participants, nodes) = generate_conversation(config, lexicon.len(), ci);
            let mut text_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_7e47);
            text_rng.set_stream(ci as u64);
            let conv_id = format!("t{ci:05}");
            let speaker_name = |s: usize| format!("u{:05}", participants[s]);
            nodes
                .iter()
                .enumerate()
                .map(|(i, n)| Record {
                    id: format!("t{ci:05}_{i}"),
                    conversation_id: conv_id.clone(),
                    parent_id: n.parent.map(|p| format!("t{ci:05}_{p}")),
                    speaker: speaker_name(n.speaker),
                    timestamp: n.timestamp,
                    text: render_text(&mut text_rng, n.markers, &tokens, &fillers, config.filler_tokens, n.delta),
                    delta_to: n
                        .parent
                        .filter(|_| n.delta)
                        .map(|p| speaker_name(nodes[p].speaker)),
                })
                .collect()
        })
        .collect();
    Ok(per_conversation.into_iter().flatten().collect())
}

pub fn generate(config: &GeneratorConfig, lexicon: &Lexicon) -> Result<Corpus> {
    let records = generate_records(config, lexicon)?;
    Corpus::from_records(records.into_iter().enumerate().map(|(i, r)| (i + 1, r)), &IngestOptions::default())
}

/// Writes generated records in the corpus file format.
pub fn write_records<W: Write>(records: &[Record], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub const ORACLE_LIMIT: usize = 10_000;

/// Coordination of `replier` toward `targets` by direct enumeration of every
/// ordered utterance pair in the corpus. Test-only reference.
pub fn oracle_coordination(
    corpus: &Corpus,
    lexicon: &Lexicon,
    replier: &DummyUser,
    targets: &BTreeSet<DummyUser>,
    marker: usize,
    params: CoordinationParams,
) -> Result<CoordinationScore> {
    let n = corpus.utterance_count();
    if n > ORACLE_LIMIT {
        return Err(Error::CorpusTooLarge {
            utterances: n,
            limit: ORACLE_LIMIT,
        });
    }
    let all: Vec<_> = corpus.conversations().iter().flat_map(|c| c.utterances()).collect();
    let has = |text: &str| lexicon.mark_text(text).contains(marker);
    let (mut both, mut tgt, mut rep, mut total) = (0u64, 0u64, 0u64, 0u64);
    for u2 in &all {
        if u2.speaker != replier.speaker_id || u2.conversation_id != replier.conversation_id {
            continue;
        }
        for u1 in &all {
            if u2.parent_id.as_deref() != Some(u1.id.as_str()) || u1.conversation_id != u2.conversation_id {
                continue;
            }
            if u1.speaker == u2.speaker {
                continue;
            }
            let who = DummyUser {
                speaker_id: u1.speaker.clone(),
                conversation_id: u1.conversation_id.clone(),
            };
            if !targets.contains(&who) {
                continue;
            }
            let (t, r) = (has(&u1.text), has(&u2.text));
            total += 1;
            if t {
                tgt += 1;
            }
            if r {
                rep += 1;
            }
            if t && r {
                both += 1;
            }
        }
    }
    let support = match params.support_rule {
        SupportRule::Target => tgt,
        SupportRule::Reply => rep,
        SupportRule::Total => total,
    };
    let value = if support > params.min_support && tgt > 0 {
        Some(both as f64 / tgt as f64 - rep as f64 / total as f64)
    } else {
        None
    };
    Ok(CoordinationScore {
        value,
        support,
        n_pairs: total,
    })
}
