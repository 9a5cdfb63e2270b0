//! Directed style coordination.
//!
//! For a set of exchanges `(target utterance, direct reply)` the coordination
//! of the replier on marker `m` is
//!
//! ```text
//! C = P(reply has m | target has m) - P(reply has m)
//! ```
//!
//! estimated by plain frequencies over the exchange set. Everything is counted
//! in integers first; each score performs exactly two divisions, so results do
//! not depend on the order in which exchanges were visited.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Scope};
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, MarkerSet};
use crate::roles::{build_groups, DummyId, Roles, SpeakerGroup};

/// Which count must exceed `min_support` for a score to be defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportRule {
    /// Exchanges whose target exhibits the marker.
    #[default]
    Target,
    /// Exchanges whose reply exhibits the marker.
    Reply,
    /// All exchanges.
    Total,
}

impl FromStr for SupportRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target" => Ok(SupportRule::Target),
            "reply" => Ok(SupportRule::Reply),
            "total" => Ok(SupportRule::Total),
            other => Err(Error::InvalidConfig(format!("unknown support rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinationParams {
    /// A score is defined only when its support is strictly greater.
    pub min_support: u64,
    pub support_rule: SupportRule,
}

impl Default for CoordinationParams {
    fn default() -> Self {
        CoordinationParams {
            min_support: 3,
            support_rule: SupportRule::Target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinationScore {
    /// `None` when support is insufficient.
    pub value: Option<f64>,
    pub support: u64,
    pub n_pairs: u64,
}

impl CoordinationScore {
    pub fn undefined() -> Self {
        CoordinationScore {
            value: None,
            support: 0,
            n_pairs: 0,
        }
    }

    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }
}

/// Integer tallies of one marker over an exchange set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MarkerCounts {
    pub both: u64,
    pub target: u64,
    pub reply: u64,
    pub total: u64,
}

impl MarkerCounts {
    pub fn add(&mut self, target: bool, reply: bool) {
        self.total += 1;
        self.target += target as u64;
        self.reply += reply as u64;
        self.both += (target && reply) as u64;
    }

    pub fn support(&self, rule: SupportRule) -> u64 {
        match rule {
            SupportRule::Target => self.target,
            SupportRule::Reply => self.reply,
            SupportRule::Total => self.total,
        }
    }

    pub fn score(&self, params: CoordinationParams) -> CoordinationScore {
        let support = self.support(params.support_rule);
        let value = (support > params.min_support && self.target > 0)
            .then(|| self.both as f64 / self.target as f64 - self.reply as f64 / self.total as f64);
        CoordinationScore {
            value,
            support,
            n_pairs: self.total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExchangePair {
    pub target: MarkerSet,
    pub reply: MarkerSet,
}

/// Exchanges between one replier and a group of targets, in corpus order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeSet {
    pub replier: DummyId,
    pub pairs: Vec<ExchangePair>,
}

impl ExchangeSet {
    pub fn counts(&self, marker: usize) -> MarkerCounts {
        count_pairs(&self.pairs, marker)
    }
}

fn count_pairs(pairs: &[ExchangePair], marker: usize) -> MarkerCounts {
    let mut c = MarkerCounts::default();
    for p in pairs {
        c.add(p.target.contains(marker), p.reply.contains(marker));
    }
    c
}

/// Coordination on `marker` over an explicit list of exchanges.
pub fn pair_coordination(
    pairs: &[ExchangePair],
    marker: usize,
    params: CoordinationParams,
) -> Result<CoordinationScore> {
    if pairs.is_empty() {
        return Err(Error::EmptyExchangeSet);
    }
    Ok(count_pairs(pairs, marker).score(params))
}

pub(crate) fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Group coordination on one marker: the unweighted mean over repliers with
/// a defined score.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupScore {
    pub mean: f64,
    pub n: usize,
    pub per_speaker: Vec<(DummyId, CoordinationScore)>,
}

/// Per-marker scores of every member of a replier group.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerScores {
    pub speakers: Vec<DummyId>,
    /// `per_marker[m][i]` is the score of `speakers[i]` on marker `m`.
    pub per_marker: Vec<Vec<CoordinationScore>>,
}

impl SpeakerScores {
    pub fn values(&self, marker: usize) -> Vec<Option<f64>> {
        self.per_marker[marker].iter().map(|s| s.value).collect()
    }

    pub fn value_matrix(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.per_marker.len()).map(|m| self.values(m)).collect()
    }

    pub fn group_score(&self, marker: usize) -> Result<GroupScore> {
        let defined: Vec<f64> = self.per_marker[marker].iter().filter_map(|s| s.value).collect();
        let mean = mean(&defined).ok_or(Error::NoDefinedSpeakers)?;
        Ok(GroupScore {
            mean,
            n: defined.len(),
            per_speaker: self.speakers.iter().copied().zip(self.per_marker[marker].iter().copied()).collect(),
        })
    }
}

/// A corpus prepared for scoring: marker presence per utterance, role groups,
/// and the edge masks of every scope.
pub struct Analysis<'a> {
    corpus: &'a Corpus,
    lexicon: &'a Lexicon,
    roles: Roles,
    marks: Vec<Vec<MarkerSet>>,
    scope_masks: Vec<Vec<Vec<bool>>>,
    dummy_base: Vec<u32>,
}

impl<'a> Analysis<'a> {
    /// Marks every utterance and builds the role groups. Work is spread over
    /// the current rayon pool.
    pub fn new(corpus: &'a Corpus, lexicon: &'a Lexicon) -> Result<Self> {
        let roles = build_groups(corpus)?;
        let marks = corpus
            .conversations()
            .par_iter()
            .map(|c| c.utterances().iter().map(|u| lexicon.mark_text(&u.text)).collect())
            .collect();
        let scope_masks = Scope::ALL
            .iter()
            .map(|&s| corpus.conversations().par_iter().map(|c| c.scope_mask(s)).collect())
            .collect();
        let dummy_base = (0..corpus.conversations().len())
            .map(|ci| roles.conversation_dummies(ci).iter().map(|d| d.0).min().unwrap_or(0))
            .collect();
        Ok(Analysis {
            corpus,
            lexicon,
            roles,
            marks,
            scope_masks,
            dummy_base,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    pub fn lexicon(&self) -> &Lexicon {
        self.lexicon
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn markers(&self, conversation: usize, utterance: usize) -> MarkerSet {
        self.marks[conversation][utterance]
    }

    fn mask(&self, scope: Scope) -> &[Vec<bool>] {
        let i = Scope::ALL.iter().position(|&s| s == scope).expect("every scope is listed");
        &self.scope_masks[i]
    }

    /// Visits every admitted exchange of conversation `ci` whose target is in
    /// `targets` and whose replier is a different speaker.
    fn for_each_exchange(
        &self,
        ci: usize,
        targets: &[bool],
        scope: Scope,
        mut visit: impl FnMut(DummyId, ExchangePair),
    ) {
        let conv = &self.corpus.conversations()[ci];
        let mask = &self.mask(scope)[ci];
        let dummies = self.roles.conversation_dummies(ci);
        let marks = &self.marks[ci];
        for (p, c) in conv.edges() {
            let (a, b) = (dummies[p], dummies[c]);
            if !mask[c] || a == b || !targets[a.index()] {
                continue;
            }
            visit(
                b,
                ExchangePair {
                    target: marks[p],
                    reply: marks[c],
                },
            );
        }
    }

    pub fn exchange_set(&self, replier: DummyId, targets: &SpeakerGroup, scope: Scope) -> ExchangeSet {
        let ci = self.roles.conversation_index(replier);
        let target_mask = targets.mask(self.roles.dummy_count());
        let mut pairs = Vec::new();
        self.for_each_exchange(ci, &target_mask, scope, |b, pair| {
            if b == replier {
                pairs.push(pair);
            }
        });
        ExchangeSet { replier, pairs }
    }

    /// Coordination of one replier toward a target group on one marker. An
    /// empty exchange set yields an undefined score with `n_pairs == 0`.
    pub fn speaker_to_group(
        &self,
        replier: DummyId,
        targets: &SpeakerGroup,
        marker: usize,
        scope: Scope,
        params: CoordinationParams,
    ) -> CoordinationScore {
        let set = self.exchange_set(replier, targets, scope);
        pair_coordination(&set.pairs, marker, params).unwrap_or_else(|_| CoordinationScore::undefined())
    }

    /// Scores of every member of `repliers` toward `targets`, all markers.
    pub fn speaker_scores(
        &self,
        repliers: &SpeakerGroup,
        targets: &SpeakerGroup,
        scope: Scope,
        params: CoordinationParams,
    ) -> SpeakerScores {
        let n_markers = self.lexicon.len();
        let dummy_count = self.roles.dummy_count();
        let target_mask = targets.mask(dummy_count);
        let replier_mask = repliers.mask(dummy_count);

        // Dummies never span conversations, so counts are gathered per
        // conversation and concatenated in conversation order.
        let per_conversation: Vec<Vec<(DummyId, Vec<MarkerCounts>)>> = (0..self.corpus.conversations().len())
            .into_par_iter()
            .map(|ci| {
                let base = self.dummy_base[ci];
                let dummies = self.roles.conversation_dummies(ci);
                let width = dummies.iter().map(|d| d.0 - base + 1).max().unwrap_or(0) as usize;
                let mut counts = vec![vec![MarkerCounts::default(); n_markers]; width];
                self.for_each_exchange(ci, &target_mask, scope, |b, pair| {
                    if replier_mask[b.index()] {
                        let slot = &mut counts[(b.0 - base) as usize];
                        for (m, c) in slot.iter_mut().enumerate() {
                            c.add(pair.target.contains(m), pair.reply.contains(m));
                        }
                    }
                });
                counts
                    .into_iter()
                    .enumerate()
                    .map(|(i, c)| (DummyId(base + i as u32), c))
                    .filter(|(d, _)| replier_mask[d.index()])
                    .collect()
            })
            .collect();

        let mut speakers = Vec::with_capacity(repliers.len());
        let mut per_marker = vec![Vec::with_capacity(repliers.len()); n_markers];
        for (id, counts) in per_conversation.into_iter().flatten() {
            speakers.push(id);
            for (m, c) in counts.iter().enumerate() {
                per_marker[m].push(c.score(params));
            }
        }
        debug_assert_eq!(speakers.len(), repliers.len());
        SpeakerScores { speakers, per_marker }
    }

    pub fn group_to_group(
        &self,
        repliers: &SpeakerGroup,
        targets: &SpeakerGroup,
        marker: usize,
        scope: Scope,
        params: CoordinationParams,
    ) -> Result<GroupScore> {
        self.speaker_scores(repliers, targets, scope, params).group_score(marker)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AggregateKind {
    /// Mean over markers, only for speakers defined on every marker.
    Agg1,
    /// Missing markers filled with the group mean of that marker.
    Agg2,
    /// Missing markers filled with the speaker's own cross-marker mean.
    Agg3,
}

impl AggregateKind {
    pub const ALL: [AggregateKind; 3] = [AggregateKind::Agg1, AggregateKind::Agg2, AggregateKind::Agg3];

    pub fn as_str(self) -> &'static str {
        match self {
            AggregateKind::Agg1 => "aggregate_1",
            AggregateKind::Agg2 => "aggregate_2",
            AggregateKind::Agg3 => "aggregate_3",
        }
    }
}

impl fmt::Display for AggregateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-speaker aggregate values; `per_marker[m][i]` is speaker `i` on marker
/// `m`. Undefined entries stay `None`.
pub fn aggregate_values(per_marker: &[Vec<Option<f64>>], kind: AggregateKind) -> Vec<Option<f64>> {
    let n_speakers = per_marker.first().map_or(0, Vec::len);
    let group_means: Vec<Option<f64>> = per_marker
        .iter()
        .map(|col| mean(&col.iter().flatten().copied().collect::<Vec<_>>()))
        .collect();
    (0..n_speakers)
        .map(|i| {
            let own: Vec<Option<f64>> = per_marker.iter().map(|col| col[i]).collect();
            let defined: Vec<f64> = own.iter().flatten().copied().collect();
            if defined.is_empty() {
                return None;
            }
            match kind {
                AggregateKind::Agg1 => (defined.len() == own.len()).then(|| mean(&defined)).flatten(),
                AggregateKind::Agg2 => {
                    let filled: Option<Vec<f64>> = own.iter().zip(&group_means).map(|(v, mu)| v.or(*mu)).collect();
                    filled.and_then(|f| mean(&f))
                }
                AggregateKind::Agg3 => mean(&defined),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateScore<K> {
    pub mean: f64,
    pub n: usize,
    /// Speakers with a defined aggregate, in input order.
    pub per_speaker: Vec<(K, f64)>,
}

pub fn aggregate<K: Clone>(
    speakers: &[K],
    per_marker: &[Vec<Option<f64>>],
    kind: AggregateKind,
) -> Result<AggregateScore<K>> {
    if per_marker.is_empty() {
        return Err(Error::InvalidConfig("aggregation needs at least one marker".into()));
    }
    if per_marker.iter().any(|col| col.len() != speakers.len()) {
        return Err(Error::InvalidConfig("per-marker scores are not aligned with speakers".into()));
    }
    let per_speaker: Vec<(K, f64)> = speakers
        .iter()
        .cloned()
        .zip(aggregate_values(per_marker, kind))
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect();
    let values: Vec<f64> = per_speaker.iter().map(|(_, v)| *v).collect();
    let mean = mean(&values).ok_or(Error::NoDefinedSpeakers)?;
    Ok(AggregateScore {
        mean,
        n: values.len(),
        per_speaker,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(bits: &[(bool, bool)]) -> Vec<ExchangePair> {
        bits.iter()
            .map(|&(t, r)| ExchangePair {
                target: if t { MarkerSet::EMPTY.with(0) } else { MarkerSet::EMPTY },
                reply: if r { MarkerSet::EMPTY.with(0) } else { MarkerSet::EMPTY },
            })
            .collect()
    }

    fn no_support() -> CoordinationParams {
        CoordinationParams {
            min_support: 0,
            ..Default::default()
        }
    }

    #[test]
    fn hand_counted_fixture() {
        let p = pairs(&[(true, true), (true, false), (false, false), (false, false)]);
        let s = pair_coordination(&p, 0, no_support()).unwrap();
        assert_eq!(s.value, Some(0.25));
        assert_eq!((s.support, s.n_pairs), (2, 4));
    }

    #[test]
    fn always_replying_with_marker_is_zero() {
        let p = pairs(&[(true, true), (false, true)]);
        assert_eq!(pair_coordination(&p, 0, no_support()).unwrap().value, Some(0.0));
    }

    #[test]
    fn perfect_echo_closed_form() {
        let mut bits = vec![(true, true); 2];
        bits.extend(vec![(false, false); 6]);
        let s = pair_coordination(&pairs(&bits), 0, no_support()).unwrap();
        assert_eq!(s.value, Some(0.75));
    }

    #[test]
    fn support_threshold_is_strict() {
        let three = pairs(&[(true, true); 3]);
        assert_eq!(pair_coordination(&three, 0, CoordinationParams::default()).unwrap().value, None);
        let four = pairs(&[(true, true); 4]);
        assert!(pair_coordination(&four, 0, CoordinationParams::default()).unwrap().is_defined());
        // no target ever carries the marker: undefined even without a threshold
        let none = pairs(&[(false, true)]);
        assert_eq!(pair_coordination(&none, 0, no_support()).unwrap().value, None);
    }

    #[test]
    fn alternative_support_rules() {
        let p = pairs(&[(true, false), (false, true), (false, true), (false, true), (false, true)]);
        let rule = |support_rule| CoordinationParams {
            min_support: 3,
            support_rule,
        };
        assert_eq!(pair_coordination(&p, 0, rule(SupportRule::Target)).unwrap().support, 1);
        let reply = pair_coordination(&p, 0, rule(SupportRule::Reply)).unwrap();
        assert_eq!(reply.support, 4);
        assert_eq!(reply.value, Some(0.0 - 4.0 / 5.0));
        assert_eq!(pair_coordination(&p, 0, rule(SupportRule::Total)).unwrap().support, 5);
    }

    #[test]
    fn empty_set_is_an_error() {
        assert!(matches!(pair_coordination(&[], 0, no_support()), Err(Error::EmptyExchangeSet)));
    }

    #[test]
    fn worked_aggregate_example() {
        let per_marker = vec![vec![Some(0.2), Some(0.1)], vec![Some(0.4), None]];
        let ids = ["b1", "b2"];
        let a1 = aggregate(&ids, &per_marker, AggregateKind::Agg1).unwrap();
        assert_eq!((a1.n, a1.per_speaker.len()), (1, 1));
        assert!((a1.mean - 0.3).abs() < 1e-15);
        let a2 = aggregate(&ids, &per_marker, AggregateKind::Agg2).unwrap();
        assert_eq!(a2.n, 2);
        assert!((a2.per_speaker[1].1 - 0.25).abs() < 1e-15);
        assert!((a2.mean - 0.275).abs() < 1e-15);
        let a3 = aggregate(&ids, &per_marker, AggregateKind::Agg3).unwrap();
        assert_eq!(a3.n, 2);
        assert_eq!(a3.per_speaker[1].1, 0.1);
        assert!((a3.mean - 0.2).abs() < 1e-15);
    }

    #[test]
    fn agg2_without_any_defined_group_value_stays_undefined() {
        let per_marker = vec![vec![Some(0.2), Some(0.1)], vec![None, None]];
        let v = aggregate_values(&per_marker, AggregateKind::Agg2);
        assert_eq!(v, vec![None, None]);
        assert!(matches!(
            aggregate(&[1, 2], &per_marker, AggregateKind::Agg2),
            Err(Error::NoDefinedSpeakers)
        ));
    }

    #[test]
    fn single_marker_single_speaker() {
        let per_marker = vec![vec![Some(-0.125)]];
        for kind in AggregateKind::ALL {
            assert_eq!(aggregate(&[0], &per_marker, kind).unwrap().mean, -0.125);
        }
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<(bool, bool)>> {
        prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)
    }

    proptest! {
        #[test]
        fn defined_scores_lie_in_unit_interval(bits in arb_pairs()) {
            if let Some(v) = pair_coordination(&pairs(&bits), 0, no_support()).unwrap().value {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn all_true_side_gives_zero(bits in arb_pairs(), side in any::<bool>()) {
            let forced: Vec<_> = bits.iter().map(|&(t, r)| if side { (true, r) } else { (t, true) }).collect();
            if let Some(v) = pair_coordination(&pairs(&forced), 0, no_support()).unwrap().value {
                prop_assert_eq!(v, 0.0);
            }
        }

        #[test]
        fn pair_order_does_not_matter(mut bits in arb_pairs(), seed in any::<u64>()) {
            let before = pair_coordination(&pairs(&bits), 0, no_support()).unwrap();
            let k = (seed as usize) % bits.len();
            bits.rotate_left(k);
            bits.reverse();
            prop_assert_eq!(pair_coordination(&pairs(&bits), 0, no_support()).unwrap(), before);
        }

        #[test]
        fn fully_defined_aggregates_agree(cols in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 1..6)) {
            let per_marker: Vec<Vec<Option<f64>>> = cols.iter().map(|c| c.iter().map(|&v| Some(v)).collect()).collect();
            let a1 = aggregate_values(&per_marker, AggregateKind::Agg1);
            prop_assert_eq!(&a1, &aggregate_values(&per_marker, AggregateKind::Agg2));
            prop_assert_eq!(&a1, &aggregate_values(&per_marker, AggregateKind::Agg3));
        }

        #[test]
        fn agg3_is_mean_of_defined(cols in prop::collection::vec(prop::collection::vec(prop::option::of(-1.0f64..1.0), 4), 1..6)) {
            let got = aggregate_values(&cols, AggregateKind::Agg3);
            for (i, g) in got.iter().enumerate() {
                let own: Vec<f64> = cols.iter().filter_map(|c| c[i]).collect();
                let expected = if own.is_empty() { None } else { Some(own.iter().sum::<f64>() / own.len() as f64) };
                prop_assert_eq!(*g, expected);
            }
        }
    }
}
