//! Per-conversation dummy users and the role groups built on them.
//!
//! A speaker active in `n` conversations gets `n` dummy users, one per
//! conversation, so the same account can be an OP in one thread and an
//! ordinary participant in another.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Dense index of a dummy user, in corpus order of first appearance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DummyId(pub u32);

impl DummyId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DummyUser {
    pub speaker_id: String,
    pub conversation_id: String,
}

impl fmt::Display for DummyUser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.speaker_id, self.conversation_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupName {
    /// Every dummy user.
    All,
    /// Authors of the conversation root.
    Ops,
    /// Everyone but the OP of the conversation.
    NonOps,
    /// Non-OP dummies whose account opens some other conversation.
    ReturningOps,
    /// Dummies that awarded at least one delta in their conversation.
    DeltaGivers,
    /// Delta givers who are the OP.
    DeltaOps,
    /// Delta givers who are not the OP.
    DeltaRegulars,
    /// Dummies that awarded no delta.
    NonDeltaGivers,
    /// OPs that awarded no delta in their own conversation.
    OpsWithoutDelta,
    /// Non-OP dummies whose account never opens a conversation.
    NeverOps,
}

impl GroupName {
    pub const ALL: [GroupName; 10] = [
        GroupName::All,
        GroupName::Ops,
        GroupName::NonOps,
        GroupName::ReturningOps,
        GroupName::DeltaGivers,
        GroupName::DeltaOps,
        GroupName::DeltaRegulars,
        GroupName::NonDeltaGivers,
        GroupName::OpsWithoutDelta,
        GroupName::NeverOps,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupName::All => "U",
            GroupName::Ops => "OPs",
            GroupName::NonOps => "non_OPs",
            GroupName::ReturningOps => "returning_OPs",
            GroupName::DeltaGivers => "delta",
            GroupName::DeltaOps => "delta_OP",
            GroupName::DeltaRegulars => "delta_reg",
            GroupName::NonDeltaGivers => "non_delta",
            GroupName::OpsWithoutDelta => "OP_no_delta",
            GroupName::NeverOps => "never_OP",
        }
    }

    /// Set-builder style label used in reports.
    pub fn notation(self) -> &'static str {
        match self {
            GroupName::All => "U",
            GroupName::Ops => "G^OPs",
            GroupName::NonOps => "G^~OPs",
            GroupName::ReturningOps => "G^~r",
            GroupName::DeltaGivers => "G^Δ",
            GroupName::DeltaOps => "G^Δ_OP",
            GroupName::DeltaRegulars => "G^Δ_reg",
            GroupName::NonDeltaGivers => "G^~Δ",
            GroupName::OpsWithoutDelta => "G^~OP_Δ",
            GroupName::NeverOps => "G^never-OP",
        }
    }
}

impl fmt::Display for GroupName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GroupName::ALL
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownGroup(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerGroup {
    pub name: GroupName,
    members: BTreeSet<DummyId>,
}

impl SpeakerGroup {
    pub fn new(name: GroupName, members: impl IntoIterator<Item = DummyId>) -> Self {
        SpeakerGroup {
            name,
            members: members.into_iter().collect(),
        }
    }

    pub fn contains(&self, id: DummyId) -> bool {
        self.members.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = DummyId> + '_ {
        self.members.iter().copied()
    }

    pub fn members(&self) -> &BTreeSet<DummyId> {
        &self.members
    }

    /// Membership as a dense mask over `dummy_count` dummies.
    pub fn mask(&self, dummy_count: usize) -> Vec<bool> {
        let mut m = vec![false; dummy_count];
        for id in &self.members {
            m[id.index()] = true;
        }
        m
    }
}

/// Dummy users of a corpus and every role group over them.
#[derive(Debug, Clone)]
pub struct Roles {
    dummies: Vec<DummyUser>,
    dummy_conversation: Vec<usize>,
    utterance_dummy: Vec<Vec<DummyId>>,
    groups: BTreeMap<GroupName, SpeakerGroup>,
}

impl Roles {
    pub fn dummies(&self) -> &[DummyUser] {
        &self.dummies
    }

    pub fn dummy_count(&self) -> usize {
        self.dummies.len()
    }

    pub fn dummy(&self, id: DummyId) -> &DummyUser {
        &self.dummies[id.index()]
    }

    /// Index of the conversation a dummy belongs to.
    pub fn conversation_index(&self, id: DummyId) -> usize {
        self.dummy_conversation[id.index()]
    }

    pub fn find(&self, speaker_id: &str, conversation_id: &str) -> Option<DummyId> {
        self.dummies
            .iter()
            .position(|d| d.speaker_id == speaker_id && d.conversation_id == conversation_id)
            .map(|i| DummyId(i as u32))
    }

    /// Dummy of utterance `utterance` in conversation number `conversation`.
    pub fn utterance_dummy(&self, conversation: usize, utterance: usize) -> DummyId {
        self.utterance_dummy[conversation][utterance]
    }

    pub fn conversation_dummies(&self, conversation: usize) -> &[DummyId] {
        &self.utterance_dummy[conversation]
    }

    pub fn group(&self, name: GroupName) -> &SpeakerGroup {
        &self.groups[&name]
    }

    pub fn groups(&self) -> impl Iterator<Item = &SpeakerGroup> {
        self.groups.values()
    }

    /// `group_name,speaker_id,conversation_id` rows, groups in declaration
    /// order and members in id order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group_name", "speaker_id", "conversation_id"])?;
        for g in self.groups.values() {
            for id in g.iter() {
                let d = self.dummy(id);
                w.write_record([g.name.as_str(), &d.speaker_id, &d.conversation_id])?;
            }
        }
        w.flush().map_err(|e| Error::io("<groups csv>", e))?;
        Ok(())
    }
}

pub fn build_groups(corpus: &Corpus) -> Result<Roles> {
    if !corpus.deltas_detected() {
        return Err(Error::DeltasNotDetected);
    }
    let mut dummies = Vec::new();
    let mut dummy_conversation = Vec::new();
    let mut utterance_dummy = Vec::with_capacity(corpus.conversations().len());
    let mut ops = BTreeSet::new();
    let mut givers = BTreeSet::new();
    let op_accounts: HashSet<&str> = corpus.conversations().iter().map(|c| c.op_speaker()).collect();

    for (ci, conv) in corpus.conversations().iter().enumerate() {
        let mut local: HashMap<&str, DummyId> = HashMap::new();
        let mut ids = Vec::with_capacity(conv.len());
        for u in conv.utterances() {
            let id = *local.entry(u.speaker.as_str()).or_insert_with(|| {
                let id = DummyId(dummies.len() as u32);
                dummies.push(DummyUser {
                    speaker_id: u.speaker.clone(),
                    conversation_id: conv.id().to_string(),
                });
                dummy_conversation.push(ci);
                id
            });
            if u.delta_award.is_some() {
                givers.insert(id);
            }
            ids.push(id);
        }
        ops.insert(ids[conv.root_index()]);
        utterance_dummy.push(ids);
    }

    let all: BTreeSet<DummyId> = (0..dummies.len() as u32).map(DummyId).collect();
    let non_ops: BTreeSet<DummyId> = all.difference(&ops).copied().collect();
    let (returning, never): (BTreeSet<DummyId>, BTreeSet<DummyId>) = non_ops
        .iter()
        .partition(|id| op_accounts.contains(dummies[id.index()].speaker_id.as_str()));
    let delta_ops: BTreeSet<DummyId> = givers.intersection(&ops).copied().collect();
    let delta_regs: BTreeSet<DummyId> = givers.difference(&ops).copied().collect();
    let non_givers: BTreeSet<DummyId> = all.difference(&givers).copied().collect();
    let ops_no_delta: BTreeSet<DummyId> = ops.difference(&delta_ops).copied().collect();

    let groups = [
        (GroupName::All, all),
        (GroupName::Ops, ops),
        (GroupName::NonOps, non_ops),
        (GroupName::ReturningOps, returning),
        (GroupName::DeltaGivers, givers),
        (GroupName::DeltaOps, delta_ops),
        (GroupName::DeltaRegulars, delta_regs),
        (GroupName::NonDeltaGivers, non_givers),
        (GroupName::OpsWithoutDelta, ops_no_delta),
        (GroupName::NeverOps, never),
    ]
    .into_iter()
    .map(|(name, members)| (name, SpeakerGroup { name, members }))
    .collect();

    Ok(Roles {
        dummies,
        dummy_conversation,
        utterance_dummy,
        groups,
    })
}

/// Checks the partition identities between groups. Returns one message per
/// violated identity; an empty list means all hold.
pub fn group_algebra_check(roles: &Roles) -> Vec<String> {
    use GroupName::*;
    let set = |g: GroupName| roles.group(g).members();
    let mut violations = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            violations.push(what.to_string());
        }
    };
    let union = |a: &BTreeSet<DummyId>, b: &BTreeSet<DummyId>| -> BTreeSet<DummyId> { a.union(b).copied().collect() };
    let disjoint = |a: GroupName, b: GroupName| set(a).is_disjoint(set(b));

    check(disjoint(Ops, NonOps), "OPs and non-OPs overlap");
    check(union(set(Ops), set(NonOps)) == *set(All), "OPs and non-OPs do not cover U");
    check(disjoint(DeltaOps, DeltaRegulars), "delta_OP and delta_reg overlap");
    check(
        union(set(DeltaOps), set(DeltaRegulars)) == *set(DeltaGivers),
        "delta_OP and delta_reg do not cover the delta givers",
    );
    check(disjoint(DeltaOps, OpsWithoutDelta), "delta_OP and OP_no_delta overlap");
    check(
        union(set(DeltaOps), set(OpsWithoutDelta)) == *set(Ops),
        "delta_OP and OP_no_delta do not cover OPs",
    );
    check(set(ReturningOps).is_subset(set(NonOps)), "returning_OPs is not inside non-OPs");
    check(disjoint(ReturningOps, NeverOps), "returning_OPs and never_OP overlap");
    check(
        union(set(ReturningOps), set(NeverOps)) == *set(NonOps),
        "returning_OPs and never_OP do not cover non-OPs",
    );
    check(disjoint(DeltaGivers, NonDeltaGivers), "delta and non_delta overlap");
    check(
        union(set(DeltaGivers), set(NonDeltaGivers)) == *set(All),
        "delta and non_delta do not cover U",
    );

    let mut ops_per_conversation: HashMap<usize, usize> = HashMap::new();
    for id in set(Ops) {
        *ops_per_conversation.entry(roles.conversation_index(*id)).or_default() += 1;
    }
    let conversations: BTreeSet<usize> = (0..roles.dummy_count())
        .map(|i| roles.conversation_index(DummyId(i as u32)))
        .collect();
    check(
        conversations.iter().all(|c| ops_per_conversation.get(c) == Some(&1)),
        "some conversation does not have exactly one OP dummy",
    );
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{IngestOptions, Record};

    fn rec(id: &str, conv: &str, parent: Option<&str>, speaker: &str, ts: i64, delta_to: Option<&str>) -> Record {
        Record {
            id: id.into(),
            conversation_id: conv.into(),
            parent_id: parent.map(Into::into),
            speaker: speaker.into(),
            timestamp: ts,
            text: String::new(),
            delta_to: delta_to.map(Into::into),
        }
    }

    fn corpus(recs: Vec<Record>) -> Corpus {
        Corpus::from_records(recs.into_iter().enumerate(), &IngestOptions::default()).unwrap()
    }

    fn names_of(roles: &Roles, speaker: &str, conv: &str) -> Vec<GroupName> {
        let id = roles.find(speaker, conv).unwrap();
        roles.groups().filter(|g| g.contains(id)).map(|g| g.name).collect()
    }

    #[test]
    fn four_speaker_example() {
        let c = corpus(vec![
            rec("s", "1", None, "Bobby", 0, None),
            rec("j", "1", Some("s"), "Jess", 1, None),
            rec("a", "1", Some("s"), "Arnold", 2, None),
            rec("b", "1", Some("j"), "Bobby", 3, Some("Jess")),
            rec("v", "1", Some("a"), "Ava", 4, Some("Arnold")),
        ]);
        let roles = build_groups(&c).unwrap();
        use GroupName::*;
        let bobby = names_of(&roles, "Bobby", "1");
        for g in [Ops, DeltaGivers, DeltaOps] {
            assert!(bobby.contains(&g));
        }
        for who in ["Jess", "Arnold"] {
            assert!(names_of(&roles, who, "1").contains(&NonDeltaGivers));
        }
        let ava = names_of(&roles, "Ava", "1");
        assert!(ava.contains(&DeltaGivers) && ava.contains(&DeltaRegulars));
        assert!(!ava.contains(&Ops));
        assert!(group_algebra_check(&roles).is_empty());
    }

    #[test]
    fn op_elsewhere_is_returning() {
        let c = corpus(vec![
            rec("r1", "1", None, "a", 0, None),
            rec("x", "1", Some("r1"), "b", 1, None),
            rec("r2", "2", None, "c", 0, None),
            rec("y", "2", Some("r2"), "a", 1, None),
        ]);
        let roles = build_groups(&c).unwrap();
        assert!(names_of(&roles, "a", "1").contains(&GroupName::Ops));
        let a2 = names_of(&roles, "a", "2");
        assert!(a2.contains(&GroupName::ReturningOps) && a2.contains(&GroupName::NonOps));
        assert!(names_of(&roles, "b", "1").contains(&GroupName::NeverOps));
        assert_eq!(roles.dummy_count(), 4);
    }

    #[test]
    fn no_deltas_means_everyone_is_a_non_giver() {
        let c = corpus(vec![rec("r", "1", None, "a", 0, None), rec("x", "1", Some("r"), "b", 1, None)]);
        let roles = build_groups(&c).unwrap();
        assert!(roles.group(GroupName::DeltaGivers).is_empty());
        assert_eq!(
            roles.group(GroupName::NonDeltaGivers).members(),
            roles.group(GroupName::All).members()
        );
    }

    #[test]
    fn undetected_corpus_is_refused() {
        let recs = vec![(1, rec("r", "1", None, "a", 0, None))];
        let c = Corpus::from_records_undetected(recs, &IngestOptions::default()).unwrap();
        assert!(matches!(build_groups(&c), Err(Error::DeltasNotDetected)));
    }

    #[test]
    fn group_names_parse() {
        for g in GroupName::ALL {
            assert_eq!(g.as_str().parse::<GroupName>().unwrap(), g);
        }
        assert!("nobody".parse::<GroupName>().is_err());
    }

    #[test]
    fn groups_csv() {
        let c = corpus(vec![rec("r", "1", None, "a", 0, None), rec("x", "1", Some("r"), "b", 1, Some("a"))]);
        let roles = build_groups(&c).unwrap();
        let mut buf = Vec::new();
        roles.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("group_name,speaker_id,conversation_id\nU,a,1\nU,b,1\nOPs,a,1\n"));
        assert!(text.contains("delta_reg,b,1\n"));
    }
}
