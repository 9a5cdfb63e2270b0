//! Engine checks on generated corpora, run by `stylesync selftest`.

use std::collections::BTreeSet;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stylesync::coordination::{aggregate_values, pair_coordination, AggregateKind, Analysis, CoordinationParams, ExchangePair};
use stylesync::corpus::Scope;
use stylesync::lexicon::{Lexicon, MarkerSet};
use stylesync::pipeline::{run_hypotheses, RunConfig};
use stylesync::roles::{group_algebra_check, DummyUser, GroupName};
use stylesync::synth::{generate, oracle_coordination, Behavior, GeneratorConfig};

#[derive(Default)]
struct Tally {
    checked: usize,
    failed: usize,
}

impl Tally {
    fn check(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
        }
    }

    fn print(&self, name: &str) -> bool {
        let verdict = if self.failed == 0 { "ok" } else { "FAILED" };
        println!("{name:<22} {verdict:<6} {} checked, {} failed", self.checked, self.failed);
        self.failed == 0
    }
}

fn random_config(seed: u64, rng: &mut ChaCha8Rng) -> GeneratorConfig {
    let p = rng.random_range(0.0..=1.0);
    let q = rng.random_range(0.0..=1.0);
    GeneratorConfig {
        n_conversations: rng.random_range(1..=4),
        n_speakers: 10,
        speakers_per_conversation: rng.random_range(2..=6),
        branching: rng.random_range(0.5..3.0),
        max_utterances: rng.random_range(10..=50),
        target_marker_rate: rng.random_range(0.0..=1.0),
        op: Behavior::uniform(rng.random_range(0.0..=1.0), q),
        others: Behavior::uniform(p, q),
        op_delta_prob: 0.2,
        reg_delta_prob: 0.1,
        seed,
        ..GeneratorConfig::default()
    }
}

/// Prints one line per property; returns whether all held.
pub fn run(seed: u64, corpora: usize) -> Result<bool> {
    let lexicon = Lexicon::default_markers();
    let params = CoordinationParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = Tally::default();
    let mut zero_law = Tally::default();
    let mut range = Tally::default();
    let mut aggregates = Tally::default();
    let mut algebra = Tally::default();
    let mut determinism = Tally::default();

    for k in 0..corpora {
        let config = random_config(seed.wrapping_add(k as u64), &mut rng);
        let corpus = generate(&config, &lexicon)?;
        let analysis = Analysis::new(&corpus, &lexicon)?;
        let roles = analysis.roles();
        algebra.check(group_algebra_check(roles).is_empty());

        for targets in [GroupName::All, GroupName::Ops, GroupName::NonOps] {
            let group = roles.group(targets);
            let target_users: BTreeSet<DummyUser> = group.iter().map(|d| roles.dummy(d).clone()).collect();
            let scores = analysis.speaker_scores(roles.group(GroupName::All), group, Scope::All, params);
            for (i, &b) in scores.speakers.iter().enumerate() {
                for m in 0..lexicon.len() {
                    let engine = scores.per_marker[m][i];
                    let reference = oracle_coordination(&corpus, &lexicon, roles.dummy(b), &target_users, m, params)?;
                    let same = match (engine.value, reference.value) {
                        (Some(a), Some(r)) => (a - r).abs() <= 1e-12,
                        (None, None) => true,
                        _ => false,
                    };
                    oracle.check(same && engine.support == reference.support);
                    if let Some(v) = engine.value {
                        range.check((-1.0..=1.0).contains(&v));
                    }
                }
                let set = analysis.exchange_set(b, group, Scope::All);
                let echoed: Vec<ExchangePair> = set
                    .pairs
                    .iter()
                    .map(|p| ExchangePair {
                        target: p.target,
                        reply: MarkerSet::from_bits(u64::MAX >> (64 - lexicon.len())),
                    })
                    .collect();
                for m in 0..lexicon.len() {
                    if let Ok(s) = pair_coordination(&echoed, m, params) {
                        if let Some(v) = s.value {
                            zero_law.check(v == 0.0);
                        }
                    }
                }
            }
            let matrix = scores.value_matrix();
            let a1 = aggregate_values(&matrix, AggregateKind::Agg1);
            let a2 = aggregate_values(&matrix, AggregateKind::Agg2);
            let a3 = aggregate_values(&matrix, AggregateKind::Agg3);
            for i in 0..a1.len() {
                if a1[i].is_some() {
                    aggregates.check(a1[i] == a2[i] && a2[i] == a3[i]);
                }
            }
        }

        if k % 10 == 0 {
            let mut run = RunConfig::default();
            let outputs: Vec<String> = [1, 4]
                .into_iter()
                .map(|w| {
                    run.workers = Some(w);
                    run_hypotheses(&corpus, &lexicon, &run).map(|s| serde_json::to_string(&s).expect("serializable"))
                })
                .collect::<stylesync::Result<_>>()?;
            determinism.check(outputs[0] == outputs[1]);
        }
    }

    let results = [
        oracle.print("oracle_equivalence"),
        zero_law.print("zero_law"),
        range.print("range_bound"),
        aggregates.print("aggregate_agreement"),
        algebra.print("group_algebra"),
        determinism.print("worker_determinism"),
    ];
    Ok(results.iter().all(|&ok| ok))
}
