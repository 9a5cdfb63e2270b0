mod common;

use std::collections::BTreeSet;

use stylesync::coordination::{pair_coordination, Analysis, CoordinationParams, ExchangePair};
use stylesync::corpus::Scope;
use stylesync::lexicon::Lexicon;
use stylesync::roles::{DummyUser, GroupName};
use stylesync::synth::{expected_coordination, generate_records, oracle_coordination, write_records, Behavior, GeneratorConfig};

use common::synth;

fn config(n_conversations: usize, echo: f64, base: f64, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_conversations,
        n_speakers: 4000,
        target_marker_rate: 0.5,
        op: Behavior::uniform(echo, base),
        others: Behavior::uniform(echo, base),
        seed,
        ..GeneratorConfig::default()
    }
}

fn pooled_error(corpus: &stylesync::Corpus, lexicon: &Lexicon, truth: f64) -> (usize, f64) {
    let analysis = Analysis::new(corpus, lexicon).unwrap();
    let everyone = analysis.roles().group(GroupName::All);
    let pairs: Vec<ExchangePair> = everyone
        .iter()
        .flat_map(|b| analysis.exchange_set(b, everyone, Scope::All).pairs)
        .collect();
    let err = (0..lexicon.len())
        .map(|m| (pair_coordination(&pairs, m, CoordinationParams::default()).unwrap().value.unwrap() - truth).abs())
        .sum::<f64>()
        / lexicon.len() as f64;
    (pairs.len(), err)
}

#[test]
fn same_seed_same_file() {
    let lexicon = Lexicon::default_markers();
    let c = config(30, 0.7, 0.1, 11);
    let write = || {
        let mut buf = Vec::new();
        write_records(&generate_records(&c, &lexicon).unwrap(), &mut buf).unwrap();
        buf
    };
    assert_eq!(write(), write());
    assert_eq!(String::from_utf8(write()).unwrap(), synth(&c).to_jsonl_string());
}

#[test]
fn estimator_error_shrinks_with_more_pairs() {
    let lexicon = Lexicon::default_markers();
    let truth = expected_coordination(0.8, 0.2, 0.5);
    let (mut small, mut large) = (0.0, 0.0);
    for seed in 0..20 {
        let (n_small, e_small) = pooled_error(&synth(&config(17, 0.8, 0.2, seed)), &lexicon, truth);
        let (n_large, e_large) = pooled_error(&synth(&config(1900, 0.8, 0.2, seed)), &lexicon, truth);
        assert!(n_small <= 800 && n_large >= 50_000, "{n_small} {n_large}");
        small += e_small;
        large += e_large;
    }
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn perfect_echo_approaches_one() {
    let lexicon = Lexicon::default_markers();
    let mut last = f64::NEG_INFINITY;
    for rate in [0.5, 0.2, 0.05] {
        let c = GeneratorConfig {
            n_conversations: 300,
            // depth-one trees keep every target at the root rate
            depth_limit: 1,
            branching: 20.0,
            max_children: 40,
            target_marker_rate: rate,
            op: Behavior::uniform(1.0, 0.0),
            others: Behavior::uniform(1.0, 0.0),
            seed: 3,
            ..GeneratorConfig::default()
        };
        let (_, err) = pooled_error(&synth(&c), &lexicon, 1.0);
        let value = 1.0 - err;
        assert!(value > last, "{value} after {last}");
        assert!((value - expected_coordination(1.0, 0.0, rate)).abs() < 0.05, "{value} at r = {rate}");
        last = value;
    }
    assert!(last > 0.9);
}

#[test]
fn library_oracle_matches_engine() {
    let lexicon = Lexicon::default_markers();
    let params = CoordinationParams::default();
    for seed in 0..10 {
        let corpus = synth(&GeneratorConfig {
            n_conversations: 3,
            n_speakers: 8,
            speakers_per_conversation: 4,
            seed,
            ..GeneratorConfig::default()
        });
        let analysis = Analysis::new(&corpus, &lexicon).unwrap();
        let roles = analysis.roles();
        let targets = roles.group(GroupName::NonOps);
        let users: BTreeSet<DummyUser> = targets.iter().map(|d| roles.dummy(d).clone()).collect();
        for b in roles.group(GroupName::All).iter() {
            for m in 0..lexicon.len() {
                let engine = analysis.speaker_to_group(b, targets, m, Scope::All, params);
                let oracle = oracle_coordination(&corpus, &lexicon, roles.dummy(b), &users, m, params).unwrap();
                assert_eq!(engine.support, oracle.support);
                assert_eq!(engine.n_pairs, oracle.n_pairs);
                match (engine.value, oracle.value) {
                    (Some(a), Some(o)) => assert!((a - o).abs() <= 1e-12),
                    (a, o) => assert_eq!(a, o),
                }
            }
        }
    }
}
