mod common;

use std::io::Write;

use stylesync::corpus::{ingest, ingest_str, DeltaMode, IngestOptions};
use stylesync::synth::GeneratorConfig;
use stylesync::Error;

use common::synth;

#[test]
fn writing_and_reading_back_is_idempotent() {
    for seed in 0..10 {
        let corpus = synth(&GeneratorConfig {
            n_conversations: 8,
            op_delta_prob: 0.1,
            seed,
            ..GeneratorConfig::default()
        });
        let once = corpus.to_jsonl_string();
        let again = ingest_str(&once, &IngestOptions::default()).unwrap();
        assert_eq!(again, corpus);
        assert_eq!(again.to_jsonl_string(), once);
        assert_eq!(again.summary(), corpus.summary());
    }
}

#[test]
fn reads_files_and_reports_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(
        f,
        r#"{{"id":"r","conversation_id":"1","parent_id":null,"speaker":"op","timestamp":0,"text":"the case","delta_to":null}}"#
    )
    .unwrap();
    writeln!(f).unwrap();
    writeln!(
        f,
        r#"{{"id":"x","conversation_id":"1","parent_id":"r","speaker":"a","timestamp":1,"text":"so","delta_to":null}}"#
    )
    .unwrap();
    writeln!(f, r#"{{"id":"y","conversation_id":"1","parent_id":"r""#).unwrap();
    drop(f);
    match ingest(&path, &IngestOptions::default()) {
        Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
    assert!(matches!(ingest(dir.path().join("missing"), &IngestOptions::default()), Err(Error::Io { .. })));
}

#[test]
fn token_scan_finds_awards_missing_from_metadata() {
    let text = [
        r#"{"id":"r","conversation_id":"1","parent_id":null,"speaker":"op","timestamp":0,"text":"claim","delta_to":null}"#,
        r#"{"id":"x","conversation_id":"1","parent_id":"r","speaker":"a","timestamp":1,"text":"counter","delta_to":null}"#,
        r#"{"id":"y","conversation_id":"1","parent_id":"x","speaker":"op","timestamp":2,"text":"fair point !delta","delta_to":null}"#,
    ]
    .join("\n");
    let metadata = ingest_str(&text, &IngestOptions::default()).unwrap();
    assert_eq!(metadata.summary().deltas, 0);
    let scan = ingest_str(
        &text,
        &IngestOptions {
            delta_mode: DeltaMode::TokenScan,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(scan.summary().deltas, 1);
    assert_eq!(scan.summary().non_op_deltas, 0);
}
