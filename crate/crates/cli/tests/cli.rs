use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use stylesync::lexicon::Lexicon;
use stylesync::pipeline::{run_scores, scores_csv, RunConfig};
use stylesync::roles::GroupName;
use stylesync::synth::{generate, GeneratorConfig};

fn stylesync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stylesync"))
        .args(args)
        .env_remove("STYLESYNC_WORKERS")
        .output()
        .unwrap()
}

fn piped(args: &[&str], input: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_stylesync"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn synth_file(dir: &Path) -> String {
    let path = dir.join("corpus.jsonl");
    let out = stylesync(&[
        "synth",
        "--seed",
        "42",
        "--n-conversations",
        "120",
        "--n-speakers",
        "300",
        "--op-echo",
        "0.9",
        "--op-delta-prob",
        "0.1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    path.to_str().unwrap().to_string()
}

#[test]
fn hypotheses_writes_eight_tables_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_file(dir.path());
    let out_dir = dir.path().join("out");
    let out = stylesync(&["hypotheses", "--corpus", &corpus, "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let mut names: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["H1.1.csv", "H1.2.csv", "H2.csv", "H3.csv", "H4.1.csv", "H4.2.csv", "H4.3.csv", "H4.csv", "summary.json"]
    );
    let table = fs::read_to_string(out_dir.join("H1.1.csv")).unwrap();
    assert!(table.starts_with("marker_or_aggregate,mean1,mean2,n1,n2,t,df,p,stars,direction"));
    assert_eq!(table.lines().count(), 1 + 8 + 3);

    let summary = out_dir.join("summary.json");
    let figs = dir.path().join("figs");
    let out = stylesync(&[
        "report",
        "--summary",
        summary.to_str().unwrap(),
        "--format",
        "svg",
        "--out-dir",
        figs.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(fs::read_to_string(figs.join("H3.svg")).unwrap().starts_with("<svg"));
    let out = stylesync(&["report", "--summary", summary.to_str().unwrap()]);
    assert!(text(&out.stdout).contains("H4.3: C(U, G^OPs) vs C(U, G^~OPs)"));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_file(dir.path());
    let config = dir.path().join("run.conf");
    let out_dir = dir.path().join("from_config");
    fs::write(
        &config,
        format!("corpus = {corpus}\nhypotheses = H1.1, H3\nout_dir = {}\nworkers = 2\n", out_dir.display()),
    )
    .unwrap();
    let out = stylesync(&["hypotheses", "--config", config.to_str().unwrap(), "--hypotheses", "H2"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(out_dir.join("H2.csv").exists());
    assert!(!out_dir.join("H1.1.csv").exists());
}

#[test]
fn piped_synth_and_coord_match_a_single_process_run() {
    let synth = stylesync(&["synth", "--seed", "42", "--n-conversations", "40"]);
    assert!(synth.status.success());
    let coord = piped(&["coord", "--scopes", "all,pre_delta", "--group-a", "OPs"], &synth.stdout);
    assert!(coord.status.success(), "{}", text(&coord.stderr));

    let lexicon = Lexicon::default_markers();
    let corpus = generate(
        &GeneratorConfig {
            n_conversations: 40,
            seed: 42,
            ..GeneratorConfig::default()
        },
        &lexicon,
    )
    .unwrap();
    let mut config = RunConfig::default();
    config.set("scopes", "all,pre_delta").unwrap();
    let rows = run_scores(&corpus, &lexicon, &[(GroupName::All, GroupName::Ops)], &config).unwrap();
    assert_eq!(text(&coord.stdout), scores_csv(&rows).unwrap());
}

#[test]
fn exit_codes() {
    assert_eq!(stylesync(&["--help"]).status.code(), Some(0));
    assert_eq!(stylesync(&["--version"]).status.code(), Some(0));
    assert_eq!(stylesync(&["frobnicate"]).status.code(), Some(1));
    let bad_flag = stylesync(&["coord", "--min-support", "many"]);
    assert_eq!(bad_flag.status.code(), Some(1));
    assert!(text(&bad_flag.stderr).contains("--min-support"));
    assert_eq!(stylesync(&["synth", "--echo", "1.5"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.jsonl");
    fs::write(
        &broken,
        "{\"id\":\"r\",\"conversation_id\":\"1\",\"parent_id\":null,\"speaker\":\"a\",\"timestamp\":0,\"text\":\"\",\"delta_to\":null}\n\
         {\"id\":\"x\",\"conversation_id\":\"1\",\"parent_id\":\"gone\",\"speaker\":\"b\",\"timestamp\":1,\"text\":\"\",\"delta_to\":null}\n",
    )
    .unwrap();
    let out = stylesync(&["ingest", "--corpus", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("line 2"), "{}", text(&out.stderr));
    assert_eq!(stylesync(&["ingest", "--corpus", "/no/such/file"]).status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let out = stylesync(&["selftest", "--corpora", "20"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let report = text(&out.stdout);
    assert_eq!(report.lines().count(), 6);
    assert!(report.lines().all(|l| l.contains(" ok ")));
}

#[test]
fn groups_csv_has_every_group() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_file(dir.path());
    let out = stylesync(&["groups", "--corpus", &corpus]);
    assert!(out.status.success());
    let csv = text(&out.stdout);
    assert!(csv.starts_with("group_name,speaker_id,conversation_id\n"));
    for g in GroupName::ALL {
        assert!(csv.contains(&format!("\n{},", g.as_str())), "{g}");
    }
}
