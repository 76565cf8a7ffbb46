use std::path::Path;
use std::process::Command;

use leaklint_miner::{
    canonicalize, read_git_history, remove_noise, stem_word, CommitRecord, MatchReason, Miner, MiningConfig,
    NoisePatterns,
};
use proptest::prelude::*;

#[test]
fn stems_match_reference_vector() {
    let text = include_str!("data/porter_vector.tsv");
    let mut n = 0;
    for line in text.lines() {
        let (word, want) = line.split_once('\t').unwrap();
        assert_eq!(stem_word(word), want, "{word}");
        n += 1;
    }
    assert_eq!(n, 100);
}

#[test]
fn version_phrase_before_a_number() {
    let m = Miner::new(MiningConfig::default()).unwrap();
    assert!(m.match_log("release 5").is_empty());
    assert!(m.match_log("release release v1.0.1 5").is_empty());
    assert_eq!(m.match_log("close issue release v1.0.1"), ["close"]);
}

fn words() -> impl Strategy<Value = Vec<String>> {
    let word = prop_oneof![
        Just("leak".to_string()),
        Just("closed".to_string()),
        Just("release".to_string()),
        Just("issue".to_string()),
        Just("v1".to_string()),
        Just("close".to_string()),
        "[a-z]{1,8}",
        "[0-9]{1,3}",
    ];
    proptest::collection::vec(word, 0..12)
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent(s in "\\PC{0,40}") {
        let c = canonicalize(&s);
        prop_assert_eq!(canonicalize(&c), c.clone());
        prop_assert!(c.chars().all(|ch| ch.is_ascii_lowercase() || ch.is_ascii_digit() || ch == ' '));
        prop_assert!(!c.starts_with(' ') && !c.ends_with(' ') && !c.contains("  "));
    }

    #[test]
    fn remove_noise_is_idempotent(ws in words()) {
        let n = NoisePatterns::default();
        let once = remove_noise(&ws.join(" "), &n);
        prop_assert_eq!(remove_noise(&once, &n), once);
    }

    #[test]
    fn version_phrase_does_not_change_matches(ws in words(), at in 0usize..12, which in any::<bool>()) {
        let m = Miner::new(MiningConfig::default()).unwrap();
        let base = ws.join(" ");
        let mut with = ws.clone();
        let phrase = if which { "release v1.0.1" } else { "Release v1.0.1!" };
        with.insert(at.min(ws.len()), phrase.to_string());
        prop_assert_eq!(m.match_log(&with.join(" ")), m.match_log(&base));
    }

    #[test]
    fn mining_is_deterministic(logs in proptest::collection::vec(words(), 0..8)) {
        let m = Miner::new(MiningConfig::default()).unwrap();
        let history: Vec<CommitRecord> = logs
            .iter()
            .enumerate()
            .map(|(i, w)| CommitRecord { commit_id: format!("c{i}"), log: w.join(" "), diff: String::new() })
            .collect();
        let a = m.mine(&history);
        prop_assert_eq!(m.mine(&history), a.clone());
        for c in &a.candidates {
            prop_assert_eq!(c.reason, MatchReason::Log);
            prop_assert!(!c.matched_log_stems.is_empty());
        }
    }
}

fn git(dir: &Path, args: &[&str]) {
    let st = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(["-c", "user.name=t", "-c", "user.email=t@example.com", "-c", "commit.gpgsign=false"])
        .args(args)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
}

#[test]
fn reads_history_from_working_copy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    git(d, &["init", "-q"]);
    let file = d.join("A.java");
    std::fs::write(&file, "class A {\n  void f() {\n  }\n}\n").unwrap();
    git(d, &["add", "."]);
    git(d, &["commit", "-q", "-m", "Initial import"]);
    std::fs::write(&file, "class A {\n  void f() {\n    cursor.close();\n  }\n}\n").unwrap();
    git(d, &["commit", "-q", "-am", "Tidy up"]);
    git(d, &["commit", "-q", "--allow-empty", "-m", "Fix wakelock leak\n\nDetails follow."]);

    let history = read_git_history(d).unwrap();
    assert_eq!(history.len(), 3);
    assert_eq!(history[0].log, "Initial import");
    assert_eq!(history[2].log, "Fix wakelock leak\n\nDetails follow.");
    assert!(history[2].diff.is_empty());

    let out = Miner::new(MiningConfig::default()).unwrap().mine(&history);
    assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
    let got: Vec<_> = out.candidates.iter().map(|c| (c.commit_id.as_str(), c.reason)).collect();
    assert_eq!(got, [(history[1].commit_id.as_str(), MatchReason::Diff), (history[2].commit_id.as_str(), MatchReason::Log)]);
    assert_eq!(out.candidates[0].matched_diff_lines[0].file, "A.java");
}

#[test]
fn missing_repository_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(read_git_history(&dir.path().join("nope")).is_err());
}
