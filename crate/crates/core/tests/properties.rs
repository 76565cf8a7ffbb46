use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};

use leaklint_core::bench::{evaluate, parse_manifest, stats, ManifestEntry};
use leaklint_core::checkers::{check_source, CheckerId, Confidence, Finding, ScanOptions};
use leaklint_core::dataflow::{
    analyze, classify_extent, leaks_at_exit, AbstractState, LeakExtent, MethodContext, COUNT_CAP,
};
use leaklint_core::java::cfg::{Cfg, EdgeLabel, NodeKind};
use leaklint_core::java::ir::{Expr, Literal};
use leaklint_core::java::{build_cfg, parse_unit};
use leaklint_core::registry::{builtin_registry, ConsequenceKind, Registry};
use proptest::prelude::*;

fn state() -> impl Strategy<Value = AbstractState> {
    prop_oneof![
        Just(AbstractState::Bottom),
        (1..=COUNT_CAP).prop_map(AbstractState::Acquired),
        Just(AbstractState::Released),
        Just(AbstractState::MaybeReleased),
        Just(AbstractState::Escaped),
    ]
}

proptest! {
    #[test]
    fn join_is_a_semilattice(a in state(), b in state(), c in state()) {
        prop_assert_eq!(a.join(b), b.join(a));
        prop_assert_eq!(a.join(b).join(c), a.join(b.join(c)));
        prop_assert_eq!(a.join(a), a);
        prop_assert_eq!(AbstractState::Bottom.join(a), a);
        prop_assert!(a.leq(a.join(b)) && b.leq(a.join(b)));
        prop_assert_eq!(a.leq(b), a.join(b) == b);
    }

    #[test]
    fn escaped_absorbs(a in state()) {
        prop_assert_eq!(a.join(AbstractState::Escaped), AbstractState::Escaped);
        prop_assert!(!a.join(AbstractState::Escaped).is_leaking());
    }

    #[test]
    fn evaluate_is_order_invariant(
        picks in proptest::collection::vec((0usize..6, 0usize..6, any::<bool>()), 0..12),
        seed in any::<u64>(),
    ) {
        let entries: Vec<ManifestEntry> = picks.iter().filter(|p| p.2).map(|p| entry(p.0)).collect();
        let findings: Vec<Finding> = picks.iter().map(|p| finding(p.1)).collect();
        let m = evaluate(&findings, &entries);
        prop_assert_eq!(m.overall.tp + m.overall.fn_, entries.len());
        prop_assert_eq!(m.overall.tp + m.overall.fp, findings.len());
        let mut rf = findings.clone();
        let mut re = entries.clone();
        shuffle(&mut rf, seed);
        shuffle(&mut re, seed.rotate_left(17));
        prop_assert_eq!(evaluate(&rf, &re), m);
    }
}

fn shuffle<T>(v: &mut [T], mut seed: u64) {
    for i in (1..v.len()).rev() {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        v.swap(i, (seed >> 33) as usize % (i + 1));
    }
}

fn entry(i: usize) -> ManifestEntry {
    ManifestEntry {
        app: "a".into(),
        resource_class: "android.database.Cursor".into(),
        file: format!("src/F{}.java", i % 3),
        method: if i < 3 { String::new() } else { "run".into() },
        buggy_rev: "b".into(),
        fix_rev: "f".into(),
        report_url: None,
        extent: None,
        consequence: None,
    }
}

fn finding(i: usize) -> Finding {
    Finding {
        checker: CheckerId::ALL[i % CheckerId::ALL.len()],
        class: "F".into(),
        file: format!("src/F{}.java", i % 3),
        method: ["run", "other"][i % 2].into(),
        line: i as u32,
        resource_class: "android.database.Cursor".into(),
        consequence: ConsequenceKind::MemoryWaste,
        extent: LeakExtent::Complete,
        confidence: Confidence::High,
        message: String::new(),
        binding: String::new(),
    }
}

fn data(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)).unwrap()
}

#[test]
fn registry_round_trips_through_json() {
    let reg = builtin_registry();
    let json = reg.to_json();
    let back = Registry::from_json_str(&json).unwrap();
    assert_eq!(back, reg);
    assert_eq!(back.to_json(), json);
}

#[test]
fn registry_matches_documented_leak_counts() {
    let reg = builtin_registry();
    let text = data("leak_counts.csv");
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let mut by_cons: BTreeMap<&str, u32> = BTreeMap::new();
    let mut by_platform: BTreeMap<&str, u32> = BTreeMap::new();
    let mut classes = BTreeSet::new();
    for row in rows.records() {
        let row = row.unwrap();
        let class = row[0].to_string();
        let n: u32 = row[1].parse().unwrap();
        let spec = reg.get(&class).unwrap_or_else(|| panic!("{class} missing from registry"));
        *by_cons.entry(spec.consequence.mark()).or_default() += n;
        let platform = if class.starts_with("android.") { "android" } else { "java" };
        *by_platform.entry(platform).or_default() += n;
        classes.insert(class);
    }
    assert_eq!(classes.len(), 37);
    assert_eq!(by_cons, BTreeMap::from([("I", 281), ("II", 13), ("III", 4)]));
    assert_eq!(by_platform, BTreeMap::from([("android", 180), ("java", 118)]));
    let releases: BTreeSet<&str> =
        reg.specs().iter().flat_map(|s| s.release_sigs.iter().map(|r| r.method_name.as_str())).collect();
    for name in [
        "close",
        "release",
        "removeUpdates",
        "unlock",
        "stop",
        "abandonAudioFocus",
        "cancel",
        "disableNetwork",
        "stopPreview",
        "stopFaceDetection",
        "unregisterListener",
    ] {
        assert!(releases.contains(name), "{name}");
    }
}

#[test]
fn stats_on_synthetic_manifests() {
    let reg = builtin_registry();
    let small = stats(&parse_manifest(&data("synthetic_manifest_4.csv")).unwrap(), &reg);
    assert_eq!(small.total, 4);
    let pct: Vec<(String, usize, f64)> =
        small.by_extent.iter().map(|(k, s)| (k.clone(), s.count, s.percent)).collect();
    assert_eq!(
        pct,
        vec![("complete".into(), 2, 50.0), ("exceptional".into(), 1, 25.0), ("normal".into(), 1, 25.0)]
    );
    assert_eq!(small.by_consequence, BTreeMap::from([("I".into(), 2), ("II".into(), 1), ("III".into(), 1)]));

    let big = stats(&parse_manifest(&data("synthetic_manifest_298.csv")).unwrap(), &reg);
    assert_eq!(big.total, 298);
    assert_eq!(big.by_extent["complete"].percent, 64.1);
    assert_eq!(big.by_extent["exceptional"].percent, 18.8);
    assert_eq!(big.by_extent["normal"].percent, 17.1);
    assert_eq!(big.by_extent.values().map(|s| s.count).sum::<usize>(), 298);
    assert_eq!(big.by_consequence, BTreeMap::from([("I".into(), 281), ("II".into(), 13), ("III".into(), 4)]));
}

fn fixture_files() -> Vec<PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut out: Vec<PathBuf> = std::fs::read_dir(&root)
        .unwrap()
        .flat_map(|d| std::fs::read_dir(d.unwrap().path()).unwrap())
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "java"))
        .collect();
    out.sort();
    out
}

fn reach(cfg: &Cfg, from: usize, forward: bool) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        let edges = if forward { cfg.succ_edges(n) } else { cfg.pred_edges(n) };
        for &e in edges {
            let e = cfg.edge(e);
            let next = if forward { e.to } else { e.from };
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen
}

fn is_constant_true(e: &Expr) -> bool {
    matches!(e, Expr::Literal(Literal::Bool(true)))
}

/// Every (class, method, cfg, analysis) in the fixture corpus.
fn for_each_method(mut f: impl FnMut(&str, &Cfg, &leaklint_core::dataflow::Analysis)) {
    let reg = builtin_registry();
    for path in fixture_files() {
        let text = std::fs::read_to_string(&path).unwrap();
        let unit = parse_unit(&text, &path).unwrap();
        for class in &unit.classes {
            for method in class.methods.iter().filter(|m| m.body.is_some()) {
                let cfg = build_cfg(method).unwrap();
                let ctx = MethodContext::new(&unit, class, method);
                let a = analyze(&cfg, &ctx, &reg).unwrap();
                f(&format!("{}.{}", class.name, method.name), &cfg, &a);
            }
        }
    }
}

#[test]
fn cfg_shape_invariants() {
    for_each_method(|name, cfg, _| {
        let from_entry = reach(cfg, cfg.entry(), true);
        let mut to_exit = reach(cfg, cfg.normal_exit(), false);
        to_exit.extend(reach(cfg, cfg.exceptional_exit(), false));
        for n in 0..cfg.len() {
            assert!(from_entry.contains(&n) || cfg.is_exit(n), "{name}: node {n} unreachable");
            assert!(to_exit.contains(&n) || n == cfg.entry() && cfg.len() == 3, "{name}: node {n} reaches no exit");
        }
        for (n, node) in cfg.nodes().iter().enumerate() {
            let NodeKind::Branch(cond) = &node.kind else { continue };
            let count = |l| cfg.successors(n).filter(|e| e.label == l).count();
            assert_eq!(count(EdgeLabel::True), 1, "{name}: node {n}");
            let falses = count(EdgeLabel::False);
            assert!(falses == 1 || is_constant_true(cond) && falses == 0, "{name}: node {n}");
        }
        let t = cfg.edges().iter().filter(|e| e.label == EdgeLabel::True).count();
        let f = cfg.edges().iter().filter(|e| e.label == EdgeLabel::False).count();
        let constant = cfg
            .nodes()
            .iter()
            .filter(|n| matches!(&n.kind, NodeKind::Branch(c) if is_constant_true(c)))
            .count();
        assert!(t == f || t == f + constant, "{name}: {t} true vs {f} false edges");
    });
}

#[test]
fn analysis_terminates_within_bound() {
    for_each_method(|name, cfg, a| {
        let bound = cfg.len() * (4 + COUNT_CAP as usize);
        assert!(a.iterations <= bound, "{name}: {} > {bound}", a.iterations);
    });
}

#[test]
fn complete_extent_has_no_reachable_release() {
    let mut complete = 0;
    for_each_method(|name, cfg, a| {
        for leak in leaks_at_exit(cfg, a) {
            if classify_extent(cfg, a, &leak.key).extent != Some(LeakExtent::Complete) {
                continue;
            }
            complete += 1;
            let mut after = BTreeSet::new();
            for &s in &leak.sites {
                after.extend(reach(cfg, s, true));
            }
            for r in a.release_nodes(&leak.key.0) {
                assert!(!after.contains(&r), "{name}: release at node {r} follows a complete leak");
            }
        }
    });
    assert!(complete > 0);
}

#[test]
fn comparison_with_false_matches_negation() {
    let reg = builtin_registry();
    let opts = ScanOptions::default();
    let body = |cond: &str, then: &str, other: &str| {
        format!(
            "import android.database.Cursor;\nimport android.database.sqlite.SQLiteDatabase;\n\
             class A {{\n  SQLiteDatabase db;\n  int f() {{\n    Cursor c = db.query(\"t\", null, null, null, null, null, null);\n\
             \n    if ({cond}) {{\n      {then}\n    }} else {{\n      {other}\n    }}\n  }}\n}}\n"
        )
    };
    let use_it = "int n = c.getInt(0); c.close(); return n;";
    let bail = "return 0;";
    let variants = [
        body("!c.moveToFirst()", bail, use_it),
        body("c.moveToFirst() == false", bail, use_it),
        body("false == c.moveToFirst()", bail, use_it),
        body("c.moveToFirst() != true", bail, use_it),
        body("c.moveToFirst()", use_it, bail),
        body("c.moveToFirst() == true", use_it, bail),
        body("c.moveToFirst() != false", use_it, bail),
    ];
    let strip = |mut fs: Vec<Finding>| {
        for f in &mut fs {
            f.message.clear();
        }
        fs
    };
    let base = strip(check_source(&variants[0], "A.java", &reg, &opts).0);
    assert_eq!(base.len(), 1);
    assert_eq!(base[0].checker, CheckerId::MoveToFirst);
    for v in &variants[1..] {
        assert_eq!(strip(check_source(v, "A.java", &reg, &opts).0), base, "{v}");
    }
}
