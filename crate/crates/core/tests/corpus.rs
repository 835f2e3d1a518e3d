mod common;

use kernelspace::vm::Config;

#[test]
fn every_entry_reproduces_its_golden_log() {
    let entries = common::entries();
    assert!(entries.len() >= 15);
    for e in entries {
        let (r, log) = common::run(&e.source, Config::default());
        assert_eq!(log, e.golden, "{}", e.name);
        assert_eq!(r.exit_code(), e.exit, "{}", e.name);
    }
}

#[test]
fn required_programs_are_present() {
    let names: Vec<String> = common::entries().into_iter().map(|e| e.name).collect();
    for n in [
        "deterministic/append_nrev",
        "deterministic/functional_nrev",
        "nondeterministic/append_all",
        "nondeterministic/search_object",
        "concurrency/producer_consumer",
        "concurrency/lazy_producer_consumer",
        "state/display_stream",
        "aggregate/children_fun",
        "aggregate/children_rel",
        "aggregate/children2",
        "constraints/fractions",
        "spaces/dfs_engine",
        "spaces/dis",
    ] {
        assert!(names.iter().any(|x| x == n), "{n} missing");
    }
}

#[test]
fn declarative_entries_ignore_scheduling() {
    for e in common::entries() {
        if !e.tags.iter().any(|t| t == "deterministic" || t == "concurrent" || t == "lazy") {
            continue;
        }
        for slice in [1, 1000] {
            let cfg = Config {
                slice,
                ..Config::default()
            };
            let (_, log) = common::run(&e.source, cfg);
            assert_eq!(log, e.golden, "{} at slice {slice}", e.name);
        }
    }
}

#[test]
fn random_dataflow_programs_ignore_scheduling() {
    for seed in 0..10 {
        let src = common::dataflow_program(seed);
        let (r, first) = common::run(&src, Config::default());
        assert_eq!(r.exit_code(), 0, "{src}");
        for cfg in common::configs() {
            let (_, log) = common::run(&src, cfg.clone());
            assert_eq!(log, first, "seed {seed} under {cfg:?}");
        }
    }
}

#[test]
fn dataflow_programs_browse_every_variable() {
    let src = common::dataflow_program(3);
    let n = src.matches("thread ").count();
    let (_, log) = common::run(&src, Config::default());
    assert_eq!(log.len(), n, "{src}");
}
