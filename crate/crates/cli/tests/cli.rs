use std::path::{Path, PathBuf};
use std::process::Command;

use evr_core::groupcrypto::KnownAnswerVector;
use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

/// Runs `evr`, returning the exit code and the raw JSON output.
fn evr(args: &[&str]) -> (i32, String) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let status = Command::new(env!("CARGO_BIN_EXE_evr")).args(args).arg("--out").arg(&out).output().unwrap();
    let text = std::fs::read_to_string(&out).unwrap_or_default();
    (status.status.code().unwrap(), text)
}

fn run_scenario(cmd: &str, name: &str, extra: &[&str]) -> (i32, Value) {
    let path = scenario(name);
    let mut args = vec![cmd, "--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let (code, text) = evr(&args);
    (code, serde_json::from_str(&text).unwrap_or(Value::Null))
}

#[test]
fn default_run_ends_final() {
    let (code, out) = run_scenario("run", "default", &[]);
    assert_eq!(code, 0);
    assert_eq!(out["phase"], "final");
    assert_eq!(out["payouts_by_player"], serde_json::json!([1, 1, 1]));
    // single-shot runs reveal x itself; VRF rounds only appear with a schedule
    assert!(out["rounds"].as_array().unwrap().is_empty());
    assert!(out["trace"].as_array().unwrap().last().unwrap()["final"]["x"].is_string());
    assert!(out["invariant_violations"].as_array().unwrap().is_empty());
}

#[test]
fn withholding_is_a_legal_abort() {
    let (code, out) = run_scenario("run", "withhold", &[]);
    assert_eq!(code, 0);
    assert_eq!(out["phase"], "abort");
    assert_eq!(out["outcome"]["w"], serde_json::json!([0, 0, 0]));
    let last = out["trace"].as_array().unwrap().last().unwrap();
    assert_eq!(last["final"]["phase"], "abort");
}

#[test]
fn scenario_runs_cover_the_other_paths() {
    let (code, out) = run_scenario("run", "inform", &[]);
    assert_eq!((code, &out["outcome"]["u"]), (0, &serde_json::json!([6, 0, 0])));
    let (code, out) = run_scenario("run", "multishot", &[]);
    assert_eq!(code, 0);
    let rounds: Vec<u64> = out["rounds"].as_array().unwrap().iter().map(|r| r["round"].as_u64().unwrap()).collect();
    assert_eq!(rounds, vec![1, 2, 3]);
    let (code, out) = run_scenario("run", "redirect", &[]);
    assert_eq!((code, &out["player_balances"]), (0, &serde_json::json!([0, 1, 2])));
    let (code, out) = run_scenario("run", "complaint", &[]);
    assert_eq!((code, &out["phase"]), (0, &serde_json::json!("abort")));
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"bad\"\n[endowments]\ndeposits = \"many\"\n").unwrap();
    assert_eq!(evr(&["run", "--config", path.to_str().unwrap()]).0, 2);
    assert_eq!(evr(&["run", "--config", "/nonexistent.toml"]).0, 2);
    assert_eq!(evr(&["run"]).0, 2);
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let path = scenario("inform");
    let p = path.to_str().unwrap();
    let a = evr(&["run", "--config", p]).1;
    assert_eq!(a, evr(&["run", "--config", p]).1);
    assert_ne!(a, evr(&["run", "--config", p, "--seed", "77"]).1);

    let c = scenario("certify_decentralized");
    let c = c.to_str().unwrap();
    assert_eq!(evr(&["certify", "--config", c]).1, evr(&["certify", "--config", c]).1);
}

#[test]
fn decentralized_instance_certifies() {
    let (code, out) = run_scenario("certify", "certify_decentralized", &[]);
    assert_eq!(code, 0);
    assert_eq!(out["report"]["counterexamples_total"], 0);
    assert!(out["report"]["family"].as_str().unwrap().contains("finite"));
}

#[test]
fn rich_player_needs_the_flag_and_yields_a_counterexample() {
    assert_eq!(run_scenario("certify", "certify_rich", &[]).0, 2);
    let (code, out) = run_scenario("certify", "certify_rich", &["--allow-unsafe"]);
    assert_eq!(code, 0);
    let first = &out["report"]["counterexamples"][0];
    assert_eq!(first["coalition"], serde_json::json!([1, 2]));
    assert_eq!(first["outcome"]["u"], serde_json::json!([2, 7, 2]));
}

#[test]
fn five_players_exceed_the_search_budget() {
    assert_eq!(run_scenario("certify", "certify_five", &[]).0, 3);
}

#[test]
fn lemma_suite_holds() {
    let (code, out) = run_scenario("lemmas", "certify_decentralized", &[]);
    assert_eq!(code, 0);
    for c in out["checks"].as_array().unwrap() {
        assert_eq!(c["failures"], 0, "{c}");
    }
}

#[test]
fn vectors_round_trip_and_reverify() {
    let (code, text) = evr(&["vectors", "--profile", "tiny", "--seed", "5"]);
    assert_eq!(code, 0);
    let out: Value = serde_json::from_str(&text).unwrap();
    let kav: KnownAnswerVector<u64> = serde_json::from_value(out["vector"].clone()).unwrap();
    assert!(kav.check().is_empty());
    assert_eq!(kav.params.exp_g(&kav.x), kav.public_key);
    assert_eq!(serde_json::to_value(&kav).unwrap(), out["vector"]);
}

#[test]
fn demos_succeed() {
    let (code, text) = evr(&["dkg-demo"]);
    assert_eq!(code, 0);
    let out: Value = serde_json::from_str(&text).unwrap();
    assert!(out["complaints"].as_array().unwrap().is_empty());

    let (code, out) = run_scenario("dkg-demo", "complaint", &[]);
    assert_eq!(code, 0);
    assert_eq!(out["accused"], serde_json::json!([2]));
    assert_eq!(out["reveal"]["error"], "failed_commit");

    let (code, out) = run_scenario("vrf-demo", "multishot", &[]);
    assert_eq!(code, 0);
    let rounds = out["rounds"].as_array().unwrap();
    assert_eq!(rounds.len(), 3);
    assert!(rounds.iter().all(|r| r["verified"] == true && r["threshold_matches"] == true));
}

#[test]
fn documented_example_config_parses() {
    let doc = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/README.md")).unwrap();
    let block = doc.split("```toml").nth(1).unwrap().split("```").next().unwrap();
    let cfg = evr_cli::ScenarioConfig::parse(block).unwrap();
    assert_eq!(cfg.cnd_at(), vec![100, 200, 300]);
    assert_eq!(cfg.search.max_deviations, 20_000_000);
    cfg.check_safe().unwrap();
}
