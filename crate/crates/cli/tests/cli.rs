//! Drives the installed binary end to end: exit codes, output bytes, and the
//! JSON documents it exchanges with the core library.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const STATE: &str = r#"{"space": ["0", "1"], "probs": ["11/32", "21/32"]}"#;
const ENSEMBLE: &str = r#"{
  "space": ["0", "1"],
  "members": [
    {"weight": "1/2", "probs": ["1/2", "1/2"]},
    {"weight": "1/4", "probs": ["1/4", "3/4"]},
    {"weight": "1/4", "probs": ["1/8", "7/8"]}
  ]
}"#;

fn steersim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steersim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

fn write_file(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn demo_inputs(dir: &TempDir) -> (PathBuf, PathBuf) {
    (
        write_file(dir, "state.json", STATE),
        write_file(dir, "ensemble.json", ENSEMBLE),
    )
}

fn derive_demo_plan(dir: &TempDir) -> PathBuf {
    let (state, ensemble) = demo_inputs(dir);
    let output = steersim(&[
        "steer-plan",
        "--state",
        path_str(&state),
        "--ensemble",
        path_str(&ensemble),
    ]);
    assert_eq!(exit_code(&output), 0);
    write_file(
        dir,
        "plan.json",
        std::str::from_utf8(&output.stdout).unwrap(),
    )
}

fn path_str(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fraction(value: &serde_json::Value) -> f64 {
    let text = value.as_str().expect("fraction string");
    match text.split_once('/') {
        Some((n, d)) => n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap(),
        None => text.parse().unwrap(),
    }
}

#[test]
fn steer_plan_derives_the_demo_coins_exactly() {
    let dir = TempDir::new().unwrap();
    let (state, ensemble) = demo_inputs(&dir);
    let output = steersim(&[
        "steer-plan",
        "--state",
        path_str(&state),
        "--ensemble",
        path_str(&ensemble),
    ]);
    assert_eq!(exit_code(&output), 0);

    let text = std::str::from_utf8(&output.stdout).unwrap();
    for expected in ["8/11", "2/11", "1/11", "8/21"] {
        assert!(text.contains(expected), "missing {expected} in plan output");
    }
    // Stored in lowest terms: 6/21 and 7/21 render canonically.
    let plan = stdout_json(&output);
    assert_eq!(
        plan["coins"]["0"]["probs"],
        serde_json::json!(["8/11", "2/11", "1/11"])
    );
    assert_eq!(
        plan["coins"]["1"]["probs"],
        serde_json::json!(["8/21", "2/7", "1/3"])
    );
}

#[test]
fn steer_plan_reports_a_mixing_mismatch_with_exit_2() {
    let dir = TempDir::new().unwrap();
    let (state, _) = demo_inputs(&dir);
    let wrong = write_file(
        &dir,
        "wrong.json",
        r#"{"space": ["0", "1"], "members": [
            {"weight": "1/2", "probs": ["1/2", "1/2"]},
            {"weight": "1/2", "probs": ["1/4", "3/4"]}
        ]}"#,
    );
    let output = steersim(&[
        "steer-plan",
        "--state",
        path_str(&state),
        "--ensemble",
        path_str(&wrong),
    ]);
    assert_eq!(exit_code(&output), 2);
    let stderr = std::str::from_utf8(&output.stderr).unwrap();
    assert!(
        stderr.contains("11/32") && stderr.contains("3/8"),
        "diff shows both sides"
    );
    assert!(stderr.contains("21/32") && stderr.contains("5/8"));
}

#[test]
fn steer_plan_rejects_malformed_input_with_exit_1() {
    let dir = TempDir::new().unwrap();
    let (_, ensemble) = demo_inputs(&dir);
    let broken = write_file(&dir, "broken.json", r#"{"space": ["0"]"#);
    let output = steersim(&[
        "steer-plan",
        "--state",
        path_str(&broken),
        "--ensemble",
        path_str(&ensemble),
    ]);
    assert_eq!(exit_code(&output), 1);

    let missing = dir.path().join("absent.json");
    let output = steersim(&[
        "steer-plan",
        "--state",
        path_str(&missing),
        "--ensemble",
        path_str(&ensemble),
    ]);
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn steer_plan_accepts_a_single_member_target() {
    let dir = TempDir::new().unwrap();
    let (state, _) = demo_inputs(&dir);
    let single = write_file(
        &dir,
        "single.json",
        r#"{"space": ["0", "1"], "members": [
            {"weight": "1", "probs": ["11/32", "21/32"]}
        ]}"#,
    );
    let output = steersim(&[
        "steer-plan",
        "--state",
        path_str(&state),
        "--ensemble",
        path_str(&single),
    ]);
    assert_eq!(exit_code(&output), 0);
    let plan = stdout_json(&output);
    assert_eq!(plan["coins"]["0"]["probs"], serde_json::json!(["1"]));
    assert_eq!(plan["coins"]["1"]["probs"], serde_json::json!(["1"]));
}

#[test]
fn steer_verify_passes_a_derived_plan() {
    let dir = TempDir::new().unwrap();
    let plan = derive_demo_plan(&dir);
    let output = steersim(&["steer-verify", "--plan", path_str(&plan)]);
    assert_eq!(exit_code(&output), 0);
    let analysis = stdout_json(&output);
    assert_eq!(
        analysis["announced"],
        serde_json::json!(["1/2", "1/4", "1/4"])
    );
    assert_eq!(analysis["announced_matches_weights"], true);
    assert_eq!(analysis["conditionals_match_members"], true);
}

#[test]
fn steer_verify_accepts_state_and_ensemble_directly() {
    let dir = TempDir::new().unwrap();
    let (state, ensemble) = demo_inputs(&dir);
    let output = steersim(&[
        "steer-verify",
        "--state",
        path_str(&state),
        "--ensemble",
        path_str(&ensemble),
    ]);
    assert_eq!(exit_code(&output), 0);
}

#[test]
fn steer_verify_flags_a_hand_corrupted_coin_with_exit_3() {
    let dir = TempDir::new().unwrap();
    let plan = derive_demo_plan(&dir);
    let corrupted = fs::read_to_string(&plan)
        .unwrap()
        .replacen("8/11", "7/11", 1);
    let path = write_file(&dir, "corrupted.json", &corrupted);

    let output = steersim(&["steer-verify", "--plan", path_str(&path)]);
    assert_eq!(exit_code(&output), 3);
    let analysis = stdout_json(&output);
    assert_eq!(analysis["announced_matches_weights"], false);
}

#[test]
fn steer_verify_rejects_structural_damage_with_exit_1() {
    let dir = TempDir::new().unwrap();
    let plan = derive_demo_plan(&dir);
    let negative = fs::read_to_string(&plan)
        .unwrap()
        .replacen("8/11", "-8/11", 1);
    let path = write_file(&dir, "negative.json", &negative);

    let output = steersim(&["steer-verify", "--plan", path_str(&path)]);
    assert_eq!(exit_code(&output), 1);

    let output = steersim(&["steer-verify"]);
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn steer_run_is_reproducible_and_silent() {
    let dir = TempDir::new().unwrap();
    let plan = derive_demo_plan(&dir);
    let args = [
        "steer-run",
        "--plan",
        path_str(&plan),
        "--seed",
        "7",
        "--trials",
        "2000",
    ];
    let first = steersim(&args);
    let second = steersim(&args);
    assert_eq!(exit_code(&first), 0);
    assert_eq!(first.stdout, second.stdout, "same seed, same bytes");

    let report = stdout_json(&first);
    assert_eq!(report["messages_observed"], 0);
    assert_eq!(
        report["announced_expected"]["probs"],
        serde_json::json!(["1/2", "1/4", "1/4"])
    );
    assert!(fraction(&report["announced_total_variation"]) < 0.05);
}

#[test]
fn teleport_converges_to_the_coin_with_one_message_per_run() {
    let dir = TempDir::new().unwrap();
    let (state, _) = demo_inputs(&dir);
    let output = steersim(&[
        "teleport",
        "--state",
        path_str(&state),
        "--trials",
        "100000",
        "--seed",
        "11",
    ]);
    assert_eq!(exit_code(&output), 0);
    let report = stdout_json(&output);
    assert!(fraction(&report["outcome_total_variation"]) < 0.01);
    assert_eq!(report["messages_sent_per_run"], 1);
    assert_eq!(report["first_run"]["messages_sent"], 1);
    assert_eq!(
        report["analysis"]["bob_distribution"]["probs"],
        serde_json::json!(["11/32", "21/32"])
    );
    assert_eq!(
        report["analysis"]["message_distribution"]["probs"],
        serde_json::json!(["1/2", "1/2"])
    );
    assert_eq!(report["analysis"]["message_independent_of_outcome"], true);
}

#[test]
fn teleport_of_a_point_mass_always_lands_on_it() {
    let dir = TempDir::new().unwrap();
    let point = write_file(
        &dir,
        "point.json",
        r#"{"space": ["0", "1"], "probs": ["1", "0"]}"#,
    );
    let output = steersim(&["teleport", "--state", path_str(&point), "--trials", "500"]);
    assert_eq!(exit_code(&output), 0);
    let report = stdout_json(&output);
    assert_eq!(
        report["empirical_outcomes"]["probs"],
        serde_json::json!(["1", "0"])
    );
    assert_eq!(report["outcome_total_variation"], "0");
}

#[test]
fn teleport_takes_a_die_size_or_a_state_but_not_both() {
    let output = steersim(&["teleport", "--dits", "6", "--trials", "2"]);
    assert_eq!(exit_code(&output), 0);
    let report = stdout_json(&output);
    assert_eq!(report["first_run"]["messages_sent"], 1);
    assert_eq!(
        report["analysis"]["bob_distribution"]["probs"][0],
        serde_json::json!("1/6")
    );

    let dir = TempDir::new().unwrap();
    let (state, _) = demo_inputs(&dir);
    let output = steersim(&["teleport", "--state", path_str(&state), "--dits", "6"]);
    assert_eq!(exit_code(&output), 1);

    let output = steersim(&["teleport"]);
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn demo_walkthrough_passes_and_shows_the_derivation() {
    let output = steersim(&["appendix-demo", "--trials", "20000"]);
    assert_eq!(exit_code(&output), 0);
    let text = std::str::from_utf8(&output.stdout).unwrap();
    assert!(text.contains("11/32") && text.contains("21/32"));
    assert!(text.contains("8/11") && text.contains("2/11") && text.contains("1/11"));
    assert!(text.contains("0=1/2 1=1/4 2=1/4"));
    assert!(!text.contains("FAIL"));

    let output = steersim(&["appendix-demo", "--trials", "20000", "--format", "json"]);
    assert_eq!(exit_code(&output), 0);
    let report = stdout_json(&output);
    assert_eq!(report["all_checks_passed"], true);
    assert_eq!(report["transcript_silent"], true);
    assert_eq!(
        report["shared_state"]["probs"],
        serde_json::json!(["11/32", "21/32"])
    );
}

#[test]
fn fuzz_verifies_every_generated_instance() {
    let output = steersim(&["fuzz", "--trials", "40", "--format", "table"]);
    assert_eq!(exit_code(&output), 0);
    let text = std::str::from_utf8(&output.stdout).unwrap();
    assert_eq!(text.trim(), "verified 40 of 40 random instances (seed 42)");
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let output = steersim(&["steer-plan", "--no-such-flag"]);
    assert_eq!(exit_code(&output), 1);

    let output = steersim(&["--help"]);
    assert_eq!(exit_code(&output), 0);
    let text = std::str::from_utf8(&output.stdout).unwrap();
    for command in [
        "steer-plan",
        "steer-verify",
        "steer-run",
        "teleport",
        "fuzz",
    ] {
        assert!(text.contains(command));
    }
}
