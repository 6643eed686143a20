use std::path::Path;
use std::process::Command as Process;

use dtpc_cli::*;

fn dtpc(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_dtpc")).args(args).output().expect("binary runs")
}

fn small_spectrum() -> RunConfig {
    RunConfig { n: 20, samples: 2000, ..RunConfig::default() }.resolve().unwrap()
}

fn small_idcode() -> RunConfig {
    RunConfig { q: 5, k: 2, n: 30, trials: 2000, messages: 5, pairs: 10, ..RunConfig::default() }.resolve().unwrap()
}

/// Reruns a document's echoed config through a file and compares payloads.
fn assert_rerun_matches(doc: &ResultDocument, dir: &Path) {
    let path = dir.join("echo.toml");
    std::fs::write(&path, toml::to_string(&doc.config).unwrap()).unwrap();
    let again = run(doc.command, &RunConfig::load(&path).unwrap().resolve().unwrap()).unwrap();
    assert_eq!(doc.payload_text().unwrap(), again.payload_text().unwrap());
    assert_eq!(doc.config, again.config);
}

#[test]
fn every_subcommand_reproduces_from_its_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cap = cmd_capacity(&RunConfig::default().resolve().unwrap()).unwrap();
    assert_rerun_matches(&cap, dir.path());
    assert_rerun_matches(&cmd_spectrum(&small_spectrum()).unwrap().document, dir.path());
    let id = cmd_idcode(&small_idcode()).unwrap();
    assert!(id.config.delta.is_some());
    assert_rerun_matches(&id, dir.path());
}

#[test]
fn document_round_trips_through_toml() {
    let doc = cmd_capacity(&RunConfig::default().resolve().unwrap()).unwrap();
    let back = ResultDocument::from_toml(&doc.to_toml().unwrap()).unwrap();
    assert_eq!(doc, back);
    assert_eq!(back.tool, "dtpc");
    assert!(back.payload["gap"].as_float().unwrap() <= 1e-4);
}

#[test]
fn single_state_matches_plain_channel() {
    let plain = cmd_capacity(&RunConfig::default().resolve().unwrap()).unwrap();
    let states = Some(vec![StateSpec { weight: 1.0, lambda0: 1.0 }]);
    let state = cmd_capacity(&RunConfig { states, ..RunConfig::default() }.resolve().unwrap()).unwrap();
    assert_eq!(plain.payload_text().unwrap(), state.payload_text().unwrap());
}

#[test]
fn tiny_peak_reports_tiny_capacity() {
    let doc = cmd_capacity(&RunConfig { p_max: 1e-6, p_avg: 1e-6, ..RunConfig::default() }.resolve().unwrap()).unwrap();
    assert!(doc.payload["capacity_bits"].as_float().unwrap() <= 1e-4);
}

#[test]
fn spectrum_reuses_a_capacity_document() {
    let dir = tempfile::tempdir().unwrap();
    let cap_path = dir.path().join("cap.toml");
    let cap = cmd_capacity(&RunConfig::default().resolve().unwrap()).unwrap();
    std::fs::write(&cap_path, cap.to_toml().unwrap()).unwrap();
    let inline = cmd_spectrum(&small_spectrum()).unwrap();
    let loaded = cmd_spectrum(&RunConfig { capacity_from: Some(cap_path.clone()), ..small_spectrum() }).unwrap();
    assert_eq!(inline.document.payload_text().unwrap(), loaded.document.payload_text().unwrap());

    let mismatched = RunConfig { capacity_from: Some(cap_path), p_avg: 2.0, ..small_spectrum() };
    assert!(matches!(cmd_spectrum(&mismatched), Err(CliError::Validation(_))));
}

#[test]
fn spectrum_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for (path, workers) in [(&a, "1"), (&b, "2")] {
        let out = dtpc(&[
            "spectrum",
            "--n",
            "10",
            "--samples",
            "500",
            "--seed",
            "4",
            "--workers",
            workers,
            "--csv",
            path.to_str().unwrap(),
            "--out",
            dir.path().join("doc.toml").to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("sample_index,rate_bits\n0,"));
    assert_eq!(text.lines().count(), 501);
}

#[test]
fn spectrum_with_point_mass_input() {
    let mut c = small_spectrum();
    c.input = Some(vec![[2.0, 1.0]]);
    let run = cmd_spectrum(&c).unwrap();
    assert_eq!(run.document.payload["optimal_input"].as_bool(), Some(false));
    c.input = Some(vec![[6.0, 1.0]]);
    assert!(matches!(cmd_spectrum(&c), Err(CliError::Validation(_))));
}

#[test]
fn idcode_growth_with_tag_degree() {
    let base = RunConfig { q: 5, n: 30, trials: 1000, messages: 3, pairs: 5, ..RunConfig::default() };
    let one = cmd_idcode(&RunConfig { k: 1, ..base.clone() }.resolve().unwrap()).unwrap();
    let two = cmd_idcode(&RunConfig { k: 2, ..base }.resolve().unwrap()).unwrap();
    let get = |d: &ResultDocument, key: &str| d.payload[key].clone();
    assert_eq!(get(&one, "message_count").as_integer(), Some(5));
    assert_eq!(get(&two, "message_count").as_integer(), Some(25));
    let bound = |d| get(d, "tag_collision_bound").as_float().unwrap();
    assert!((bound(&two) - bound(&one) - 0.2).abs() < 1e-15);
}

#[test]
fn idcode_picks_exact_evaluation_when_it_fits() {
    let c = RunConfig { q: 5, k: 1, n: 2, eps: 1e-8, ..RunConfig::default() }.resolve().unwrap();
    let doc = cmd_idcode(&c).unwrap();
    let report = doc.payload["report"].as_table().unwrap();
    assert_eq!(report["method"].as_str(), Some("exact"));
    assert!(report.get("num_trials").is_none());
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| dtpc(args).status.code().unwrap();
    assert_eq!(code(&["capacity", "--pmax", "-1"]), 2);
    assert_eq!(code(&["idcode", "--q", "4"]), 2);
    assert_eq!(code(&["capacity", "--lambda0", "1", "--states", "1:1", "--pmax", "0"]), 2);
    assert_eq!(code(&["spectrum", "--lambda0", "0", "--samples", "10"]), 5);
    assert_eq!(code(&["idcode", "--method", "exact", "--n", "10", "--q", "5", "--trials", "1000"]), 4);
    // The optimal law always meets the average constraint, so construction
    // failures only surface through the library.
    assert_eq!(CliError::from(dtpc_core::Error::Construction(String::new())).exit_code(), 6);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("best.toml");
    let run = dtpc(&["capacity", "--pmax", "30", "--pavg", "10", "--tol", "1e-14", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(3));
    let doc = ResultDocument::load(&out).unwrap();
    assert_eq!(doc.payload["converged"].as_bool(), Some(false));
}

#[test]
fn config_file_rejects_unknown_fields_and_yields_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "lambda0 = 1.0\nlambda = 2.0\n").unwrap();
    assert_eq!(dtpc(&["capacity", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let good = dir.path().join("good.toml");
    std::fs::write(&good, "states = [{ weight = 0.5, lambda0 = 0.5 }, { weight = 0.5, lambda0 = 2.0 }]\np_max = 3.0\n")
        .unwrap();
    let flags = Flags { config: Some(good.clone()), pmax: Some(2.0), ..Flags::default() };
    let c = flags.to_config().unwrap();
    assert_eq!((c.p_max, c.states.as_ref().map(Vec::len), c.lambda0), (2.0, Some(2), None));
    let flags = Flags { config: Some(good), lambda0: Some(0.7), ..Flags::default() };
    let c = flags.to_config().unwrap();
    assert_eq!((c.lambda0, c.states), (Some(0.7), None));
}

#[test]
fn mixture_spectrum_omits_bounds() {
    let states = Some(vec![StateSpec { weight: 0.5, lambda0: 0.5 }, StateSpec { weight: 0.5, lambda0: 2.0 }]);
    let run = cmd_spectrum(&RunConfig { states, lambda0: None, ..small_spectrum() }).unwrap();
    let est = run.document.payload["estimate"].as_table().unwrap();
    assert!(est.get("chebyshev_bound").is_none());
    assert!(est["empirical_variance"].as_float().unwrap() >= 0.0);
}
