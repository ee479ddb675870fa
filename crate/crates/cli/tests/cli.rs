//! End-to-end tests of the `chainwave` binary: output schemas, manifest
//! inventory discipline, rerun determinism, and exit-code classes.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chainwave::manifest::{sha256_hex, RunManifest};
use chainwave::sim::{ExperimentConfig, InLoopInference};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chainwave"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

/// A small three-condition design that still exercises yoking and the
/// in-loop resampling fits, sized for fast test runs.
fn mini_config(dir: &Path, seed: u64) -> PathBuf {
    let mut config = ExperimentConfig::desk();
    config.seed = seed;
    config.waves = 3;
    config.agents_per_wave = 4;
    config.trials = 8;
    for count in config.networks.values_mut() {
        *count = 2;
    }
    config.resampling_inference = InLoopInference { chains: 2, iterations: 150, warmup: 75 };
    let config = config.resolve().expect("mini config is valid");
    let path = dir.join("config.json");
    fs::write(&path, config.to_canonical_json()).expect("write config");
    path
}

/// Every file in the run directory is listed in the manifest (no orphan
/// outputs), every listed digest matches the bytes on disk, and the
/// config digest matches `config_resolved.json`.
fn assert_manifest_covers_dir(dir: &Path) -> RunManifest {
    let manifest = RunManifest::load(&dir.join("manifest.json")).expect("manifest loads");
    let listed: BTreeSet<String> = manifest.artifacts.iter().map(|a| a.name.clone()).collect();
    let mut on_disk = BTreeSet::new();
    for entry in fs::read_dir(dir).expect("read run dir") {
        let name = entry.expect("dir entry").file_name().to_string_lossy().into_owned();
        if name != "manifest.json" {
            on_disk.insert(name);
        }
    }
    assert_eq!(listed, on_disk, "manifest inventory must equal run dir contents");
    for artifact in &manifest.artifacts {
        let bytes = fs::read(dir.join(&artifact.name)).expect("artifact readable");
        assert_eq!(artifact.bytes, bytes.len() as u64, "{} size", artifact.name);
        assert_eq!(artifact.sha256, sha256_hex(&bytes), "{} digest", artifact.name);
    }
    let config_bytes = fs::read(dir.join("config_resolved.json")).expect("config echo");
    assert_eq!(manifest.config_sha256, sha256_hex(&config_bytes));
    manifest
}

#[test]
fn stationary_emits_sweep_and_curve() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let result = run(&[
        "stationary",
        "--alpha",
        "0",
        "--alpha",
        "0.5",
        "--beta",
        "-1",
        "--beta",
        "0",
        "--beta",
        "1",
        "--set-size",
        "8",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_success(&result);

    let sweep = read(&out.join("stationary_sweep.csv"));
    let mut lines = sweep.lines();
    assert_eq!(lines.next(), Some("alpha,beta,gamma,n,k,pi_k"));
    // 2 alphas x 3 betas x 9 states.
    assert_eq!(lines.count(), 2 * 3 * 9);

    let curve = read(&out.join("stationary_curve.csv"));
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("alpha,beta,mean_green,individual_green"));
    assert_eq!(lines.count(), 2 * 3);

    assert_manifest_covers_dir(&out);
}

#[test]
fn simulate_writes_trace_with_exact_header_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let config = mini_config(tmp.path(), 42);
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let out_c = tmp.path().join("c");
    for out in [&out_a, &out_b] {
        let result = run(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_success(&result);
    }
    let result = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "43",
        "--out-dir",
        out_c.to_str().unwrap(),
    ]);
    assert_success(&result);

    let trace = read(&out_a.join("trace.csv"));
    assert_eq!(
        trace.lines().next(),
        Some(
            "simulation_id,condition,network,wave,trial,stimulus_level,agent_id,\
             motivated_color,observed_k,presented_color,presented_count,chose_green,\
             chose_motivated,chose_correct,resampled"
        )
    );

    // Same manifest -> byte-identical outputs; the manifests agree on
    // everything except their timestamps.
    assert_eq!(trace, read(&out_b.join("trace.csv")));
    assert_eq!(read(&out_a.join("audit.json")), read(&out_b.join("audit.json")));
    let manifest_a = assert_manifest_covers_dir(&out_a);
    let manifest_b = assert_manifest_covers_dir(&out_b);
    assert!(manifest_a.matches_rerun(&manifest_b));

    // A different master seed changes the data and the manifest.
    let manifest_c = assert_manifest_covers_dir(&out_c);
    assert_ne!(trace, read(&out_c.join("trace.csv")));
    assert!(!manifest_a.matches_rerun(&manifest_c));
    assert_eq!(manifest_c.master_seed, 43);
}

#[test]
fn analyze_summarizes_a_trace_deterministically() {
    let tmp = TempDir::new().unwrap();
    let config = mini_config(tmp.path(), 7);
    let sim = tmp.path().join("sim");
    let result =
        run(&["simulate", "--config", config.to_str().unwrap(), "--out-dir", sim.to_str().unwrap()]);
    assert_success(&result);

    let trace = sim.join("trace.csv");
    let out_a = tmp.path().join("ana_a");
    let out_b = tmp.path().join("ana_b");
    for out in [&out_a, &out_b] {
        let result = run(&[
            "analyze",
            "--trace",
            trace.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_success(&result);
    }

    let bars = read(&out_a.join("fig3_bars.csv"));
    assert_eq!(bars.lines().next(), Some("condition,metric,value,se,n"));
    // Three conditions x two metrics.
    assert_eq!(bars.lines().count(), 1 + 6);
    let waves = read(&out_a.join("figS4_waves.csv"));
    assert_eq!(waves.lines().next(), Some("condition,wave,metric,value,se,n"));

    let tests = read(&out_a.join("condition_tests.csv"));
    let mut lines = tests.lines();
    assert_eq!(
        lines.next(),
        Some("condition_a,condition_b,metric,prop_a,prop_b,chi_square,df,p_value,stars")
    );
    // All three designed comparisons apply to this three-condition trace.
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("asocial_motivated,social_motivated,bias,"));
    assert!(rows[1].starts_with("social_motivated,social_resampling,bias,"));
    assert!(rows[2].starts_with("asocial_motivated,social_resampling,accuracy,"));

    let priming: serde_json::Value =
        serde_json::from_str(&read(&out_a.join("priming_test.json"))).expect("priming JSON");
    assert!(priming.get("n_tie_trials").is_some());

    // End-to-end determinism: identical analysis outputs on rerun.
    for name in ["fig3_bars.csv", "figS4_waves.csv", "condition_tests.csv", "priming_test.json"] {
        assert_eq!(read(&out_a.join(name)), read(&out_b.join(name)), "{name}");
    }
    assert_manifest_covers_dir(&out_a);
}

#[test]
fn analyze_partitions_restrict_summary_rows() {
    let tmp = TempDir::new().unwrap();
    let config = mini_config(tmp.path(), 11);
    let sim = tmp.path().join("sim");
    let result =
        run(&["simulate", "--config", config.to_str().unwrap(), "--out-dir", sim.to_str().unwrap()]);
    assert_success(&result);

    let out = tmp.path().join("ties");
    let result = run(&[
        "analyze",
        "--trace",
        sim.join("trace.csv").to_str().unwrap(),
        "--partition",
        "tie-trials-only",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_success(&result);

    // Tie trials exist only in social conditions; asocial rows are gone.
    let bars = read(&out.join("fig3_bars.csv"));
    assert!(!bars.contains("asocial_motivated"));
    let resolved: serde_json::Value =
        serde_json::from_str(&read(&out.join("config_resolved.json"))).unwrap();
    assert_eq!(resolved["partition"], "tie_trials_only");
}

#[test]
fn fit_writes_parseable_posterior_summaries() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("judgments.csv");
    let mut csv = String::from("participant_id,stimulus_level,chose_green,motivated_color,social_k\n");
    // Two stimulus levels, six participants, deterministic green choices
    // tilted toward the motivated color.
    for j in 0..6 {
        let color = if j % 2 == 0 { "green" } else { "blue" };
        for (t, level) in [48_u32, 52, 48, 52, 48, 52, 48, 52].iter().enumerate() {
            let chose_green = (*level > 50) ^ (j % 3 == 0 && t % 4 == 0);
            csv.push_str(&format!("p{j},{level},{chose_green},{color},\n"));
        }
    }
    fs::write(&data, csv).unwrap();

    let out = tmp.path().join("fit");
    let result = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--variant",
        "exp1-asocial",
        "--chains",
        "2",
        "--iterations",
        "200",
        "--warmup",
        "100",
        "--seed",
        "3",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_success(&result);

    let summary: serde_json::Value =
        serde_json::from_str(&read(&out.join("posterior_summary.json"))).expect("summary JSON");
    let parameters = summary["parameters"].as_array().expect("parameters array");
    // mu_b, sigma_b, six biases, two gammas.
    assert_eq!(parameters.len(), 10);
    let names: Vec<&str> = parameters.iter().map(|p| p["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"mu_b"));
    assert!(names.contains(&"sigma_b"));
    assert!(names.contains(&"gamma[48]"));
    assert!(names.contains(&"b[p0]"));
    for parameter in parameters {
        for field in ["mean", "sd", "hdi_lower", "hdi_upper"] {
            assert!(
                parameter[field].as_f64().expect(field).is_finite(),
                "{field} finite for {}",
                parameter["name"]
            );
        }
    }
    assert_manifest_covers_dir(&out);
}

#[test]
fn resample_draws_only_set_members_and_is_seed_deterministic() {
    let tmp = TempDir::new().unwrap();
    let sets = tmp.path().join("sets.csv");
    let mut csv = String::from("participant_id,stimulus_id,chose_green,q_green,p_green\n");
    for stimulus in 0..2 {
        for j in 0..6 {
            let chose = j % 2 == 0;
            csv.push_str(&format!("m{j},{stimulus},{chose},{},0.5\n", 0.4 + 0.05 * j as f64));
        }
    }
    fs::write(&sets, csv).unwrap();

    let run_once = |dir: &Path, seed: &str| {
        let result = run(&[
            "resample",
            "--sets",
            sets.to_str().unwrap(),
            "--recipients",
            "4",
            "--seed",
            seed,
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert_success(&result);
    };
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let out_c = tmp.path().join("c");
    run_once(&out_a, "5");
    run_once(&out_b, "5");
    run_once(&out_c, "6");

    let resampled = read(&out_a.join("resampled.csv"));
    let mut lines = resampled.lines();
    assert_eq!(
        lines.next(),
        Some("recipient,stimulus_id,slot,source_index,source_participant,chose_green")
    );
    // 4 recipients x 2 stimuli x 6 slots, every draw a member of the set.
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4 * 2 * 6);
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert!(fields[4].starts_with('m'), "source is an input participant: {row}");
    }

    let presented = read(&out_a.join("presented.csv"));
    let mut lines = presented.lines();
    assert_eq!(lines.next(), Some("recipient,stimulus_id,presented_color,presented_count,tie_broken"));
    for row in lines {
        let fields: Vec<&str> = row.split(',').collect();
        assert!(matches!(fields[2], "green" | "blue"));
        let count: u32 = fields[3].parse().unwrap();
        assert!((3..=6).contains(&count), "majority count in [N/2, N]: {row}");
    }

    assert_eq!(resampled, read(&out_b.join("resampled.csv")));
    assert_eq!(read(&out_a.join("presented.csv")), read(&out_b.join("presented.csv")));
    assert_ne!(resampled, read(&out_c.join("resampled.csv")));
    assert_manifest_covers_dir(&out_a);
}

#[test]
fn power_confirms_designed_directions_on_the_mini_design() {
    let tmp = TempDir::new().unwrap();
    let config = mini_config(tmp.path(), 19);
    let out = tmp.path().join("power");
    let result = run(&[
        "power",
        "--config",
        config.to_str().unwrap(),
        "--n-sims",
        "2",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_success(&result);

    let results = read(&out.join("power_results.csv"));
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some("simulation_id,hypothesis_id,statistic,p_value,confirmed"));
    // 2 simulations x 3 hypotheses.
    assert_eq!(lines.count(), 6);

    let report: serde_json::Value =
        serde_json::from_str(&read(&out.join("power_report.json"))).expect("report JSON");
    assert_eq!(report["n_simulations"], 2);
    let fractions = report["confirmed_fraction"].as_object().expect("fractions");
    for id in ["social_amplification", "resampling_debiases", "accuracy_preserved"] {
        let f = fractions[id].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f), "{id} fraction {f}");
    }
    assert!(report["all_confirmed_fraction"].as_f64().is_some());
    assert_manifest_covers_dir(&out);
}

#[test]
fn exit_codes_separate_config_runtime_and_io_errors() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let out_str = out.to_str().unwrap();

    // Missing input file -> I/O error (4).
    let result = run(&["simulate", "--config", "/nonexistent/config.json", "--out-dir", out_str]);
    assert_eq!(exit_code(&result), 4);

    // Constraint violation in the config, reported with its field path -> 2.
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"waves\": 0}").unwrap();
    let result = run(&["simulate", "--config", bad.to_str().unwrap(), "--out-dir", out_str]);
    assert_eq!(exit_code(&result), 2);
    let stderr = String::from_utf8_lossy(&result.stderr).into_owned();
    assert!(stderr.contains("config error"), "names the error class: {stderr}");

    // Conflicting and missing required flags are usage errors -> 2.
    let config = mini_config(tmp.path(), 1);
    let result = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--preset",
        "desk",
        "--out-dir",
        out_str,
    ]);
    assert_eq!(exit_code(&result), 2);
    let result = run(&["simulate", "--out-dir", out_str]);
    assert_eq!(exit_code(&result), 2);

    // A CSV with the wrong columns -> parse error (4), naming the file.
    let wrong = tmp.path().join("wrong.csv");
    fs::write(&wrong, "a,b\n1,2\n").unwrap();
    let result =
        run(&["fit", "--data", wrong.to_str().unwrap(), "--variant", "resampling", "--out-dir", out_str]);
    assert_eq!(exit_code(&result), 4);
    let stderr = String::from_utf8_lossy(&result.stderr).into_owned();
    assert!(stderr.contains("wrong.csv"), "names the offending file: {stderr}");

    // An empty judgment-set CSV is a data/argument error -> 2.
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "participant_id,stimulus_id,chose_green,q_green,p_green\n").unwrap();
    let result = run(&["resample", "--sets", empty.to_str().unwrap(), "--out-dir", out_str]);
    assert_eq!(exit_code(&result), 2);
}
