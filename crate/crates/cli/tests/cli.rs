use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use decompound_cli::io::{format_bins, read_bins};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_decompound"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn simulate(dir: &Path, name: &str, seed: &str) -> String {
    let path = dir.join(name);
    let p = path.to_str().unwrap();
    ok(&["simulate", "--rates", "40,10,4,3,1", "--h", "0.02", "--L", "1500", "--seed", seed, "-o", p]);
    p.to_string()
}

#[test]
fn simulate_writes_requested_length_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.json", "7");
    let b = simulate(dir.path(), "b.json", "7");
    let c = simulate(dir.path(), "c.json", "8");
    let bins = read_bins(Path::new(&a), None).unwrap();
    assert_eq!(bins.len(), 1500);
    assert_eq!(bins.h(), 0.02);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn bin_files_round_trip_byte_stably() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.json", "3");
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(format_bins(&read_bins(Path::new(&a), None).unwrap()), text);
}

#[test]
fn estimate_emits_screening_table() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.json", "7");
    let csv = ok(&["estimate", "-i", &a, "--nmax", "12", "--correction", "auto-edit", "--eps", "0.075"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,nu_hat,rho_hat,V,p");
    assert_eq!(lines.len(), 13);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[0], "1");
    let nu1: f64 = first[1].parse().unwrap();
    assert!((nu1 - 40.0).abs() < 8.0, "ν̂_1 = {nu1}");
    for field in &first[1..] {
        let digits = field.trim_start_matches('-').replace('.', "");
        let mantissa = digits.split('e').next().unwrap().trim_start_matches('0');
        assert!(mantissa.len() <= 9, "{field}");
    }

    let out = dir.path().join("est.json");
    ok(&["estimate", "-i", &a, "--json", "-o", out.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["winding_before"], 0);
}

#[test]
fn raw_counts_match_json() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.json", "5");
    let bins = read_bins(Path::new(&a), None).unwrap();
    let raw = dir.path().join("a.txt");
    let text: Vec<String> = bins.counts().iter().map(|c| c.to_string()).collect();
    fs::write(&raw, text.join(" ")).unwrap();
    let from_json = ok(&["estimate", "-i", &a]);
    let from_raw = ok(&["estimate", "-i", raw.to_str().unwrap(), "--h", "0.02"]);
    assert_eq!(from_json, from_raw);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["estimate", "-i", missing.to_str().unwrap()]).status.code(), Some(2));

    let negative = dir.path().join("neg.json");
    fs::write(&negative, r#"{"h":0.02,"counts":[0,-1]}"#).unwrap();
    let out = run(&["estimate", "-i", negative.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let full = dir.path().join("full.json");
    fs::write(&full, r#"{"h":0.02,"counts":[1,2,3]}"#).unwrap();
    assert_eq!(run(&["estimate", "-i", full.to_str().unwrap()]).status.code(), Some(3));

    let a = simulate(dir.path(), "a.json", "1");
    assert_eq!(run(&["estimate", "-i", &a, "--nmax", "0"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "-i", &a, "--grid", "many"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn tests_and_diagnostics_emit_json() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.json", "2");
    let wald: serde_json::Value = serde_json::from_str(&ok(&["test", "-i", &a, "--kind", "wald", "--orders", "2"])).unwrap();
    assert_eq!(wald["kind"], "wald");
    assert_eq!(wald["df"], 1);
    let vm: serde_json::Value = serde_json::from_str(&ok(&["test", "-i", &a, "--kind", "vm", "--m", "3"])).unwrap();
    assert!(vm["p_value"].as_f64().unwrap() <= 1.0);
    let args = ["test", "-i", &a, "--kind", "max-v", "--m2", "4", "--boot", "100", "--seed", "9"];
    assert_eq!(ok(&args), ok(&args));

    let d: serde_json::Value =
        serde_json::from_str(&ok(&["diagnose", "--rates", "40,10,4,3,1", "--h", "0.02", "--T", "30"])).unwrap();
    assert!((d["h_nu_plus"].as_f64().unwrap() - 1.16).abs() < 1e-15);
    let d: serde_json::Value = serde_json::from_str(&ok(&["diagnose", "-i", &a])).unwrap();
    assert!(d["c0_ok"].as_bool().unwrap());
}

#[test]
fn covariance_and_power_tables() {
    let cov = ok(&["cov", "--rates", "2,1", "--h", "0.1", "--T", "30", "--nmax", "2"]);
    let lines: Vec<&str> = cov.lines().collect();
    assert_eq!(lines[0], "m,n,t_cov,ascov");
    assert_eq!(lines[1], "1,1,3.23966114,0.107988705");
    assert_eq!(lines[2], "1,2,-0.323966114,-0.0107988705");
    let tails = ok(&["cov", "--rates", "2,1", "--h", "0.1", "--T", "30", "--nmax", "1", "--kind", "tails"]);
    assert!(tails.contains("1,1,3.49858808,"));
    assert_eq!(run(&["cov", "--rates", "2,1", "--nmax", "2"]).status.code(), Some(2));

    let args = ["power", "--rates", "40,10,4", "--h", "0.02", "--L", "500", "--reps", "8", "--nmax", "4", "--seed", "3"];
    let power = ok(&args);
    assert!(power.starts_with("n,beta\n"));
    assert_eq!(power.lines().count(), 5);
    assert_eq!(power, ok(&["--threads", "1"].iter().chain(args.iter()).copied().collect::<Vec<_>>()));
}

#[test]
fn raster_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let bins = dir.path().join("b.json");
    let raster = dir.path().join("r.csv");
    ok(&[
        "simulate", "--rates", "40,10,4,3,1", "--h", "0.02", "--L", "500", "--seed", "4", "--neurons", "30",
        "--raster", raster.to_str().unwrap(), "-o", bins.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&raster).unwrap();
    assert!(text.starts_with("neuron,time\n"));
    let spikes = text.lines().count() - 1;
    let b = read_bins(&bins, None).unwrap();
    assert_eq!(b.counts().iter().sum::<u64>() as usize, spikes);
}

#[test]
fn reproduce_writes_figure_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for fig in ["1", "2", "3"] {
        ok(&["reproduce", "--figure", fig, "--seed", "7", "-o", out]);
    }
    for name in [
        "fig1_example1_raster.csv",
        "fig1_example2_bins.csv",
        "fig1_example2_histogram.csv",
        "fig2_example1_rates.csv",
        "fig2_example2_power.csv",
        "fig3_rates.csv",
        "fig3_logcf.csv",
        "fig3_summary.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let power = fs::read_to_string(dir.path().join("fig2_example2_power.csv")).unwrap();
    let beta: Vec<f64> = power.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(beta.len(), 12);
    assert!(beta[1..7].iter().all(|b| *b >= 0.8), "{beta:?}");
    assert!(beta[7..].iter().all(|b| *b <= 0.2), "{beta:?}");

    let rates = fs::read_to_string(dir.path().join("fig2_example1_rates.csv")).unwrap();
    assert_eq!(rates.lines().count(), 1 + 50 * 12);

    let summary = fs::read_to_string(dir.path().join("fig3_summary.csv")).unwrap();
    let edit = summary.lines().find(|l| l.starts_with("edit,")).unwrap();
    assert_eq!(edit, "edit,50,0");
    assert_eq!(run(&["reproduce", "--figure", "4", "-o", out]).status.code(), Some(2));
}
