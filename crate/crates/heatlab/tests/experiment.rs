use std::collections::BTreeMap;

use heatlab::experiment::*;
use heatlab::{ReportBundle, Status};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

#[test]
fn vd_suite_on_path_gives_documented_ratio() {
    let cfg = config(
        r#"
space = "path:8"
suites = ["vd"]
[ball]
center = "center"
radius = 2.5
width = 2.0
"#,
    );
    let b = run(&cfg).unwrap();
    let text = suite_csv(&b, Suite::Vd).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].starts_with("inequality,constant,status"));
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[0], "vd");
    assert!((cells[1].parse::<f64>().unwrap() - 1.8).abs() < 1e-12);
    assert_eq!(b.status(), Status::Pass);
}

#[test]
fn empty_suite_gives_empty_bundle() {
    let b = run(&config("space = \"gasket:2\"")).unwrap();
    assert!(b.reports.is_empty());
    assert_eq!(b.status(), Status::Pass);
    for kind in [PlotKind::KernelProfile, PlotKind::PhiVsLambda, PlotKind::ConstantVsLevel] {
        let csv = emit_plot_data(&b, kind).unwrap();
        assert_eq!(csv.lines().count(), 1, "{csv}");
        assert_eq!(csv.trim_end(), kind.header().join(","));
    }
}

#[test]
fn fixed_seed_rerun_is_byte_identical() {
    let text = r#"
seed = 11
space = "gasket:2"
suites = ["csa", "pseudo", "vd"]
[sweep]
epsilon = [0.25, 0.125]
"#;
    let a = run(&config(text)).unwrap().to_json().unwrap();
    let b = run(&config(text)).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let c = run(&config(&text.replace("seed = 11", "seed = 12"))).unwrap().to_json().unwrap();
    assert_ne!(a, c);
    let back = ReportBundle::from_json(&a).unwrap();
    assert_eq!(back.seed, 11);
}

#[test]
fn suites_run_in_dependency_order() {
    let b = run(&config("space = \"path:16\"\nsuites = [\"pi\", \"vd\", \"psi\"]")).unwrap();
    let order: Vec<&str> = b.reports.iter().map(|r| r.context["suite"].as_str()).collect();
    assert_eq!(order, ["vd", "psi", "pi", "pi"]);
}

#[test]
fn two_vertex_kernel_profile_matches_closed_form() {
    let cfg = config(
        r#"
space = "path:1"
suites = ["propagator"]
[ball]
center = 0
radius = 1.0
width = 0.5
[params]
resolution = 100000
t_grid = [0.1, 0.5, 1.0]
"#,
    );
    let b = run(&cfg).unwrap();
    let csv = emit_plot_data(&b, PlotKind::KernelProfile).unwrap();
    let mut rows: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for line in lines {
        let c: Vec<&str> = line.split(',').collect();
        rows.insert((c[col("t")].to_string(), c[col("target")].to_string()), c[col("kernel")].parse().unwrap());
    }
    assert_eq!(rows.len(), 6);
    // generator eigenvalue 2: p₁₁ = (1 + e^{−2t})/2, p₁₂ = (1 − e^{−2t})/2
    for t in ["0.1", "0.5", "1"] {
        let e = (-2.0 * t.parse::<f64>().unwrap()).exp();
        let p11 = rows[&(t.to_string(), "0".to_string())];
        let p12 = rows[&(t.to_string(), "1".to_string())];
        assert!((p11 - (1.0 + e) / 2.0).abs() < 1e-5, "{t} {p11}");
        assert!((p12 - (1.0 - e) / 2.0).abs() < 1e-5, "{t} {p12}");
    }
}

#[test]
fn constant_vs_level_has_one_row_per_level() {
    let cfg = config(
        r#"
space = "gasket:2"
suites = ["vd", "pi"]
[sweep]
level = [2, 3, 4]
"#,
    );
    let b = run(&cfg).unwrap();
    let csv = emit_plot_data(&b, PlotKind::ConstantVsLevel).unwrap();
    let mut per: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for line in csv.lines().skip(1) {
        let c: Vec<&str> = line.split(',').collect();
        per.entry(c[5].to_string()).or_default().push(c[0].to_string());
    }
    assert_eq!(per.keys().collect::<Vec<_>>(), ["pi", "vd", "weak-pi"]);
    for levels in per.values() {
        assert_eq!(levels, &["2", "3", "4"]);
    }
}

#[test]
fn plot_data_needs_its_suite() {
    let b = run(&config("space = \"path:8\"\nsuites = [\"vd\"]")).unwrap();
    assert!(emit_plot_data(&b, PlotKind::PhiVsLambda).is_err());
    assert!(emit_plot_data(&b, PlotKind::KernelProfile).is_err());
}

#[test]
fn every_suite_runs_on_a_small_gasket() {
    let cfg = config(
        r#"
seed = 5
space = "gasket:3"
suites = ["vd", "rvd", "psi", "pi", "wpi", "pseudo", "sobolev", "csa", "assumptions", "propagator", "harnack", "hke"]
[schedule]
lambda = 0.5
[ball]
center = [0.375, 0.2165]
radius = 0.5
width = 0.25
"#,
    );
    let b = run(&cfg).unwrap();
    for r in &b.reports {
        println!("{:<20} {:<12} {:>12.5} {:?} {:?}", r.context["suite"], r.inequality, r.constant, r.status, r.notes);
    }
    let suites: std::collections::BTreeSet<&str> = b.reports.iter().map(|r| r.context["suite"].as_str()).collect();
    assert_eq!(suites.len(), 12);
    let phi = b.reports.iter().find(|r| r.inequality == "phi").unwrap();
    assert!(phi.constant.is_finite() && phi.constant >= 1.0);
}

#[test]
fn bad_configs_are_rejected() {
    assert!(ExperimentConfig::from_toml("suites = [\"vd\"]").is_err());
    assert!(ExperimentConfig::from_toml("space = \"path:8\"\ncolour = 1").is_err());
    let mut cfg = config("space = \"path:8\"");
    cfg.schedule.skew = Some(SkewSource { profile: Some("/nonexistent/h.json".into()), boundary: None });
    assert!(matches!(run(&cfg), Err(heatlab::Error::Config(_))));
    let e = ExperimentConfig::load(std::path::Path::new("/nonexistent.toml")).unwrap_err();
    assert!(e.to_string().contains("/nonexistent.toml"));
}
