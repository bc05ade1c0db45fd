use std::fs;
use std::path::Path;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_complearn"))
}

fn write(path: &Path, contents: &str) {
    fs::write(path, contents).unwrap();
}

#[test]
fn spectral_reports_ring_gap() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("ring4.txt");
    write(&topo, "0 1\n1 2\n2 3\n3 0\n");
    let out = binary().arg("spectral").arg(&topo).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("nodes: 4"));
    assert!(stdout.contains("edges: 4"));
    // Metropolis weights on a 4-ring leave |lambda_2| = 1/3.
    assert!(stdout.contains("spectral_gap: 6.6666666666"));
}

#[test]
fn spectral_rejects_missing_file() {
    let out = binary()
        .arg("spectral")
        .arg("/nonexistent/topology.txt")
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn plot_renders_svg_from_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    write(
        &trace,
        "t,error,bits,belief_0\n0,1.0e0,0,5.0e-1\n1,5.0e-1,100,7.0e-1\n2,2.5e-1,200,9.0e-1\n",
    );
    let svg = dir.path().join("out.svg");
    let out = binary()
        .arg("plot")
        .arg(&trace)
        .arg("-o")
        .arg(&svg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let body = fs::read_to_string(&svg).unwrap();
    assert!(body.contains("<svg"));
    assert!(body.contains("polyline"));
}

#[test]
fn unknown_config_field_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    write(
        &config,
        r#"
bogus = 1

[topology]
kind = "ring"
n = 5

[world]
hypotheses = 5

[compression]
operator = "top_k"
k = 2

[run]
rounds = 50
"#,
    );
    let out = binary().arg("run").arg(&config).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn gamma_search_prints_selection() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    write(
        &config,
        r#"
[topology]
kind = "ring"
n = 5

[world]
hypotheses = 5
alphabet_size = 6
min_gap = 0.1

[compression]
operator = "top_k"
k = 2

[run]
rounds = 150
seed = 3
gamma = "grid"
early_stop = true
"#,
    );
    let out = binary().arg("gamma-search").arg(&config).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("selected "));
    assert!(stdout.matches("gamma=").count() >= 2);
}
