use std::path::Path;
use std::process::{Command, Output};

fn morse_flow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morse-flow")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_sweep(dir: &Path, extra: &str) -> String {
    format!(
        r#"{{
            "scenario": "sweep",
            "surface": {{"kind": "rectangle", "resolution": 12, "dimensions": [1, 1]}},
            "operator": {{"kind": "shifted_laplacian", "c0": 30}},
            "p0": {{"at": [0.5, 0.5]}},
            "t_start": 0.02,
            "grid": {{"base_samples": 24, "refine_depth": 4}},
            {extra}
            "output_dir": {:?}
        }}"#,
        dir.join("out").to_str().unwrap()
    )
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_sweep(dir.path(), r#""k": 4,"#));
    let out = morse_flow(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["sweep"]["index_direct"], 1);
    assert_eq!(report["sweep"]["index_summed"], 1);
    let csv = std::fs::read_to_string(dir.path().join("out/samples.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,k,lambda,nullity,euler_char"));
    let svg = std::fs::read_to_string(dir.path().join("out/lambda_vs_t.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn negative_tolerance_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_sweep(dir.path(), r#""tolerances": {"null_tol": -1e-6},"#));
    let out = morse_flow(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tolerances.null_tol"));
}

#[test]
fn unknown_field_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_sweep(dir.path(), r#""kk": 4,"#));
    assert_eq!(morse_flow(&["run", "--config", &config]).status.code(), Some(2));
    assert_eq!(morse_flow(&["run", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
    assert_eq!(morse_flow(&["demo", "no_such_demo"]).status.code(), Some(2));
}

#[test]
fn too_few_branches_is_a_numerical_failure_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_sweep(dir.path(), r#""k": 1,"#).replace("\"c0\": 30", "\"c0\": 60");
    let config = write_config(dir.path(), &text);
    let out = morse_flow(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert!(report["sweep"]["index_direct"].is_null());
    assert!(report["failures"].as_array().unwrap().iter().any(|f| f.as_str().unwrap().contains("k too small")));
}

#[test]
fn trace_scenario_and_mesh_info() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"scenario": "trace", "trace": {{"case": "linear", "halvings": 3}}, "output_dir": {:?}}}"#,
        dir.path().to_str().unwrap()
    );
    let config = write_config(dir.path(), &text);
    let out = morse_flow(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("decay.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("decay_control.csv").exists());
    assert!(dir.path().join("trace_report.json").exists());

    let text = r#"{"scenario": "mesh_info", "surface": {"kind": "flat_torus", "resolution": 8, "dimensions": [1, 1]}}"#;
    let config = write_config(dir.path(), text);
    let out = morse_flow(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(0));
    let info: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(info["surface"]["euler_characteristic"], 0);
    assert_eq!(info["surface"]["boundary_loops"], 0);
}

#[test]
fn show_demo_prints_a_loadable_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = morse_flow(&["show-demo", "cylinder_ring"]);
    assert_eq!(out.status.code(), Some(0));
    let path = write_config(dir.path(), &String::from_utf8(out.stdout).unwrap());
    let config = morse_flow::config::RunConfig::load(Path::new(&path)).unwrap();
    assert_eq!(config, morse_flow::config::RunConfig::demo(morse_flow::config::DemoName::CylinderRing));
}

#[test]
fn threads_and_seed_flags_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_sweep(dir.path(), r#""k": 4,"#));
    let out = morse_flow(&["--threads", "2", "--seed", "9", "run", "--config", &config]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["sweep"]["index_direct"], 1);
}
