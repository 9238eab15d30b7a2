use aidc_grid::scenario::{load_network_case, NetworkCase, Scenario};
use std::path::PathBuf;

fn case_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/ieee39.json")
}

#[test]
fn bundled_case_round_trips_to_its_file() {
    let path = case_path();
    let case = load_network_case(&path).unwrap();
    let canonical = case.to_json();
    if std::env::var_os("AIDC_REWRITE_CASE").is_some() {
        std::fs::write(&path, &canonical).unwrap();
    }
    let on_disk = std::fs::read_to_string(&path).unwrap();
    assert!(on_disk == canonical, "bundled case is not in canonical form");
    assert_eq!(case, NetworkCase::ieee39());
}

#[test]
fn scenario_file_with_relative_case_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(case_path(), dir.path().join("case.json")).unwrap();
    let mut csv = String::from("timestamp,price_aud_mwh,demand_mw,inference_frac\n");
    for t in 0..120 {
        csv.push_str(&format!("{t},{},{},0.3\n", 50 + t % 7, 4500 + 3 * t));
    }
    std::fs::write(dir.path().join("trace.csv"), csv).unwrap();
    let scenario = r#"{
        "name": "files",
        "network": "case.json",
        "trace": { "csv": { "path": "trace.csv", "dt_h": 0.25, "horizon": 96, "offset": 10 } },
        "seed": 1,
        "line_rating_scale": 0.78
    }"#;
    let spath = dir.path().join("s.json");
    std::fs::write(&spath, scenario).unwrap();
    let s = Scenario::load(spath.to_str().unwrap()).unwrap();
    assert_eq!(s.horizon(), 96);
    assert_eq!(s.trace.demand[0], 4530.0);
    assert_eq!(s.grid().lines[0].f_max_mw, 0.78 * s.network.lines[0].f_max_mw);
}

#[test]
fn missing_scenario_file_is_an_io_error() {
    let err = Scenario::load("/nonexistent/s.json").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/s.json"));
}
