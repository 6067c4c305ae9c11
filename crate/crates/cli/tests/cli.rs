use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_distchaos"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn no_temp_files(dir: &Path) -> bool {
    std::fs::read_dir(dir).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp"))
}

#[test]
fn density_prints_profile_keys_in_order() {
    let o = run(&["density", "periodic:4:{0,1}", "--horizon", "4000", "--window", "40"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    let keys = ["\"lower\"", "\"upper\"", "\"lower_banach\"", "\"upper_banach\"", "\"mode\"", "\"horizon\"", "\"window\""];
    let pos: Vec<usize> = keys.iter().map(|k| s.find(k).unwrap_or_else(|| panic!("{k} missing in {s}"))).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{s}");
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert!((v["lower"].as_f64().unwrap() - 0.5).abs() <= 2.0 * 4.0 / 4000.0);
    let o = run(&["density", "periodic:4:{0,1}", "--exact"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["lower"].as_f64(), Some(0.5));
    assert_eq!(v["upper_banach"].as_f64(), Some(0.5));
}

#[test]
fn density_csv_is_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ratio.csv");
    let o = run(&["density", "blocks:pos=geom(2,2):len=const(3)", "--horizon", "5000", "--window", "10", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,ratio"));
    assert!(lines.count() >= 1000);
    assert!(no_temp_files(dir.path()));
}

#[test]
fn bad_set_is_a_parse_error() {
    let o = run(&["density", "periodic:0:{}"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"));
    assert_eq!(run(&["density", "nonsense"]).status.code(), Some(2));
}

#[test]
fn missing_scenario_is_an_io_error() {
    let o = run(&["classify", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn domain_exit_reports_the_step() {
    let o = run(&["orbit", scenario("domain-exit.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("k=2"), "{}", stderr(&o));
}

#[test]
fn classify_writes_verdict_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let (verdict, stats) = (dir.path().join("v.json"), dir.path().join("s.csv"));
    let o = run(&[
        "classify",
        scenario("alternating.json").to_str().unwrap(),
        "--verdict",
        verdict.to_str().unwrap(),
        "--stats",
        stats.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&verdict).unwrap()).unwrap();
    assert!(v.is_object());
    let text = std::fs::read_to_string(&stats).unwrap();
    assert_eq!(text.lines().next(), Some("sigma,dl,du,bdl,bdu,side"));
    assert!(text.lines().count() > 1);
    assert!(no_temp_files(dir.path()));
}

#[test]
fn orbit_csv_header_matches_seminorm_count() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("orbit.csv");
    let o = run(&["orbit", scenario("manifold.json").to_str().unwrap(), "--csv", csv.to_str().unwrap(), "--seminorms", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let head = text.lines().next().unwrap();
    assert!(head == "k,p_1,p_2,p_3" || head == "k,p_1,p_2,p_3,d_k", "{head}");
    let cols = head.split(',').count();
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == cols));
}

#[test]
fn presets_pass() {
    for p in ["alternating", "eigen-witness", "reci", "primeran-a", "primeran-b", "blockset-banach"] {
        let o = run(&["examples", p]);
        assert_eq!(o.status.code(), Some(0), "{p}: {}{}", stdout(&o), stderr(&o));
        let s = stdout(&o);
        assert!(s.lines().filter(|l| l.contains("PASS")).count() >= 2, "{s}");
        assert!(!s.contains("FAIL"), "{s}");
    }
}

#[test]
fn preset_scenario_round_trips_through_classify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("alt.json");
    let o = run(&["examples", "alternating", "--scenario-out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["classify", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn lattice_is_clean_and_injection_is_caught() {
    let o = run(&["lattice", "--samples", "24", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(!stdout(&o).contains("VIOLATION"));
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = run(&["lattice", "--samples", "4", "--inject", "--report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("VIOLATION"));
    assert!(stdout(&o).contains("DC->LY"), "{}", stdout(&o));
    assert!(report.exists() && no_temp_files(dir.path()));
}

#[test]
fn zero_samples_is_rejected() {
    assert_eq!(run(&["lattice", "--samples", "0"]).status.code(), Some(2));
}
