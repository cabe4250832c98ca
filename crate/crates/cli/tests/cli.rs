use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[geometry]
rows = 8
cols = 8

[scene]
p_bs = [-0.148, 0.148, 0.148]
p_ue = [0.074, 0.074, 0.074]
transmissions = 12
zeta = { beta_min = 0.5, kappa = 1.5, phi = 0.0 }

[sweep]
variable = "beta_min"
values = [0.3, 0.8]
snr_db = [20.0, 30.0]

[run]
trials = 4
seed = 7
profile_realizations = 2

[estimator]
order = 4

[estimator.grids]
k_angle = 24
k_dist = 24
l_calib = 8
refinement_levels = 1

[solver]
n_restarts = 2
restart_radius = 0.02
initial_step = 0.005
"#;

fn risloc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risloc")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn tiny_config(dir: &Path, text: &str) -> String {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&risloc(&["bounds-sweep", "--trials", "many"], dir.path())), 2);
    assert_eq!(code(&risloc(&["reproduce-figure", "fig-99"], dir.path())), 2);
    let cfg = tiny_config(dir.path(), &format!("{TINY}\n[extra]\nkey = 1\n"));
    let o = risloc(&["bounds-sweep", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = tiny_config(dir.path(), &TINY.replace("p_ue = [0.074, 0.074, 0.074]", "p_ue = [5.0, 5.0, 5.0]"));
    assert_eq!(code(&risloc(&["rmse-sweep", "--config", &cfg], dir.path())), 2);
    assert_eq!(code(&risloc(&["rmse-sweep", "--trials", "0", "--fast"], dir.path())), 2);
}

#[test]
fn singular_information_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    // two-element array
    let two = TINY
        .replace("rows = 8\ncols = 8", "rows = 1\ncols = 2")
        .replace("p_ue = [0.074, 0.074, 0.074]", "p_ue = [0.00577, 0.00577, 0.00577]")
        .replace("seed = 7", "seed = 7\nscenarios = [\"II\", \"III\"]");
    let cfg = tiny_config(dir.path(), &two);
    let o = risloc(&["bounds-sweep", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bounds-sweep.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"], summary["attempted"]);
    assert!(summary["first_error"].as_str().unwrap().contains("Fisher"));
}

#[test]
fn bounds_sweep_is_reproducible_and_schema_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), TINY);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&risloc(&["bounds-sweep", "--config", &cfg], &a)), 0);
    assert_eq!(code(&risloc(&["bounds-sweep", "--config", &cfg, "--sequential"], &b)), 0);
    let ta = std::fs::read_to_string(a.join("bounds-sweep.csv")).unwrap();
    let tb = std::fs::read_to_string(b.join("bounds-sweep.csv")).unwrap();
    assert!(ta.starts_with("# schema=1\nconfig_hash,"));
    // 2 beta values x 2 SNRs x 3 scenarios
    assert_eq!(ta.lines().count(), 2 + 12);
    let strip = |t: &str| t.lines().map(|l| l.split_once(',').map_or(l, |x| x.1).to_string()).collect::<Vec<_>>();
    // hashes differ by the parallel flag
    assert_eq!(strip(&ta), strip(&tb));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("bounds-sweep.json")).unwrap()).unwrap();
    assert_eq!(summary["schema"], 1);
    assert!(summary["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(summary["configs"][0]["run"]["seed"], 7);
}

#[test]
fn rmse_sweep_reports_standard_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), TINY);
    assert_eq!(code(&risloc(&["rmse-sweep", "--config", &cfg, "--seed", "3"], dir.path())), 0);
    let text = std::fs::read_to_string(dir.path().join("rmse-sweep.csv")).unwrap();
    let mut r = csv::Reader::from_reader(text.strip_prefix("# schema=1\n").unwrap().as_bytes());
    let head = r.headers().unwrap().clone();
    let col = |name: &str| head.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 2 * 2 * 3);
    for row in &rows {
        let rmse: f64 = row[col("rmse")].parse().unwrap();
        let se: f64 = row[col("rmse_se")].parse().unwrap();
        assert!(rmse > 0.0 && se >= 0.0, "{row:?}");
        assert_eq!(&row[col("count")], "4");
    }
    let again = dir.path().join("again");
    assert_eq!(code(&risloc(&["rmse-sweep", "--config", &cfg, "--seed", "3"], &again)), 0);
    assert_eq!(text, std::fs::read_to_string(again.join("rmse-sweep.csv")).unwrap());
}

#[test]
fn beta_figure_matches_reference_curves() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&risloc(&["reproduce-figure", "beta-curves"], dir.path())), 0);
    let text = std::fs::read_to_string(dir.path().join("beta-curves.csv")).unwrap();
    let mut r = csv::Reader::from_reader(text.strip_prefix("# schema=1\n").unwrap().as_bytes());
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3 * 101);
    let reference =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/beta_curves.csv")).unwrap();
    let reference: Vec<Vec<f64>> = reference
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    for (k, row) in rows.iter().enumerate() {
        let (model, i) = (k / 101, k % 101);
        let theta: f64 = row[0].parse().unwrap();
        let b: f64 = row[4].parse().unwrap();
        assert!((theta - reference[i][0]).abs() < 1e-4);
        assert!((b - reference[i][model + 1]).abs() < 1e-4, "row {k}");
    }
}

#[test]
fn show_config_output_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = risloc(&["show-config", "--fast", "--trials", "9"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("trials = 9"));
    let cfg = tiny_config(dir.path(), &text);
    let again = risloc(&["show-config", "--config", &cfg], dir.path());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}
