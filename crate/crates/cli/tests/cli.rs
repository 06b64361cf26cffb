use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skinforge"))
}

fn benchmark() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmark.json")
}

fn run(args: &[&str], out: &Path) -> Output {
    let output = bin()
        .arg("--config")
        .arg(benchmark())
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap();
    output
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = run(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn upsilon(stdout: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("upsilon = "))
        .unwrap()
        .trim()
        .parse()
        .unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn atom_reports_the_benchmark_meta_atom() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["atom", "--gnuplot"], dir.path());
    let m = json(&dir.path().join("atom_metrics.json"));
    assert!((m["f_mesh"].as_f64().unwrap() - 0.1176).abs() < 5e-4);
    assert!((m["phase_coverage_te_deg"].as_f64().unwrap() - 220.0).abs() <= 0.5);
    let t_min = read_csv(&dir.path().join("transparency_vs_d1.csv"))
        .iter()
        .map(|r| r[2].parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(t_min > 0.80);
    assert!(read_csv(&dir.path().join("atom_response.csv")).len() == 701);
    assert!(dir.path().join("atom.gp").exists());
}

#[test]
fn broadside_layout_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["synthesize", "--p", "12", "--q", "10"], dir.path());
    assert!(stdout.contains("wall time"));
    let doc = json(&dir.path().join("layout.json"));
    let cells: Vec<f64> = doc["d1_m"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()))
        .collect();
    assert_eq!(cells.len(), 120);
    assert!(cells.iter().all(|v| *v == cells[0]));
    assert!(!dir.path().join("convergence.csv").exists());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["synthesize", "--rx-theta-deg", "160", "--method", "pso", "--seed", "11", "--p", "6", "--q", "6"];
    ok(&args, a.path());
    ok(&args, b.path());
    for name in ["layout.json", "convergence.csv", "transparency_map.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name}");
    }
    let other = tempfile::tempdir().unwrap();
    ok(&["synthesize", "--rx-theta-deg", "160", "--method", "pso", "--seed", "12", "--p", "6", "--q", "6"], other.path());
    assert_ne!(
        std::fs::read(a.path().join("convergence.csv")).unwrap(),
        std::fs::read(other.path().join("convergence.csv")).unwrap()
    );

    let sweep = ["sweep", "angle", "--p", "10", "--q", "10", "--receivers", "180,150"];
    ok(&sweep, a.path());
    ok(&sweep, b.path());
    assert_eq!(
        std::fs::read(a.path().join("angle_sweep.csv")).unwrap(),
        std::fs::read(b.path().join("angle_sweep.csv")).unwrap()
    );
}

#[test]
fn swarm_never_beats_the_per_cell_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["synthesize", "--rx-theta-deg", "160", "--p", "8", "--q", "8"];
    let percell = upsilon(&ok(&base, dir.path()));
    let mut args = base.to_vec();
    args.extend(["--method", "pso"]);
    let pso = upsilon(&ok(&args, dir.path()));
    // the per-cell search is exact on its 701-point grid
    assert!(pso >= percell * (1.0 - 1e-6), "pso {pso} vs per-cell {percell}");
    let trace = read_csv(&dir.path().join("convergence.csv"));
    let values: Vec<f64> = trace.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
    assert!((values.last().unwrap() - pso).abs() <= 1e-6 * pso);
}

#[test]
fn steered_pattern_points_at_the_receiver() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synthesize", "--rx-theta-deg", "160"], dir.path());
    let layout = dir.path().join("layout.json");
    ok(&["pattern", "--rx-theta-deg", "160", "--layout", layout.to_str().unwrap(), "--gnuplot"], dir.path());
    let side = json(&dir.path().join("pattern.json"));
    let peak = side["metrics"]["peak_cut_deg"].as_f64().unwrap();
    assert!((peak - 160.0).abs() <= 1.0, "{peak}");
    assert_eq!(side["radius_m"].as_f64().unwrap(), 100.0);
    assert_eq!(read_csv(&dir.path().join("pattern.csv")).len(), 721);
    assert!(dir.path().join("pattern.gp").exists());
}

#[test]
fn double_anomalous_uv_peak() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synthesize", "--rx-theta-deg", "140", "--rx-phi-deg", "30"], dir.path());
    let layout = dir.path().join("layout.json");
    ok(&["pattern", "--layout", layout.to_str().unwrap(), "--uv"], dir.path());
    let side = json(&dir.path().join("pattern_uv.json"));
    let (u, v) = (side["uv_peak"]["u"].as_f64().unwrap(), side["uv_peak"]["v"].as_f64().unwrap());
    assert!((u - 0.556).abs() <= 0.01 && (v - 0.321).abs() <= 0.01, "({u}, {v})");
}

#[test]
fn baselines_compare_as_expected() {
    let dir = tempfile::tempdir().unwrap();
    let peak = |kind: &str| {
        let sub = dir.path().join(kind);
        ok(&["pattern", "--baseline", kind, "--p", "20", "--q", "20"], &sub);
        json(&sub.join("pattern.json"))["metrics"]["peak_power_db"].as_f64().unwrap()
    };
    let glass = peak("glass");
    let empty = peak("empty");
    // 4-10-4 window at 26 GHz: |t| = 0.637
    assert!((empty - glass - 3.915).abs() < 0.01, "{empty} {glass}");
}

#[test]
fn sweeps_keep_input_order() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sweep", "aperture", "--rx-theta-deg", "140", "--sizes", "16,8,12"], dir.path());
    let rows = read_csv(&dir.path().join("aperture_sweep.csv"));
    let sizes: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(sizes, ["16", "8", "12"]);

    ok(&["sweep", "angle", "--p", "10", "--q", "10", "--receivers", "180,160"], dir.path());
    let rows = read_csv(&dir.path().join("angle_sweep.csv"));
    assert_eq!(rows[0][0], "180");
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
    assert!(rows[1][2].parse::<f64>().unwrap() < 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(args, dir.path()).status.code().unwrap();

    assert_eq!(code(&["synthesize", "--rx-theta-deg", "90"]), 2);
    assert_eq!(code(&["synthesize", "--pitch-mm", "3.0"]), 2);
    assert_eq!(code(&["synthesize", "--table", "/no/such/table.csv"]), 3);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"frequency_ghz": 26, "colour": "blue"}"#).unwrap();
    let o = bin().args(["synthesize", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let table = dir.path().join("table.csv");
    std::fs::write(
        &table,
        "d1_m,mag_te,phase_te_deg,mag_tm,phase_tm_deg\n0.0009,1,0,1,0\n0.0012,0.9,x,0.9,-10\n0.0016,0.8,-200,0.8,-200\n",
    )
    .unwrap();
    let o = run(&["atom", "--table", table.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));

    // layout built on a 3.7 mm lattice, evaluated with a 3.5 mm table
    ok(&["synthesize", "--p", "4", "--q", "4"], dir.path());
    let layout = dir.path().join("layout.json");
    assert_eq!(code(&["pattern", "--pitch-mm", "3.5", "--layout", layout.to_str().unwrap()]), 3);
    std::fs::write(&layout, "{ not json").unwrap();
    assert_eq!(code(&["pattern", "--layout", layout.to_str().unwrap()]), 3);
}

#[test]
fn file_table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["atom"], dir.path());
    // the dense dump is itself a valid table
    let table = dir.path().join("atom_response.csv");
    let out = dir.path().join("from_file");
    let stdout = ok(&["synthesize", "--rx-theta-deg", "150", "--p", "6", "--q", "6", "--table", table.to_str().unwrap()], &out);
    assert!(stdout.contains("upsilon"));
    let doc = json(&out.join("layout.json"));
    assert_eq!(doc["table_id"], "atom_response.csv");
}
