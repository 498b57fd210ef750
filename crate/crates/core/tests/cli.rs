use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bpms::sweep::{RunManifest, BEAMPATTERN_CSV, BEAMPATTERN_HEADER, MANIFEST_JSON, SWEEP_CSV, SWEEP_HEADER};

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn bpms(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bpms"));
    cmd.args(args).env_remove("BPMS_SOLVER_TOL").env_remove("BPMS_SOLVER_MAX_ITER").env_remove("BPMS_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn sweep(out: &Path, schemes: &str, grid: &str, env: &[(&str, &str)]) -> Output {
    let cfg = config();
    bpms(
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--schemes",
            schemes,
            "--rho-grid",
            grid,
            "--out",
            out.to_str().unwrap(),
        ],
        env,
    )
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn empty_or_unknown_schemes_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for schemes in ["", "FDB-XYZ", " , "] {
        let out = dir.path().join(format!("run{}", schemes.len()));
        let res = sweep(&out, schemes, "3", &[]);
        assert_eq!(res.status.code(), Some(1), "{schemes:?}: {}", String::from_utf8_lossy(&res.stderr));
        assert!(!out.exists(), "{schemes:?} wrote output");
    }
}

#[test]
fn bad_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    let cfg = config();
    let c = cfg.to_str().unwrap();
    let missing = bpms(&["sweep", "--config", "/nonexistent.toml", "--schemes", "APA", "--out", o], &[]);
    assert_eq!(missing.status.code(), Some(1));
    let grid = bpms(&["sweep", "--config", c, "--schemes", "APA", "--rho-grid", "0,2", "--out", o], &[]);
    assert_eq!(grid.status.code(), Some(1));
    let step = bpms(&["beampattern", "--config", c, "--scheme", "APA", "--rho", "0.5", "--step-deg", "7", "--out", o], &[]);
    assert_eq!(step.status.code(), Some(1));
    let tol = sweep(&out, "APA", "3", &[("BPMS_SOLVER_TOL", "abc")]);
    assert_eq!(tol.status.code(), Some(1));
    let workers = sweep(&out, "APA", "3", &[("BPMS_WORKERS", "0")]);
    assert_eq!(workers.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn sweep_outputs_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let res = sweep(&out, "FDB-WCRB,APA", "5", &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = read_csv(&out.join(SWEEP_CSV));
    assert_eq!(header, SWEEP_HEADER);
    assert_eq!(rows.len(), 6);
    assert!(rows[..5].iter().all(|r| r[0] == "FDB-WCRB" && r[5] == "ok"));
    assert_eq!(rows[5][0], "APA");
    assert_eq!(rows[5][1], "");
    let bp: Vec<f64> = rows[..5].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(bp.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6)), "{bp:?}");
    for r in &rows {
        for v in &r[2..5] {
            assert!(v.parse::<f64>().unwrap().is_finite());
        }
    }

    let manifest_path = out.join(MANIFEST_JSON);
    let m = RunManifest::read(&manifest_path).unwrap();
    let again: RunManifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(again, m);
    assert_eq!(m.schemes, ["FDB-WCRB", "APA"]);
    assert_eq!(m.rho_grid, [0.0, 0.0625, 0.5, 0.9375, 1.0]);
    assert_eq!(m.outputs, [out.join(SWEEP_CSV)]);
    assert_eq!(m.aods_deg.len(), 4);
    assert_eq!(m.points.len(), rows.len());
    for (p, r) in m.points.iter().zip(&rows) {
        assert_eq!(p.scheme, r[0]);
        let rho: Option<f64> = (!r[1].is_empty()).then(|| r[1].parse().unwrap());
        assert_eq!(p.rho, rho);
        assert_eq!(&rows[p.row], r);
    }
}

#[test]
fn reruns_match_except_timing() {
    let dir = tempfile::tempdir().unwrap();
    let strip = |p: &Path| -> Vec<Vec<String>> {
        let (_, rows) = read_csv(p);
        rows.into_iter()
            .map(|mut r| {
                r.remove(4);
                r
            })
            .collect()
    };
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let res = sweep(&out, "FDB-WBF,CPA-WVM,APA", "0,0.5,1", &[]);
        assert_eq!(res.status.code(), Some(0));
        runs.push(strip(&out.join(SWEEP_CSV)));
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0].len(), 7);
}

#[test]
fn solver_failures_are_recorded_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fail");
    let res = sweep(&out, "FDB-WCRB,APA", "0,1", &[("BPMS_SOLVER_MAX_ITER", "2")]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    let (_, rows) = read_csv(&out.join(SWEEP_CSV));
    assert_eq!(rows.len(), 3);
    assert!(rows[..2].iter().all(|r| r[5] != "ok"), "{rows:?}");
    assert_eq!(rows[2][5], "ok");
    assert!(out.join(MANIFEST_JSON).exists());
}

#[test]
fn beampattern_grid_and_normalisation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("iso");
    let cfg = config();
    let res = bpms(
        &[
            "beampattern",
            "--config",
            cfg.to_str().unwrap(),
            "--scheme",
            "ISOTROPIC",
            "--rho",
            "0.5",
            "--step-deg",
            "1",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = read_csv(&out.join(BEAMPATTERN_CSV));
    assert_eq!(header, BEAMPATTERN_HEADER);
    assert_eq!(rows.len(), 181);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), -90.0);
    assert_eq!(rows[180][0].parse::<f64>().unwrap(), 90.0);
    for r in &rows {
        assert!(r[1].parse::<f64>().unwrap().abs() < 1e-9, "{r:?}");
    }
    let m = RunManifest::read(&out.join(MANIFEST_JSON)).unwrap();
    assert_eq!(m.command, "beampattern");
    assert_eq!(m.aods_deg.len(), 4);
}

#[test]
fn apa_beampattern_peaks_at_zero_db() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("apa");
    let cfg = config();
    let res = bpms(
        &[
            "beampattern",
            "--config",
            cfg.to_str().unwrap(),
            "--scheme",
            "APA",
            "--rho",
            "0",
            "--step-deg",
            "0.5",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(res.status.code(), Some(0));
    let (_, rows) = read_csv(&out.join(BEAMPATTERN_CSV));
    assert_eq!(rows.len(), 361);
    let db: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let peak = db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(peak, 0.0);
    assert!(db.iter().all(|&d| d <= 0.0));
}
