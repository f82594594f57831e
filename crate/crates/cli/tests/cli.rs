use std::path::{Path, PathBuf};

use tmdl::io::read_csv;
use tmdl_cli::{read_metadata, run};

fn tmdl(args: &[&str]) -> i32 {
    let mut argv = vec!["tmdl"];
    argv.extend_from_slice(args);
    run(argv)
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every CSV listed in the metadata exists with the recorded header and row count.
fn check_bundle(dir: &Path) {
    let meta = read_metadata(dir).unwrap();
    assert!(!meta.files.is_empty());
    for f in &meta.files {
        let text = std::fs::read_to_string(dir.join(&f.file)).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), f.rows + 1, "{}", f.file);
        let raw = read_csv(&dir.join(&f.file)).unwrap();
        assert_eq!(raw.columns, f.columns);
    }
    let csvs = std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, meta.files.len());
}

#[test]
fn staircase_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let code = tmdl(&["staircase", "--n-atoms", "3", "--sweep", "g:0:2:201", "--output", path_str(&out)]);
    assert_eq!(code, 0);
    check_bundle(&out);
    let raw = read_csv(&out.join("staircase.csv")).unwrap();
    assert_eq!(raw.columns, ["g", "n", "jump_flag"]);
    assert_eq!(raw.rows.len(), 201);
    let flags = raw.ints("jump_flag").unwrap();
    assert!(flags.iter().all(|&f| f == 0 || f == 1));
    let jumps = read_csv(&out.join("jumps.csv")).unwrap();
    assert_eq!(jumps.columns, ["lower", "upper", "location", "n_before", "n_after"]);
    assert_eq!(jumps.rows.len() as i64, flags.iter().sum::<i64>());
    let dicke = read_csv(&out.join("dicke.csv")).unwrap();
    assert_eq!(dicke.columns, ["g", "n_s", "variance"]);
    let meta = read_metadata(&out).unwrap();
    assert_eq!(meta.subcommand, "staircase");
    assert_eq!(meta.config.model.n_atoms, 3);
    assert!(meta.cutoffs.contains_key("staircase"));
}

#[test]
fn scan_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let code = tmdl(&[
        "scan",
        "--method",
        "both",
        "--sweep",
        "g:0.4:0.6:3",
        "--t-grid",
        "0:0.4:5",
        "--n-max",
        "10",
        "--output",
        path_str(&out),
    ]);
    assert_eq!(code, 0);
    check_bundle(&out);
    let grid = read_csv(&out.join("grid.csv")).unwrap();
    assert_eq!(&grid.columns[..6], ["t", "g", "phase", "psi1", "psi2", "n"]);
    assert_eq!(grid.rows.len(), 15);
    assert!(grid.text("phase").unwrap().iter().all(|p| p == "MI" || p == "SF"));
    let b = read_csv(&out.join("boundary.csv")).unwrap();
    assert_eq!(&b.columns[..3], ["g", "t_c", "n_lobe"]);
    assert_eq!(b.rows.len(), 3);
    assert!(out.join("frontier.csv").exists());
    assert!(out.join("comparison.csv").exists());
}

#[test]
fn perturbative_scan_flags_nan() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let code = tmdl(&[
        "scan",
        "--method",
        "perturbation",
        "--sweep",
        "g:0.5:0.6:2",
        "--t-grid",
        "0:0.45:4",
        "--n-max",
        "10",
        "--output",
        path_str(&out),
    ]);
    assert_eq!(code, 0);
    let meta = read_metadata(&out).unwrap();
    let grid = meta.files.iter().find(|f| f.file == "grid.csv").unwrap();
    assert!(grid.nan_cells > 0);
    assert!(meta.has_nan);
    let text = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert!(text.contains(",nan,"));
}

#[test]
fn misspelt_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nomga0 = 1.0\n").unwrap();
    let out = tmp.path().join("run");
    let code = tmdl(&["staircase", "--config", path_str(&cfg), "--output", path_str(&out)]);
    assert_eq!(code, 2);
    assert!(!out.exists());
}

#[test]
fn error_classes_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(tmdl(&["staircase", "--no-such-flag"]), 2);
    assert_eq!(tmdl(&["scan", "--method", "guess"]), 2);
    assert_eq!(tmdl(&["staircase", "--sweep", "q:0:1:3"]), 2);
    // the single-atom pair fails the gap-hierarchy check at weak coupling
    let out = tmp.path().join("num");
    assert_eq!(tmdl(&["spinmap", "--g", "0.1", "--output", path_str(&out)]), 3);
    let file = tmp.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let under_file = file.join("run");
    assert_eq!(tmdl(&["boundary", "--sweep", "g:0.5:0.6:2", "--output", path_str(&under_file)]), 4);
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"subcommand": "boundary", "model": {"n_atoms": 1, "g1": 1.0, "g2": 1.0}, "sweep": "g:0.2:1.0:3"}"#).unwrap();
    let out = tmp.path().join("run");
    let code = tmdl(&["boundary", "--config", path_str(&cfg), "--ratio", "1.05", "--output", path_str(&out)]);
    assert_eq!(code, 0);
    let meta = read_metadata(&out).unwrap();
    assert!((meta.config.model.g2 - 1.05).abs() < 1e-15);
    assert_eq!(tmdl(&["staircase", "--config", path_str(&cfg)]), 2);
}

#[test]
fn circuit_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("circuit.toml");
    std::fs::write(
        &cfg,
        "[circuit]\nreading = \"deduplicated\"\n[circuit.params]\nl1 = 1.0\nl2 = 1.2\nla = 0.9\nlb = 1.1\n\
         ca = 1.0\ncb = 0.8\ncg = 0.5\ncj = 0.7\nd = 1.0\nxs = 0.3\nphi0 = 1.0\ne_charge = 1.0\n\
         matrix_element = 1.0\nomega0_atom = 1.0\n[circuit.tune]\nfree = [\"lb\", \"xs\"]\n",
    )
    .unwrap();
    let out = tmp.path().join("run");
    assert_eq!(tmdl(&["circuit", "--config", path_str(&cfg), "--output", path_str(&out)]), 0);
    check_bundle(&out);
    let tuned = read_csv(&out.join("tuned_circuit.csv")).unwrap();
    let q = tuned.text("quantity").unwrap();
    let v = tuned.floats("value").unwrap();
    let get = |name: &str| v[q.iter().position(|x| x == name).unwrap()];
    assert!((get("omega1") - get("omega2")).abs() < 1e-6 * get("omega1"));
    assert!((get("g1") - get("g2")).abs() < 1e-6 * get("g1").abs());
    assert_eq!(tmdl(&["circuit", "--output", path_str(&tmp.path().join("none"))]), 2);
}

#[test]
fn gapprofile_and_spinmap_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gaps");
    assert_eq!(tmdl(&["gapprofile", "--n-atoms", "2", "--sweep", "g:0:1:3", "--levels", "3", "--output", path_str(&out)]), 0);
    check_bundle(&out);
    let gaps = read_csv(&out.join("gaps.csv")).unwrap();
    assert_eq!(gaps.columns, ["g", "level", "gap", "n"]);
    assert_eq!(gaps.rows.len(), 9);
    let out = tmp.path().join("spin");
    assert_eq!(tmdl(&["spinmap", "--g", "2", "--n-atoms", "3", "--t", "0.01", "--output", path_str(&out)]), 0);
    check_bundle(&out);
    let s = read_csv(&out.join("spinmap.csv")).unwrap();
    assert_eq!(s.columns, ["n_lobe", "delta", "alpha", "beta", "j", "t", "gap_ratio", "selection_residual"]);
    assert!(s.floats("selection_residual").unwrap()[0] < 1e-8);
}

fn pinned_run(sub: &str, workers: &str, out: &Path) {
    let cfg = golden_dir().join("pinned.toml");
    let code = tmdl(&[sub, "--config", path_str(&cfg), "--workers", workers, "--output", path_str(out)]);
    assert_eq!(code, 0);
}

/// CSV output of the pinned configuration is byte-identical across worker
/// counts and matches the stored golden files. Set TMDL_BLESS=1 to rewrite them.
#[test]
fn golden_output_is_byte_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let bless = std::env::var_os("TMDL_BLESS").is_some();
    for sub in ["staircase", "boundary", "scan"] {
        let one = tmp.path().join(format!("{sub}-1"));
        let three = tmp.path().join(format!("{sub}-3"));
        pinned_run(sub, "1", &one);
        pinned_run(sub, "3", &three);
        for f in read_metadata(&one).unwrap().files {
            let a = std::fs::read(one.join(&f.file)).unwrap();
            let b = std::fs::read(three.join(&f.file)).unwrap();
            assert!(a == b, "{sub}/{} differs across worker counts", f.file);
            let golden = golden_dir().join(sub).join(&f.file);
            if bless {
                std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
                std::fs::write(&golden, &a).unwrap();
            } else {
                let g = std::fs::read(&golden).unwrap();
                assert!(a == g, "{sub}/{} differs from the golden file", f.file);
            }
        }
    }
}

#[test]
fn fresh_directory_when_output_is_absent() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = std::env::current_dir().unwrap();
    std::env::set_current_dir(tmp.path()).unwrap();
    let a = tmdl(&["boundary", "--sweep", "g:0.5:0.6:2", "--n-max", "8"]);
    let b = tmdl(&["boundary", "--sweep", "g:0.5:0.6:2", "--n-max", "8"]);
    std::env::set_current_dir(cwd).unwrap();
    assert_eq!((a, b), (0, 0));
    let runs: Vec<_> = std::fs::read_dir(tmp.path().join("runs")).unwrap().collect();
    assert_eq!(runs.len(), 2);
}

#[test]
fn binary_reports_machine_readable_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nomga0 = 1.0\n").unwrap();
    let res = std::process::Command::new(env!("CARGO_BIN_EXE_tmdl"))
        .args(["staircase", "--config", path_str(&cfg)])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["status"], "error");
    assert_eq!(err["kind"], "config");
    assert!(err["message"].as_str().unwrap().contains("omga0"));
}
