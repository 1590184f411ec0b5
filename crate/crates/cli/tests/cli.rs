use std::fs;
use std::path::PathBuf;

use phi4lab::io::{read_fld1, EnsembleRecord, ExperimentManifest};
use phi4lab_cli::{parse_grid, run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

fn out_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn phi4lab(args: &[&str]) -> i32 {
    run(std::iter::once("phi4lab").chain(args.iter().copied()))
}

fn manifest(dir: &std::path::Path) -> ExperimentManifest {
    ExperimentManifest::parse(&fs::read_to_string(dir.join("manifest.txt")).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(phi4lab(&[]), EXIT_USAGE);
    assert_eq!(phi4lab(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(phi4lab(&["solve-parabolic", "--foo", "1"]), EXIT_USAGE);
    assert_eq!(phi4lab(&["solve-parabolic", "--N", "abc", "--seed", "1"]), EXIT_USAGE);
    assert_eq!(phi4lab(&["solve-parabolic", "--N", "16"]), EXIT_USAGE);
    assert_eq!(phi4lab(&["solve-parabolic", "--N", "12", "--seed", "1"]), EXIT_USAGE);
    assert_eq!(phi4lab(&["norms", "--input", "/nonexistent/file.fld1"]), EXIT_FAILURE);

    let dir = out_dir("usage");
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.txt");
    fs::write(&cfg, "tol = 1e-6\nseed = 1\n").unwrap();
    assert_eq!(phi4lab(&["solve-parabolic", "--config", cfg.to_str().unwrap()]), EXIT_USAGE);
    assert_eq!(phi4lab(&["--help"]), EXIT_OK);
    assert_eq!(phi4lab(&["--version"]), EXIT_OK);
}

#[test]
fn grid_spec_parsing() {
    assert_eq!(parse_grid("d=2,N=32,M=6.5").unwrap(), (2, 32, 6.5));
    assert_eq!(parse_grid(" N = 8 , d=3,M=1").unwrap(), (3, 8, 1.0));
    for bad in ["", "d=2,N=32", "d=2,N=x,M=1", "d=2,N=8,M=1,q=3", "d2,N=8,M=1"] {
        assert!(parse_grid(bad).is_err(), "{bad}");
    }
}

#[test]
fn verify_suite_passes() {
    assert_eq!(phi4lab(&["verify", "--grid", "d=2,N=16,M=6.283185307179586"]), EXIT_OK);
    assert_eq!(phi4lab(&["verify", "--grid", "d=3,N=8,M=4"]), EXIT_OK);
}

#[test]
fn parabolic_run_replays_from_its_config() {
    let first = out_dir("parabolic-first");
    let again = out_dir("parabolic-again");
    let args = ["solve-parabolic", "--N", "16", "--T", "0.05", "--dt", "0.005", "--seed", "3,4", "--method", "split"];
    let mut argv = args.to_vec();
    argv.extend(["--out", first.to_str().unwrap()]);
    assert_eq!(phi4lab(&argv), EXIT_OK);
    let m = manifest(&first);
    assert_eq!(m.command, "solve-parabolic");
    assert_eq!(m.seeds, vec![3, 4]);
    assert!(m.artifacts.iter().any(|a| a.path == "series_seed3.csv"));
    assert!(m.artifacts.iter().any(|a| a.path.ends_with(".fld1")));
    assert!(m.verify(&first).unwrap().is_empty());

    let config = first.join("config.txt");
    assert_eq!(phi4lab(&["solve-parabolic", "--config", config.to_str().unwrap(), "--out", again.to_str().unwrap()]), EXIT_OK);
    assert_eq!(manifest(&again).artifacts, m.artifacts);
    let check = again.join("manifest.txt");
    assert_eq!(phi4lab(&["verify", "--manifest", check.to_str().unwrap()]), EXIT_OK);

    fs::write(again.join("series_seed3.csv"), "tampered\n").unwrap();
    assert_eq!(phi4lab(&["verify", "--manifest", check.to_str().unwrap()]), EXIT_FAILURE);
}

#[test]
fn objects_then_regularity_fits() {
    let dir = out_dir("objects");
    assert_eq!(phi4lab(&["build-objects", "--domain", "elliptic-d4", "--N", "16", "--seed", "1,2,3", "--out", dir.to_str().unwrap()]), EXIT_OK);
    let text = fs::read_to_string(dir.join("ensemble.txt")).unwrap();
    let records = EnsembleRecord::parse_all(&text).unwrap();
    assert_eq!(records.len(), 9);
    let x = read_fld1(dir.join("X_seed2.fld1")).unwrap();
    assert_eq!(x.grid().d(), 4);

    let fits = out_dir("objects-norms");
    let ens = dir.join("ensemble.txt");
    assert_eq!(phi4lab(&["norms", "--input", ens.to_str().unwrap(), "--out", fits.to_str().unwrap()]), EXIT_OK);
    let csv = fs::read_to_string(fits.join("regularity_X2.csv")).unwrap();
    assert!(csv.starts_with("j,log2_mean,fit_slope,stderr"));

    let single = out_dir("objects-field");
    let f = dir.join("X_seed1.fld1");
    assert_eq!(phi4lab(&["norms", "--input", f.to_str().unwrap(), "--alpha", "-0.5", "--out", single.to_str().unwrap()]), EXIT_OK);
    assert!(fs::read_to_string(single.join("norms.csv")).unwrap().starts_with("j,block_sup,weighted_block_sup"));
}

#[test]
fn noise_snapshots_follow_the_stride() {
    let dir = out_dir("noise");
    let code = phi4lab(&[
        "sample-noise", "--field", "parabolic", "--N", "8", "--T", "0.1", "--dt", "0.01", "--stride", "5", "--seed", "9",
        "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let names: Vec<String> = manifest(&dir).artifacts.into_iter().map(|a| a.path).filter(|p| p.ends_with(".fld1")).collect();
    assert_eq!(names, vec!["X_seed9_00000.fld1", "X_seed9_00001.fld1", "X_seed9_00002.fld1"]);
}

#[test]
fn elliptic_solver_reports_and_passes() {
    let dir = out_dir("elliptic");
    assert_eq!(phi4lab(&["solve-elliptic", "--N", "8", "--seed", "1", "--out", dir.to_str().unwrap()]), EXIT_OK);
    let names: Vec<String> = manifest(&dir).artifacts.into_iter().map(|a| a.path).collect();
    assert!(names.iter().any(|n| n.starts_with("phi_seed1")), "{names:?}");
    assert!(names.iter().any(|n| n.starts_with("psi_seed1")), "{names:?}");
}

#[test]
fn probe_and_convergence_runs() {
    let dir = out_dir("probe");
    let code = phi4lab(&["uniqueness-probe", "--N", "16", "--T", "0.05", "--dt", "0.005", "--seed", "2", "--out", dir.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let conv = out_dir("convergence");
    let code = phi4lab(&[
        "convergence", "--symbol", "X2", "--resolutions", "8,16", "--T", "0.0", "--seed", "1,2", "--out", conv.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(conv.join("convergence.csv").exists());
}

#[test]
fn coming_down_writes_its_table() {
    let dir = out_dir("coming-down");
    let code = phi4lab(&["coming-down", "--N", "16", "--T", "0.1", "--dt", "0.005", "--seed", "1", "--out", dir.to_str().unwrap()]);
    assert!(code == EXIT_OK || code == EXIT_FAILURE);
    let csv = fs::read_to_string(dir.join("coming_down.csv")).unwrap();
    assert!(csv.lines().count() > 10);
}
