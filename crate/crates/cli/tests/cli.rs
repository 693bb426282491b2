use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peierls"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SQUARE: &str = "[lattice]\ndim = 2\nbasis = [[6.283185307179586, 0.0], [0.0, 6.283185307179586]]\n";

#[test]
fn bands_has_resolution_times_n_bands_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bands"], &configs().join("mathieu.toml"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("xi_index,xi_1,band,lambda"));
    assert_eq!(lines.count(), 32 * 3);
    assert!(!csv.contains('\r'));
    let iv: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("intervals.json")).unwrap()).unwrap();
    assert_eq!(iv["intervals"].as_array().unwrap().len(), 3);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bands.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["rows"], 96);
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bands"], &configs().join("mathieu.toml"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    let lambda = csv.lines().nth(1).unwrap().split(',').nth(3).unwrap();
    let mantissa = lambda.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
    assert_eq!(mantissa.len(), 17, "{lambda}");
}

#[test]
fn non_antisymmetric_field_exits_2_naming_h1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bands"], &configs().join("invalid_h1.toml"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("H.1"), "{}", stderr(&o));
}

#[test]
fn non_hermitian_potential_exits_2_naming_h6() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SQUARE}[[potential.coefficients]]\nindex = [1, 0]\nre = 1.0\n"),
    );
    let o = run(&["bands"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("H.6"), "{}", stderr(&o));
}

#[test]
fn degenerate_band_on_simple_path_exits_2_naming_h7() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SQUARE}[potential]\nname = \"separable_cosine_2d\"\n[numerics]\nresolution = 8\nband = 2\n"),
    );
    let o = run(&["section"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("H.7"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_and_missing_files_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SQUARE}[numerics]\nresolutoin = 8\n"));
    assert_eq!(run(&["bands"], &cfg, dir.path()).status.code(), Some(2));
    let missing = dir.path().join("absent.toml");
    assert_eq!(run(&["bands"], &missing, dir.path()).status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_3() {
    // magnetic-Bloch direct mode needs a rectangular lattice
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[lattice]\ndim = 2\nbasis = [[6.283185307179586, 0.0], [3.141592653589793, 5.441398092702653]]\n\
         [field]\nB12 = 1.0\nepsilon = 0.18377629847250926\n[direct]\nmode = \"magnetic_bloch\"\n",
    );
    let o = run(&["direct"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("direct:"), "{}", stderr(&o));
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = configs().join("mathieu.toml");
    for (cmd, files) in [
        ("bands", vec!["bands.csv", "intervals.json"]),
        ("section", vec!["section.csv", "kappa.json"]),
        ("grushin", vec!["grushin.csv"]),
        ("effective", vec!["margin.csv", "spectrum.json"]),
        ("direct", vec!["direct.csv"]),
    ] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert!(run(&[cmd], &cfg, a.path()).status.success());
        assert!(run(&[cmd], &cfg, b.path()).status.success());
        for f in files {
            let x = fs::read(a.path().join(f)).unwrap();
            let y = fs::read(b.path().join(f)).unwrap();
            assert!(x == y, "{cmd}: {f} differs between runs");
        }
    }
}

#[test]
fn effective_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["scan", "--mode", "box", "--radius", "3", "--window", "-1.2,-0.9"],
        &configs().join("mathieu.toml"),
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("scan.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["meta"]["mode"], "box");
    assert_eq!(meta["meta"]["radius"], 3);
    assert_eq!(meta["meta"]["window"][0], -1.2);
    let bad = run(&["effective", "--flux", "1/0"], &configs().join("mathieu.toml"), dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn effective_reconstructs_the_mathieu_band() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["effective"], &configs().join("mathieu.toml"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("spectrum.json")).unwrap()).unwrap();
    let band = s["run"]["band_interval"].as_array().unwrap();
    let iv = s["spectrum"]["merged_intervals"].as_array().unwrap();
    assert_eq!(iv.len(), 1);
    for j in 0..2 {
        let d = (iv[0][j].as_f64().unwrap() - band[j].as_f64().unwrap()).abs();
        assert!(d < 1e-8, "endpoint {j} off by {d:e}");
    }
}

#[test]
fn compare_reports_three_pairs_and_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["compare"], &configs().join("separable.toml"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let d: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("compare.json")).unwrap()).unwrap();
    let pairs = d["report"]["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 3);
    let qs: Vec<i64> = d["runs"].as_array().unwrap().iter().map(|r| r["q"].as_i64().unwrap()).collect();
    assert_eq!(qs, vec![2, 4, 8]);
    let c = d["report"]["fitted_slope"].as_f64().unwrap();
    assert!(c.is_finite() && c > 0.0);
    let dists: Vec<f64> = pairs.iter().map(|p| p[1].as_f64().unwrap()).collect();
    assert!(dists.windows(2).all(|w| w[1] <= 1.25 * w[0]), "{dists:?}");
}
