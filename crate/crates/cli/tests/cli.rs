use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tnoise(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tnoise"))
        .args(args)
        .env("TNOISE_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn run_dir(root: &Path, prefix: &str) -> PathBuf {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with(prefix))
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

const SMALL: [&str; 10] = [
    "--set",
    "max_mode=3",
    "--set",
    "horizon=0.02",
    "--set",
    "theta.n=1",
    "--set",
    "samples=2",
    "--set",
    "ladder=[1,3]",
];

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tnoise(&["frobnicate"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(tnoise(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tnoise(&["decay", "--set", "delta=0.7"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "schema_version = 2\n").unwrap();
    let out = tnoise(&["decay", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema_version"));

    let out = tnoise(&["corrector-limit", "--l", "1,0"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--set", "guard=1e-9"];
    args.extend(SMALL);
    let out = tnoise(&args, tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integration failure"));
}

#[test]
fn verify_identities_on_a_small_shell() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tnoise(
        &["verify-identities", "--N", "2", "--set", "theta.gamma=1"],
        tmp.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let dir = run_dir(tmp.path(), "verify-identities-");
    let csv = fs::read_to_string(dir.join("corrector.csv")).unwrap();
    assert!(
        csv.starts_with("N,gamma,l,beta,defect,polarization_sum_error,covariance_max_offdiag\n")
    );
    let l2 = transport_noise::lattice::theta_shell(2, 1.0)
        .unwrap()
        .l2_sq();
    for v in column(&csv, "covariance_max_offdiag") {
        assert!(v.parse::<f64>().unwrap() <= 1e-13 * l2);
    }
    let r = report(&dir);
    assert_eq!(r["passed"], true);
    assert_eq!(r["metadata"]["subcommand"], "verify-identities");
    assert!(r["metadata"]["rng_algorithm"]
        .as_str()
        .unwrap()
        .starts_with("ChaCha20"));
}

#[test]
fn corrector_limit_defects_decrease() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tnoise(
        &["corrector-limit", "--N", "4,8,16,32", "--l", "1,0,0"],
        tmp.path(),
    );
    let dir = run_dir(tmp.path(), "corrector-limit-");
    let csv = fs::read_to_string(dir.join("corrector.csv")).unwrap();
    let d: Vec<f64> = column(&csv, "defect")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(d.len(), 4);
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    assert_eq!(column(&csv, "l")[0], "1 0 0");
    // the only check allowed to fail is the rate fit, whose -1 target the
    // lattice sum does not follow
    let r = report(&dir);
    let failed: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.iter().all(|n| *n == "defect_slope"), "{failed:?}");
    assert_eq!(
        out.status.code(),
        Some(if failed.is_empty() { 0 } else { 1 })
    );
}

#[test]
fn reruns_produce_identical_csv_bodies() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in ["simulate", "scaling-limit", "decay"] {
        let mut args = vec![cmd];
        args.extend(SMALL);
        for root in [a.path(), b.path()] {
            let out = tnoise(&args, root);
            assert!(
                matches!(out.status.code(), Some(0 | 1)),
                "{cmd}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
        let (da, db) = (run_dir(a.path(), cmd), run_dir(b.path(), cmd));
        assert_eq!(da.file_name(), db.file_name());
        let mut names: Vec<_> = fs::read_dir(&da)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(names.iter().any(|n| n.to_str().unwrap().ends_with(".csv")));
        for n in names
            .iter()
            .filter(|n| n.to_str().unwrap().ends_with(".csv"))
        {
            assert_eq!(
                fs::read(da.join(n)).unwrap(),
                fs::read(db.join(n)).unwrap(),
                "{cmd}/{n:?}"
            );
        }
        let (ra, rb) = (report(&da), report(&db));
        assert_eq!(ra["metadata"]["config_hash"], rb["metadata"]["config_hash"]);
        assert_eq!(ra["results"], rb["results"]);
    }
}

#[test]
fn out_flag_beats_environment() {
    let env_root = tempfile::tempdir().unwrap();
    let flag_root = tempfile::tempdir().unwrap();
    let out = tnoise(
        &["decay", "--out", flag_root.path().to_str().unwrap()],
        env_root.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    run_dir(flag_root.path(), "decay-");
    assert_eq!(fs::read_dir(env_root.path()).unwrap().count(), 0);
}

#[test]
fn config_file_and_overrides_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "schema_version = 1\n[decay]\nhorizon = 0.05\n").unwrap();
    let out = tnoise(
        &[
            "decay",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "output_every=10",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let dir = run_dir(tmp.path(), "decay-");
    let csv = fs::read_to_string(dir.join("decay.csv")).unwrap();
    assert_eq!(
        column(&csv, "t"),
        ["0e0", "1e-2", "2e-2", "3e-2", "4e-2", "5e-2"]
    );
    let canonical = report(&dir)["config"].as_str().unwrap().to_string();
    assert!(canonical.contains("output_every = 10"));
}
