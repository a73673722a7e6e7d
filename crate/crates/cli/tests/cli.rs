use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use tempfile::TempDir;

fn curvlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvlab"))
        .args(args)
        .env("CURVLAB_OUT", out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value_after(text: &str, key: &str) -> f64 {
    let start = text.find(key).unwrap_or_else(|| panic!("{key} missing in {text}")) + key.len();
    text[start..].split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn verify_elliptic_ball_extracts_the_curvature_limit() {
    let dir = TempDir::new().unwrap();
    let o = curvlab(
        &["verify-elliptic", "--shape", "ball", "--dim", "3", "--radius", "1", "--sigma-plus", "1", "--sigma-minus", "4", "--lambda-ladder", "1e2:1e6:10x"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let limit = value_after(&stdout(&o), "lambda_limit = ");
    assert!((limit + 2.0 / 3.0).abs() < 2.0 / 3.0 * 5e-3, "{limit}");
    let csv = fs::read_to_string(dir.path().join("lambda_functional.csv")).unwrap();
    assert!(csv.starts_with("# shape=ball(N=3;R=1) sigma_plus=1 sigma_minus=4\nparameter,value,extrapolant,error\n100,"));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("result = PASS"));
}

#[test]
fn karamata_sqrt_t_ratio_is_gamma_five_halves() {
    let dir = TempDir::new().unwrap();
    let o = curvlab(&["karamata-check", "--measure", "sqrt_t", "--alpha", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ratio = value_after(&stdout(&o), "ratio=");
    assert!((ratio - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-3, "{ratio}");
}

#[test]
fn invalid_values_exit_two() {
    let dir = TempDir::new().unwrap();
    let o = curvlab(&["verify-elliptic", "--sigma-plus", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--sigma-plus"), "{}", stderr(&o));
    assert_eq!(curvlab(&["verify-elliptic", "--no-such-flag", "1"], dir.path()).status.code(), Some(2));
    assert_eq!(curvlab(&["karamata-check"], dir.path()).status.code(), Some(2));
    assert_eq!(curvlab(&["ellipse-scan", "--shape", "ball"], dir.path()).status.code(), Some(2));
    assert_eq!(curvlab(&["run", "--config", "/nonexistent/run.conf"], dir.path()).status.code(), Some(2));
}

#[test]
fn config_file_defaults_are_echoed() {
    let dir = TempDir::new().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# minimal\nmode = verify-elliptic\n").unwrap();
    let o = curvlab(&["run", "--config", conf.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    for line in ["config shape = ball", "config sigma-minus = 4", "config lambda-ladder = 1e2:1e6:10x", "config tolerance = 0.005"] {
        assert!(summary.contains(line), "{line} missing:\n{summary}");
    }
}

#[test]
fn duplicate_key_and_missing_mode_are_reported() {
    let dir = TempDir::new().unwrap();
    let conf = dir.path().join("dup.conf");
    fs::write(&conf, "mode = verify-elliptic\nsigma-plus = 1\n\nsigma-plus = 2\n").unwrap();
    let o = curvlab(&["run", "--config", conf.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 4") && err.contains("duplicate key `sigma-plus`") && err.contains("line 2"), "{err}");

    fs::write(&conf, "shape = ball\n").unwrap();
    let o = curvlab(&["run", "--config", conf.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mode"));
}

#[test]
fn flags_override_the_file_and_the_environment() {
    let dir = TempDir::new().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "mode = verify-elliptic\nsigma-minus = 1\nout = ignored\n").unwrap();
    let flag_out = dir.path().join("flag");
    let o = curvlab(
        &["run", "--config", conf.to_str().unwrap(), "--sigma-minus", "9", "--out", flag_out.to_str().unwrap()],
        &dir.path().join("env"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = fs::read_to_string(flag_out.join("summary.txt")).unwrap();
    assert!(summary.contains("config sigma-minus = 9"));
    assert!(!dir.path().join("env").exists());
    // CURVLAB_OUT beats the file
    let o = curvlab(&["run", "--config", conf.to_str().unwrap()], &dir.path().join("env"));
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("env/summary.txt").exists());
}

#[test]
fn outputs_are_deterministic_and_summary_appends() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["barrier-audit", "--lambda-ladder", "1e2,1e3,1e4"];
    assert_eq!(curvlab(&args, &a).status.code(), Some(0));
    assert_eq!(curvlab(&args, &b).status.code(), Some(0));
    assert_eq!(fs::read(a.join("barrier.csv")).unwrap(), fs::read(b.join("barrier.csv")).unwrap());
    let summary = |p: &Path| {
        let s = fs::read_to_string(p.join("summary.txt")).unwrap();
        s.lines().filter(|l| !l.starts_with("config out =")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(summary(&a), summary(&b));
    let csv = fs::read_to_string(a.join("barrier.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("lemma4.1,0,") && l.contains(",false,")), "{csv}");

    assert_eq!(curvlab(&args, &a).status.code(), Some(0));
    let summary = fs::read_to_string(a.join("summary.txt")).unwrap();
    assert_eq!(summary.matches("== curvlab barrier-audit").count(), 2);
}

#[test]
fn sweep_output_does_not_depend_on_threads() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(curvlab(&["sweep", "--threads", "1"], &a).status.code(), Some(0));
    assert_eq!(curvlab(&["sweep", "--threads", "3"], &b).status.code(), Some(0));
    let mut runs = 0;
    for entry in fs::read_dir(&a).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            let name = path.file_name().unwrap();
            let f = "lambda_functional.csv";
            assert_eq!(fs::read(path.join(f)).unwrap(), fs::read(b.join(name).join(f)).unwrap());
            runs += 1;
        }
    }
    assert_eq!(runs, 6);
    // the config hash ignores threads and out
    let hash = |p: &Path| {
        let s = fs::read_to_string(p.join("summary.txt")).unwrap();
        s.lines().find(|l| l.starts_with("config_sha256")).unwrap().to_string()
    };
    assert_eq!(hash(&a), hash(&b));
}

#[test]
fn numeric_failure_exits_three() {
    let dir = TempDir::new().unwrap();
    // three output times leave too few samples above 10 t0
    let o = curvlab(&["karamata-check", "--measure", "t", "--time-ratio", "100"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("numeric failure"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // exit 1 exactly when the reported error exceeds the requested tolerance
    #[test]
    fn exit_code_follows_the_tolerance(exp in -11.0f64..-1.0) {
        let dir = TempDir::new().unwrap();
        let tol = format!("{}", 10f64.powf(exp));
        let o = curvlab(&["verify-elliptic", "--tolerance", &tol], dir.path());
        let out = stdout(&o);
        let err = value_after(&out, "abs_err=");
        let passed = err <= tol.parse::<f64>().unwrap() * 2.0 / 3.0;
        prop_assert_eq!(o.status.code(), Some(if passed { 0 } else { 1 }));
    }

    #[test]
    fn non_positive_numbers_exit_two(
        key in prop::sample::select(vec!["--sigma-plus", "--sigma-minus", "--radius", "--tolerance", "--time-ratio", "--alpha"]),
        value in prop::sample::select(vec!["0", "-1", "-1e-3", "nan", "inf", "abc"]),
    ) {
        let dir = TempDir::new().unwrap();
        let o = curvlab(&["verify-elliptic", key, value], dir.path());
        prop_assert_eq!(o.status.code(), Some(2));
        prop_assert!(stderr(&o).contains(key), "{}", stderr(&o));
    }
}
