//! End-to-end runs of the `cvxtau` binary: exit codes, output formats and
//! reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cvxtau::concentration::{verify_corr1, ConvexSet, MonteCarlo, ProductMeasure};
use cvxtau::tau::{certify_tau, tau_constant, SuiteConfig};
use cvxtau::{Execution, Measure1D};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn cvxtau(args: &[&str], cfg: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvxtau"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn records(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is JSON"))
        .collect()
}

#[test]
fn analyze_reports_closed_form_frontier() {
    let out = cvxtau(&["analyze", "--format", "records"], &config("exponential.toml"));
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert!(recs.iter().all(|r| r["schema"] == "cvxtau.report/1" && r["command"] == "analyze"));
    let tails: Vec<_> = recs.iter().filter(|r| r["record"] == "tail_ratio").collect();
    assert!(!tails.is_empty());
    for r in tails {
        let h = r["h"].as_f64().unwrap();
        assert!((r["lambda_star"].as_f64().unwrap() - (-h).exp()).abs() < 1e-9);
    }
}

#[test]
fn table_output_is_tab_delimited() {
    let out = cvxtau(&["analyze", "--quiet"], &config("uniform.toml"));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# tail ratio of uniform"));
    assert!(text.lines().nth(1).unwrap().contains('\t'));
    assert!(out.stderr.is_empty(), "--quiet suppresses the verdict line");
}

#[test]
fn theorem_true_suite_exits_zero() {
    let out = cvxtau(&["tau", "--seed", "3"], &config("uniform.toml"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn negative_control_exits_five_with_witness() {
    let out = cvxtau(&["tau", "--seed", "7", "--format", "records"], &config("negative_control.toml"));
    assert_eq!(out.status.code(), Some(5));
    let recs = records(&out);
    let witness = recs.iter().find(|r| r["record"] == "witness").expect("witness record");
    assert!(witness["margin"].as_f64().unwrap() < 0.0);
    assert!(witness["function"]["pieces"].is_array());
}

#[test]
fn records_are_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for path in [&a, &b] {
        let out = Command::new(env!("CARGO_BIN_EXE_cvxtau"))
            .args(["concentrate", "--seed", "11", "--format", "records", "--quiet", "--out"])
            .arg(path)
            .arg("--config")
            .arg(config("two_level_uniform_ball.toml"))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty(), "--out redirects the report");
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn zero_trials_give_an_empty_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "seed = 1\n[measure]\nkind = \"uniform\"\nr = 1.0\n[tau]\nh = 1.01\ntrials = 0\n");
    let out = cvxtau(&["tau"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(&dir, "[measure]\nkind = \"uniform\"\nr = 1.0\nwidth = 2.0\n");
    assert_eq!(cvxtau(&["analyze"], &unknown).status.code(), Some(2));
    let missing = dir.path().join("absent.toml");
    assert_eq!(cvxtau(&["analyze"], &missing).status.code(), Some(2));
    let no_config = Command::new(env!("CARGO_BIN_EXE_cvxtau")).arg("analyze").output().unwrap();
    assert_eq!(no_config.status.code(), Some(2));
}

#[test]
fn asymmetric_measure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "[measure]\nkind = \"mix\"\natoms = [{ position = -1.0, mass = 0.3 }, { position = 2.0, mass = 0.7 }]\n",
    );
    let out = cvxtau(&["analyze"], &cfg);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_base_set_exits_four() {
    let out = cvxtau(&["concentrate", "--seed", "1"], &config("empty_base.toml"));
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn execution_strategy_does_not_change_results() {
    let mu = Measure1D::exponential(1.0).unwrap();
    let c_tau = tau_constant(1.0, (-1f64).exp());
    let run = |exec| certify_tau(&mu, c_tau, &SuiteConfig { exec, ..SuiteConfig::new(40, 5) });
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));

    let pm = ProductMeasure::iid(Measure1D::uniform(1.0).unwrap(), 4).unwrap();
    let set = ConvexSet::Slab { a: vec![0.5; 4], c: 0.3 };
    let corr1 = |exec| {
        let mc = MonteCarlo { samples: 20_000, seed: 9, exec };
        verify_corr1(&pm, &set, 1.01, 0.0, &[0.5, 2.0], &mc).unwrap()
    };
    assert_eq!(corr1(Execution::Sequential), corr1(Execution::Parallel));
}
