use std::fs;
use std::path::Path;

use ehgo_cli::commands::{fig1_tables, validation_checks, write_fig1, FIG1_FILES};
use ehgo_cli::{echo_config, parse_config, read_csv, run_command, RunManifest};
use ehgo_core::SimConfig;
use proptest::prelude::*;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["ehgo"];
    argv.extend_from_slice(args);
    run_command(argv)
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SHORT: &str = "t_final = 2\n";

#[test]
fn simulate_writes_trajectory_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "short.cfg", SHORT);
    let out = dir.path().join("run");
    assert_eq!(
        run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]),
        0
    );

    let (header, rows) = read_csv(&out.join("trajectory.csv")).unwrap();
    assert_eq!(header[..3], ["t", "eta", "xi"]);
    assert_eq!(rows[0][..3], [0.0, 0.5, 0.9]);
    assert_eq!(rows.len(), 2001);

    let manifest =
        RunManifest::parse(&fs::read_to_string(out.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(manifest.command, "simulate");
    assert_eq!(manifest.outputs.len(), 2);
    for p in &manifest.outputs {
        assert!(p.exists(), "{}", p.display());
    }
    let listed: Vec<_> = manifest
        .outputs
        .iter()
        .map(|p| p.file_name().unwrap().to_owned())
        .collect();
    let mut present: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    present.sort();
    let mut listed_sorted = listed.clone();
    listed_sorted.sort();
    assert_eq!(present, listed_sorted);
    assert_eq!(manifest.config, parse_config(SHORT).unwrap());
}

#[test]
fn rerunning_a_manifest_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "short.cfg", SHORT);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        run(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()]),
        0
    );
    let manifest = a.join("manifest.txt");
    assert_eq!(
        run(&[
            "simulate",
            "--config",
            manifest.to_str().unwrap(),
            "--out",
            b.to_str().unwrap()
        ]),
        0
    );
    assert_eq!(
        fs::read(a.join("trajectory.csv")).unwrap(),
        fs::read(b.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn simulate_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "short.cfg", SHORT);
    let out = dir.path().join("red");
    assert_eq!(
        run(&[
            "simulate",
            "--config",
            &cfg,
            "--mode",
            "reduced",
            "--no-saturation",
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let manifest =
        RunManifest::parse(&fs::read_to_string(out.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(manifest.config.mode, ehgo_core::Mode::Reduced);
    assert!(!manifest.config.saturation_enabled);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--seedless"]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&[]), 2);
    assert_eq!(run(&["simulate", "--mode", "fast"]), 2);
    assert_eq!(run(&["simulate", "--config", "/nonexistent/x.cfg"]), 2);
    let bad = write_config(dir.path(), "bad.cfg", "alpha = [-1, 1]\n");
    assert_eq!(run(&["validate", "--config", &bad]), 2);
    let unknown = write_config(dir.path(), "unknown.cfg", "gain = 1\n");
    assert_eq!(run(&["simulate", "--config", &unknown]), 2);
    assert_eq!(run(&["sweep", "--epsilons", "0.001,0.01"]), 2);
    assert_eq!(run(&["sweep", "--epsilons", "0.01,abc"]), 2);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn validate_passes_on_example_and_fails_on_fault() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.cfg", "");
    assert_eq!(run(&["validate", "--config", &good]), 0);
    let bad = write_config(dir.path(), "bad.cfg", "system = example-bad-phi1\n");
    assert_eq!(run(&["validate", "--config", &bad]), 1);

    let checks = validation_checks(&parse_config("system = example-bad-phi1\n").unwrap()).unwrap();
    let failed: Vec<_> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    assert_eq!(failed, ["phi1"]);
}

#[test]
fn sweep_report_has_one_row_per_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "t_final = 5\n");
    let out = dir.path().join("sweep");
    assert_eq!(
        run(&[
            "sweep",
            "--config",
            &cfg,
            "--epsilons",
            "0.01,0.005,0.001",
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let (header, rows) = read_csv(&out.join("report.csv")).unwrap();
    assert_eq!(header[0], "epsilon");
    assert_eq!(rows.len(), 3);
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        [0.01, 0.005, 0.001]
    );
    assert!(rows[1][1] < rows[0][1] && rows[2][1] < rows[1][1]);
}

#[test]
fn fig1_emits_exactly_five_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "t_final = 1\n");
    let out = dir.path().join("fig");
    assert_eq!(
        run(&[
            "reproduce-fig1",
            "--config",
            &cfg,
            "--epsilons",
            "0.01,0.002",
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let mut present: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    present.sort();
    assert_eq!(present, FIG1_FILES);

    let (header, rows) = read_csv(&out.join("fig1a_output.csv")).unwrap();
    assert_eq!(header, ["t", "reduced", "eps_0.01", "eps_0.002"]);
    assert_eq!(rows.len(), 1001);
    assert!(rows[0][1..].iter().all(|y| *y == 0.9));
    let (_, p) = read_csv(&out.join("fig1c_riccati.csv")).unwrap();
    assert!(p[0][1..].iter().all(|v| *v == 0.1));

    // no staging directories left behind
    let siblings: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with('.'))
        .collect();
    assert!(siblings.is_empty(), "{siblings:?}");

    // a second run refuses to mix into the populated directory
    assert_eq!(
        run(&[
            "reproduce-fig1",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap()
        ]),
        2
    );
    assert_eq!(fs::read_dir(&out).unwrap().count(), 5);
}

#[test]
fn fig1_failure_leaves_no_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config("t_final = 1\n").unwrap();
    let tables = fig1_tables(&cfg, &[0.01]).unwrap();
    // a regular file where the parent directory should be
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("fig");
    assert!(write_fig1(&tables, &out).is_err());
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);

    let ok = dir.path().join("empty");
    fs::create_dir(&ok).unwrap();
    write_fig1(&tables, &ok).unwrap();
    assert_eq!(fs::read_dir(&ok).unwrap().count(), 5);
}

#[test]
fn simulation_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // a step far outside RK4's stability region breaks the Riccati solution
    let cfg = write_config(
        dir.path(),
        "coarse.cfg",
        "mode = reduced\nstep = 2\nt_final = 400\n",
    );
    let out = dir.path().join("run");
    assert_eq!(
        run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]),
        1
    );
    assert!(!out.exists());
}

fn arb_config() -> impl Strategy<Value = SimConfig> {
    (
        1e-3..0.05f64,
        (0.5..10.0f64, 0.1..5.0f64),
        (0.1..5.0f64, 0.5..50.0f64, 0.01..2.0f64),
        (0.5..5.0f64, 1.0..20.0f64),
        (
            -1.0..1.0f64,
            -1.0..1.0f64,
            -1.0..1.0f64,
            -1.0..1.0f64,
            -5.0..5.0f64,
        ),
        any::<(bool, bool)>(),
        (0.1..30.0f64, 1usize..50),
    )
        .prop_map(
            |(eps, (a1, a2), (q, r, p0), (m_xi, m_sigma), ic, (sat, ysub), (t, stride))| {
                let text = format!(
                    "epsilon = {eps}\nalpha = [{a1}, {a2}]\nQ = {q}\nR = {r}\nP0 = {p0}\n\
                 M_xi = {m_xi}\nM_sigma = {m_sigma}\nsaturation = {sat}\ny_substitution = {ysub}\n\
                 t_final = {t}\nrecord_stride = {stride}\neta0 = {}\nxi0 = {}\neta_hat0 = {}\n\
                 xi_hat0 = {}\nsigma_hat0 = {}\n",
                    ic.0, ic.1, ic.2, ic.3, ic.4
                );
                parse_config(&text).unwrap()
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_echo_round_trips(cfg in arb_config()) {
        let echo = echo_config(&cfg);
        let back = parse_config(&echo).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(echo_config(&back), echo);
    }
}
