use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn leadsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leadsel"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn leadsel")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn write_graph(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const P3: &str = "n 3\n0 0\n1 0\n2 0\n0 1 1\n1 2 1\n";
const P4: &str = "n 4\n0 0\n1 0\n2 0\n3 0\n0 1 1\n1 2 1\n2 3 1\n";

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no '{key}' in:\n{text}"))
}

#[test]
fn generate_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("g.txt");
    let out = leadsel(&[
        "generate",
        "--n",
        "12",
        "--side",
        "10",
        "--radius",
        "5",
        "--wmax",
        "50",
        "--seed",
        "7",
        "--connected",
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("connected=true"));
    assert_eq!(
        fs::read_to_string(&out_path).unwrap(),
        fs::read_to_string(golden("n12_seed7.txt")).unwrap()
    );
}

#[test]
fn generate_full_scale_writes_one_line_per_agent() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.txt");
    let out = leadsel(&[
        "generate",
        "--n",
        "100",
        "--side",
        "10",
        "--radius",
        "3",
        "--wmax",
        "50",
        "--seed",
        "7",
        "-o",
        p.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&p).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "n 100");
    assert!(lines[1..=100].iter().all(|l| l.split_whitespace().count() == 2));
    assert!(lines[101..].iter().all(|l| l.split_whitespace().count() == 3));
}

#[test]
fn generate_is_deterministic_on_stdout() {
    let a = leadsel(&["generate", "--n", "20", "--seed", "3"]);
    let b = leadsel(&["generate", "--n", "20", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("n 20\n"));
}

#[test]
fn generate_trivial_graphs() {
    let single = leadsel(&["generate", "--n", "1", "--seed", "1"]);
    assert!(single.status.success());
    assert_eq!(stdout(&single).lines().count(), 2);
    assert!(stderr(&single).contains("0 edges"));

    let edgeless = leadsel(&["generate", "--n", "5", "--radius", "0", "--seed", "1"]);
    assert!(edgeless.status.success());
    assert_eq!(stdout(&edgeless).lines().count(), 6);
    assert!(stderr(&edgeless).contains("connected=false"));
}

#[test]
fn select_matches_golden_rows() {
    let graph = golden("n12_seed7.txt");
    let expected = fs::read_to_string(golden("select_k3_seed5.csv")).unwrap();
    let mut got = String::new();
    for algo in [
        "greedy",
        "random",
        "max-degree",
        "average-degree",
        "kmeans",
        "huge-random",
    ] {
        let out = leadsel(&[
            "select",
            "--graph",
            graph.to_str().unwrap(),
            "--algo",
            algo,
            "--k",
            "3",
            "--seed",
            "5",
            "--samples",
            "100",
        ]);
        assert!(out.status.success(), "{algo}: {}", stderr(&out));
        got.push_str(&stdout(&out));
    }
    assert_eq!(got, expected);
}

#[test]
fn select_on_small_paths() {
    let dir = tempfile::tempdir().unwrap();
    let p3 = write_graph(dir.path(), "p3.txt", P3);
    let p4 = write_graph(dir.path(), "p4.txt", P4);

    let out = leadsel(&["select", "--graph", &p3, "--algo", "greedy", "--k", "1"]);
    assert_eq!(stdout(&out), "greedy,1,1,1.0\n");

    let out = leadsel(&[
        "select",
        "--graph",
        &p4,
        "--algo",
        "huge-random",
        "--k",
        "1",
        "--samples",
        "10",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim().split(',').nth(2), Some("1"));

    let out = leadsel(&["select", "--graph", &p4, "--algo", "kmeans", "--k", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim().split(',').nth(2), Some("0;1;2;3"));
}

#[test]
fn unknown_algorithm_exits_2_with_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let p3 = write_graph(dir.path(), "p3.txt", P3);
    let out = leadsel(&["select", "--graph", &p3, "--algo", "pagerank", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for name in [
        "greedy",
        "random",
        "max-degree",
        "average-degree",
        "kmeans",
        "huge-random",
    ] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn parameter_and_io_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_k = leadsel(&["generate", "--n", "0"]);
    assert_eq!(bad_k.status.code(), Some(2));

    let unwritable = dir.path().join("missing/dir/g.txt");
    let out = leadsel(&["generate", "--n", "3", "-o", unwritable.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let out = leadsel(&[
        "rate",
        "--graph",
        dir.path().join("nope.txt").to_str().unwrap(),
        "--leaders",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));

    let out = leadsel(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rate_prints_lambda_min() {
    let dir = tempfile::tempdir().unwrap();
    let p3 = write_graph(dir.path(), "p3.txt", P3);
    let out = leadsel(&["rate", "--graph", &p3, "--leaders", "0,2"]);
    let rate: f64 = stdout(&out).trim().parse().unwrap();
    assert!((rate - 2.0).abs() < 1e-10);
}

#[test]
fn simulate_path_matches_analytic_time() {
    let dir = tempfile::tempdir().unwrap();
    // Follower starts on a leader 10 cm from the other one.
    let g = write_graph(dir.path(), "p3.txt", "n 3\n0 0\n0 0\n0.1 0\n0 1 1\n1 2 1\n");
    let out = leadsel(&["simulate", "--graph", &g, "--leaders", "0,2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(field(&text, "status"), "converged");
    let t_e: f64 = field(&text, "t_e").parse().unwrap();
    let analytic = 0.5 * (5.0f64 / 5e-8).ln();
    assert!((t_e - analytic).abs() / analytic < 0.02, "{t_e} vs {analytic}");
}

#[test]
fn simulate_zero_deviation_start() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "p3.txt", "n 3\n0 0\n0.5 0\n1 0\n0 1 1\n1 2 1\n");
    let out = leadsel(&["simulate", "--graph", &g, "--leaders", "0,2"]);
    let text = stdout(&out);
    assert_eq!(field(&text, "t_e"), "0.0");
    assert_eq!(field(&text, "steps"), "0");
}

#[test]
fn simulate_budget_exhaustion_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "p3.txt", P3);
    let out = leadsel(&["simulate", "--graph", &g, "--leaders", "0", "--max-steps", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(field(&stdout(&out), "status"), "max-iterations");
}

#[test]
fn capped_simulation_is_no_faster() {
    let dir = tempfile::tempdir().unwrap();
    // Followers several meters from their targets, so the cap binds.
    let g = write_graph(
        dir.path(),
        "spread.txt",
        "n 5\n0 0\n9 9\n0 9\n9 0\n4 4\n0 4 3\n1 4 3\n2 4 3\n3 4 3\n0 2 2\n",
    );
    let free = leadsel(&["simulate", "--graph", &g, "--leaders", "0,1"]);
    let capped = leadsel(&["simulate", "--graph", &g, "--leaders", "0,1", "--vmax", "15.4"]);
    assert!(capped.status.success(), "{}", stderr(&capped));
    let t_free: f64 = field(&stdout(&free), "t_e").parse().unwrap();
    let t_cap: f64 = field(&stdout(&capped), "t_e").parse().unwrap();
    assert!(t_cap >= t_free, "{t_cap} < {t_free}");
    let speed: f64 = field(&stdout(&capped), "max_applied_speed").parse().unwrap();
    assert!(speed <= 15.4 + 1e-12);
}

#[test]
fn simulate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "p3.txt", P3);
    let traj = dir.path().join("traj.csv");
    let out = leadsel(&[
        "simulate",
        "--graph",
        &g,
        "--leaders",
        "0",
        "--max-steps",
        "4",
        "--trajectory",
        traj.to_str().unwrap(),
        "--trajectory-stride",
        "2",
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&traj).unwrap();
    assert_eq!(text.lines().next(), Some("step,t,agent,axis,value"));
    // Steps 0, 2, 4; three agents; two axes.
    assert_eq!(text.lines().count(), 1 + 3 * 3 * 2);
}

#[test]
fn sweep_single_algorithm_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = leadsel(&[
        "sweep",
        "--preset",
        "desk",
        "--n",
        "12",
        "--radius",
        "5",
        "--k",
        "1..2",
        "--repeats",
        "2",
        "--algorithms",
        "kmeans",
        "--max-steps",
        "200000",
        "--jobs",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("kmeans"));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.starts_with("kmeans,")));
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
    for fig in ["time", "rate", "range"] {
        assert!(out_dir.join(format!("plots/{fig}_kmeans_free.dat")).exists());
    }
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_graph(dir.path(), "leadsel.conf", "seed = 3\n[generate]\nn = 6\nradius = 0\n");
    let from_file = leadsel(&["--config", &cfg, "generate"]);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    assert!(stdout(&from_file).starts_with("n 6\n"));
    assert_eq!(
        from_file.stdout,
        leadsel(&["generate", "--n", "6", "--radius", "0", "--seed", "3"]).stdout
    );

    let overridden = leadsel(&["--config", &cfg, "generate", "--n", "4"]);
    assert!(stdout(&overridden).starts_with("n 4\n"));

    let missing = leadsel(&["--config", dir.path().join("none.conf").to_str().unwrap(), "generate"]);
    assert_eq!(missing.status.code(), Some(3));
}
