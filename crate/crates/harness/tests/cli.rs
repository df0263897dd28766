use std::fs;
use std::path::Path;
use std::process::Command;

use dsmooth_harness::{cmd_generate, cmd_rate, cmd_run, cmd_sweep, Config, HarnessError};
use serde_json::Value;

const GAME: &str = "
problem.family = matrix-game
problem.rows = 6
problem.cols = 5
solver.mode = LMO-LMO
solver.regime = C-C
budget.iterations = 300
seed = 3
";

fn cfg(text: &str) -> Config {
    Config::parse(text).unwrap()
}

fn with(text: &str, extra: &str) -> Config {
    cfg(&format!("{text}\n{extra}"))
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn dsmooth(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dsmooth"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn run_writes_identical_traces_for_the_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cmd_run(&cfg(GAME), &a).unwrap();
    cmd_run(&cfg(GAME), &b).unwrap();
    assert_eq!(
        fs::read(a.join("trace.csv")).unwrap(),
        fs::read(b.join("trace.csv")).unwrap()
    );
    let header = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(header.starts_with("iter,wall_ms,tau,beta,gamma,objective,gap_x,gap_y"));
    assert!(a.join("timing.csv").exists());

    let c = dir.path().join("c");
    cmd_run(&with(GAME, "seed = 4"), &c).unwrap();
    assert_ne!(
        fs::read(a.join("trace.csv")).unwrap(),
        fs::read(c.join("trace.csv")).unwrap()
    );
}

#[test]
fn zero_iterations_echo_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(GAME);
    c.set("budget.iterations", 0.into()).unwrap();
    let o = cmd_run(&c, dir.path()).unwrap();
    assert_eq!(o.trace.rows.len(), 1);
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["iterations"], 0);
    assert_eq!(summary["config"]["solver.regime"], "C-C");
    assert_eq!(summary["schedule"]["mode"], "LMO-LMO");
    assert_eq!(summary["seed"], 3);
    let rows = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2);
}

#[test]
fn inline_timing_replaces_the_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    cmd_run(&with(GAME, "trace.timing = true"), dir.path()).unwrap();
    assert!(!dir.path().join("timing.csv").exists());
    let text = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let second = text.lines().nth(1).unwrap();
    assert!(!second.split(',').nth(1).unwrap().is_empty());
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = cfg("problem.family = matrix-game\nsolver.mode = LMO-PO\nbudget.iterations = 5");
    assert!(matches!(
        cmd_run(&missing, dir.path()),
        Err(HarnessError::Config(_))
    ));
    assert!(Config::parse("solver.modee = LMO-PO").is_err());
    let both = with(GAME, "solver.a = 1");
    assert!(matches!(
        cmd_run(&both, dir.path()),
        Err(HarnessError::Config(_))
    ));
    let unsupported = cfg(&GAME.replace("LMO-LMO", "PO-LMO").replace("C-C", "C-C+SCY"));
    assert!(matches!(
        cmd_run(&unsupported, dir.path()),
        Err(HarnessError::Config(_))
    ));
}

#[test]
fn explicit_schedules_and_horizon_variants() {
    let dir = tempfile::tempdir().unwrap();
    let explicit = cfg(&GAME.replace("solver.regime = C-C", "solver.a = 1\nsolver.b = 1/5"));
    let o = cmd_run(&explicit, &dir.path().join("e")).unwrap();
    assert_eq!(o.trace.meta.config.smoothing.b, 0.2);
    assert_eq!(o.trace.meta.config.smoothing.c, 1.0);
    let variant = cfg(&GAME
        .replace(
            "solver.regime = C-C",
            "solver.variant = CG-RPGA\nsolver.horizon = 300",
        )
        .replace("LMO-LMO", "LMO-PO"));
    let o = cmd_run(&variant, &dir.path().join("v")).unwrap();
    let rows = &o.trace.rows;
    assert_eq!(rows[1].tau, rows.last().unwrap().tau);
    assert_eq!(rows[1].tau, Some(300f64.powf(-0.75)));
}

#[test]
fn rate_reads_grid_points_from_one_anytime_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = "
problem.family = quadratic-saddle
solver.mode = LMO-PO
solver.regime = C-SC
rate.from = 10
rate.to = 10000
rate.band = [-1.3, -0.7]
";
    let r = cmd_rate(&cfg(base), &dir.path().join("a")).unwrap();
    assert!(r.pass, "{r:?}");
    assert_eq!(r.grid.first(), Some(&10));
    assert_eq!(r.grid.last(), Some(&10000));
    let stored = json(&dir.path().join("a/rate.json"));
    assert_eq!(stored["slope"].as_f64(), Some(r.slope));

    // a longer run reproduces the earlier grid values exactly
    let longer = cmd_rate(&with(base, "rate.to = 20000"), &dir.path().join("b")).unwrap();
    for (t, v) in r.grid.iter().zip(&r.values) {
        let k = longer.grid.iter().position(|g| g == t).unwrap();
        assert_eq!(longer.values[k], *v, "t = {t}");
    }
}

fn constant_trace(path: &Path) {
    let mut text = String::from("iter,gap_y\n");
    for t in 1..=1000 {
        text.push_str(&format!("{t},0.25\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn rate_negative_control_fails_the_band() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("flat.csv");
    constant_trace(&trace);
    let c = cfg(&format!(
        "rate.input = {:?}\nrate.metric = gap_y\nrate.band = [-0.6, -0.2]",
        trace.display().to_string()
    ));
    let r = cmd_rate(&c, &dir.path().join("r")).unwrap();
    assert!(r.slope.abs() < 1e-12);
    assert!(!r.pass);

    let out = dir.path().join("cli");
    let o = dsmooth(&[
        "rate",
        "--set",
        &format!("rate.input={}", trace.display()),
        "--set",
        "rate.metric=gap_y",
        "--set",
        "rate.band=[-0.6,-0.2]",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let o = dsmooth(&[
        "run",
        "--set",
        "problem.family=matrix-game",
        "--set",
        "budget.iterations=5",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("solver"));
    let o = dsmooth(&["run", "--set", "no.such.key=1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = dsmooth(&[
        "run",
        "--set",
        "problem.family=matrix-game",
        "--set",
        "solver.mode=LMO-LMO",
        "--set",
        "solver.regime=C-C",
        "--set",
        "budget.iterations=20",
        "--seed",
        "5",
        "--out",
        out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(json(&Path::new(out).join("summary.json"))["seed"], 5);
    // output path under a regular file
    let file = dir.path().join("file");
    fs::write(&file, "x").unwrap();
    let o = dsmooth(&["generate", "--out", file.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let o = dsmooth(&["keys"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("solver.regime"));
}

#[test]
fn config_file_with_cli_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("game.cfg");
    fs::write(
        &path,
        format!(
            "# a small game\n{GAME}\noutput.dir = {:?}\n",
            dir.path().join("from-file").display().to_string()
        ),
    )
    .unwrap();
    let o = dsmooth(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--set",
        "budget.iterations=7",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&dir.path().join("from-file/summary.json"));
    assert_eq!(summary["iterations"], 7);
}

#[test]
fn sweep_runs_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let c = with(
        GAME,
        "sweep.solver.mode = [\"LMO-LMO\", \"LMO-PO\"]\nsweep.seed = [1, 2]",
    );
    let cells = cmd_sweep(&c, dir.path(), 2).unwrap();
    assert_eq!(cells.len(), 4);
    assert!(cells.iter().all(|c| c.ok));
    for i in 0..4 {
        assert!(dir.path().join(format!("cell-{i:03}/trace.csv")).exists());
    }
    let index = json(&dir.path().join("index.json"));
    assert_eq!(index["cells"].as_array().unwrap().len(), 4);
    assert_eq!(index["workers"], 2);
    assert_eq!(index["cells"][3]["params"]["solver.mode"], "LMO-PO");
    assert_eq!(index["cells"][3]["params"]["seed"], 2);

    // single cell matches a plain run
    let one = with(GAME, "sweep.seed = [3]");
    cmd_sweep(&one, &dir.path().join("one"), 1).unwrap();
    cmd_run(&cfg(GAME), &dir.path().join("plain")).unwrap();
    assert_eq!(
        fs::read(dir.path().join("one/cell-000/trace.csv")).unwrap(),
        fs::read(dir.path().join("plain/trace.csv")).unwrap()
    );
}

#[test]
fn sweep_records_failed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let c = with(GAME, "sweep.solver.regime = [\"C-C\", \"C-SC\"]");
    let cells = cmd_sweep(&c, dir.path(), 2).unwrap();
    assert!(cells[0].ok);
    assert!(!cells[1].ok);
    assert_eq!(cells[1].exit_code, 2);
    let index = json(&dir.path().join("index.json"));
    assert!(index["cells"][1]["error"].as_str().unwrap().contains("mu"));
}

#[test]
fn sweep_over_step_exponents_gives_distinct_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("
problem.family = quadratic-saddle
solver.mode = LMO-PO
rate.metric = gap_x
rate.from = 10
rate.to = 10000
sweep.command = rate
sweep.solver.a = [0.5, 0.75]
");
    let cells = cmd_sweep(&c, dir.path(), 2).unwrap();
    let slopes: Vec<f64> = cells
        .iter()
        .map(|c| c.result["slope"].as_f64().unwrap())
        .collect();
    assert!((slopes[0] - slopes[1]).abs() > 0.05, "{slopes:?}");
}

#[test]
fn generate_is_deterministic_and_shaped() {
    let dir = tempfile::tempdir().unwrap();
    let desk = "problem.m = 20\nproblem.n = 50\nproblem.p = 10\nproblem.l = 3\nproblem.q = 12\nproblem.n_new = 20";
    let m = cmd_generate(&cfg(desk), &dir.path().join("a")).unwrap();
    cmd_generate(&cfg(desk), &dir.path().join("b")).unwrap();
    assert_eq!(m["files"]["a.mmx"], serde_json::json!([20, 50]));
    assert_eq!(m["files"]["c_tilde.mmx"], serde_json::json!([12, 50]));
    assert_eq!(m["files"]["a_new.mmx"], serde_json::json!([20, 20]));
    for name in ["a.mmx", "a_new.mmx", "c_tilde.mmx", "d0.mmx", "c0.mmx"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(name)).unwrap(),
            fs::read(dir.path().join("b").join(name)).unwrap()
        );
    }
    let full = cmd_generate(&cfg("problem.sizes = full"), &dir.path().join("p")).unwrap();
    assert_eq!(full["files"]["a.mmx"], serde_json::json!([100, 500]));
    assert_eq!(full["files"]["d0.mmx"], serde_json::json!([100, 60]));

    // generated files feed a run exactly like in-process generation
    let run_cfg = |extra: &str| {
        cfg(&format!(
            "problem.family = dictionary-learning\n{desk}\nsolver.mode = LMO-LMO\nsolver.regime = NC-C\n\
             budget.iterations = 50\n{extra}"
        ))
    };
    cmd_run(&run_cfg(""), &dir.path().join("mem")).unwrap();
    let data_dir = format!(
        "problem.data_dir = {:?}",
        dir.path().join("a").display().to_string()
    );
    cmd_run(&run_cfg(&data_dir), &dir.path().join("disk")).unwrap();
    let strip = |p: &Path| fs::read(p.join("trace.csv")).unwrap();
    assert_eq!(
        strip(&dir.path().join("mem")),
        strip(&dir.path().join("disk"))
    );
}
