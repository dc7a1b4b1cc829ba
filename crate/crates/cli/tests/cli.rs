use std::process::{Command, Output};

fn run(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hill-delta"))
        .args(args)
        .env("HILL_DELTA_THREADS", threads)
        .output()
        .expect("run hill-delta")
}

const SMALL_FIG1: &[&str] = &["fig1", "--points", "3", "--cycles", "2000", "--trials", "2"];

#[test]
fn same_bytes_for_any_thread_count() {
    let a = run(SMALL_FIG1, "1");
    let b = run(SMALL_FIG1, "3");
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("# generator=hill-delta"));
    assert!(text.contains("# summary slope_diff21="));
    assert!(!text.contains("thread"));
}

#[test]
fn writes_csv_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fig1.csv");
    let plot = dir.path().join("fig1.gp");
    let mut args = SMALL_FIG1.to_vec();
    let (c, p) = (csv.to_str().unwrap(), plot.to_str().unwrap());
    args.extend(["--out", c, "--plot-script", p]);
    let out = run(&args, "2");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let table = hill_delta::SweepTable::read_path(&csv).unwrap();
    assert_eq!(table.floats("q0").unwrap().len(), 3);
    let script = std::fs::read_to_string(&plot).unwrap();
    assert!(script.contains("set logscale x"));
    assert!(script.contains("using 1:10"), "{script}");
}

#[test]
fn exit_codes() {
    // Unknown flag and malformed number: usage errors.
    assert_eq!(run(&["fig1", "--bogus"], "1").status.code(), Some(2));
    assert_eq!(run(&["fig1", "--af", "half"], "1").status.code(), Some(2));
    // Resonant af and a range under two decades: bad arguments.
    let r = run(&["fig1", "--af", "1", "--cycles", "2000"], "1");
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("resonan"));
    assert_eq!(run(&["fig1", "--q0-min", "32", "--q0-max", "64"], "1").status.code(), Some(2));
    assert_eq!(run(&["bands", "--threads", "0"], "1").status.code(), Some(2));
    // Unwritable output: runtime failure.
    let r = run(&["bands", "--out", "/nonexistent-dir/x.csv"], "1");
    assert_eq!(r.status.code(), Some(3));
    assert!(!r.stderr.is_empty());
}

#[test]
fn bands_widths_do_not_depend_on_n() {
    let out = run(&["bands", "--q0", "0.1"], "1");
    let t = hill_delta::SweepTable::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let w = t.floats("width").unwrap();
    assert_eq!(w.len(), 3);
    assert!(w.iter().all(|&v| (v - 0.1 / std::f64::consts::PI).abs() < 1e-15));
}
