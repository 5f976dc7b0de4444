use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use polsr::scenarios::DlrSeries;
use tempfile::TempDir;

fn polsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polsr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--output-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    polsr(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn run_writes_average_and_summary() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run_into(
        &out,
        &[
            "--scenario",
            "two_relay",
            "--algorithm",
            "predictive_olsr",
            "--runs",
            "3",
            "--seed",
            "7",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        listing(&out),
        [
            "dlr_avg.csv",
            "dlr_seed7.csv",
            "dlr_seed8.csv",
            "dlr_seed9.csv",
            "summary.txt"
        ]
    );
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    for line in [
        "scenario = two_relay",
        "algorithm = predictive_olsr",
        "seed = 7",
        "runs = 3",
        "alpha = 0.05",
        "beta = 0.2",
        "gamma = 0.04",
        "hello_interval = 0.5",
    ] {
        assert!(
            summary.lines().any(|l| l == line),
            "missing {line:?} in\n{summary}"
        );
    }
    assert!(summary.lines().any(|l| l.starts_with("outage_percent = ")));
}

#[test]
fn out_of_range_alpha_is_rejected_before_running() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run_into(&out, &["--alpha", "1.5", "--runs", "1"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("alpha") && err.contains("[0, 1]"), "{err}");
    assert!(!out.exists(), "no outputs left behind");
}

#[test]
fn bad_trace_file_leaves_no_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let trace = tmp.path().join("trace.csv");
    fs::write(&trace, "not a trace\n").unwrap();
    let scenario = format!("file:{}", trace.display());
    let o = run_into(&out, &["--scenario", &scenario, "--runs", "1"]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn same_spec_twice_gives_identical_files() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = [
        "--algorithm",
        "olsr_etx",
        "--runs",
        "2",
        "--seed",
        "3",
        "--emit-event-log",
    ];
    assert!(run_into(&a, &args).status.success());
    assert!(run_into(&b, &args).status.success());
    let names = listing(&a);
    assert_eq!(names, listing(&b));
    assert!(names.contains(&"events_seed4.csv".to_string()));
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn dlr_csvs_parse_back_losslessly() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert!(run_into(&out, &["--algorithm", "olsr_etx", "--runs", "2"])
        .status
        .success());
    for name in ["dlr_seed1.csv", "dlr_seed2.csv", "dlr_avg.csv"] {
        let text = fs::read(out.join(name)).unwrap();
        let series = DlrSeries::read_csv(text.as_slice()).unwrap();
        assert_eq!(series.windows.len(), 160);
        let mut again = Vec::new();
        series.write_csv(&mut again).unwrap();
        assert_eq!(again, text, "{name}");
    }
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.conf");
    let out = tmp.path().join("out");
    fs::write(
        &cfg,
        format!(
            "# baseline\nalgorithm = olsr_etx\nruns = 1\nseed = 5\nalpha = 0.3\noutput_dir = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = polsr(&["run", "--config", cfg.to_str().unwrap(), "--alpha", "0.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("alpha = 0.25\n"));
    assert!(summary.contains("seed = 5\n"));

    fs::write(&cfg, "alpah = 0.3\n").unwrap();
    let o = polsr(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown key"), "{}", stderr(&o));
}

#[test]
fn compare_reports_both_algorithms_and_ratio() {
    let o = polsr(&["compare", "olsr_etx", "predictive_olsr", "--runs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(
        text.contains("a: olsr_etx") && text.contains("b: predictive_olsr"),
        "{text}"
    );
    for metric in ["outage_percent", "mean_dlr", "max_dlr"] {
        assert!(text.lines().any(|l| l.starts_with(metric)), "{text}");
    }
}

#[test]
fn compare_against_itself_gives_unit_ratio() {
    let o = polsr(&[
        "compare", "olsr_etx", "olsr_etx", "--runs", "2", "--seed", "11",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row.split_whitespace().last(), Some("1.0000"), "{row}");
    }
}

#[test]
fn compare_rejects_mismatched_scenarios() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a.conf");
    let b = tmp.path().join("b.conf");
    fs::write(&a, "scenario = two_relay\nalgorithm = olsr_etx\n").unwrap();
    fs::write(&b, "scenario = open_area\nalgorithm = predictive_olsr\n").unwrap();
    let o = polsr(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(
        stderr(&o).contains("mismatched scenarios"),
        "{}",
        stderr(&o)
    );

    fs::write(&b, "scenario = two_relay\nseed = 9\n").unwrap();
    let o = polsr(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(
        stderr(&o).contains("mismatched replications"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn help_lists_every_flag() {
    let o = polsr(&["run", "--help"]);
    let help = String::from_utf8(o.stdout).unwrap();
    for flag in [
        "--config",
        "--scenario",
        "--algorithm",
        "--runs",
        "--seed",
        "--alpha",
        "--beta",
        "--gamma",
        "--hello-interval",
        "--tc-interval",
        "--d50",
        "--steepness",
        "--output-dir",
        "--emit-event-log",
    ] {
        assert!(help.contains(flag), "{flag} missing from\n{help}");
    }
}

#[test]
fn trace_file_scenario_runs() {
    let tmp = TempDir::new().unwrap();
    let trace = tmp.path().join("trace.csv");
    let out = tmp.path().join("out");
    fs::write(
        &trace,
        "time_ms,node,x_m,y_m,z_m\n0,1,0,0,0\n0,2,100,0,0\n40000,2,300,0,0\n0,3,200,0,0\n",
    )
    .unwrap();
    let scenario = format!("file:{}", trace.display());
    let o = run_into(&out, &["--scenario", &scenario, "--runs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let avg = DlrSeries::read_csv(fs::read(out.join("dlr_avg.csv")).unwrap().as_slice()).unwrap();
    assert_eq!(avg.windows.len(), 10);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(
        summary.starts_with(&format!("scenario = {scenario}\n")),
        "{summary}"
    );
}
