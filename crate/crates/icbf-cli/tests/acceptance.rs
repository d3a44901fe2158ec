//! Release gate for the binary: determinism of `run` end to end.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn run_cli(config: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_icbf-cli"))
        .arg("run")
        .arg(config)
        .output()
        .expect("binary runs")
}

#[test]
fn criterion_11_determinism() {
    let started = Instant::now();
    let base = tempfile::tempdir().unwrap();
    let mut csvs: Vec<Vec<(String, Vec<u8>)>> = vec![];
    for invocation in 0..2 {
        let out_dir = base.path().join(format!("run{invocation}"));
        let config = base.path().join(format!("cfg{invocation}.conf"));
        // default config except for where the files land
        std::fs::write(&config, format!("output_dir={}\n", out_dir.display())).unwrap();
        let output = run_cli(&config);
        assert!(
            output.status.success(),
            "invocation {invocation} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap())
            .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
            .map(|e| {
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        csvs.push(files);
    }
    assert!(!csvs[0].is_empty(), "no CSVs emitted");
    assert_eq!(csvs[0].len(), csvs[1].len());
    for (a, b) in csvs[0].iter().zip(&csvs[1]) {
        assert_eq!(a.0, b.0);
        assert!(a.1 == b.1, "{} differs between invocations", a.0);
    }
    let elapsed = started.elapsed().as_secs_f64();
    let result = if elapsed <= 20.0 {
        format!("PASS — {} byte-identical CSVs across two runs, {elapsed:.2}s", csvs[0].len())
    } else {
        format!("FAIL — runtime {elapsed:.2}s exceeded 20s budget")
    };
    println!("criterion 11 (run determinism): {result}");
    assert!(elapsed <= 20.0, "runtime budget exceeded");
}

#[test]
fn exit_code_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "dt=-1\n").unwrap();
    let output = run_cli(&config);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("dt"));
}

#[test]
fn exit_code_missing_config() {
    let output = run_cli(Path::new("/nonexistent/x.conf"));
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn print_defaults_round_trips_through_run() {
    let output = Command::new(env!("CARGO_BIN_EXE_icbf-cli"))
        .arg("print-defaults")
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("dt=0.001"));
    assert!(text.contains("controller=combined"));

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("defaults.conf");
    // shorten the run; keep everything else verbatim
    let text = text
        .replace("t_end=40", "t_end=1")
        .replace("output_dir=out", &format!("output_dir={}", dir.path().join("out").display()));
    std::fs::write(&config, text).unwrap();
    let output = run_cli(&config);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
}

#[test]
fn selftest_exits_zero() {
    let output = Command::new(env!("CARGO_BIN_EXE_icbf-cli"))
        .args(["selftest", "--seed", "3"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stdout));
    assert!(String::from_utf8_lossy(&output.stdout).contains("selftest passed"));
}
