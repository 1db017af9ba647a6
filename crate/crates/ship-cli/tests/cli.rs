//! End-to-end checks of the `ship` binary: exit codes, output formats, and
//! the build/lookup round trip through real files.

use std::path::Path;
use std::process::{Command, Output};

fn ship(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ship"))
        .args(args)
        .output()
        .expect("spawn ship")
}

fn ship_stdin(args: &[&str], stdin: &str) -> Output {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_ship"))
        .args(args)
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .expect("spawn ship");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const FIXTURE: &str = "# tiny fixture\n2001:db8::/32 7\n2001:db8:a::/48 9\n2400:cb00::/32 3\n";

#[test]
fn build_lookup_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.txt");
    let index = dir.path().join("t.ship");
    write(&table, FIXTURE);

    let out = ship(&[
        "build",
        "--table",
        table.to_str().unwrap(),
        "--out",
        index.to_str().unwrap(),
        "--k",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("bins_m="));
    assert!(stdout.contains("slots_n="));
    assert!(stdout.contains("bounds="));
    assert!(index.exists());

    let out = ship_stdin(
        &["lookup", "--index", index.to_str().unwrap()],
        "2001:db8:a::1\n2001:db8:ffff::1\n9999::1\nnot-an-address\n\n",
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("2001:db8:a::1 48 9 "));
    assert!(lines[1].starts_with("2001:db8:ffff::1 32 7 "));
    assert_eq!(lines[2], "9999::1 MISS");
    // The bad address is reported to stderr without aborting the stream.
    assert!(String::from_utf8_lossy(&out.stderr).contains("not-an-address"));
}

#[test]
fn empty_lookup_input_is_quiet_success() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.txt");
    let index = dir.path().join("t.ship");
    write(&table, FIXTURE);
    assert!(ship(&[
        "build",
        "--table",
        table.to_str().unwrap(),
        "--out",
        index.to_str().unwrap()
    ])
    .status
    .success());
    let out = ship_stdin(&["lookup", "--index", index.to_str().unwrap()], "");
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_table_is_data_error() {
    let out = ship(&["build", "--table", "/nonexistent.txt", "--out", "/tmp/x.ship"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_table_is_data_error_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("bad.txt");
    write(&table, "::/0 1\ngarbage here also\n");
    let out = ship(&[
        "build",
        "--table",
        table.to_str().unwrap(),
        "--out",
        dir.path().join("x.ship").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let out = ship(&["build", "--table", "x", "--out", "y", "--k", "9"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ship(&["build", "--table", "x", "--out", "y", "--node-bits", "100"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ship(&["nope"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ship(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn rebuild_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.txt");
    write(&table, FIXTURE);
    let a = dir.path().join("a.ship");
    let b = dir.path().join("b.ship");
    for out in [&a, &b] {
        assert!(ship(&[
            "build",
            "--table",
            table.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "42"
        ])
        .status
        .success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn stats_table_histogram_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.txt");
    let gen = ship(&[
        "gen",
        "--real-style",
        "3000",
        "--seed",
        "7",
        "--out",
        table.to_str().unwrap(),
    ]);
    assert!(gen.status.success());
    let out = ship(&[
        "stats",
        "--table",
        table.to_str().unwrap(),
        "--histogram",
        "--k",
        "3",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("length,count"));
    // Collector-style tables peak at /32 and /48 and those peaks become
    // group bounds.
    let hist: std::collections::BTreeMap<u32, u64> = stdout
        .lines()
        .filter(|l| !l.starts_with('#') && l.contains(',') && !l.starts_with("length"))
        .filter_map(|l| {
            let (a, b) = l.split_once(',')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        })
        .collect();
    let mut by_count: Vec<_> = hist.iter().collect();
    by_count.sort_by_key(|&(_, c)| std::cmp::Reverse(*c));
    let top2: Vec<u32> = by_count.iter().take(2).map(|&(l, _)| *l).collect();
    assert!(top2.contains(&32) && top2.contains(&48), "{top2:?}");
    assert!(stdout.contains("# bounds (k=3): 32,48,"));
}

#[test]
fn stats_index_matches_build_summary() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.txt");
    let index = dir.path().join("t.ship");
    write(&table, FIXTURE);
    let build = ship(&[
        "build",
        "--table",
        table.to_str().unwrap(),
        "--out",
        index.to_str().unwrap(),
    ]);
    let build_out = String::from_utf8_lossy(&build.stdout).to_string();
    let grab = |key: &str, text: &str| -> String {
        text.lines()
            .find(|l| l.starts_with(key))
            .unwrap_or_else(|| panic!("{key} missing in {text}"))
            .split(['=', ','])
            .nth(1)
            .unwrap()
            .to_string()
    };
    let out = ship(&["stats", "--index", index.to_str().unwrap()]);
    assert!(out.status.success());
    let stats_out = String::from_utf8_lossy(&out.stdout).to_string();
    assert_eq!(grab("total_bytes", &build_out), grab("total_bytes", &stats_out));
    assert_eq!(grab("binning_bytes", &build_out), grab("binning_bytes", &stats_out));
    assert_eq!(grab("htt_bytes", &build_out), grab("htt_bytes", &stats_out));
}

#[test]
fn gen_v4_and_scale() {
    let dir = tempfile::tempdir().unwrap();
    let v4 = dir.path().join("v4.txt");
    write(&v4, "10.0.0.0/16 1\n172.16.0.0/12 2\n192.168.1.0/24 3\n10.0.0.0/16 9\n");
    let v6 = dir.path().join("v6.txt");
    let out = ship(&[
        "gen",
        "--v4",
        v4.to_str().unwrap(),
        "--out",
        v6.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert!(out.status.success());
    // Duplicate v4 line dropped: one-to-one on the deduplicated input.
    assert!(String::from_utf8_lossy(&out.stdout).contains("generated=3"));

    let big = dir.path().join("big.txt");
    assert!(ship(&["gen", "--mixed", "400", "--out", big.to_str().unwrap()])
        .status
        .success());
    let half = dir.path().join("half.txt");
    let out = ship(&[
        "gen",
        "--scale",
        "0.5",
        "--table",
        big.to_str().unwrap(),
        "--out",
        half.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let big_n = std::fs::read_to_string(&big).unwrap().lines().count() as f64;
    let half_n = std::fs::read_to_string(&half).unwrap().lines().count() as f64;
    assert!((half_n - big_n / 2.0).abs() <= 32.0, "{half_n} vs {big_n}");
}

#[test]
fn bench_sweep_writes_report_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = dir.path().join("a.txt");
    let t2 = dir.path().join("b.txt");
    for (t, n, seed) in [(&t1, "400", "3"), (&t2, "800", "4")] {
        assert!(ship(&[
            "gen",
            "--real-style",
            n,
            "--seed",
            seed,
            "--out",
            t.to_str().unwrap()
        ])
        .status
        .success());
    }
    let csv = dir.path().join("report.csv");
    let plots = dir.path().join("plots");
    let out = ship(&[
        "bench",
        "--tables",
        t1.to_str().unwrap(),
        t2.to_str().unwrap(),
        "--k",
        "1..6",
        "--node-bits",
        "512",
        "--seed",
        "9",
        "--sample-addrs",
        "2000",
        "--out",
        csv.to_str().unwrap(),
        "--plot-dir",
        plots.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    // Header plus (baseline + k=1..6) rows per table.
    assert_eq!(text.lines().count(), 1 + 2 * 7);
    assert!(plots.join("accesses_vs_size.svg").exists());
    assert!(plots.join("bytes_vs_size.svg").exists());
}
