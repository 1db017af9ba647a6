//! Measurement harness: per-table, per-group-count sweep with oracle
//! validation, worst-case access measurement through exhaustive leaf
//! witnesses, footprint accounting, and CSV/SVG report emission.
//!
//! No performance number is reported for a configuration that has not first
//! passed oracle validation on its address sample. Worst-case accesses are
//! measured over constructed witnesses (one address per leaf chain, which a
//! lookup reads in full) plus the random sample; sampling alone would
//! understate the worst case.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use ship_core::engine::{build_ship, BuildOptions, ShipIndex};
use ship_core::htt::HttConfig;
use ship_core::prefix::{high_mask, oracle_lpm, PrefixTable, RouteMatch};
use ship_core::rng::SplitMix64;

/// Hash-indexed exact LPM over the original table: the bulk-validation
/// checker. Its own correctness is established against the linear-scan
/// oracle on a subsample before every run.
pub struct FastLpm {
    /// Per length, descending: masked value -> (length, NHI).
    by_len: Vec<(u8, LengthClass)>,
}

type LengthClass = HashMap<u128, (u8, u8)>;

impl FastLpm {
    pub fn new(table: &PrefixTable) -> Self {
        let mut map: std::collections::BTreeMap<u8, HashMap<u128, (u8, u8)>> = Default::default();
        for e in &table.entries {
            map.entry(e.length)
                .or_default()
                .insert(e.value, (e.length, e.nhi));
        }
        let mut by_len: Vec<_> = map.into_iter().collect();
        by_len.reverse();
        Self { by_len }
    }

    pub fn lookup(&self, addr: u128) -> Option<RouteMatch> {
        for (len, entries) in &self.by_len {
            if let Some(&(length, nhi)) = entries.get(&(addr & high_mask(*len))) {
                return Some(RouteMatch {
                    prefix_length: length,
                    nhi,
                });
            }
        }
        None
    }
}

/// One sweep cell: a table built with one group count. `k = 0` labels the
/// no-grouping baseline (a single trie-tree over each bin's full contents).
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub label: String,
    pub size: usize,
    pub k: u8,
    pub worst_total_accesses: u32,
    pub worst_htt_accesses: u32,
    pub binning_bytes: u64,
    pub htt_bytes: u64,
    pub bytes_per_prefix: f64,
    pub bytes_per_prefix_byte: f64,
    pub htt_bytes_per_prefix_byte: f64,
    pub build_ms: f64,
    pub lookups_per_sec: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Group counts to sweep (1..=6 in the full experiment).
    pub ks: Vec<u8>,
    /// Also run the k = 0 "single trie-tree per bin" baseline.
    pub include_baseline: bool,
    pub cfg: HttConfig,
    pub opts: BuildOptions,
    /// Random validation addresses per table (on top of per-prefix and
    /// witness addresses).
    pub sample_addrs: usize,
    /// Linear-oracle cross-checks of the fast validator per table.
    pub oracle_spot_checks: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ks: vec![1, 2, 3, 4, 5, 6],
            include_baseline: true,
            cfg: HttConfig::default(),
            opts: BuildOptions::default(),
            sample_addrs: 100_000,
            oracle_spot_checks: 200,
        }
    }
}

/// Seeded validation sample: uniform addresses plus, for every prefix, its
/// base address, last address, and one random address under it.
pub fn sample_addresses(table: &PrefixTable, count: usize, seed: u64) -> Vec<u128> {
    let mut rng = SplitMix64::new(seed ^ 0xadd2);
    let mut addrs = Vec::with_capacity(count + 3 * table.len());
    for e in &table.entries {
        addrs.push(e.first_addr());
        addrs.push(e.last_addr());
        addrs.push(e.value | (rng.next_u128() & !high_mask(e.length)));
    }
    for _ in 0..count {
        addrs.push(rng.next_u128());
    }
    addrs
}

/// Builds one index and measures it. Aborts with a counterexample if any
/// validation address disagrees with the oracle.
fn measure_cell(
    label: &str,
    table: &PrefixTable,
    k_label: u8,
    k_effective: u8,
    sweep: &SweepConfig,
    checker: &FastLpm,
    addrs: &[u128],
) -> Result<BenchRow> {
    let t0 = Instant::now();
    let index = build_ship(table, k_effective, &sweep.cfg, &sweep.opts)
        .with_context(|| format!("building {label} k={k_label}"))?;
    let build_ms = t0.elapsed().as_secs_f64() * 1e3;

    let witnesses = index.leaf_witnesses();
    let mut seen_heads = std::collections::BTreeSet::new();
    let mut worst_htt = 0u32;
    let mut worst_total = 0u32;
    let validate = |index: &ShipIndex, addr: u128| -> Result<(u32, u32)> {
        let (got, stats) = index.lookup(addr);
        let want = checker.lookup(addr);
        if got != want {
            bail!(
                "oracle mismatch on {label} k={k_label} addr {}: structure {:?}, oracle {:?}",
                crate::format_addr(addr),
                got,
                want
            );
        }
        if stats.hash_accesses != 2 {
            bail!(
                "binning accesses {} != 2 on {label} k={k_label}",
                stats.hash_accesses
            );
        }
        Ok((stats.htt_accesses_max, stats.total()))
    };
    for w in &witnesses {
        let (htt, total) = validate(&index, w.addr)?;
        worst_htt = worst_htt.max(htt);
        worst_total = worst_total.max(total);
        seen_heads.insert((w.htt, w.leaf_head));
    }
    if seen_heads.len() != index.leaf_head_count() {
        bail!(
            "witness coverage {} != leaf count {} on {label} k={k_label}",
            seen_heads.len(),
            index.leaf_head_count()
        );
    }
    let t1 = Instant::now();
    for &addr in addrs {
        let (htt, total) = validate(&index, addr)?;
        worst_htt = worst_htt.max(htt);
        worst_total = worst_total.max(total);
    }
    let lookup_secs = t1.elapsed().as_secs_f64();
    let fp = index.footprint();
    Ok(BenchRow {
        label: label.to_string(),
        size: table.len(),
        k: k_label,
        worst_total_accesses: worst_total,
        worst_htt_accesses: worst_htt,
        binning_bytes: fp.binning_bytes,
        htt_bytes: fp.htt_bytes,
        bytes_per_prefix: fp.bytes_per_prefix(),
        bytes_per_prefix_byte: fp.bytes_per_prefix_byte(),
        htt_bytes_per_prefix_byte: fp.htt_bytes_per_prefix_byte(),
        build_ms,
        lookups_per_sec: if lookup_secs > 0.0 {
            addrs.len() as f64 / lookup_secs
        } else {
            0.0
        },
    })
}

/// Runs the full sweep: every table crossed with the baseline and each
/// requested group count, oracle-validated before anything is recorded.
pub fn run_sweep(tables: &[(String, PrefixTable)], sweep: &SweepConfig) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    for (label, table) in tables {
        let checker = FastLpm::new(table);
        let addrs = sample_addresses(table, sweep.sample_addrs, sweep.opts.seed);
        // The fast checker must agree with the linear-scan oracle before it
        // is trusted for bulk validation.
        let mut rng = SplitMix64::new(sweep.opts.seed ^ 0x0c0de);
        for i in 0..sweep.oracle_spot_checks.min(addrs.len()) {
            let addr = addrs[(rng.next_u64() as usize) % addrs.len()];
            if checker.lookup(addr) != oracle_lpm(table, addr) {
                bail!("fast checker disagrees with linear oracle on {label} (check {i})");
            }
        }
        let mut cells: Vec<u8> = Vec::new();
        if sweep.include_baseline {
            cells.push(0);
        }
        cells.extend(&sweep.ks);
        for k in cells {
            let row = measure_cell(
                label,
                table,
                k,
                k.max(1),
                sweep,
                &checker,
                &addrs,
            )?;
            report.rows.push(row);
        }
    }
    Ok(report)
}

pub const CSV_HEADER: &str = "label,size,k,worst_total_accesses,worst_htt_accesses,binning_bytes,htt_bytes,bytes_per_prefix,bytes_per_prefix_byte,htt_bytes_per_prefix_byte,build_ms,lookups_per_sec";

/// Renders the report as CSV (header plus one row per cell).
pub fn to_csv(report: &BenchReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3},{:.4},{:.4},{:.1},{:.0}",
            r.label,
            r.size,
            r.k,
            r.worst_total_accesses,
            r.worst_htt_accesses,
            r.binning_bytes,
            r.htt_bytes,
            r.bytes_per_prefix,
            r.bytes_per_prefix_byte,
            r.htt_bytes_per_prefix_byte,
            r.build_ms,
            r.lookups_per_sec
        );
    }
    out
}

fn svg_series(rows: &[&BenchRow], value: impl Fn(&BenchRow) -> f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.size.max(1) as f64).log10(), value(r)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

/// Minimal line chart: log-x series per group count.
fn render_svg(
    report: &BenchReport,
    title: &str,
    y_label: &str,
    value: impl Fn(&BenchRow) -> f64,
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 56.0;
    let ks: Vec<u8> = {
        let mut v: Vec<u8> = report.rows.iter().map(|r| r.k).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let all: Vec<(f64, f64)> = svg_series(&report.rows.iter().collect::<Vec<_>>(), &value);
    let (x_min, x_max) = all
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (_, y_max) = all
        .iter()
        .fold((0.0f64, f64::MIN), |(lo, hi), p| (lo, hi.max(p.1)));
    let y_max = if y_max <= 0.0 { 1.0 } else { y_max * 1.1 };
    let x_span = (x_max - x_min).max(1e-9);
    let px = |x: f64| M + (x - x_min) / x_span * (W - 2.0 * M);
    let py = |y: f64| H - M - y / y_max * (H - 2.0 * M);
    let palette = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    ];
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = write!(
        s,
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/><text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>",
        W / 2.0
    );
    let _ = write!(
        s,
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/><line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>",
        H - M,
        W - M,
        H - M,
        H - M
    );
    let _ = write!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">prefixes (log10)</text><text x=\"16\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{y_label}</text>",
        W / 2.0,
        H - 16.0,
        H / 2.0,
        H / 2.0
    );
    for (ki, k) in ks.iter().enumerate() {
        let rows: Vec<&BenchRow> = report.rows.iter().filter(|r| r.k == *k).collect();
        let pts = svg_series(&rows, &value);
        if pts.is_empty() {
            continue;
        }
        let path: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.1},{:.1}", px(p.0), py(p.1)))
            .collect();
        let color = palette[ki % palette.len()];
        let _ = write!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            path.join(" ")
        );
        for p in &pts {
            let _ = write!(
                s,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"{color}\"/>",
                px(p.0),
                py(p.1)
            );
        }
        let label = if *k == 0 {
            "baseline".to_string()
        } else {
            format!("k={k}")
        };
        let _ = write!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{label}</text>",
            W - M + 6.0,
            M + 16.0 * ki as f64
        );
    }
    s.push_str("</svg>");
    s
}

/// Writes the CSV and the two scaling plots (worst-case accesses with a
/// logarithmic size axis, and structure bytes against size).
pub fn report_plots(report: &BenchReport, csv_path: &Path, plot_dir: &Path) -> Result<()> {
    if report.rows.is_empty() {
        bail!("empty report: nothing to plot");
    }
    std::fs::write(csv_path, to_csv(report))
        .with_context(|| format!("writing {}", csv_path.display()))?;
    std::fs::create_dir_all(plot_dir)
        .with_context(|| format!("creating {}", plot_dir.display()))?;
    let accesses = render_svg(report, "Worst-case memory accesses", "accesses", |r| {
        r.worst_total_accesses as f64
    });
    let bytes = render_svg(report, "Structure size", "bytes", |r| {
        (r.binning_bytes + r.htt_bytes) as f64
    });
    std::fs::write(plot_dir.join("accesses_vs_size.svg"), accesses)?;
    std::fs::write(plot_dir.join("bytes_vs_size.svg"), bytes)?;
    Ok(())
}
