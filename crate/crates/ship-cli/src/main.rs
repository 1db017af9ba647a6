//! `ship`: build, query, and measure two-level IPv6 lookup structures.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags or flag values
//! violating structure invariants), 2 on data errors (unreadable or malformed
//! inputs, build failures, validation failures).

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};

use ship_cli::bench::{report_plots, run_sweep, to_csv, SweepConfig};
use ship_cli::{
    format_addr, load_index, load_table, load_v4_table, parse_addr, save_index, save_table,
};
use ship_core::engine::{build_ship, BuildOptions};
use ship_core::htt::HttConfig;
use ship_core::normalize::normalize_to_23;
use ship_core::pls::{choose_bounds, length_histogram};
use ship_core::synthgen;

#[derive(Parser)]
#[command(
    name = "ship",
    version,
    about = "Two-level IPv6 longest-prefix-match structures: build, query, measure"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct StructureFlags {
    /// Number of prefix-length groups per bin (1-6).
    #[arg(long, default_value_t = 3)]
    k: u8,
    /// Encoded node width in bits (multiple of 8, at least 128).
    #[arg(long = "node-bits", default_value_t = 512)]
    node_bits: u32,
    /// Leaf threshold: regions with at most this many prefixes become leaves (1-12).
    #[arg(long, default_value_t = 12)]
    b: u8,
    /// Merge threshold for selective node merge; defaults to the leaf threshold.
    #[arg(long = "merge-threshold")]
    merge_threshold: Option<u32>,
    /// Entries per SNM direction array (1-5).
    #[arg(long = "snm-len", default_value_t = 5)]
    snm_len: u8,
    /// Maximum bits cut per trie node (1-10).
    #[arg(long = "max-stride", default_value_t = 10)]
    max_stride: u8,
    /// Build seed (perfect hash construction).
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Hash table load factor in (0, 1]; 1.0 is a minimal perfect hash.
    #[arg(long = "load-factor", default_value_t = 1.0)]
    load_factor: f64,
    /// Prefixes shorter than this stay lazy instead of expanding to /23 (0-23).
    #[arg(long = "lazy-cutoff", default_value_t = 8)]
    lazy_cutoff: u8,
}

impl StructureFlags {
    fn validate(&self) -> Result<(HttConfig, BuildOptions, u8), UsageError> {
        if !(1..=6).contains(&self.k) {
            return Err(UsageError(format!("--k {} outside 1-6", self.k)));
        }
        if !(self.load_factor > 0.0 && self.load_factor <= 1.0) {
            return Err(UsageError(format!(
                "--load-factor {} outside (0, 1]",
                self.load_factor
            )));
        }
        if self.lazy_cutoff > 23 {
            return Err(UsageError(format!(
                "--lazy-cutoff {} outside 0-23",
                self.lazy_cutoff
            )));
        }
        let cfg = HttConfig {
            leaf_threshold_b: self.b,
            merge_threshold: self.merge_threshold.unwrap_or(self.b as u32),
            max_stride_bits: self.max_stride,
            snm_array_len: self.snm_len,
            node_size_bits: self.node_bits,
        };
        cfg.validate().map_err(|e| UsageError(e.to_string()))?;
        let opts = BuildOptions {
            seed: self.seed,
            load_factor: self.load_factor,
            lazy_cutoff: self.lazy_cutoff,
        };
        Ok((cfg, opts, self.k))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from a prefix table and serialize it.
    Build {
        /// Prefix table in text form: `<ipv6>/<len> <nhi>` per line.
        #[arg(long)]
        table: PathBuf,
        /// Output index file.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: StructureFlags,
    },
    /// Stream lookups against a serialized index.
    Lookup {
        #[arg(long)]
        index: PathBuf,
        /// Address file, one IPv6 address per line; stdin when omitted.
        #[arg(long)]
        addrs: Option<PathBuf>,
    },
    /// Table or index statistics: length histogram, bounds, footprint.
    #[command(group(ArgGroup::new("source").required(true).args(["table", "index"])))]
    Stats {
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Emit the per-length histogram (table mode).
        #[arg(long)]
        histogram: bool,
        /// Group count used to report chosen bounds (table mode).
        #[arg(long, default_value_t = 3)]
        k: u8,
    },
    /// Generate synthetic prefix tables.
    #[command(group(ArgGroup::new("source").required(true).args(["v4", "real_style", "mixed", "scale"])))]
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Map an IPv4 table (one-to-one) into IPv6.
        #[arg(long)]
        v4: Option<PathBuf>,
        /// Fraction of mapped entries extended by 0-16 low bits.
        #[arg(long = "extend-fraction", default_value_t = 0.3)]
        extend_fraction: f64,
        /// Synthesize a collector-style table of N prefixes.
        #[arg(long = "real-style")]
        real_style: Option<usize>,
        /// Synthesize a mixed-length fuzzing table of N prefixes.
        #[arg(long)]
        mixed: Option<usize>,
        #[arg(long = "min-len", default_value_t = 8)]
        min_len: u8,
        #[arg(long = "max-len", default_value_t = 64)]
        max_len: u8,
        /// Down-sample `--table` stratified by length to this fraction.
        #[arg(long)]
        scale: Option<f64>,
        /// Source table for `--scale`.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Sweep tables across group counts, validate against the oracle, and
    /// report accesses and footprints.
    Bench {
        /// Table files (shell globs expand to multiple paths).
        #[arg(long, num_args = 1.., required = true)]
        tables: Vec<PathBuf>,
        /// Group counts: `1..6`, a single value, or a comma list.
        #[arg(long, default_value = "1..6")]
        k: String,
        #[arg(long = "node-bits", default_value_t = 512)]
        node_bits: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Also render SVG scaling plots into this directory.
        #[arg(long = "plot-dir")]
        plot_dir: Option<PathBuf>,
        /// Random validation addresses per table.
        #[arg(long = "sample-addrs", default_value_t = 100_000)]
        sample_addrs: usize,
        /// Skip the k=0 single-trie-tree baseline rows.
        #[arg(long = "no-baseline")]
        no_baseline: bool,
        #[arg(long, default_value_t = 12)]
        b: u8,
    },
}

/// Flag-level failure: exits with code 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn parse_k_spec(spec: &str) -> Result<Vec<u8>, UsageError> {
    let parse_one = |s: &str| -> Result<u8, UsageError> {
        let v: u8 = s
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("bad group count `{s}`")))?;
        if !(1..=6).contains(&v) {
            return Err(UsageError(format!("group count {v} outside 1-6")));
        }
        Ok(v)
    };
    let ks: Vec<u8> = if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (parse_one(a)?, parse_one(b)?);
        if a > b {
            return Err(UsageError(format!("empty group range `{spec}`")));
        }
        (a..=b).collect()
    } else if spec.contains(',') {
        spec.split(',').map(parse_one).collect::<Result<_, _>>()?
    } else {
        vec![parse_one(spec)?]
    };
    Ok(ks)
}

fn cmd_build(table: &Path, out: &Path, flags: &StructureFlags) -> Result<()> {
    let (cfg, opts, k) = flags.validate()?;
    let table = load_table(table)?;
    let index = build_ship(&table, k, &cfg, &opts).map_err(|e| anyhow!("{e}"))?;
    save_index(&index, out)?;
    let fp = index.footprint();
    println!("prefixes={}", table.len());
    println!("bins_m={}", index.bin_count());
    println!("slots_n={}", index.slot_count());
    println!(
        "bounds={}",
        index
            .partition
            .bounds
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    println!("binning_bytes={}", fp.binning_bytes);
    println!("htt_bytes={}", fp.htt_bytes);
    println!("total_bytes={}", fp.total_bytes());
    println!("bytes_per_prefix={:.3}", fp.bytes_per_prefix());
    println!("bytes_per_prefix_byte={:.4}", fp.bytes_per_prefix_byte());
    Ok(())
}

fn cmd_lookup(index_path: &Path, addrs: Option<&Path>) -> Result<()> {
    let index = load_index(index_path)?;
    let stdin;
    let file;
    let reader: Box<dyn BufRead> = match addrs {
        Some(path) => {
            file = std::fs::File::open(path)
                .with_context(|| format!("opening {}", path.display()))?;
            Box::new(std::io::BufReader::new(file))
        }
        None => {
            stdin = std::io::stdin();
            Box::new(stdin.lock())
        }
    };
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    for line in reader.lines() {
        let line = line.context("reading addresses")?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        match parse_addr(text) {
            Ok(addr) => {
                let (hit, stats) = index.lookup(addr);
                match hit {
                    Some(m) => writeln!(
                        out,
                        "{} {} {} {}",
                        format_addr(addr),
                        m.prefix_length,
                        m.nhi,
                        stats.total()
                    )?,
                    None => writeln!(out, "{} MISS", format_addr(addr))?,
                }
            }
            Err(e) => eprintln!("error: {e:#}"),
        }
    }
    Ok(())
}

fn cmd_stats_table(path: &Path, histogram: bool, k: u8) -> Result<()> {
    if !(1..=6).contains(&k) {
        return Err(UsageError(format!("--k {k} outside 1-6")).into());
    }
    let table = load_table(path)?;
    let normalized = normalize_to_23(&table);
    let hist = length_histogram(&normalized);
    let bounds = choose_bounds(&hist, k as usize);
    println!(
        "# table {}: {} prefixes, {} normalized entries, {} lazy covers",
        table.source_label,
        table.len(),
        normalized.entries.len(),
        normalized.covers.len()
    );
    if histogram {
        println!("length,count");
        for (len, count) in &hist {
            println!("{len},{count}");
        }
    }
    println!(
        "# bounds (k={}): {}",
        bounds.k(),
        bounds
            .bounds
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    Ok(())
}

fn cmd_stats_index(path: &Path) -> Result<()> {
    let index = load_index(path)?;
    let fp = index.footprint();
    let node_count: usize = index.htts.iter().map(|h| h.node_count()).sum();
    println!("key,value");
    println!("k,{}", index.requested_k);
    println!(
        "bounds,{}",
        index
            .partition
            .bounds
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join("|")
    );
    println!("node_bits,{}", index.config.node_size_bits);
    println!("slots_n,{}", index.slot_count());
    println!("bins_m,{}", index.bin_count());
    println!("htt_count,{}", index.htts.len());
    println!("node_count,{node_count}");
    println!("binning_bytes,{}", fp.binning_bytes);
    println!("htt_bytes,{}", fp.htt_bytes);
    println!("total_bytes,{}", fp.total_bytes());
    println!("prefix_count,{}", fp.prefix_count);
    println!("prefix_bytes,{}", fp.prefix_bytes);
    println!("bytes_per_prefix,{:.3}", fp.bytes_per_prefix());
    println!("bytes_per_prefix_byte,{:.4}", fp.bytes_per_prefix_byte());
    println!(
        "htt_bytes_per_prefix_byte,{:.4}",
        fp.htt_bytes_per_prefix_byte()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    out: &Path,
    seed: u64,
    v4: Option<&Path>,
    extend_fraction: f64,
    real_style: Option<usize>,
    mixed: Option<usize>,
    min_len: u8,
    max_len: u8,
    scale: Option<f64>,
    table: Option<&Path>,
) -> Result<()> {
    let generated = if let Some(v4_path) = v4 {
        if !(0.0..=1.0).contains(&extend_fraction) {
            return Err(UsageError(format!(
                "--extend-fraction {extend_fraction} outside [0, 1]"
            ))
            .into());
        }
        let v4 = load_v4_table(v4_path)?;
        synthgen::gen_v6_from_v4(
            &v4,
            &synthgen::GenSpec {
                seed,
                extend_per_mille: (extend_fraction * 1000.0) as u32,
            },
        )
    } else if let Some(n) = real_style {
        synthgen::gen_real_style(n, seed)
    } else if let Some(n) = mixed {
        if min_len > max_len || max_len > 128 {
            return Err(UsageError(format!(
                "--min-len {min_len} --max-len {max_len} is not a valid range"
            ))
            .into());
        }
        synthgen::gen_mixed(n, min_len, max_len, seed)
    } else if let Some(fraction) = scale {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(UsageError(format!("--scale {fraction} outside (0, 1]")).into());
        }
        let source = table.ok_or_else(|| UsageError("--scale needs --table".to_string()))?;
        let source = load_table(source)?;
        synthgen::scale_table(&source, fraction, seed)
    } else {
        unreachable!("clap group guarantees a source");
    };
    save_table(&generated, out)?;
    println!("generated={}", generated.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    tables: &[PathBuf],
    k_spec: &str,
    node_bits: u32,
    seed: u64,
    out: &Path,
    plot_dir: Option<&Path>,
    sample_addrs: usize,
    no_baseline: bool,
    b: u8,
) -> Result<()> {
    let ks = parse_k_spec(k_spec)?;
    let cfg = HttConfig {
        leaf_threshold_b: b,
        merge_threshold: b as u32,
        node_size_bits: node_bits,
        ..HttConfig::default()
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let mut loaded = Vec::new();
    for path in tables {
        let table = load_table(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        loaded.push((label, table));
    }
    let sweep = SweepConfig {
        ks,
        include_baseline: !no_baseline,
        cfg,
        opts: BuildOptions {
            seed,
            ..BuildOptions::default()
        },
        sample_addrs,
        ..SweepConfig::default()
    };
    let report = run_sweep(&loaded, &sweep)?;
    match plot_dir {
        Some(dir) => report_plots(&report, out, dir)?,
        None => std::fs::write(out, to_csv(&report))
            .with_context(|| format!("writing {}", out.display()))?,
    }
    eprintln!("wrote {} rows to {}", report.rows.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.cmd {
        Command::Build { table, out, flags } => cmd_build(table, out, flags),
        Command::Lookup { index, addrs } => cmd_lookup(index, addrs.as_deref()),
        Command::Stats {
            table,
            index,
            histogram,
            k,
        } => match (table, index) {
            (Some(t), None) => cmd_stats_table(t, *histogram, *k),
            (None, Some(i)) => cmd_stats_index(i),
            _ => unreachable!("clap group"),
        },
        Command::Gen {
            out,
            seed,
            v4,
            extend_fraction,
            real_style,
            mixed,
            min_len,
            max_len,
            scale,
            table,
        } => cmd_gen(
            out,
            *seed,
            v4.as_deref(),
            *extend_fraction,
            *real_style,
            *mixed,
            *min_len,
            *max_len,
            *scale,
            table.as_deref(),
        ),
        Command::Bench {
            tables,
            k,
            node_bits,
            seed,
            out,
            plot_dir,
            sample_addrs,
            no_baseline,
            b,
        } => cmd_bench(
            tables,
            k,
            *node_bits,
            *seed,
            out,
            plot_dir.as_deref(),
            *sample_addrs,
            *no_baseline,
            *b,
        ),
    }
}

fn main() {
    // Die quietly when a downstream pipe closes (`ship stats | head`),
    // like any other stream filter.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print to stdout and exit 0; real usage
            // errors exit 1.
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            std::process::exit(if is_help { 0 } else { 1 });
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        let usage = err.downcast_ref::<UsageError>().is_some();
        std::process::exit(if usage { 1 } else { 2 });
    }
}
