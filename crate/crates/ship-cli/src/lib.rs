//! File formats and measurement harness around `ship-core`.
//!
//! This crate owns everything that touches the filesystem or the clock:
//! loading prefix tables from text, reading and writing serialized indexes,
//! the benchmark sweep, and report/plot emission. The `ship` binary wires
//! these into subcommands.

pub mod bench;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use ship_core::codec::{deserialize_index, serialize_index};
use ship_core::engine::ShipIndex;
use ship_core::prefix::{parse_table_report, ParsedTable, PrefixTable};
use ship_core::synthgen::{parse_v4_table, Ipv4Prefix};

/// Loads a prefix table from the text format, reporting parse errors with
/// their line numbers. Host-bit warnings are returned alongside.
pub fn load_table_report(path: &Path) -> Result<ParsedTable> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading table {}", path.display()))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_table_report(&text, &label).with_context(|| format!("parsing {}", path.display()))
}

/// [`load_table_report`] with warnings printed to stderr.
pub fn load_table(path: &Path) -> Result<PrefixTable> {
    let parsed = load_table_report(path)?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(parsed.table)
}

/// Writes a table in the canonical text format.
pub fn save_table(table: &PrefixTable, path: &Path) -> Result<()> {
    fs::write(path, ship_core::prefix::format_table(table))
        .with_context(|| format!("writing table {}", path.display()))
}

/// Loads an IPv4 table (`<a.b.c.d>/<len> <nhi>` lines).
pub fn load_v4_table(path: &Path) -> Result<Vec<Ipv4Prefix>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading IPv4 table {}", path.display()))?;
    parse_v4_table(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes a serialized index file.
pub fn save_index(index: &ShipIndex, path: &Path) -> Result<()> {
    fs::write(path, serialize_index(index))
        .with_context(|| format!("writing index {}", path.display()))
}

/// Reads and validates a serialized index file.
pub fn load_index(path: &Path) -> Result<ShipIndex> {
    let bytes =
        fs::read(path).with_context(|| format!("reading index {}", path.display()))?;
    deserialize_index(&bytes).with_context(|| format!("parsing index {}", path.display()))
}

/// Parses one IPv6 address (plain, no prefix length).
pub fn parse_addr(text: &str) -> Result<u128> {
    let addr: std::net::Ipv6Addr = text
        .trim()
        .parse()
        .with_context(|| format!("`{text}` is not a valid IPv6 address"))?;
    Ok(u128::from_be_bytes(addr.octets()))
}

/// Formats an address for output.
pub fn format_addr(addr: u128) -> String {
    std::net::Ipv6Addr::from(addr.to_be_bytes()).to_string()
}
