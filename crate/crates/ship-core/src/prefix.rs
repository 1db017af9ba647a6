//! Canonical prefix and table representation, text-format parsing, and the
//! brute-force lookup oracle.
//!
//! The table text format is one entry per line, `<ipv6-address>/<len> <nhi>`,
//! with `#` comments and blank lines ignored. The NHI is a decimal 0-255.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv6Addr;

/// Bitmask selecting the top `len` bits of a 128-bit value.
#[inline]
pub fn high_mask(len: u8) -> u128 {
    debug_assert!(len <= 128);
    if len == 0 {
        0
    } else {
        u128::MAX << (128 - len as u32)
    }
}

/// True when the top `len` bits of `a` and `b` agree.
#[inline]
pub fn top_bits_eq(a: u128, b: u128, len: u8) -> bool {
    len == 0 || (a ^ b) >> (128 - len as u32) == 0
}

/// One routing table entry: a value/length pair plus its next-hop identifier.
///
/// `value` is MSB-first with all bits below position `128 - length` zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ipv6Prefix {
    pub value: u128,
    pub length: u8,
    pub nhi: u8,
}

impl Ipv6Prefix {
    /// Builds a prefix, zeroing any bits below the prefix length.
    /// Returns the canonical prefix and whether trailing bits were dropped.
    pub fn canonicalize(value: u128, length: u8, nhi: u8) -> Result<(Self, bool), PrefixError> {
        if length > 128 {
            return Err(PrefixError::LengthOutOfRange(length));
        }
        let masked = value & high_mask(length);
        Ok((
            Self {
                value: masked,
                length,
                nhi,
            },
            masked != value,
        ))
    }

    /// True when `addr` falls under this prefix.
    #[inline]
    pub fn matches(&self, addr: u128) -> bool {
        top_bits_eq(self.value, addr, self.length)
    }

    /// The lowest address covered by the prefix.
    #[inline]
    pub fn first_addr(&self) -> u128 {
        self.value
    }

    /// The highest address covered by the prefix.
    #[inline]
    pub fn last_addr(&self) -> u128 {
        self.value | !high_mask(self.length)
    }
}

impl fmt::Display for Ipv6Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let addr = Ipv6Addr::from(self.value.to_be_bytes());
        write!(f, "{}/{} {}", addr, self.length, self.nhi)
    }
}

/// An ordered, duplicate-free collection of prefixes.
#[derive(Debug, Clone, Default)]
pub struct PrefixTable {
    pub entries: Vec<Ipv6Prefix>,
    pub source_label: String,
}

impl PrefixTable {
    pub fn new(label: &str) -> Self {
        Self {
            entries: Vec::new(),
            source_label: label.to_string(),
        }
    }

    /// Builds a table from entries, rejecting duplicate (value, length) pairs.
    pub fn from_entries(entries: Vec<Ipv6Prefix>, label: &str) -> Result<Self, PrefixError> {
        let mut seen: Vec<(u128, u8)> = entries.iter().map(|e| (e.value, e.length)).collect();
        seen.sort_unstable();
        for w in seen.windows(2) {
            if w[0] == w[1] {
                return Err(PrefixError::Duplicate {
                    value: w[0].0,
                    length: w[0].1,
                });
            }
        }
        Ok(Self {
            entries,
            source_label: label.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of `ceil(length / 8)` over all entries: the raw prefix payload in
    /// bytes, the denominator of the bytes-per-prefix-byte metric.
    pub fn prefix_bytes(&self) -> u64 {
        self.entries
            .iter()
            .map(|e| (e.length as u64).div_ceil(8))
            .sum()
    }
}

/// A positive lookup outcome: the matched prefix's original length and NHI.
/// A miss is the `None` side of `Option<RouteMatch>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteMatch {
    pub prefix_length: u8,
    pub nhi: u8,
}

/// Linear-scan longest-prefix-match over the original table. This is the
/// independent correctness oracle every structure in this crate is tested
/// against; keep it obviously correct and free of shared code paths.
pub fn oracle_lpm(table: &PrefixTable, addr: u128) -> Option<RouteMatch> {
    let mut best: Option<&Ipv6Prefix> = None;
    for entry in &table.entries {
        if entry.matches(addr) && best.is_none_or(|b| entry.length > b.length) {
            best = Some(entry);
        }
    }
    best.map(|e| RouteMatch {
        prefix_length: e.length,
        nhi: e.nhi,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrefixError {
    LengthOutOfRange(u8),
    Duplicate { value: u128, length: u8 },
    Parse { line: usize, message: String },
}

impl fmt::Display for PrefixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrefixError::LengthOutOfRange(l) => write!(f, "prefix length {l} out of range 0-128"),
            PrefixError::Duplicate { value, length } => {
                let addr = Ipv6Addr::from(value.to_be_bytes());
                write!(f, "duplicate prefix {addr}/{length}")
            }
            PrefixError::Parse { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl core::error::Error for PrefixError {}

fn parse_line(line: &str, lineno: usize) -> Result<Option<(Ipv6Prefix, bool)>, PrefixError> {
    let line = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
    .trim();
    if line.is_empty() {
        return Ok(None);
    }
    let err = |message: String| PrefixError::Parse {
        line: lineno,
        message,
    };
    let mut parts = line.split_whitespace();
    let cidr = parts.next().ok_or_else(|| err("missing prefix".into()))?;
    let nhi_text = parts
        .next()
        .ok_or_else(|| err("missing next-hop identifier".into()))?;
    if let Some(extra) = parts.next() {
        return Err(err(format!("unexpected trailing field `{extra}`")));
    }
    let (addr_text, len_text) = cidr
        .split_once('/')
        .ok_or_else(|| err(format!("`{cidr}` is not in <addr>/<len> form")))?;
    let addr: Ipv6Addr = addr_text
        .parse()
        .map_err(|_| err(format!("`{addr_text}` is not a valid IPv6 address")))?;
    let length: u8 = len_text
        .parse()
        .map_err(|_| err(format!("`{len_text}` is not a valid prefix length")))?;
    if length > 128 {
        return Err(err(format!("prefix length {length} out of range 0-128")));
    }
    let nhi: u8 = nhi_text
        .parse()
        .map_err(|_| err(format!("`{nhi_text}` is not a valid NHI (decimal 0-255)")))?;
    let (prefix, truncated) =
        Ipv6Prefix::canonicalize(u128::from_be_bytes(addr.octets()), length, nhi)
            .map_err(|e| err(e.to_string()))?;
    Ok(Some((prefix, truncated)))
}

/// Parsed table plus warnings for lines whose host bits were zeroed.
#[derive(Debug, Clone)]
pub struct ParsedTable {
    pub table: PrefixTable,
    pub warnings: Vec<String>,
}

/// Parses the text table format, reporting the offending line number on
/// malformed input and rejecting duplicate (value, length) pairs.
pub fn parse_table_report(text: &str, label: &str) -> Result<ParsedTable, PrefixError> {
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if let Some((prefix, truncated)) = parse_line(line, idx + 1)? {
            if truncated {
                warnings.push(format!(
                    "line {}: host bits beyond /{} were zeroed",
                    idx + 1,
                    prefix.length
                ));
            }
            entries.push(prefix);
        }
    }
    let table = PrefixTable::from_entries(entries, label)?;
    Ok(ParsedTable { table, warnings })
}

/// [`parse_table_report`] with warnings dropped.
pub fn parse_table(text: &str, label: &str) -> Result<PrefixTable, PrefixError> {
    parse_table_report(text, label).map(|p| p.table)
}

/// Serializes a table back to the text format. `parse_table` of the output
/// reproduces the table exactly.
pub fn format_table(table: &PrefixTable) -> String {
    let mut out = String::new();
    for entry in &table.entries {
        out.push_str(&entry.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn addr(s: &str) -> u128 {
        u128::from_be_bytes(s.parse::<Ipv6Addr>().unwrap().octets())
    }

    #[test]
    fn parses_default_route() {
        let t = parse_table("::/0 1\n", "t").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.entries[0].length, 0);
        assert_eq!(t.entries[0].nhi, 1);
    }

    #[test]
    fn parses_canonical_form() {
        let t = parse_table("2001:db8::/32 7\n", "t").unwrap();
        let e = t.entries[0];
        assert_eq!(e.value >> 96, 0x2001_0db8);
        assert_eq!(e.value & ((1 << 96) - 1), 0);
        assert_eq!(e.length, 32);
        assert_eq!(e.nhi, 7);
    }

    #[test]
    fn rejects_duplicates() {
        let err = parse_table("2001::/16 1\n2001::/16 2\n", "t").unwrap_err();
        assert!(matches!(err, PrefixError::Duplicate { length: 16, .. }));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_table("::/0 1\nbogus\n", "t").unwrap_err();
        assert!(matches!(err, PrefixError::Parse { line: 2, .. }));
        let err = parse_table("::/0 999\n", "t").unwrap_err();
        assert!(matches!(err, PrefixError::Parse { line: 1, .. }));
        let err = parse_table("::/200 1\n", "t").unwrap_err();
        assert!(matches!(err, PrefixError::Parse { line: 1, .. }));
    }

    #[test]
    fn comments_and_blanks_ignored_and_host_bits_warned() {
        let parsed =
            parse_table_report("# header\n\n2001:db8::1/32 7 # trailing\n", "t").unwrap();
        assert_eq!(parsed.table.len(), 1);
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.table.entries[0].value, addr("2001:db8::"));
    }

    #[test]
    fn oracle_default_route_matches_everything() {
        let t = parse_table("::/0 1\n", "t").unwrap();
        for a in [0u128, u128::MAX, addr("2001:db8::1")] {
            assert_eq!(
                oracle_lpm(&t, a),
                Some(RouteMatch {
                    prefix_length: 0,
                    nhi: 1
                })
            );
        }
    }

    #[test]
    fn oracle_longer_wins() {
        let t = parse_table("2001::/16 1\n2001:db8::/32 2\n", "t").unwrap();
        assert_eq!(
            oracle_lpm(&t, addr("2001:db8::1")),
            Some(RouteMatch {
                prefix_length: 32,
                nhi: 2
            })
        );
        assert_eq!(
            oracle_lpm(&t, addr("2001:aaaa::")),
            Some(RouteMatch {
                prefix_length: 16,
                nhi: 1
            })
        );
    }

    #[test]
    fn oracle_miss() {
        let t = parse_table("2001:db8::/32 2\n", "t").unwrap();
        assert_eq!(oracle_lpm(&t, addr("2002::")), None);
    }

    #[test]
    fn format_parse_round_trip() {
        let text = "::/0 1\n2001:db8::/32 7\nfe80::/10 3\n";
        let t = parse_table(text, "t").unwrap();
        let out = format_table(&t);
        let t2 = parse_table(&out, "t").unwrap();
        assert_eq!(t.entries, t2.entries);
    }

    #[test]
    fn first_and_last_addr() {
        let (p, _) = Ipv6Prefix::canonicalize(addr("2001:db8::"), 32, 1).unwrap();
        assert_eq!(p.first_addr(), addr("2001:db8::"));
        assert_eq!(
            p.last_addr(),
            addr("2001:db8:ffff:ffff:ffff:ffff:ffff:ffff")
        );
        let (all, _) = Ipv6Prefix::canonicalize(0, 0, 1).unwrap();
        assert_eq!(all.first_addr(), 0);
        assert_eq!(all.last_addr(), u128::MAX);
        let (host, _) = Ipv6Prefix::canonicalize(u128::MAX, 128, 1).unwrap();
        assert_eq!(host.first_addr(), host.last_addr());
    }

    #[test]
    fn from_entries_rejects_duplicate_values() {
        let (p, _) = Ipv6Prefix::canonicalize(addr("2001::"), 16, 1).unwrap();
        let (q, _) = Ipv6Prefix::canonicalize(addr("2001::"), 16, 9).unwrap();
        assert!(PrefixTable::from_entries(vec![p, q], "t").is_err());
    }
}
