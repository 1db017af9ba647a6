//! Synthetic prefix table generation.
//!
//! `gen_v6_from_v4` maps an IPv4 table one-to-one into IPv6 under the
//! 2000::/4 global unicast space; `scale_table` samples a table down with
//! the per-length histogram shape preserved. `gen_real_style` and
//! `gen_mixed` synthesize tables directly: the former mirrors the clustered,
//! /32- and /48-peaked shape of collector tables, the latter spreads lengths
//! for fuzzing. Everything is deterministic under a fixed seed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::prefix::{high_mask, Ipv6Prefix, PrefixTable};
use crate::rng::{mix64, SplitMix64};

/// An IPv4 prefix used as generator input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Ipv4Prefix {
    pub value: u32,
    pub length: u8,
    pub nhi: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum V4ParseError {
    Line { line: usize, message: String },
}

impl fmt::Display for V4ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            V4ParseError::Line { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl core::error::Error for V4ParseError {}

/// Parses `<a.b.c.d>/<len> <nhi>` lines; `#` comments and blanks ignored.
/// Duplicate (value, length) pairs are dropped, keeping the first.
pub fn parse_v4_table(text: &str) -> Result<Vec<Ipv4Prefix>, V4ParseError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| V4ParseError::Line {
            line: idx + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        let cidr = parts.next().unwrap_or_default();
        let nhi_text = parts
            .next()
            .ok_or_else(|| err("missing next-hop identifier".into()))?;
        let (addr_text, len_text) = cidr
            .split_once('/')
            .ok_or_else(|| err(alloc::format!("`{cidr}` is not in <addr>/<len> form")))?;
        let addr: core::net::Ipv4Addr = addr_text
            .parse()
            .map_err(|_| err(alloc::format!("`{addr_text}` is not a valid IPv4 address")))?;
        let length: u8 = len_text
            .parse()
            .map_err(|_| err(alloc::format!("`{len_text}` is not a valid length")))?;
        if length > 32 {
            return Err(err(alloc::format!("length {length} out of range 0-32")));
        }
        let nhi: u8 = nhi_text
            .parse()
            .map_err(|_| err(alloc::format!("`{nhi_text}` is not a valid NHI")))?;
        let mask = if length == 0 {
            0
        } else {
            u32::MAX << (32 - length as u32)
        };
        let value = u32::from_be_bytes(addr.octets()) & mask;
        if seen.insert((value, length)) {
            out.push(Ipv4Prefix { value, length, nhi });
        }
    }
    Ok(out)
}

/// Generator parameters for the one-to-one IPv4-to-IPv6 mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSpec {
    pub seed: u64,
    /// Per-mille of entries whose length is extended by 0-16 seeded low
    /// bits, populating the /33-/48 band. Default 300 (30%).
    pub extend_per_mille: u32,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            extend_per_mille: 300,
        }
    }
}

/// Maps each IPv4 prefix to one IPv6 prefix: a fixed 12-bit 0x200 pattern
/// plus a seeded 4-bit nibble (so results land under 2000::/4, spread over
/// sixteen /16 blocks), the IPv4 bits spliced behind, and the length floor
/// `l + 16`. A seeded fraction of entries gains 0-16 extra low bits. NHIs
/// are preserved; the output is deduplicated.
pub fn gen_v6_from_v4(v4: &[Ipv4Prefix], spec: &GenSpec) -> PrefixTable {
    let mut entries = BTreeMap::new();
    for p in v4 {
        let nibble = (mix64(spec.seed ^ 0x6e1b ^ p.value as u64) & 0xf) as u128;
        let top16 = (0x200u128 << 4) | nibble;
        let mut value = (top16 << 112) | ((p.value as u128) << 80);
        let mut length = 16 + p.length;
        let h = mix64(spec.seed ^ ((p.length as u64) << 40) ^ p.value as u64);
        if (h % 1000) < spec.extend_per_mille as u64 {
            let ext = (mix64(h) % 17) as u8;
            let ext = ext.min(128 - length);
            if ext > 0 {
                let bits = (mix64(h ^ 0x777) as u128) & ((1u128 << ext) - 1);
                value |= bits << (128 - length as u32 - ext as u32);
                length += ext;
            }
        }
        entries.entry((value, length)).or_insert(Ipv6Prefix {
            value,
            length,
            nhi: p.nhi,
        });
    }
    PrefixTable {
        entries: entries.into_values().collect(),
        source_label: alloc::format!("v6-from-v4 seed {}", spec.seed),
    }
}

/// Stratified down-sampling: each length bucket keeps
/// `round(fraction * bucket size)` entries chosen by seeded shuffle, so the
/// histogram shape survives within rounding.
pub fn scale_table(table: &PrefixTable, fraction: f64, seed: u64) -> PrefixTable {
    assert!(fraction > 0.0 && fraction <= 1.0, "fraction in (0, 1]");
    let mut buckets: BTreeMap<u8, Vec<Ipv6Prefix>> = BTreeMap::new();
    for e in &table.entries {
        buckets.entry(e.length).or_default().push(*e);
    }
    let mut rng = SplitMix64::new(seed);
    let mut entries = Vec::new();
    for (_, mut bucket) in buckets {
        bucket.sort_unstable();
        let keep = ((fraction * bucket.len() as f64) + 0.5) as usize;
        let keep = keep.min(bucket.len());
        rng.shuffle(&mut bucket);
        bucket.truncate(keep);
        entries.extend(bucket);
    }
    entries.sort_unstable();
    PrefixTable {
        entries,
        source_label: alloc::format!("{} scaled x{}", table.source_label, fraction),
    }
}

const REAL_STYLE_BLOCK16: [u16; 12] = [
    0x2001, 0x2400, 0x2600, 0x2602, 0x2620, 0x2800, 0x2a00, 0x2a01, 0x2a02, 0x2a03, 0x2c0f,
    0x2001, // 2001 twice: it is by far the densest block in collector tables
];

fn weighted_length(rng: &mut SplitMix64) -> u8 {
    // Rough collector-table shape: heavy /32 and /48 peaks, a /29-/36 hill,
    // a thin /40-/44 band and a /49-/64 tail.
    match rng.below(100) {
        0..=31 => 32,
        32..=53 => 48,
        54..=63 => 29 + rng.below(4) as u8,         // 29-32 foothills
        64..=73 => 33 + rng.below(8) as u8,         // 33-40
        74..=81 => 40 + rng.below(8) as u8,         // 40-47
        82..=89 => 24 + rng.below(6) as u8,         // 24-29
        90..=97 => 49 + rng.below(16) as u8,        // 49-64
        _ => 64,
    }
}

/// Synthesizes a collector-style table: prefixes cluster under a bounded set
/// of 23-bit blocks (tens of members per block), lengths peak at /32 and
/// /48, everything in 24..=64.
pub fn gen_real_style(count: usize, seed: u64) -> PrefixTable {
    let mut rng = SplitMix64::new(seed ^ 0x5ea1);
    let block_count = (count / 24).max(1);
    let mut blocks: Vec<u128> = Vec::with_capacity(block_count);
    for _ in 0..block_count {
        let b16 = REAL_STYLE_BLOCK16[rng.below(REAL_STYLE_BLOCK16.len() as u64) as usize];
        let low7 = rng.below(128) as u128;
        blocks.push(((b16 as u128) << 112) | (low7 << 105));
    }
    let mut entries = BTreeMap::new();
    let mut guard = 0usize;
    while entries.len() < count && guard < count * 40 {
        guard += 1;
        let block = blocks[rng.below(blocks.len() as u64) as usize];
        let length = weighted_length(&mut rng);
        let value = (block | (rng.next_u128() >> 23)) & high_mask(length);
        entries.entry((value, length)).or_insert(Ipv6Prefix {
            value,
            length,
            nhi: (rng.below(255) + 1) as u8,
        });
    }
    PrefixTable {
        entries: entries.into_values().collect(),
        source_label: alloc::format!("real-style {count} seed {seed}"),
    }
}

/// Synthesizes a fuzzing table with lengths spread over `min_len..=max_len`
/// and uniformly random values.
pub fn gen_mixed(count: usize, min_len: u8, max_len: u8, seed: u64) -> PrefixTable {
    assert!(min_len <= max_len && max_len <= 128);
    let mut rng = SplitMix64::new(seed ^ 0x301d);
    let mut entries = BTreeMap::new();
    let mut guard = 0usize;
    while entries.len() < count && guard < count * 40 {
        guard += 1;
        let length = min_len + rng.below((max_len - min_len + 1) as u64) as u8;
        // Cluster a third of the values under a handful of blocks so bins
        // carry more than one member even at small counts.
        let value = if rng.chance(1, 3) {
            let block = (0x2001u128 << 112) | ((rng.below(8) as u128) << 105);
            (block | (rng.next_u128() >> 23)) & high_mask(length)
        } else {
            rng.next_u128() & high_mask(length)
        };
        entries.entry((value, length)).or_insert(Ipv6Prefix {
            value,
            length,
            nhi: (rng.below(255) + 1) as u8,
        });
    }
    PrefixTable {
        entries: entries.into_values().collect(),
        source_label: alloc::format!("mixed {count} /{min_len}-/{max_len} seed {seed}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v4_parse_and_map_floor() {
        let v4 = parse_v4_table("10.0.0.0/24 7\n").unwrap();
        assert_eq!(v4.len(), 1);
        let t = gen_v6_from_v4(&v4, &GenSpec::default());
        assert_eq!(t.len(), 1);
        let e = t.entries[0];
        assert!(e.length >= 40, "floor is l + 16");
        assert_eq!(e.value >> 116, 0x200, "under 2000::/4");
        assert_eq!(e.nhi, 7);
    }

    #[test]
    fn one_to_one_cardinality() {
        let mut text = String::new();
        let mut rng = SplitMix64::new(9);
        for _ in 0..500 {
            let v = rng.next_u64() as u32;
            let l = 8 + rng.below(17) as u8;
            text.push_str(&alloc::format!(
                "{}.{}.{}.{}/{} {}\n",
                v >> 24,
                (v >> 16) & 255,
                (v >> 8) & 255,
                v & 255,
                l,
                rng.below(255) + 1
            ));
        }
        let v4 = parse_v4_table(&text).unwrap();
        let t = gen_v6_from_v4(&v4, &GenSpec::default());
        assert_eq!(t.len(), v4.len());
    }

    #[test]
    fn generated_mass_concentrates_in_24_48() {
        let mut text = String::new();
        let mut rng = SplitMix64::new(10);
        for _ in 0..2000 {
            let v = rng.next_u64() as u32;
            // Collector-like v4 lengths: /16 and /24 peaks.
            let l = if rng.chance(1, 3) { 16 } else { 24 };
            text.push_str(&alloc::format!(
                "{}.{}.{}.{}/{} 1\n",
                v >> 24,
                (v >> 16) & 255,
                (v >> 8) & 255,
                v & 255,
                l
            ));
        }
        let v4 = parse_v4_table(&text).unwrap();
        let t = gen_v6_from_v4(&v4, &GenSpec::default());
        let in_band = t
            .entries
            .iter()
            .filter(|e| (24..=48).contains(&e.length))
            .count();
        assert!(in_band * 10 >= t.len() * 9, "{in_band}/{}", t.len());
    }

    #[test]
    fn gen_deterministic() {
        let v4 = parse_v4_table("10.0.0.0/16 1\n172.16.0.0/12 2\n192.168.1.0/24 3\n").unwrap();
        let a = gen_v6_from_v4(&v4, &GenSpec::default());
        let b = gen_v6_from_v4(&v4, &GenSpec::default());
        assert_eq!(a.entries, b.entries);
        let t1 = gen_real_style(500, 42);
        let t2 = gen_real_style(500, 42);
        assert_eq!(t1.entries, t2.entries);
    }

    #[test]
    fn scale_identity_at_one() {
        let t = gen_real_style(300, 5);
        let s = scale_table(&t, 1.0, 9);
        let mut a = t.entries.clone();
        let mut b = s.entries.clone();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn scale_halves_buckets_with_rounding() {
        let mut entries = Vec::new();
        for i in 0..100u32 {
            entries.push(Ipv6Prefix {
                value: ((0x2001u128 << 16) | i as u128) << 96,
                length: 32,
                nhi: 1,
            });
        }
        for i in 0..60u32 {
            entries.push(Ipv6Prefix {
                value: ((0x2600u128 << 16) | i as u128) << 96,
                length: 48,
                nhi: 1,
            });
        }
        let t = PrefixTable::from_entries(entries, "t").unwrap();
        let s = scale_table(&t, 0.5, 3);
        let count = |len: u8| s.entries.iter().filter(|e| e.length == len).count();
        assert_eq!(count(32), 50);
        assert_eq!(count(48), 30);
    }

    #[test]
    fn real_style_peaks_at_32_and_48() {
        let t = gen_real_style(5000, 11);
        let mut hist: BTreeMap<u8, usize> = BTreeMap::new();
        for e in &t.entries {
            *hist.entry(e.length).or_default() += 1;
        }
        let top: Vec<u8> = {
            let mut v: Vec<(u8, usize)> = hist.iter().map(|(&l, &c)| (l, c)).collect();
            v.sort_by_key(|&(l, c)| (usize::MAX - c, l));
            v.into_iter().take(2).map(|(l, _)| l).collect()
        };
        assert!(top.contains(&32) && top.contains(&48), "peaks {top:?}");
        assert!(t.entries.iter().all(|e| (24..=64).contains(&e.length)));
    }

    #[test]
    fn mixed_covers_requested_length_range() {
        let t = gen_mixed(800, 8, 64, 3);
        assert!(t.len() >= 700);
        assert!(t.entries.iter().all(|e| (8..=64).contains(&e.length)));
        let short = t.entries.iter().filter(|e| e.length < 23).count();
        assert!(short > 0, "short prefixes must occur for expansion coverage");
    }
}
