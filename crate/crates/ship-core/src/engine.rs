//! End-to-end index: build orchestration, full lookup with priority
//! resolution, and footprint accounting.
//!
//! A lookup hashes the 23 MSBs (two accesses), probes every group trie-tree
//! of the selected bin in parallel (the reported trie-tree access count is
//! the maximum over the probed engines), and resolves priority by original
//! prefix length. Short prefixes kept lazy by normalization are folded in at
//! resolution time; they can only win when nothing longer matched.

use alloc::vec::Vec;
use core::fmt;

use crate::binning::{build_bins, key23_of_addr, PerfectHash};
use crate::htt::{build_htt, lookup_htt, HttBuildError, HttConfig, HttStructure, Node};
use crate::normalize::{
    normalize_with_cutoff, NormalizeError, ShortCover, BINNING_BITS, DEFAULT_LAZY_CUTOFF,
};
use crate::pls::{choose_bounds, length_histogram, split_bin, PlsError, PlsPartition};
use crate::prefix::{PrefixTable, RouteMatch};

/// Per-cover accounting charge: value, length, NHI.
pub const COVER_BYTES: u64 = 18;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub seed: u64,
    pub load_factor: f64,
    /// Original lengths below this stay lazy instead of expanding to /23.
    pub lazy_cutoff: u8,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            load_factor: 1.0,
            lazy_cutoff: DEFAULT_LAZY_CUTOFF,
        }
    }
}

/// One bin's group trie-trees: `htts[g]` is the id of group g's structure,
/// or None when the group is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinGroups {
    pub key23: u32,
    pub htts: Vec<Option<u32>>,
}

/// The built two-level index. Immutable after build; lookups are pure reads.
#[derive(Debug, Clone)]
pub struct ShipIndex {
    pub config: HttConfig,
    pub requested_k: u8,
    pub options: BuildOptions,
    pub partition: PlsPartition,
    pub hash: PerfectHash,
    /// Aligned with the hash's bin indices, sorted by key23.
    pub bins: Vec<BinGroups>,
    pub covers: Vec<ShortCover>,
    pub htts: Vec<HttStructure>,
    pub source_entry_count: u64,
    pub source_prefix_bytes: u64,
}

/// Access accounting for one lookup. The binning structure always costs
/// exactly two reads; the trie-tree figure is the maximum over the K probed
/// group engines of the selected bin (zero on a bin miss).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LookupStats {
    pub hash_accesses: u32,
    pub htt_accesses_max: u32,
}

impl LookupStats {
    pub fn total(&self) -> u32 {
        self.hash_accesses + self.htt_accesses_max
    }
}

/// Structure footprint split by component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Footprint {
    pub binning_bytes: u64,
    pub htt_bytes: u64,
    pub prefix_count: u64,
    pub prefix_bytes: u64,
}

impl Footprint {
    pub fn total_bytes(&self) -> u64 {
        self.binning_bytes + self.htt_bytes
    }

    pub fn bytes_per_prefix(&self) -> f64 {
        self.total_bytes() as f64 / (self.prefix_count.max(1)) as f64
    }

    pub fn bytes_per_prefix_byte(&self) -> f64 {
        self.total_bytes() as f64 / (self.prefix_bytes.max(1)) as f64
    }

    pub fn htt_bytes_per_prefix_byte(&self) -> f64 {
        self.htt_bytes as f64 / (self.prefix_bytes.max(1)) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuildError {
    InvalidK(u8),
    Normalize(NormalizeError),
    Binning(crate::binning::BinningError),
    Pls(PlsError),
    Htt(HttBuildError),
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::InvalidK(k) => write!(f, "group count {k} must be at least 1"),
            BuildError::Normalize(e) => write!(f, "normalize: {e}"),
            BuildError::Binning(e) => write!(f, "binning: {e}"),
            BuildError::Pls(e) => write!(f, "length sorting: {e}"),
            BuildError::Htt(e) => write!(f, "trie-tree build: {e}"),
        }
    }
}

impl core::error::Error for BuildError {}

/// Builds the full two-level index: normalize, bin, hash, choose global
/// length bounds, split every bin, and build one trie-tree per non-empty
/// group. Deterministic for fixed inputs and seed.
pub fn build_ship(
    table: &PrefixTable,
    k: u8,
    cfg: &HttConfig,
    opts: &BuildOptions,
) -> Result<ShipIndex, BuildError> {
    if k == 0 {
        return Err(BuildError::InvalidK(k));
    }
    cfg.validate()
        .map_err(|e| BuildError::Htt(HttBuildError::Config(e)))?;
    let normalized =
        normalize_with_cutoff(table, opts.lazy_cutoff).map_err(BuildError::Normalize)?;
    let hist = length_histogram(&normalized);
    let partition = choose_bounds(&hist, k as usize);
    let bins = build_bins(&normalized);
    let keys: Vec<u32> = bins.iter().map(|b| b.key23).collect();
    let hash =
        PerfectHash::build(&keys, opts.load_factor, opts.seed).map_err(BuildError::Binning)?;

    let mut htts: Vec<HttStructure> = Vec::new();
    let mut bin_groups: Vec<BinGroups> = Vec::with_capacity(bins.len());
    for bin in &bins {
        let groups = split_bin(bin, &partition).map_err(BuildError::Pls)?;
        let mut ids: Vec<Option<u32>> = Vec::with_capacity(groups.len());
        for group in &groups {
            if group.members.is_empty() {
                ids.push(None);
            } else {
                let htt = build_htt(group, cfg).map_err(BuildError::Htt)?;
                ids.push(Some(htts.len() as u32));
                htts.push(htt);
            }
        }
        bin_groups.push(BinGroups {
            key23: bin.key23,
            htts: ids,
        });
    }
    Ok(ShipIndex {
        config: *cfg,
        requested_k: k,
        options: *opts,
        partition,
        hash,
        bins: bin_groups,
        covers: normalized.covers,
        htts,
        source_entry_count: normalized.source_entry_count,
        source_prefix_bytes: normalized.source_prefix_bytes,
    })
}

/// One per-leaf witness address, used by the harness to drive worst-case
/// access measurement through every leaf chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Witness {
    pub addr: u128,
    pub htt: u32,
    pub leaf_head: u16,
}

impl ShipIndex {
    /// Number of address block bins (M).
    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    /// Hash table size (N).
    pub fn slot_count(&self) -> usize {
        self.hash.slot_count()
    }

    /// Full lookup: two-access bin resolution, parallel probe of the bin's
    /// group engines, priority resolution by original length.
    pub fn lookup(&self, addr: u128) -> (Option<RouteMatch>, LookupStats) {
        let (bin_idx, hash_accesses) = self.hash.lookup_key(key23_of_addr(addr));
        let key_rem = addr << BINNING_BITS as u32;
        let mut best: Option<RouteMatch> = None;
        let mut htt_accesses_max = 0u32;
        if let Some(bin_idx) = bin_idx {
            for id in self.bins[bin_idx as usize].htts.iter().flatten() {
                let (hit, accesses) = lookup_htt(&self.htts[*id as usize], key_rem)
                    .expect("structures are validated at build/load");
                htt_accesses_max = htt_accesses_max.max(accesses);
                if let Some(m) = hit {
                    if best.is_none_or(|b| m.prefix_length > b.prefix_length) {
                        best = Some(m);
                    }
                }
            }
        }
        if best.is_none() {
            // Lazy short prefixes: strictly shorter than anything stored, so
            // they only matter when every stored engine missed.
            best = self
                .covers
                .iter()
                .find(|c| c.matches(addr))
                .map(|c| RouteMatch {
                    prefix_length: c.original_len,
                    nhi: c.nhi,
                });
        }
        (
            best,
            LookupStats {
                hash_accesses,
                htt_accesses_max,
            },
        )
    }

    /// Per-component structure footprint.
    pub fn footprint(&self) -> Footprint {
        Footprint {
            binning_bytes: self.hash.footprint_bytes() + self.covers.len() as u64 * COVER_BYTES,
            htt_bytes: self.htts.iter().map(|h| h.footprint_bytes()).sum(),
            prefix_count: self.source_entry_count,
            prefix_bytes: self.source_prefix_bytes,
        }
    }

    /// Total leaf-chain heads across all trie-trees.
    pub fn leaf_head_count(&self) -> usize {
        self.htts
            .iter()
            .map(|h| h.leaf_heads().expect("validated").len())
            .sum()
    }

    /// One address per leaf chain of every trie-tree: following it through
    /// `lookup` reads that full chain, so the witness set exercises every
    /// leaf of the structure.
    pub fn leaf_witnesses(&self) -> Vec<Witness> {
        let mut out = Vec::new();
        for bin in &self.bins {
            let bin_high = (bin.key23 as u128) << (128 - BINNING_BITS as u32);
            for id in bin.htts.iter().flatten() {
                let htt = &self.htts[*id as usize];
                // Stack of (node index, remainder path bits, depth).
                let mut stack: Vec<(u16, u128, u8)> = alloc::vec![(htt.root(), 0, 0)];
                while let Some((idx, path, depth)) = stack.pop() {
                    match htt.decode(idx).expect("validated") {
                        Node::Trie(t) => {
                            let s = t.cuts_log2;
                            for (i, span) in t.spans().expect("validated").iter().enumerate() {
                                let tbits = span.size.trailing_zeros() as u8;
                                let consumed = s - tbits;
                                let pattern = (span.start >> tbits) as u128;
                                let child_path = path
                                    | (pattern << (128 - depth as u32 - consumed as u32));
                                stack.push((
                                    t.child_base + i as u16,
                                    child_path,
                                    depth + consumed,
                                ));
                            }
                        }
                        Node::Leaf(_) => {
                            out.push(Witness {
                                addr: bin_high | (path >> BINNING_BITS as u32),
                                htt: *id,
                                leaf_head: idx,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefix::{oracle_lpm, parse_table};

    fn addr(s: &str) -> u128 {
        u128::from_be_bytes(s.parse::<core::net::Ipv6Addr>().unwrap().octets())
    }

    // Immutable after build: concurrent readers are safe.
    #[test]
    fn index_is_send_and_sync() {
        fn check<T: Send + Sync>() {}
        check::<ShipIndex>();
    }

    #[test]
    fn empty_table_all_misses() {
        let t = parse_table("", "t").unwrap();
        let idx = build_ship(&t, 3, &HttConfig::default(), &BuildOptions::default()).unwrap();
        let (hit, stats) = idx.lookup(addr("2001:db8::1"));
        assert_eq!(hit, None);
        assert_eq!(stats.hash_accesses, 2);
        assert_eq!(stats.htt_accesses_max, 0);
        assert_eq!(idx.bin_count(), 0);
    }

    #[test]
    fn unbinned_address_misses_with_two_accesses() {
        let t = parse_table("2001:db8::/32 7\n", "t").unwrap();
        let idx = build_ship(&t, 3, &HttConfig::default(), &BuildOptions::default()).unwrap();
        let (hit, stats) = idx.lookup(addr("fe80::1"));
        assert_eq!(hit, None);
        assert_eq!(stats.hash_accesses, 2);
        assert_eq!(stats.htt_accesses_max, 0);
    }

    #[test]
    fn longer_group_wins_priority() {
        let t = parse_table("2001:db8::/32 1\n2001:db8:a::/48 2\n", "t").unwrap();
        let idx = build_ship(&t, 3, &HttConfig::default(), &BuildOptions::default()).unwrap();
        let (hit, _) = idx.lookup(addr("2001:db8:a::1"));
        assert_eq!(
            hit,
            Some(RouteMatch {
                prefix_length: 48,
                nhi: 2
            })
        );
        let (hit, _) = idx.lookup(addr("2001:db8:b::1"));
        assert_eq!(
            hit,
            Some(RouteMatch {
                prefix_length: 32,
                nhi: 1
            })
        );
    }

    #[test]
    fn member_conservation_across_groups() {
        let t = parse_table(
            "2001:db8::/32 1\n2001:db8:a::/48 2\n2001:db8:a:b::/64 3\n2400::/23 4\n2001::/16 5\n",
            "t",
        )
        .unwrap();
        let idx = build_ship(&t, 3, &HttConfig::default(), &BuildOptions::default()).unwrap();
        let normalized = normalize_with_cutoff(&t, idx.options.lazy_cutoff).unwrap();
        // Group membership is conserved: the groups partition the bins, and
        // the bins partition the normalized entries.
        let mut stored = 0usize;
        let bins = build_bins(&normalized);
        for bin in &bins {
            for g in split_bin(bin, &idx.partition).unwrap() {
                stored += g.members.len();
            }
        }
        assert_eq!(stored, normalized.entries.len());
    }

    #[test]
    fn covers_resolve_when_no_bin_matches() {
        let t = parse_table("::/0 1\n2001:db8::/32 7\n", "t").unwrap();
        let idx = build_ship(&t, 2, &HttConfig::default(), &BuildOptions::default()).unwrap();
        // Under the binned space the /32 wins.
        let (hit, _) = idx.lookup(addr("2001:db8::1"));
        assert_eq!(hit.unwrap().prefix_length, 32);
        // Anywhere else the default route answers, with no bin found.
        let (hit, stats) = idx.lookup(addr("9999::1"));
        assert_eq!(
            hit,
            Some(RouteMatch {
                prefix_length: 0,
                nhi: 1
            })
        );
        assert_eq!(stats.hash_accesses, 2);
    }

    #[test]
    fn random_tables_match_oracle_end_to_end() {
        let mut rng = crate::rng::SplitMix64::new(0xabcdef);
        for round in 0..4 {
            let table = crate::synthgen::gen_mixed(400, 8, 64, 1000 + round);
            let idx =
                build_ship(&table, 3, &HttConfig::default(), &BuildOptions::default()).unwrap();
            for _ in 0..4000 {
                let a = if rng.chance(1, 3) {
                    rng.next_u128()
                } else {
                    let e = &table.entries[rng.below(table.len() as u64) as usize];
                    e.value | (rng.next_u128() & !crate::prefix::high_mask(e.length))
                };
                let (got, stats) = idx.lookup(a);
                assert_eq!(got, oracle_lpm(&table, a), "round {round} addr {a:#x}");
                assert_eq!(stats.hash_accesses, 2);
            }
            for e in &table.entries {
                for a in [e.first_addr(), e.last_addr()] {
                    let (got, _) = idx.lookup(a);
                    assert_eq!(got, oracle_lpm(&table, a));
                }
            }
        }
    }

    #[test]
    fn witnesses_cover_every_leaf() {
        let table = crate::synthgen::gen_real_style(800, 77);
        let idx = build_ship(&table, 3, &HttConfig::default(), &BuildOptions::default()).unwrap();
        let witnesses = idx.leaf_witnesses();
        let mut seen: alloc::collections::BTreeSet<(u32, u16)> = Default::default();
        for w in &witnesses {
            // The witness address must actually reach its leaf chain.
            let (_, stats) = idx.lookup(w.addr);
            assert!(stats.htt_accesses_max >= 1);
            seen.insert((w.htt, w.leaf_head));
        }
        assert_eq!(seen.len(), idx.leaf_head_count());
    }

    #[test]
    fn footprint_components_positive_and_consistent() {
        let t = parse_table("2001:db8::/32 7\n", "t").unwrap();
        let idx = build_ship(&t, 1, &HttConfig::default(), &BuildOptions::default()).unwrap();
        let fp = idx.footprint();
        // Single prefix: exactly one leaf node plus the minimal hash table.
        assert_eq!(idx.htts.len(), 1);
        assert_eq!(idx.htts[0].node_count(), 1);
        assert_eq!(fp.htt_bytes, 64);
        assert_eq!(
            fp.binning_bytes,
            idx.hash.footprint_bytes()
        );
        assert_eq!(fp.total_bytes(), fp.binning_bytes + fp.htt_bytes);
        assert!(fp.bytes_per_prefix() > 0.0);
    }
}
