//! Hybrid trie-tree construction.
//!
//! Worklist build: the root region covers the group's whole remainder space;
//! a region holding at most `b` prefixes (after dropping prefixes fully
//! shadowed by longer ones) becomes a reduced D-Tree leaf, anything larger
//! is cut by the partition-count heuristic, merged by SNM, and its children
//! pushed. Leaves whose widest remainder would overflow the 6-bit LSR field
//! are forced deeper instead.

use alloc::vec::Vec;
use core::fmt;

use crate::normalize::BINNING_BITS;
use crate::pls::PlsGroup;

use super::node::{
    encode_node, leaf_entry_bits, LeafEntry, LeafNode, Node, NodeError, TrieNode, LEAF_HEADER_BITS,
};
use super::region::{count_partitions, shadow_eliminate, shadow_mask, Region, RegionPrefix};
use super::snm::apply_snm;
use super::{HttConfig, HttStructure, MAX_UNMATCHED_BITS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HttBuildError {
    EmptyGroup,
    Config(super::ConfigError),
    Node(NodeError),
    /// More prefixes in one indivisible region than a leaf can count: either
    /// the threshold is above the 4-bit field or the input holds pathological
    /// duplicates.
    LeafOverflow { path: u128, depth: u8, count: usize },
    /// Two region-spanning prefixes survived shadowing; duplicates upstream.
    AmbiguousSpanning { path: u128, depth: u8 },
    TooManyNodes(usize),
}

impl fmt::Display for HttBuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HttBuildError::EmptyGroup => write!(f, "cannot build a trie-tree for an empty group"),
            HttBuildError::Config(e) => write!(f, "config: {e}"),
            HttBuildError::Node(e) => write!(f, "node encode: {e}"),
            HttBuildError::LeafOverflow { path, depth, count } => write!(
                f,
                "leaf at region {path:#034x}/{depth} holds {count} prefixes, over the 4-bit count"
            ),
            HttBuildError::AmbiguousSpanning { path, depth } => write!(
                f,
                "two spanning prefixes in leaf region {path:#034x}/{depth}"
            ),
            HttBuildError::TooManyNodes(n) => {
                write!(f, "{n} nodes exceed the 16-bit node index space")
            }
        }
    }
}

impl core::error::Error for HttBuildError {}

impl From<NodeError> for HttBuildError {
    fn from(e: NodeError) -> Self {
        HttBuildError::Node(e)
    }
}

struct Pending {
    region: Region,
    /// Shadow-eliminated content of the region.
    prefixes: Vec<RegionPrefix>,
    slot: usize,
}

/// Widest in-leaf remainder a region's prefixes would need.
fn needed_unmatched_bits(region: &Region, prefixes: &[RegionPrefix]) -> u8 {
    prefixes
        .iter()
        .map(|p| p.len.saturating_sub(region.depth))
        .max()
        .unwrap_or(0)
}

fn build_leaf_chain(
    region: &Region,
    prefixes: &[RegionPrefix],
    cfg: &HttConfig,
    nodes: &mut Vec<Option<Node>>,
    slot: usize,
    spanning: &mut Vec<(u16, u8)>,
) -> Result<(), HttBuildError> {
    let mut entries: Vec<(LeafEntry, u8)> = prefixes
        .iter()
        .map(|p| {
            let len = p.len.saturating_sub(region.depth);
            let bits = if len == 0 {
                0
            } else {
                ((p.bits << region.depth) >> (128 - len as u32)) as u64
            };
            (
                LeafEntry {
                    bits,
                    len,
                    nhi: p.nhi,
                },
                p.original_len,
            )
        })
        .collect();
    entries.sort_unstable_by_key(|(e, _)| (e.len, e.bits, e.nhi));
    if entries.len() > cfg.leaf_threshold_b as usize || entries.len() >= 16 {
        return Err(HttBuildError::LeafOverflow {
            path: region.path,
            depth: region.depth,
            count: entries.len(),
        });
    }
    // Shadowing leaves at most one fully-consumed entry; its true length is
    // not recoverable from the image, so it rides in the side table.
    if entries.len() >= 2 && entries[0].0.len == 0 && entries[1].0.len == 0 {
        return Err(HttBuildError::AmbiguousSpanning {
            path: region.path,
            depth: region.depth,
        });
    }
    if let Some((first, original_len)) = entries.first() {
        if first.len == 0 {
            spanning.push((slot as u16, *original_len));
        }
    }

    let u = entries.iter().map(|(e, _)| e.len).max().unwrap_or(0);
    debug_assert!(u <= MAX_UNMATCHED_BITS);
    let per_node =
        ((cfg.node_size_bits - LEAF_HEADER_BITS) / leaf_entry_bits(u).max(1)).clamp(1, 15) as usize;
    let mut chunks: Vec<Vec<LeafEntry>> = entries
        .chunks(per_node.max(1))
        .map(|c| c.iter().map(|(e, _)| *e).collect())
        .collect();
    if chunks.is_empty() {
        chunks.push(Vec::new());
    }
    // Head sits at `slot`; continuations are appended at the end.
    let mut slots = alloc::vec![slot];
    for _ in 1..chunks.len() {
        slots.push(nodes.len());
        nodes.push(None);
    }
    if *slots.last().unwrap() > u16::MAX as usize {
        return Err(HttBuildError::TooManyNodes(nodes.len()));
    }
    for (i, chunk) in chunks.into_iter().enumerate() {
        let continued = i + 1 < slots.len();
        nodes[slots[i]] = Some(Node::Leaf(LeafNode {
            continued,
            unmatched_bits: u,
            continuation: if continued { slots[i + 1] as u16 } else { 0 },
            entries: chunk,
        }));
    }
    Ok(())
}

/// Builds the hybrid trie-tree for one PLS group.
///
/// Group prefixes are matched from bit 24 onward; the 23 binning bits were
/// consumed by level one. Lookup semantics over the built structure equal a
/// linear scan of the group ranked by original length.
pub fn build_htt(group: &PlsGroup, cfg: &HttConfig) -> Result<HttStructure, HttBuildError> {
    cfg.validate().map_err(HttBuildError::Config)?;
    if group.members.is_empty() {
        return Err(HttBuildError::EmptyGroup);
    }
    let projected: Vec<RegionPrefix> = group
        .members
        .iter()
        .map(|m| RegionPrefix {
            bits: m.value << BINNING_BITS as u32,
            len: m.stored_len - BINNING_BITS,
            original_len: m.original_len,
            nhi: m.nhi,
        })
        .collect();

    let mut nodes: Vec<Option<Node>> = alloc::vec![None];
    let mut spanning: Vec<(u16, u8)> = Vec::new();
    let mut work = alloc::vec![Pending {
        region: Region::ROOT,
        prefixes: shadow_eliminate(&Region::ROOT, &projected),
        slot: 0,
    }];

    while let Some(pending) = work.pop() {
        let Pending {
            region,
            prefixes,
            slot,
        } = pending;
        let leaf_ok = prefixes.len() <= cfg.leaf_threshold_b as usize
            && needed_unmatched_bits(&region, &prefixes) <= MAX_UNMATCHED_BITS;
        if leaf_ok {
            build_leaf_chain(&region, &prefixes, cfg, &mut nodes, slot, &mut spanning)?;
            continue;
        }
        let decision = count_partitions(&prefixes, &region, cfg.max_stride_bits);
        let s = decision.cuts_log2;
        let sub_count = 1usize << s;

        // Contents per equi-sized sub-region, shadow-eliminated in place.
        let mut contents: Vec<Vec<u32>> = alloc::vec![Vec::new(); sub_count];
        for (id, p) in prefixes.iter().enumerate() {
            let child_depth = region.depth + s;
            let (lo, hi) = if p.len >= child_depth {
                let w = ((p.bits << region.depth) >> (128 - s as u32)) as usize;
                (w, w)
            } else if p.len <= region.depth {
                (0, sub_count - 1)
            } else {
                let covered = 1usize << (child_depth - p.len);
                let w = ((p.bits << region.depth) >> (128 - s as u32)) as usize;
                let start = w & !(covered - 1);
                (start, start + covered - 1)
            };
            for ids in &mut contents[lo..=hi] {
                ids.push(id as u32);
            }
        }
        for (j, ids) in contents.iter_mut().enumerate() {
            if ids.len() > 1 {
                let sub = region.child(s, j as u16);
                let subset: Vec<RegionPrefix> =
                    ids.iter().map(|&i| prefixes[i as usize]).collect();
                let mask = shadow_mask(&sub, &subset);
                let mut keep = mask.iter();
                ids.retain(|_| *keep.next().unwrap());
            }
        }

        let snm = apply_snm(&contents, cfg.merge_threshold, cfg.snm_array_len as usize);
        let base = nodes.len();
        if base + snm.spans.len() > u16::MAX as usize + 1 {
            return Err(HttBuildError::TooManyNodes(base + snm.spans.len()));
        }
        for _ in 0..snm.spans.len() {
            nodes.push(None);
        }
        nodes[slot] = Some(Node::Trie(TrieNode {
            cuts_log2: s,
            child_base: base as u16,
            ltoh: snm.ltoh,
            htol: snm.htol,
        }));
        for (i, span) in snm.spans.iter().enumerate() {
            let t = span.size.trailing_zeros() as u8;
            let child = Region {
                path: region.path
                    | (((span.start >> t) as u128) << (128 - region.depth as u32 - (s - t) as u32)),
                depth: region.depth + (s - t),
            };
            // Union of the span's per-region contents; equal to shadowing at
            // the span level.
            let mut ids: Vec<u32> = Vec::new();
            for j in span.start..span.end() {
                ids.extend_from_slice(&contents[j as usize]);
            }
            ids.sort_unstable();
            ids.dedup();
            work.push(Pending {
                region: child,
                prefixes: ids.iter().map(|&i| prefixes[i as usize]).collect(),
                slot: base + i,
            });
        }
    }

    if nodes.len() > u16::MAX as usize + 1 {
        return Err(HttBuildError::TooManyNodes(nodes.len()));
    }
    let mut images = Vec::with_capacity(nodes.len() * cfg.node_size_bytes());
    for node in &nodes {
        let node = node.as_ref().expect("every reserved slot is filled");
        images.extend_from_slice(&encode_node(node, cfg.node_size_bits)?);
    }
    spanning.sort_unstable_by_key(|&(n, _)| n);
    HttStructure::from_parts(cfg.node_size_bytes(), 0, images, spanning)
        .map_err(|_| HttBuildError::TooManyNodes(nodes.len()))
}
