//! Level two: prefix length sorting.
//!
//! Each bin's prefixes are split into K groups covering disjoint prefix
//! length ranges. Bounds are chosen globally from the whole table's length
//! histogram: the k-1 most populous lengths become inclusive upper bounds
//! (ties broken toward the smaller length) and the final group absorbs all
//! remaining longer lengths. A single global partition keeps the lookup
//! datapath uniform: every bin probes the same K engines.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::binning::AddressBlockBin;
use crate::normalize::{NormalizedPrefix, NormalizedTable, BINNING_BITS};

/// Upper length bound used when a histogram is empty.
const FULL_LENGTH: u8 = 128;

/// A partition of the stored-length space into K = `bounds.len()` ranges.
/// Group i covers `(bounds[i-1], bounds[i]]`, with group 0 starting just
/// below the binning width so stored /23 entries land in it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlsPartition {
    pub bounds: Vec<u8>,
}

impl PlsPartition {
    pub fn k(&self) -> usize {
        self.bounds.len()
    }

    /// The (exclusive lower, inclusive upper) range of group `idx`.
    pub fn range(&self, idx: usize) -> (u8, u8) {
        let lower = if idx == 0 {
            BINNING_BITS - 1
        } else {
            self.bounds[idx - 1]
        };
        (lower, self.bounds[idx])
    }

    /// Index of the group covering a stored length, if any.
    pub fn group_of(&self, stored_len: u8) -> Option<usize> {
        let idx = self.bounds.partition_point(|&b| b < stored_len);
        (idx < self.bounds.len()).then_some(idx)
    }
}

/// A prefix-length range plus the bin members falling in it.
#[derive(Debug, Clone)]
pub struct PlsGroup {
    /// Exclusive lower bound.
    pub lower: u8,
    /// Inclusive upper bound.
    pub upper: u8,
    pub members: Vec<NormalizedPrefix>,
}

/// Counts stored lengths over the normalized table. Lazy covers count once
/// at their stored width (23). The counts sum to `table.len()`.
pub fn length_histogram(table: &NormalizedTable) -> BTreeMap<u8, u64> {
    let mut hist: BTreeMap<u8, u64> = BTreeMap::new();
    for e in &table.entries {
        *hist.entry(e.stored_len).or_default() += 1;
    }
    if !table.covers.is_empty() {
        *hist.entry(BINNING_BITS).or_default() += table.covers.len() as u64;
    }
    hist
}

/// Chooses up to `k` group bounds from a length histogram.
///
/// The k-1 most populous lengths (ties toward the smaller length) become
/// inclusive upper bounds in ascending order; the maximum present length
/// closes the final group. Degenerate histograms reduce k to what they
/// support rather than erroring.
pub fn choose_bounds(hist: &BTreeMap<u8, u64>, k: usize) -> PlsPartition {
    let k = k.max(1);
    let present: Vec<(u8, u64)> = hist
        .iter()
        .filter(|&(_, &c)| c > 0)
        .map(|(&l, &c)| (l, c))
        .collect();
    if present.is_empty() {
        return PlsPartition {
            bounds: alloc::vec![FULL_LENGTH],
        };
    }
    let max_len = present.iter().map(|&(l, _)| l).max().unwrap();
    let want = k.min(present.len());

    // The maximum present length always closes the final group, so peaks are
    // drawn from the remaining lengths: most populous first, ties toward the
    // smaller length.
    let mut by_count: Vec<(u8, u64)> = present.into_iter().filter(|&(l, _)| l != max_len).collect();
    by_count.sort_unstable_by(|a, b| (b.1, a.0).cmp(&(a.1, b.0)));
    let mut bounds: Vec<u8> = by_count[..want - 1].iter().map(|&(l, _)| l).collect();
    bounds.push(max_len);
    bounds.sort_unstable();
    PlsPartition { bounds }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlsError {
    /// A member's stored length fell outside every range: a bounds bug.
    LengthOutsidePartition { stored_len: u8 },
}

impl fmt::Display for PlsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlsError::LengthOutsidePartition { stored_len } => {
                write!(f, "stored length {stored_len} outside every PLS range")
            }
        }
    }
}

impl core::error::Error for PlsError {}

/// Sorts a bin's members into the partition's groups. Groups with no members
/// come back empty (and get no trie-tree built for them).
pub fn split_bin(bin: &AddressBlockBin, part: &PlsPartition) -> Result<Vec<PlsGroup>, PlsError> {
    let mut groups: Vec<PlsGroup> = (0..part.k())
        .map(|i| {
            let (lower, upper) = part.range(i);
            PlsGroup {
                lower,
                upper,
                members: Vec::new(),
            }
        })
        .collect();
    for m in &bin.members {
        match part.group_of(m.stored_len) {
            Some(g) => groups[g].members.push(*m),
            None => {
                return Err(PlsError::LengthOutsidePartition {
                    stored_len: m.stored_len,
                })
            }
        }
    }
    Ok(groups)
}
