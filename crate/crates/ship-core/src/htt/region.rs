//! Region arithmetic below the binning bits: overlap tests, shadow
//! elimination, and the partition-count heuristic.
//!
//! A region is an aligned interval of the 105-bit remainder space, named by a
//! path prefix. The partition-count heuristic doubles the number of
//! equi-sized sub-regions until the space objective Sm (replicated prefix
//! count plus the partition penalty, accumulated across iterations) exceeds
//! Smpf = 8 times the region's prefix count, and keeps the last partition
//! count that stayed within budget.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::prefix::{high_mask, top_bits_eq};

use super::REMAINDER_BITS;

/// A group member projected below the 23 binning bits. `bits` holds the
/// remainder left-aligned; `len` is the stored length minus 23.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionPrefix {
    pub bits: u128,
    pub len: u8,
    pub original_len: u8,
    pub nhi: u8,
}

impl RegionPrefix {
    #[inline]
    pub fn first(&self) -> u128 {
        self.bits
    }

    #[inline]
    pub fn last(&self) -> u128 {
        self.bits | !high_mask(self.len)
    }
}

/// An aligned interval of the remainder space: all values sharing the top
/// `depth` bits of `path`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub path: u128,
    pub depth: u8,
}

impl Region {
    pub const ROOT: Region = Region { path: 0, depth: 0 };

    #[inline]
    pub fn first(&self) -> u128 {
        self.path
    }

    #[inline]
    pub fn last(&self) -> u128 {
        self.path | !high_mask(self.depth)
    }

    /// True when the prefix and region share any address.
    #[inline]
    pub fn overlaps(&self, p: &RegionPrefix) -> bool {
        if p.len <= self.depth {
            top_bits_eq(self.path, p.bits, p.len)
        } else {
            top_bits_eq(p.bits, self.path, self.depth)
        }
    }

    /// True when the prefix covers the whole region.
    #[inline]
    pub fn spanned_by(&self, p: &RegionPrefix) -> bool {
        p.len <= self.depth && top_bits_eq(self.path, p.bits, p.len)
    }

    /// The sub-region at `index` among `2^s` equi-sized cuts.
    pub fn child(&self, s: u8, index: u16) -> Region {
        debug_assert!(self.depth + s <= REMAINDER_BITS + (128 - REMAINDER_BITS));
        let shift = 128 - (self.depth as u32 + s as u32);
        Region {
            path: self.path | ((index as u128) << shift),
            depth: self.depth + s,
        }
    }
}

/// Sorted-interval union with coalescing, for coverage queries.
#[derive(Default)]
struct IntervalUnion {
    // start -> inclusive end
    spans: BTreeMap<u128, u128>,
}

impl IntervalUnion {
    fn covers(&self, lo: u128, hi: u128) -> bool {
        // Intervals are kept coalesced, so coverage means one span holds both ends.
        match self.spans.range(..=lo).next_back() {
            Some((_, &end)) => end >= hi,
            None => false,
        }
    }

    fn insert(&mut self, lo: u128, hi: u128) {
        let mut lo = lo;
        let mut hi = hi;
        // Absorb a preceding span that overlaps or touches [lo, hi].
        if let Some((&s, &e)) = self.spans.range(..=lo).next_back() {
            if e >= lo || (lo > 0 && e == lo - 1) {
                lo = s;
                hi = hi.max(e);
                self.spans.remove(&s);
            }
        }
        // Absorb following spans that overlap or touch.
        loop {
            let next = self.spans.range(lo..).next().map(|(&s, &e)| (s, e));
            match next {
                Some((s, e)) if s <= hi || (hi < u128::MAX && s == hi + 1) => {
                    hi = hi.max(e);
                    self.spans.remove(&s);
                }
                _ => break,
            }
        }
        self.spans.insert(lo, hi);
    }
}

/// Per-prefix keep mask: false for every prefix whose overlap with `region`
/// is entirely covered by strictly longer (by original length) prefixes in
/// the same list. A dropped prefix can never be the winning match for any
/// address in the region.
///
/// At most one region-spanning prefix survives: two spanning prefixes are
/// nested, so the longer one always shadows the shorter.
pub fn shadow_mask(region: &Region, prefixes: &[RegionPrefix]) -> Vec<bool> {
    if prefixes.len() <= 1 {
        return alloc::vec![true; prefixes.len()];
    }
    let mut order: Vec<usize> = (0..prefixes.len()).collect();
    order.sort_unstable_by_key(|&i| {
        let p = &prefixes[i];
        (core::cmp::Reverse(p.original_len), p.bits, p.len)
    });
    let mut covered = IntervalUnion::default();
    let mut keep = alloc::vec![false; prefixes.len()];
    let mut i = 0;
    while i < order.len() {
        // Process one original-length class at a time: equal lengths cannot
        // shadow each other.
        let len = prefixes[order[i]].original_len;
        let mut j = i;
        while j < order.len() && prefixes[order[j]].original_len == len {
            let p = &prefixes[order[j]];
            let (lo, hi) = if p.len <= region.depth {
                (region.first(), region.last())
            } else {
                (p.first(), p.last())
            };
            keep[order[j]] = !covered.covers(lo, hi);
            j += 1;
        }
        for &idx in &order[i..j] {
            let p = &prefixes[idx];
            covered.insert(p.first().max(region.first()), p.last().min(region.last()));
        }
        i = j;
    }
    keep
}

/// [`shadow_mask`] applied: the surviving prefixes, input order preserved.
pub fn shadow_eliminate(region: &Region, prefixes: &[RegionPrefix]) -> Vec<RegionPrefix> {
    prefixes
        .iter()
        .zip(shadow_mask(region, prefixes))
        .filter_map(|(p, k)| k.then_some(*p))
        .collect()
}

/// Outcome of the partition-count heuristic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionDecision {
    /// Chosen number of equi-sized partitions: a power of two, at least 2.
    pub np: u32,
    /// `log2(np)`: bits consumed selecting a partition.
    pub cuts_log2: u8,
    /// Sm value of each iteration, in order.
    pub sm_trace: Vec<u64>,
    /// Space measurement budget: 8 times the region's prefix count.
    pub smpf: u64,
}

/// Number of the `2^s` equi-sized sub-regions of a depth-`depth` region that
/// `p` overlaps. A prefix shorter than the sub-region span counts once per
/// sub-region it covers; replication in the raw.
#[inline]
fn overlap_count(p: &RegionPrefix, depth: u8, s: u8) -> u64 {
    let child_depth = depth + s;
    if p.len >= child_depth {
        1
    } else {
        1u64 << (child_depth - p.len.max(depth))
    }
}

/// Chooses how many equi-sized partitions to cut a region into.
///
/// Doubles `np` from 2, scoring each step with
/// `Sm(np) = sum_j overlaps(sub-region j) + np + Sm(previous)`, and stops at
/// the first `np` whose Sm exceeds `Smpf = 8 * prefix count` or at the stride
/// cap. Returns the last `np` within budget, with a floor of 2.
pub fn count_partitions(
    prefixes: &[RegionPrefix],
    region: &Region,
    max_stride_bits: u8,
) -> PartitionDecision {
    debug_assert!(region.depth < REMAINDER_BITS);
    let available = REMAINDER_BITS - region.depth;
    let max_s = max_stride_bits.min(available).max(1);
    let np_cap = 1u32 << max_s;
    let smpf = prefixes.len() as u64 * 8;

    let mut np = 1u32;
    let mut sm_prev = 0u64;
    let mut sm_trace = Vec::new();
    let mut last_ok = None;
    loop {
        np *= 2;
        let s = np.trailing_zeros() as u8;
        let replicated: u64 = prefixes
            .iter()
            .map(|p| overlap_count(p, region.depth, s))
            .sum();
        let sm = replicated + np as u64 + sm_prev;
        sm_trace.push(sm);
        if sm <= smpf {
            last_ok = Some(np);
        }
        if sm > smpf || np >= np_cap {
            break;
        }
        sm_prev = sm;
    }
    let np = last_ok.unwrap_or(2);
    PartitionDecision {
        np,
        cuts_log2: np.trailing_zeros() as u8,
        sm_trace,
        smpf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn p(bits: u128, len: u8, original_len: u8, nhi: u8) -> RegionPrefix {
        RegionPrefix {
            bits,
            len,
            original_len,
            nhi,
        }
    }

    /// Brute-force per-sub-region overlap counter: the independent oracle
    /// for the heuristic's Sm terms.
    fn brute_force_overlaps(prefixes: &[RegionPrefix], region: &Region, s: u8) -> u64 {
        let mut total = 0;
        for j in 0..(1u32 << s) {
            let sub = region.child(s, j as u16);
            total += prefixes.iter().filter(|p| sub.overlaps(p)).count() as u64;
        }
        total
    }

    #[test]
    fn thirteen_disjoint_long_prefixes() {
        // 13 disjoint /32-style prefixes (len 9 past the binning bits),
        // spread over distinct quadrants: replication stays 0 (each lands in
        // one sub-region) until the penalty terms exceed Smpf = 104.
        let mut prefixes = vec![];
        for i in 0..13u32 {
            prefixes.push(p((i as u128) << (128 - 9), 9, 32, 1));
        }
        let d = count_partitions(&prefixes, &Region::ROOT, 10);
        assert_eq!(d.smpf, 104);
        // Oracle per iteration: Sm(2)=13+2=15, Sm(4)=13+4+15=32,
        // Sm(8)=13+8+32=53, Sm(16)=13+16+53=82, Sm(32)=13+32+82=127 > 104.
        let mut expected = vec![];
        let mut prev = 0u64;
        let mut np = 1u32;
        loop {
            np *= 2;
            let s = np.trailing_zeros() as u8;
            let sm = brute_force_overlaps(&prefixes, &Region::ROOT, s) + np as u64 + prev;
            expected.push(sm);
            if sm > 104 {
                break;
            }
            prev = sm;
        }
        assert_eq!(d.sm_trace, expected);
        assert_eq!(d.np, 16);
    }

    #[test]
    fn all_spanning_prefixes_replicate_everywhere() {
        // Every prefix covers the whole region: Sm(2) = 2*13 + 2 = 28.
        let prefixes: Vec<_> = (0..13).map(|i| p(0, 0, 0, i as u8)).collect();
        let d = count_partitions(&prefixes, &Region::ROOT, 10);
        assert_eq!(d.sm_trace[0], 28);
        assert_eq!(
            d.sm_trace[0],
            brute_force_overlaps(&prefixes, &Region::ROOT, 1) + 2
        );
        assert!(d.sm_trace.iter().all(|&sm| sm == *d.sm_trace.first().unwrap() || sm > 0));
        // Sm(4) = 4*13 + 4 + 28 = 84 <= 104; Sm(8) = 8*13 + 8 + 84 = 196 > 104.
        assert_eq!(d.np, 4);
    }

    #[test]
    fn np_is_power_of_two_at_least_two() {
        let prefixes: Vec<_> = (0..40u32)
            .map(|i| p(((i * 7919) as u128) << 100, 20, 43, 1))
            .collect();
        let d = count_partitions(&prefixes, &Region::ROOT, 10);
        assert!(d.np.is_power_of_two());
        assert!(d.np >= 2);
        assert!(d.np <= 1 << 10);
    }

    #[test]
    fn sm_trace_is_nondecreasing() {
        let prefixes: Vec<_> = (0..25u32)
            .map(|i| p(((i * 131) as u128) << (128 - 16), 16, 39, 1))
            .collect();
        let d = count_partitions(&prefixes, &Region::ROOT, 10);
        for w in d.sm_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn sm_terms_match_brute_force_on_random_regions() {
        let mut rng = crate::rng::SplitMix64::new(99);
        for _ in 0..40 {
            let depth = (rng.below(20)) as u8;
            let region = Region {
                path: (rng.next_u128() & high_mask(depth)),
                depth,
            };
            let mut prefixes = vec![];
            for _ in 0..(2 + rng.below(30)) {
                // Mix of spanning and interior prefixes.
                let len = (rng.below(26)) as u8;
                let bits = if len <= depth {
                    region.path & high_mask(len)
                } else {
                    region.path | (rng.next_u128() & !high_mask(depth) & high_mask(len))
                };
                prefixes.push(p(bits, len, len + 23, 1));
            }
            let d = count_partitions(&prefixes, &region, 6);
            let mut prev = 0u64;
            let mut np = 1u32;
            for &sm in &d.sm_trace {
                np *= 2;
                let s = np.trailing_zeros() as u8;
                let expect = brute_force_overlaps(&prefixes, &region, s) + np as u64 + prev;
                assert_eq!(sm, expect);
                prev = sm;
            }
        }
    }

    #[test]
    fn shadowing_drops_fully_covered_spanning_prefix() {
        // Region of depth 2; a /0-style spanning prefix shadowed by two
        // longer prefixes that tile the region.
        let region = Region {
            path: 0b11u128 << 126,
            depth: 2,
        };
        let spanning = p(0, 0, 0, 9);
        let left = p(0b110u128 << 125, 3, 26, 1);
        let right = p(0b111u128 << 125, 3, 26, 2);
        let kept = shadow_eliminate(&region, &[left, right, spanning]);
        assert_eq!(kept, vec![left, right]);
        // Remove one half: the spanning prefix survives.
        let kept = shadow_eliminate(&region, &[left, spanning]);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn shadowing_keeps_partially_covered() {
        let region = Region { path: 0, depth: 1 };
        let spanning = p(0, 0, 0, 9);
        let longer = p(0, 4, 27, 1); // covers 1/16 of the space
        let kept = shadow_eliminate(&region, &[longer, spanning]);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn equal_lengths_never_shadow() {
        let region = Region { path: 0, depth: 0 };
        let a = p(0, 1, 24, 1);
        let b = p(1u128 << 127, 1, 24, 2);
        let kept = shadow_eliminate(&region, &[a, b]);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn at_most_one_spanning_survivor() {
        let region = Region {
            path: 0b10u128 << 126,
            depth: 2,
        };
        let list = vec![p(0, 0, 0, 1), p(0b10u128 << 126, 2, 25, 2), p(0b1u128 << 127, 1, 24, 3)];
        let kept = shadow_eliminate(&region, &list);
        let spanning: Vec<_> = kept.iter().filter(|q| region.spanned_by(q)).collect();
        assert_eq!(spanning.len(), 1);
        assert_eq!(spanning[0].nhi, 2);
    }

    #[test]
    fn interval_union_coalesces() {
        let mut u = IntervalUnion::default();
        u.insert(10, 20);
        u.insert(22, 30);
        assert!(!u.covers(10, 30));
        u.insert(21, 21);
        assert!(u.covers(10, 30));
        u.insert(0, u128::MAX);
        assert!(u.covers(0, u128::MAX));
    }
}
