//! Selective Node Merge: collapsing low-density equi-sized regions into
//! power-of-two aligned spans, and the child-index arithmetic that navigates
//! the merged layout.
//!
//! Merging is bottom-up over buddy pairs: two adjacent spans of equal size,
//! aligned for the doubled span, merge when the union holds no more distinct
//! prefixes than the fuller side (merging costs nothing) or stays below the
//! merge threshold. The resulting span list is then made representable in
//! the node header: up to L spans are recorded from the low end (LtoH) and L
//! from the high end (HtoL); anything between must stay equi-sized, and the
//! last LtoH span must be a single so its extent stays decodable. Spans that
//! violate those rules are demoted back to singles.

use alloc::vec::Vec;

/// One stored child: `size` contiguous equi-sized regions starting at
/// `start`. `size` is a power of two and `start` is aligned to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: u16,
    pub size: u16,
}

impl Span {
    #[inline]
    pub fn end(&self) -> u16 {
        self.start + self.size
    }
}

/// The merged layout plus the index arrays recorded in the node header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnmOutcome {
    /// Stored children, left to right. `spans.len()` is the child count.
    pub spans: Vec<Span>,
    /// Start indices of the spans recorded from the low end, ascending;
    /// always holds at least the first span (start 0).
    pub ltoh: Vec<u16>,
    /// Start indices of the spans recorded from the high end, ascending;
    /// empty when every span fits in `ltoh`.
    pub htol: Vec<u16>,
}

fn union_len(a: &[u32], b: &[u32]) -> usize {
    let mut i = 0;
    let mut j = 0;
    let mut n = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
        n += 1;
    }
    n + (a.len() - i) + (b.len() - j)
}

fn union(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut i = 0;
    let mut j = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            core::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            core::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Two spans may merge when the union adds nothing over the fuller side
/// (every prefix of one is replicated in the other) or the union stays
/// below the threshold.
#[inline]
fn may_merge(a: &[u32], b: &[u32], threshold: u32) -> bool {
    let u = union_len(a, b);
    u == a.len().max(b.len()) || u < threshold as usize
}

/// Applies selective node merge over `2^s` equi-sized regions.
///
/// `contents[j]` holds the (sorted, distinct) prefix ids overlapping region
/// `j`. Returns the merged spans and the LtoH/HtoL header arrays, each
/// holding at most `l_max` entries. The full region is never collapsed into
/// a single span: a node always keeps at least two children so every level
/// consumes at least one bit.
pub fn apply_snm(contents: &[Vec<u32>], merge_threshold: u32, l_max: usize) -> SnmOutcome {
    let total = contents.len();
    debug_assert!(total.is_power_of_two() && total >= 2);
    debug_assert!(l_max >= 1);

    let mut spans: Vec<(Span, Vec<u32>)> = contents
        .iter()
        .enumerate()
        .map(|(i, c)| {
            (
                Span {
                    start: i as u16,
                    size: 1,
                },
                c.clone(),
            )
        })
        .collect();

    // Bottom-up buddy merging, level by level.
    let s = total.trailing_zeros();
    for level in 0..s {
        let size = 1u16 << level;
        let mut merged: Vec<(Span, Vec<u32>)> = Vec::with_capacity(spans.len());
        let mut iter = spans.into_iter().peekable();
        while let Some((span, content)) = iter.next() {
            let buddy_ok = span.size == size
                && span.start % (size * 2) == 0
                && iter
                    .peek()
                    .is_some_and(|(b, _)| b.size == size && b.start == span.end())
                && !(size as usize * 2 == total);
            if buddy_ok {
                let (_, buddy_content) = iter.peek().unwrap();
                if may_merge(&content, buddy_content, merge_threshold) {
                    let (b, buddy_content) = iter.next().unwrap();
                    merged.push((
                        Span {
                            start: span.start,
                            size: span.size + b.size,
                        },
                        union(&content, &buddy_content),
                    ));
                    continue;
                }
            }
            merged.push((span, content));
        }
        spans = merged;
    }

    // Demote merges the header cannot represent.
    loop {
        let t = spans.len();
        let lt = l_max.min(t);
        let ht = if t > lt { l_max.min(t - lt) } else { 0 };
        let mut demote: Option<usize> = None;
        for (i, (span, _)) in spans.iter().enumerate() {
            if span.size == 1 {
                continue;
            }
            let in_ltoh_delimited = i + 1 < lt;
            let in_htol = i >= t - ht && ht > 0;
            let ltoh_last_and_final = i + 1 == lt && t == lt; // extent ends at 2^s, decodable
            if !(in_ltoh_delimited || in_htol || ltoh_last_and_final) {
                demote = Some(i);
                break;
            }
        }
        match demote {
            Some(i) => {
                let (span, _) = spans.remove(i);
                for (k, off) in (span.start..span.end()).enumerate() {
                    spans.insert(
                        i + k,
                        (
                            Span {
                                start: off,
                                size: 1,
                            },
                            contents[off as usize].clone(),
                        ),
                    );
                }
            }
            None => break,
        }
    }

    let t = spans.len();
    let lt = l_max.min(t);
    let ht = if t > lt { l_max.min(t - lt) } else { 0 };
    SnmOutcome {
        ltoh: spans[..lt].iter().map(|(s, _)| s.start).collect(),
        htol: spans[t - ht..].iter().map(|(s, _)| s.start).collect(),
        spans: spans.into_iter().map(|(s, _)| s).collect(),
    }
}

/// Maps an s-bit destination bit-sequence to the stored child index of a
/// merged layout, from the header arrays alone.
///
/// Three cases: the sequence falls in the LtoH zone (index of the closest
/// LtoH entry at or below it), in the HtoL zone (its position there plus
/// every stored child before the zone), or in the untouched equi-sized
/// middle (offset past the LtoH zone). With full arrays this reduces to
/// `index_htol + htol[0] - ltoh[L-1] + L - 1` and
/// `bits - ltoh[L-1] + L - 1` for the latter two cases.
pub fn compute_child_index(bits: u16, ltoh: &[u16], htol: &[u16]) -> u16 {
    debug_assert!(!ltoh.is_empty());
    let last = *ltoh.last().unwrap();
    match htol.first() {
        // Every span is recorded in LtoH; its position is the index.
        None => ltoh.partition_point(|&l| l <= bits) as u16 - 1,
        Some(&h0) if bits >= h0 => {
            let pos = htol.partition_point(|&h| h <= bits) as u16 - 1;
            let middle = h0 - last - 1;
            pos + ltoh.len() as u16 + middle
        }
        Some(_) if bits <= last => ltoh.partition_point(|&l| l <= bits) as u16 - 1,
        Some(_) => bits - last + ltoh.len() as u16 - 1,
    }
}

/// The stored child index together with how many of the s cut bits the
/// matched child actually pins down (a span of `2^t` regions leaves t bits
/// for deeper nodes).
pub fn resolve_child(bits: u16, ltoh: &[u16], htol: &[u16], cuts_log2: u8) -> (u16, u8) {
    let index = compute_child_index(bits, ltoh, htol);
    let total = 1u16 << cuts_log2;
    let in_ltoh = htol.is_empty() || bits <= *ltoh.last().unwrap();
    let (start, end) = if in_ltoh {
        let pos = ltoh.partition_point(|&l| l <= bits) - 1;
        let start = ltoh[pos];
        let end = match ltoh.get(pos + 1) {
            Some(&next) => next,
            // Last LtoH span: a single when anything follows, otherwise it
            // runs to the end of the region.
            None if htol.is_empty() => total,
            None => start + 1,
        };
        (start, end)
    } else if bits >= htol[0] {
        let pos = htol.partition_point(|&h| h <= bits) - 1;
        let start = htol[pos];
        let end = htol.get(pos + 1).copied().unwrap_or(total);
        (start, end)
    } else {
        (bits, bits + 1)
    };
    let span = end - start;
    debug_assert!(span.is_power_of_two());
    (index, cuts_log2 - span.trailing_zeros() as u8)
}
