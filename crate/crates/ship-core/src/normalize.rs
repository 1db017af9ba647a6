//! Normalization of a prefix table onto the 23-bit binning key space.
//!
//! Every entry shorter than /23 is converted into /23 coverage before
//! binning. Entries at or above the lazy cutoff are expanded eagerly into
//! `2^(23 - length)` stored-/23 entries; entries below the cutoff would blow
//! up combinatorially (a /0 covers all 2^23 keys) and are kept as
//! covers-everything markers resolved at lookup time. Both representations
//! preserve the original length, which ranks an expanded entry below any
//! genuinely longer match during priority resolution.

use alloc::vec::Vec;
use core::fmt;

use crate::prefix::{top_bits_eq, PrefixTable};

/// Number of most significant bits consumed by address block binning.
pub const BINNING_BITS: u8 = 23;

/// Default original-length threshold below which expansion is kept lazy.
pub const DEFAULT_LAZY_CUTOFF: u8 = 8;

/// A table entry after normalization. `stored_len >= 23`; `original_len` is
/// the pre-expansion length used for longest-prefix ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NormalizedPrefix {
    pub value: u128,
    pub stored_len: u8,
    pub original_len: u8,
    pub nhi: u8,
}

impl NormalizedPrefix {
    /// The 23-bit binning key.
    #[inline]
    pub fn key23(&self) -> u32 {
        (self.value >> (128 - BINNING_BITS as u32)) as u32
    }
}

/// A short prefix kept unexpanded: it covers every 23-bit key under it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShortCover {
    pub value: u128,
    pub original_len: u8,
    pub nhi: u8,
}

impl ShortCover {
    #[inline]
    pub fn matches(&self, addr: u128) -> bool {
        top_bits_eq(self.value, addr, self.original_len)
    }

    /// Number of 23-bit keys this cover would expand into eagerly.
    pub fn expanded_key_count(&self) -> u64 {
        1u64 << (BINNING_BITS - self.original_len)
    }
}

/// A normalized table: eagerly expanded entries plus lazy covers, with the
/// source table's accounting retained for footprint metrics.
#[derive(Debug, Clone, Default)]
pub struct NormalizedTable {
    pub entries: Vec<NormalizedPrefix>,
    /// Sorted by descending original length: the first matching cover wins.
    pub covers: Vec<ShortCover>,
    pub source_entry_count: u64,
    pub source_prefix_bytes: u64,
}

impl NormalizedTable {
    /// Total stored entries, counting each lazy cover once.
    pub fn len(&self) -> usize {
        self.entries.len() + self.covers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.covers.is_empty()
    }

    /// The best (longest original length) cover matching `addr`.
    pub fn best_cover(&self, addr: u128) -> Option<&ShortCover> {
        self.covers.iter().find(|c| c.matches(addr))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormalizeError {
    LazyCutoffOutOfRange(u8),
}

impl fmt::Display for NormalizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizeError::LazyCutoffOutOfRange(c) => {
                write!(f, "lazy expansion cutoff {c} out of range 0-23")
            }
        }
    }
}

impl core::error::Error for NormalizeError {}

/// Normalizes with the default lazy cutoff.
pub fn normalize_to_23(table: &PrefixTable) -> NormalizedTable {
    normalize_with_cutoff(table, DEFAULT_LAZY_CUTOFF).expect("default cutoff is valid")
}

/// Normalizes a table so every stored entry is keyed on at least 23 bits.
///
/// Entries with `length < lazy_below` become [`ShortCover`]s; entries with
/// `lazy_below <= length < 23` are expanded eagerly. Expanded entries that
/// collide on (value, 23) keep only the longest original length: the shorter
/// one can never win priority resolution anywhere under that key. A cutoff of
/// 0 expands everything eagerly, 23 keeps every short prefix lazy; both sides
/// produce identical lookup semantics.
pub fn normalize_with_cutoff(
    table: &PrefixTable,
    lazy_below: u8,
) -> Result<NormalizedTable, NormalizeError> {
    if lazy_below > BINNING_BITS {
        return Err(NormalizeError::LazyCutoffOutOfRange(lazy_below));
    }
    let mut entries: Vec<NormalizedPrefix> = Vec::with_capacity(table.len());
    let mut covers: Vec<ShortCover> = Vec::new();
    for e in &table.entries {
        if e.length >= BINNING_BITS {
            entries.push(NormalizedPrefix {
                value: e.value,
                stored_len: e.length,
                original_len: e.length,
                nhi: e.nhi,
            });
        } else if e.length < lazy_below {
            covers.push(ShortCover {
                value: e.value,
                original_len: e.length,
                nhi: e.nhi,
            });
        } else {
            let count = 1u64 << (BINNING_BITS - e.length);
            let step = 1u128 << (128 - BINNING_BITS as u32);
            for i in 0..count {
                entries.push(NormalizedPrefix {
                    value: e.value | (i as u128 * step),
                    stored_len: BINNING_BITS,
                    original_len: e.length,
                    nhi: e.nhi,
                });
            }
        }
    }
    // Deduplicate stored-/23 collisions, keeping the longest original length.
    // Collisions can only involve stored_len == 23: longer entries were
    // already unique in the source table.
    entries.sort_unstable_by(|a, b| {
        (a.value, a.stored_len, b.original_len).cmp(&(b.value, b.stored_len, a.original_len))
    });
    entries.dedup_by(|next, kept| next.value == kept.value && next.stored_len == kept.stored_len);
    covers.sort_unstable_by(|a, b| {
        (b.original_len, a.value, a.nhi).cmp(&(a.original_len, b.value, b.nhi))
    });
    Ok(NormalizedTable {
        entries,
        covers,
        source_entry_count: table.len() as u64,
        source_prefix_bytes: table.prefix_bytes(),
    })
}

/// Brute-force LPM over a normalized table (entries plus covers), ranking by
/// original length. Used to check that normalization preserves semantics.
pub fn normalized_oracle_lpm(
    table: &NormalizedTable,
    addr: u128,
) -> Option<crate::prefix::RouteMatch> {
    let mut best: Option<(u8, u8)> = None;
    for e in &table.entries {
        if top_bits_eq(e.value, addr, e.stored_len)
            && best.is_none_or(|(l, _)| e.original_len > l)
        {
            best = Some((e.original_len, e.nhi));
        }
    }
    for c in &table.covers {
        if c.matches(addr) && best.is_none_or(|(l, _)| c.original_len > l) {
            best = Some((c.original_len, c.nhi));
        }
    }
    best.map(|(prefix_length, nhi)| crate::prefix::RouteMatch { prefix_length, nhi })
}

/// The low-side complement of `high_mask` over the stored key width, used by
/// tests to enumerate an expansion's key range.
pub fn expanded_key_range(value: u128, length: u8) -> (u32, u64) {
    debug_assert!(length < BINNING_BITS);
    let first = (value >> (128 - BINNING_BITS as u32)) as u32;
    (first, 1u64 << (BINNING_BITS - length))
}
