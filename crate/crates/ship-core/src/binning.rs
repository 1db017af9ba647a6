//! Level one: address block bins keyed on the 23 MSBs, resolved through a
//! perfect hash table in exactly two memory accesses.
//!
//! The hash is a seeded hash-and-displace construction: keys are split into
//! buckets, and each bucket is assigned a displacement under which all of its
//! keys land in distinct free slots. A lookup reads one displacement entry
//! and one slot, so the access count is the constant 2 regardless of table
//! size or outcome. Slots store the key alongside the bin pointer so that
//! foreign keys aliasing into an occupied slot are detected and rejected.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::normalize::{NormalizedPrefix, NormalizedTable, BINNING_BITS};
use crate::rng::mix64;

/// Memory accesses consumed by a single bin lookup: one for the hash
/// descriptor (displacement) read, one for the slot read.
pub const BIN_LOOKUP_ACCESSES: u32 = 2;

/// Accounting sizes: one slot (key + pointer) is one memory-bus word; the
/// hash descriptor is one displacement entry per bucket plus a fixed header.
pub const SLOT_BYTES: u64 = 8;
pub const DISPLACEMENT_BYTES: u64 = 4;
pub const BINNING_HEADER_BYTES: u64 = 16;

/// Average keys per displacement bucket.
const BUCKET_LOAD: usize = 4;
/// Bounded search space per bucket and bounded seed retries.
const MAX_DISPLACEMENT: u32 = 1 << 18;
const MAX_SEED_ATTEMPTS: u64 = 32;

/// All prefixes sharing one 23-bit key.
#[derive(Debug, Clone)]
pub struct AddressBlockBin {
    pub key23: u32,
    pub members: Vec<NormalizedPrefix>,
}

/// Groups normalized entries into address block bins, one per distinct
/// 23-bit key, sorted by key. Lazy covers are not binned; the engine folds
/// them in at priority-resolution time.
pub fn build_bins(table: &NormalizedTable) -> Vec<AddressBlockBin> {
    let mut sorted: Vec<&NormalizedPrefix> = table.entries.iter().collect();
    sorted.sort_unstable_by_key(|e| (e.key23(), e.value, e.stored_len));
    let mut bins: Vec<AddressBlockBin> = Vec::new();
    for e in sorted {
        match bins.last_mut() {
            Some(bin) if bin.key23 == e.key23() => bin.members.push(*e),
            _ => bins.push(AddressBlockBin {
                key23: e.key23(),
                members: vec![*e],
            }),
        }
    }
    bins
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    key23: u32,
    bin: u32,
}

const EMPTY_BIN: u32 = u32::MAX;

/// The perfect hash over the bin key set: maps each valid key to its bin
/// index and every other key to null.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerfectHash {
    seed: u64,
    displacements: Vec<u32>,
    slots: Vec<Slot>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinningError {
    LoadFactorOutOfRange,
    /// Construction failed for every attempted seed (listed).
    ConstructionFailed(Vec<u64>),
}

impl fmt::Display for BinningError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinningError::LoadFactorOutOfRange => write!(f, "load factor must be in (0, 1]"),
            BinningError::ConstructionFailed(seeds) => {
                write!(f, "perfect hash construction failed with seeds {seeds:?}")
            }
        }
    }
}

impl core::error::Error for BinningError {}

#[inline]
fn bucket_of(key: u32, seed: u64, buckets: usize) -> usize {
    (mix64(seed ^ 0xb1a5_0000_0000_0000 ^ key as u64) % buckets as u64) as usize
}

#[inline]
fn slot_of(key: u32, seed: u64, displacement: u32, slots: usize) -> usize {
    (mix64(seed ^ ((displacement as u64) << 32) ^ key as u64) % slots as u64) as usize
}

impl PerfectHash {
    /// Builds a perfect hash over `keys` (distinct 23-bit values, any order)
    /// with `ceil(len / load_factor)` slots. Deterministic for a fixed seed;
    /// on pathological failure the attempted seeds are reported.
    pub fn build(keys: &[u32], load_factor: f64, seed: u64) -> Result<Self, BinningError> {
        if !(load_factor > 0.0 && load_factor <= 1.0) {
            return Err(BinningError::LoadFactorOutOfRange);
        }
        let m = keys.len();
        if m == 0 {
            return Ok(Self {
                seed,
                displacements: Vec::new(),
                slots: Vec::new(),
            });
        }
        let n = ((m as f64 / load_factor) + 0.999_999) as usize;
        let n = n.max(m);
        let bucket_count = m.div_ceil(BUCKET_LOAD).max(1);

        let mut sorted_keys: Vec<u32> = keys.to_vec();
        sorted_keys.sort_unstable();
        let mut attempted = Vec::new();
        'seed: for attempt in 0..MAX_SEED_ATTEMPTS {
            let seed = seed.wrapping_add(attempt);
            attempted.push(seed);
            let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); bucket_count];
            for &key in &sorted_keys {
                buckets[bucket_of(key, seed, bucket_count)].push(key);
            }
            let mut order: Vec<usize> = (0..bucket_count).collect();
            order.sort_by_key(|&b| (usize::MAX - buckets[b].len(), b));

            let mut displacements = vec![0u32; bucket_count];
            let mut slots = vec![
                Slot {
                    key23: 0,
                    bin: EMPTY_BIN
                };
                n
            ];
            for &b in &order {
                let bucket = &buckets[b];
                if bucket.is_empty() {
                    continue;
                }
                let mut placed: Vec<usize> = Vec::with_capacity(bucket.len());
                let mut found = false;
                'disp: for d in 0..MAX_DISPLACEMENT {
                    placed.clear();
                    for &key in bucket {
                        let pos = slot_of(key, seed, d, n);
                        if slots[pos].bin != EMPTY_BIN || placed.contains(&pos) {
                            continue 'disp;
                        }
                        placed.push(pos);
                    }
                    displacements[b] = d;
                    for (i, &key) in bucket.iter().enumerate() {
                        slots[placed[i]] = Slot { key23: key, bin: 0 };
                    }
                    found = true;
                    break;
                }
                if !found {
                    continue 'seed;
                }
            }
            // Second pass writes the real bin indices now that layout is final.
            for slot in &mut slots {
                slot.bin = EMPTY_BIN;
            }
            for (idx, &key) in sorted_keys.iter().enumerate() {
                let b = bucket_of(key, seed, bucket_count);
                let pos = slot_of(key, seed, displacements[b], n);
                slots[pos] = Slot {
                    key23: key,
                    bin: idx as u32,
                };
            }
            return Ok(Self {
                seed,
                displacements,
                slots,
            });
        }
        Err(BinningError::ConstructionFailed(attempted))
    }

    /// Reconstructs a hash from its serialized parts.
    pub fn from_parts(seed: u64, displacements: Vec<u32>, raw_slots: Vec<(u32, u32)>) -> Self {
        Self {
            seed,
            displacements,
            slots: raw_slots
                .into_iter()
                .map(|(key23, bin)| Slot { key23, bin })
                .collect(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Hash table size N.
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn bucket_count(&self) -> usize {
        self.displacements.len()
    }

    pub fn raw_displacements(&self) -> &[u32] {
        &self.displacements
    }

    pub fn raw_slots(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.slots.iter().map(|s| (s.key23, s.bin))
    }

    /// Accounted structure size in bytes.
    pub fn footprint_bytes(&self) -> u64 {
        self.slots.len() as u64 * SLOT_BYTES
            + self.displacements.len() as u64 * DISPLACEMENT_BYTES
            + BINNING_HEADER_BYTES
    }

    /// Looks up a 23-bit key: the bin index, plus the constant access count.
    /// One displacement read, one slot read, valid or not.
    #[inline]
    pub fn lookup_key(&self, key: u32) -> (Option<u32>, u32) {
        if self.slots.is_empty() {
            return (None, BIN_LOOKUP_ACCESSES);
        }
        let b = bucket_of(key, self.seed, self.displacements.len());
        let d = self.displacements[b];
        let slot = &self.slots[slot_of(key, self.seed, d, self.slots.len())];
        if slot.bin != EMPTY_BIN && slot.key23 == key {
            (Some(slot.bin), BIN_LOOKUP_ACCESSES)
        } else {
            (None, BIN_LOOKUP_ACCESSES)
        }
    }
}

/// Level-one structure: the perfect hash plus the bins it points at.
#[derive(Debug, Clone)]
pub struct BinningTable {
    pub hash: PerfectHash,
    pub bins: Vec<AddressBlockBin>,
}

#[inline]
pub fn key23_of_addr(addr: u128) -> u32 {
    (addr >> (128 - BINNING_BITS as u32)) as u32
}

/// Builds the hash over a bin list (bins sorted by key23).
pub fn build_perfect_hash(
    bins: Vec<AddressBlockBin>,
    load_factor: f64,
    seed: u64,
) -> Result<BinningTable, BinningError> {
    let keys: Vec<u32> = bins.iter().map(|b| b.key23).collect();
    let hash = PerfectHash::build(&keys, load_factor, seed)?;
    Ok(BinningTable { hash, bins })
}

impl BinningTable {
    /// Resolves the bin covering `addr`, with the constant access count.
    pub fn lookup_bin(&self, addr: u128) -> (Option<&AddressBlockBin>, u32) {
        let (idx, accesses) = self.hash.lookup_key(key23_of_addr(addr));
        (idx.map(|i| &self.bins[i as usize]), accesses)
    }
}
