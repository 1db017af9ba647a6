//! Versioned binary codec for a built index.
//!
//! Layout: a fixed header (version, build parameters, table accounting, the
//! group bounds), the binning section (displacements and slots of the
//! perfect hash), the bin group table, the lazy cover list, and one dump per
//! trie-tree (root, node count, spanning side table, then the raw
//! little-endian node images). All integers little-endian; serialization is
//! canonical, so equal indexes produce identical bytes.

use alloc::vec::Vec;
use core::fmt;

use crate::binning::PerfectHash;
use crate::engine::{BinGroups, BuildOptions, ShipIndex};
use crate::htt::{HttConfig, HttStructure};
use crate::normalize::ShortCover;
use crate::pls::PlsPartition;

pub const MAGIC: [u8; 4] = *b"SHIP";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodecError {
    BadMagic,
    UnsupportedVersion(u16),
    Truncated,
    Corrupt(&'static str),
}

impl fmt::Display for CodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecError::BadMagic => write!(f, "not an index file (bad magic)"),
            CodecError::UnsupportedVersion(v) => write!(f, "unsupported index version {v}"),
            CodecError::Truncated => write!(f, "truncated index data"),
            CodecError::Corrupt(what) => write!(f, "corrupt index: {what}"),
        }
    }
}

impl core::error::Error for CodecError {}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).ok_or(CodecError::Truncated)?;
        let slice = self.buf.get(self.pos..end).ok_or(CodecError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }
    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u128(&mut self) -> Result<u128, CodecError> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }
    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

/// Serializes an index to its canonical byte image.
pub fn serialize_index(index: &ShipIndex) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(&MAGIC);
    w.u16(VERSION);
    w.u16(0); // flags
    w.u8(index.requested_k);
    w.u8(index.options.lazy_cutoff);
    w.u8(index.config.leaf_threshold_b);
    w.u8(index.config.max_stride_bits);
    w.u8(index.config.snm_array_len);
    w.u8(0);
    w.u16(0);
    w.u32(index.config.merge_threshold);
    w.u32(index.config.node_size_bits);
    w.u64(index.options.seed);
    w.u64(index.options.load_factor.to_bits());
    w.u64(index.source_entry_count);
    w.u64(index.source_prefix_bytes);
    w.u8(index.partition.bounds.len() as u8);
    for &b in &index.partition.bounds {
        w.u8(b);
    }

    w.u64(index.hash.slot_count() as u64);
    w.u64(index.hash.bucket_count() as u64);
    w.u64(index.hash.seed());
    for &d in index.hash.raw_displacements() {
        w.u32(d);
    }
    for (key, bin) in index.hash.raw_slots() {
        w.u32(key);
        w.u32(bin);
    }

    w.u64(index.bins.len() as u64);
    for bin in &index.bins {
        w.u32(bin.key23);
        for id in &bin.htts {
            w.u32(id.unwrap_or(u32::MAX));
        }
    }

    w.u64(index.covers.len() as u64);
    for c in &index.covers {
        w.u128(c.value);
        w.u8(c.original_len);
        w.u8(c.nhi);
    }

    w.u64(index.htts.len() as u64);
    for htt in &index.htts {
        w.u16(htt.root());
        w.u32(htt.node_count() as u32);
        w.u32(htt.spanning_lengths().len() as u32);
        for &(node, len) in htt.spanning_lengths() {
            w.u16(node);
            w.u8(len);
        }
        w.buf.extend_from_slice(htt.images());
    }
    w.buf
}

/// Parses and validates a serialized index.
pub fn deserialize_index(bytes: &[u8]) -> Result<ShipIndex, CodecError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CodecError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let _flags = r.u16()?;
    let requested_k = r.u8()?;
    let lazy_cutoff = r.u8()?;
    let leaf_threshold_b = r.u8()?;
    let max_stride_bits = r.u8()?;
    let snm_array_len = r.u8()?;
    let _ = r.u8()?;
    let _ = r.u16()?;
    let merge_threshold = r.u32()?;
    let node_size_bits = r.u32()?;
    let seed = r.u64()?;
    let load_factor = f64::from_bits(r.u64()?);
    let source_entry_count = r.u64()?;
    let source_prefix_bytes = r.u64()?;
    let bounds_len = r.u8()? as usize;
    let mut bounds = Vec::with_capacity(bounds_len);
    for _ in 0..bounds_len {
        bounds.push(r.u8()?);
    }
    let config = HttConfig {
        leaf_threshold_b,
        merge_threshold,
        max_stride_bits,
        snm_array_len,
        node_size_bits,
    };
    config
        .validate()
        .map_err(|_| CodecError::Corrupt("config"))?;

    let n_slots = r.u64()? as usize;
    let n_buckets = r.u64()? as usize;
    let hash_seed = r.u64()?;
    if n_slots > bytes.len() || n_buckets > bytes.len() {
        return Err(CodecError::Truncated);
    }
    let mut displacements = Vec::with_capacity(n_buckets);
    for _ in 0..n_buckets {
        displacements.push(r.u32()?);
    }
    let mut slots = Vec::with_capacity(n_slots);
    for _ in 0..n_slots {
        let key = r.u32()?;
        let bin = r.u32()?;
        slots.push((key, bin));
    }
    let hash = PerfectHash::from_parts(hash_seed, displacements, slots);

    let bin_count = r.u64()? as usize;
    if bin_count > bytes.len() {
        return Err(CodecError::Truncated);
    }
    let mut bins = Vec::with_capacity(bin_count);
    for _ in 0..bin_count {
        let key23 = r.u32()?;
        if key23 >= 1 << 23 {
            return Err(CodecError::Corrupt("bin key"));
        }
        let mut htts = Vec::with_capacity(bounds_len);
        for _ in 0..bounds_len {
            let id = r.u32()?;
            htts.push((id != u32::MAX).then_some(id));
        }
        bins.push(BinGroups { key23, htts });
    }

    let cover_count = r.u64()? as usize;
    if cover_count > bytes.len() {
        return Err(CodecError::Truncated);
    }
    let mut covers = Vec::with_capacity(cover_count);
    for _ in 0..cover_count {
        let value = r.u128()?;
        let original_len = r.u8()?;
        let nhi = r.u8()?;
        if original_len >= 23 {
            return Err(CodecError::Corrupt("cover length"));
        }
        covers.push(ShortCover {
            value,
            original_len,
            nhi,
        });
    }

    let htt_count = r.u64()? as usize;
    if htt_count > bytes.len() {
        return Err(CodecError::Truncated);
    }
    let node_size_bytes = (node_size_bits / 8) as usize;
    let mut htts = Vec::with_capacity(htt_count);
    for _ in 0..htt_count {
        let root = r.u16()?;
        let node_count = r.u32()? as usize;
        let span_count = r.u32()? as usize;
        if span_count > bytes.len() {
            return Err(CodecError::Truncated);
        }
        let mut spanning = Vec::with_capacity(span_count);
        for _ in 0..span_count {
            let node = r.u16()?;
            let len = r.u8()?;
            spanning.push((node, len));
        }
        let images = r.take(
            node_count
                .checked_mul(node_size_bytes)
                .ok_or(CodecError::Truncated)?,
        )?;
        let htt = HttStructure::from_parts(node_size_bytes, root, images.to_vec(), spanning)
            .map_err(|_| CodecError::Corrupt("trie-tree"))?;
        htts.push(htt);
    }
    if !r.done() {
        return Err(CodecError::Corrupt("trailing bytes"));
    }

    // Cross-references.
    for bin in &bins {
        for id in bin.htts.iter().flatten() {
            if *id as usize >= htts.len() {
                return Err(CodecError::Corrupt("trie-tree id"));
            }
        }
    }

    Ok(ShipIndex {
        config,
        requested_k,
        options: BuildOptions {
            seed,
            load_factor,
            lazy_cutoff,
        },
        partition: PlsPartition { bounds },
        hash,
        bins,
        covers,
        htts,
        source_entry_count,
        source_prefix_bytes,
    })
}
