//! Bit-exact node images.
//!
//! Non-terminal header: `[type:1 = 0][cuts:4][child base:16][LtoH 5x10]
//! [HtoL 5x10]`, 121 bits, zero-padded to the node size. Leaf header:
//! `[type:2 = 10 terminal / 11 continued][prefix count:4][LSR:6]
//! [continuation:16]`, 28 bits, followed by packed entries of
//! `[remainder: u bits][remainder length: ceil(log2(u+1)) bits][NHI:8]`.
//! Bits fill bytes MSB-first; a leaf's remainder bits sit left-aligned in
//! the u-bit field.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub const TRIE_TYPE_BITS: u32 = 1;
pub const CUTS_BITS: u32 = 4;
pub const CHILD_BASE_BITS: u32 = 16;
pub const SNM_SLOTS: usize = 5;
pub const SNM_INDEX_BITS: u32 = 10;
pub const SNM_ARRAY_BITS: u32 = 2 * (SNM_SLOTS as u32) * SNM_INDEX_BITS;
pub const TRIE_HEADER_BITS: u32 = TRIE_TYPE_BITS + CUTS_BITS + CHILD_BASE_BITS + SNM_ARRAY_BITS;

pub const LEAF_TYPE_BITS: u32 = 2;
pub const LEAF_COUNT_BITS: u32 = 4;
pub const LSR_BITS: u32 = 6;
pub const CONTINUATION_BITS: u32 = 16;
pub const LEAF_HEADER_BITS: u32 = LEAF_TYPE_BITS + LEAF_COUNT_BITS + LSR_BITS + CONTINUATION_BITS;
pub const NHI_BITS: u32 = 8;

/// Width of the per-entry remainder-length field for a leaf with `u`
/// unmatched bits: enough to count 0..=u.
pub const fn leaf_len_field_bits(u: u8) -> u32 {
    if u == 0 {
        0
    } else {
        64 - (u as u64).leading_zeros()
    }
}

/// Bits one packed entry occupies in a leaf with `u` unmatched bits.
pub const fn leaf_entry_bits(u: u8) -> u32 {
    u as u32 + leaf_len_field_bits(u) + NHI_BITS
}

/// A density-adaptive trie node. `ltoh`/`htol` hold only the valid entries;
/// encoding pads the remaining slots with zeros (unambiguous: valid LtoH
/// entries start at 0 and ascend strictly, valid HtoL entries are nonzero
/// and ascend strictly).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrieNode {
    pub cuts_log2: u8,
    pub child_base: u16,
    pub ltoh: Vec<u16>,
    pub htol: Vec<u16>,
}

impl TrieNode {
    /// Number of stored children implied by the header arrays.
    pub fn child_count(&self) -> Result<u16, NodeError> {
        Ok(self.spans()?.len() as u16)
    }

    /// Reconstructs the explicit merged-span layout from the header.
    pub fn spans(&self) -> Result<Vec<super::snm::Span>, NodeError> {
        use super::snm::Span;
        let total = 1u16 << self.cuts_log2;
        let mut spans = Vec::new();
        let mut push = |start: u16, end: u16| -> Result<(), NodeError> {
            if end <= start || end > total {
                return Err(NodeError::MalformedArrays);
            }
            spans.push(Span {
                start,
                size: end - start,
            });
            Ok(())
        };
        let last = *self.ltoh.last().ok_or(NodeError::MalformedArrays)?;
        for (i, &s) in self.ltoh.iter().enumerate() {
            let end = match self.ltoh.get(i + 1) {
                Some(&n) => n,
                None if self.htol.is_empty() => total,
                None => s + 1,
            };
            push(s, end)?;
        }
        if let Some(&h0) = self.htol.first() {
            for m in (last + 1)..h0 {
                push(m, m + 1)?;
            }
            for (i, &s) in self.htol.iter().enumerate() {
                let end = self.htol.get(i + 1).copied().unwrap_or(total);
                push(s, end)?;
            }
        }
        // The layout must tile the region with aligned power-of-two spans.
        let mut cursor = 0;
        for sp in &spans {
            if sp.start != cursor || !sp.size.is_power_of_two() || sp.start % sp.size != 0 {
                return Err(NodeError::MalformedArrays);
            }
            cursor = sp.end();
        }
        if cursor != total {
            return Err(NodeError::MalformedArrays);
        }
        Ok(spans)
    }
}

/// One packed leaf entry: the `len`-bit remainder value and its NHI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeafEntry {
    pub bits: u64,
    pub len: u8,
    pub nhi: u8,
}

/// A reduced D-Tree leaf node (one link of a possibly chained leaf).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafNode {
    pub continued: bool,
    /// LSR field: the widest remainder stored in this leaf chain.
    pub unmatched_bits: u8,
    /// Next node of the chain; meaningful only when `continued`.
    pub continuation: u16,
    pub entries: Vec<LeafEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Trie(TrieNode),
    Leaf(LeafNode),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeError {
    FieldOverflow(&'static str),
    MalformedArrays,
    NodeTooSmall { need_bits: u32, node_bits: u32 },
    BadImage,
}

impl fmt::Display for NodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeError::FieldOverflow(field) => write!(f, "field overflow: {field}"),
            NodeError::MalformedArrays => write!(f, "malformed SNM index arrays"),
            NodeError::NodeTooSmall {
                need_bits,
                node_bits,
            } => write!(f, "node needs {need_bits} bits, node size is {node_bits}"),
            NodeError::BadImage => write!(f, "undecodable node image"),
        }
    }
}

impl core::error::Error for NodeError {}

struct BitWriter {
    buf: Vec<u8>,
    bits: usize,
}

impl BitWriter {
    fn new(capacity_bytes: usize) -> Self {
        Self {
            buf: vec![0; capacity_bytes],
            bits: 0,
        }
    }

    fn put(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        debug_assert!(width == 64 || value < (1u64 << width));
        for i in (0..width).rev() {
            let bit = (value >> i) & 1;
            let pos = self.bits;
            self.buf[pos / 8] |= (bit as u8) << (7 - pos % 8);
            self.bits += 1;
        }
    }
}

struct BitReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn get(&mut self, width: u32) -> Result<u64, NodeError> {
        if self.pos + width as usize > self.buf.len() * 8 {
            return Err(NodeError::BadImage);
        }
        let mut v = 0u64;
        for _ in 0..width {
            let bit = (self.buf[self.pos / 8] >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        Ok(v)
    }
}

fn validate_trie(node: &TrieNode) -> Result<(), NodeError> {
    if node.cuts_log2 == 0 || node.cuts_log2 > 10 {
        return Err(NodeError::FieldOverflow("cuts"));
    }
    let total = 1u16 << node.cuts_log2;
    if node.ltoh.is_empty() || node.ltoh.len() > SNM_SLOTS || node.htol.len() > SNM_SLOTS {
        return Err(NodeError::MalformedArrays);
    }
    if node.ltoh[0] != 0 {
        return Err(NodeError::MalformedArrays);
    }
    for w in node.ltoh.windows(2) {
        if w[1] <= w[0] {
            return Err(NodeError::MalformedArrays);
        }
    }
    for w in node.htol.windows(2) {
        if w[1] <= w[0] {
            return Err(NodeError::MalformedArrays);
        }
    }
    if let Some(&h0) = node.htol.first() {
        if h0 == 0 || h0 <= *node.ltoh.last().unwrap() {
            return Err(NodeError::MalformedArrays);
        }
    }
    if node.ltoh.iter().chain(&node.htol).any(|&i| i >= total) {
        return Err(NodeError::MalformedArrays);
    }
    node.spans()?;
    Ok(())
}

fn validate_leaf(node: &LeafNode) -> Result<(), NodeError> {
    if node.entries.len() >= 1 << LEAF_COUNT_BITS {
        return Err(NodeError::FieldOverflow("prefix count"));
    }
    if node.unmatched_bits > 63 {
        return Err(NodeError::FieldOverflow("LSR"));
    }
    for e in &node.entries {
        if e.len > node.unmatched_bits {
            return Err(NodeError::FieldOverflow("remainder length"));
        }
        if e.len < 64 && e.bits >= (1u64 << e.len) {
            return Err(NodeError::FieldOverflow("remainder bits"));
        }
    }
    Ok(())
}

/// Encoded bit length of a node (before padding).
pub fn node_payload_bits(node: &Node) -> u32 {
    match node {
        Node::Trie(_) => TRIE_HEADER_BITS,
        Node::Leaf(l) => {
            LEAF_HEADER_BITS + l.entries.len() as u32 * leaf_entry_bits(l.unmatched_bits)
        }
    }
}

/// Encodes a node into its fixed-width image.
pub fn encode_node(node: &Node, node_size_bits: u32) -> Result<Vec<u8>, NodeError> {
    let need = node_payload_bits(node);
    if need > node_size_bits {
        return Err(NodeError::NodeTooSmall {
            need_bits: need,
            node_bits: node_size_bits,
        });
    }
    let mut w = BitWriter::new((node_size_bits / 8) as usize);
    match node {
        Node::Trie(t) => {
            validate_trie(t)?;
            w.put(0, TRIE_TYPE_BITS);
            w.put(t.cuts_log2 as u64, CUTS_BITS);
            w.put(t.child_base as u64, CHILD_BASE_BITS);
            for slot in 0..SNM_SLOTS {
                w.put(t.ltoh.get(slot).copied().unwrap_or(0) as u64, SNM_INDEX_BITS);
            }
            for slot in 0..SNM_SLOTS {
                w.put(t.htol.get(slot).copied().unwrap_or(0) as u64, SNM_INDEX_BITS);
            }
        }
        Node::Leaf(l) => {
            validate_leaf(l)?;
            w.put(if l.continued { 0b11 } else { 0b10 }, LEAF_TYPE_BITS);
            w.put(l.entries.len() as u64, LEAF_COUNT_BITS);
            w.put(l.unmatched_bits as u64, LSR_BITS);
            w.put(
                if l.continued { l.continuation as u64 } else { 0 },
                CONTINUATION_BITS,
            );
            let u = l.unmatched_bits;
            let len_bits = leaf_len_field_bits(u);
            for e in &l.entries {
                // Remainder bits left-aligned within the u-bit field.
                w.put(e.bits << (u - e.len), u as u32);
                w.put(e.len as u64, len_bits);
                w.put(e.nhi as u64, NHI_BITS);
            }
        }
    }
    Ok(w.buf)
}

/// Decodes a fixed-width node image (the image length is the node size).
pub fn decode_node(image: &[u8]) -> Result<Node, NodeError> {
    let mut r = BitReader::new(image);
    let first = r.get(1)?;
    if first == 0 {
        let cuts_log2 = r.get(CUTS_BITS)? as u8;
        let child_base = r.get(CHILD_BASE_BITS)? as u16;
        let mut raw_ltoh = [0u16; SNM_SLOTS];
        let mut raw_htol = [0u16; SNM_SLOTS];
        for slot in raw_ltoh.iter_mut() {
            *slot = r.get(SNM_INDEX_BITS)? as u16;
        }
        for slot in raw_htol.iter_mut() {
            *slot = r.get(SNM_INDEX_BITS)? as u16;
        }
        if raw_ltoh[0] != 0 {
            return Err(NodeError::BadImage);
        }
        let mut ltoh = alloc::vec![raw_ltoh[0]];
        for &v in &raw_ltoh[1..] {
            if v > *ltoh.last().unwrap() {
                ltoh.push(v);
            } else {
                break;
            }
        }
        let mut htol: Vec<u16> = Vec::new();
        for &v in &raw_htol {
            if v != 0 && htol.last().is_none_or(|&p| v > p) {
                htol.push(v);
            } else {
                break;
            }
        }
        let node = TrieNode {
            cuts_log2,
            child_base,
            ltoh,
            htol,
        };
        validate_trie(&node).map_err(|_| NodeError::BadImage)?;
        Ok(Node::Trie(node))
    } else {
        let continued = r.get(1)? == 1;
        let count = r.get(LEAF_COUNT_BITS)? as usize;
        let unmatched_bits = r.get(LSR_BITS)? as u8;
        let continuation = r.get(CONTINUATION_BITS)? as u16;
        let len_bits = leaf_len_field_bits(unmatched_bits);
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let field = r.get(unmatched_bits as u32)?;
            let len = r.get(len_bits)? as u8;
            if len > unmatched_bits {
                return Err(NodeError::BadImage);
            }
            let bits = field >> (unmatched_bits - len);
            // Padding below the remainder must be zero for the image to be
            // canonical.
            if unmatched_bits > len && field & ((1u64 << (unmatched_bits - len)) - 1) != 0 {
                return Err(NodeError::BadImage);
            }
            let nhi = r.get(NHI_BITS)? as u8;
            entries.push(LeafEntry { bits, len, nhi });
        }
        Ok(Node::Leaf(LeafNode {
            continued,
            unmatched_bits,
            continuation,
            entries,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trie_header_width_constants() {
        assert_eq!(TRIE_TYPE_BITS, 1);
        assert_eq!(CUTS_BITS, 4);
        assert_eq!(CHILD_BASE_BITS, 16);
        assert_eq!(SNM_ARRAY_BITS, 100);
        assert_eq!(TRIE_HEADER_BITS, 121);
        assert_eq!(LEAF_HEADER_BITS, 28);
    }

    #[test]
    fn trie_image_is_bit_exact() {
        // cuts = 2, base = 7, minimal arrays (ltoh = [0, 2], htol empty):
        // two stored halves of the four regions.
        let node = Node::Trie(TrieNode {
            cuts_log2: 2,
            child_base: 7,
            ltoh: alloc::vec![0, 2],
            htol: alloc::vec![],
        });
        let img = encode_node(&node, 512).unwrap();
        assert_eq!(img.len(), 64);
        // [0][0010][0000000000000111][0000000000 0000000010 ...]
        // First 21 bits: 0 0010 0000000000000111 -> 00010000 00000000 00111...
        assert_eq!(img[0], 0b0001_0000);
        assert_eq!(img[1], 0b0000_0000);
        assert_eq!(img[2], 0b0011_1000);
        // ltoh slot 1 = 2 occupies bits 31..41: bit 39 set.
        assert_eq!(img[4], 0b0000_0001);
        // Everything after bit 121 is zero padding.
        assert!(img[16..].iter().all(|&b| b == 0));
        assert_eq!(decode_node(&img).unwrap(), node);
    }

    #[test]
    fn leaf_image_layout_and_entry_width() {
        // u = 9: remainder length field is 4 bits, entry = 9 + 4 + 8 = 21.
        assert_eq!(leaf_len_field_bits(9), 4);
        assert_eq!(leaf_entry_bits(9), 21);
        let node = Node::Leaf(LeafNode {
            continued: false,
            unmatched_bits: 9,
            continuation: 0,
            entries: alloc::vec![
                LeafEntry {
                    bits: 0b1_0110_1011,
                    len: 9,
                    nhi: 0xa5
                },
                LeafEntry {
                    bits: 0b101,
                    len: 3,
                    nhi: 1
                },
            ],
        });
        assert_eq!(node_payload_bits(&node), 28 + 2 * 21);
        let img = encode_node(&node, 512).unwrap();
        // Header: [10][0010][001001][0*16]
        assert_eq!(img[0], 0b1000_1000);
        assert_eq!(img[1], 0b1001_0000);
        assert_eq!(decode_node(&img).unwrap(), node);
    }

    #[test]
    fn leaf_u0_has_no_length_field() {
        assert_eq!(leaf_len_field_bits(0), 0);
        let node = Node::Leaf(LeafNode {
            continued: false,
            unmatched_bits: 0,
            continuation: 0,
            entries: alloc::vec![LeafEntry {
                bits: 0,
                len: 0,
                nhi: 42
            }],
        });
        assert_eq!(node_payload_bits(&node), 28 + 8);
        let img = encode_node(&node, 128).unwrap();
        assert_eq!(decode_node(&img).unwrap(), node);
    }

    #[test]
    fn continued_leaf_round_trip() {
        let node = Node::Leaf(LeafNode {
            continued: true,
            unmatched_bits: 30,
            continuation: 999,
            entries: alloc::vec![LeafEntry {
                bits: (1 << 30) - 1,
                len: 30,
                nhi: 255
            }],
        });
        let img = encode_node(&node, 512).unwrap();
        assert_eq!(decode_node(&img).unwrap(), node);
    }

    #[test]
    fn field_overflow_errors() {
        let too_many_entries = Node::Leaf(LeafNode {
            continued: false,
            unmatched_bits: 1,
            continuation: 0,
            entries: alloc::vec![
                LeafEntry {
                    bits: 0,
                    len: 0,
                    nhi: 0
                };
                16
            ],
        });
        assert!(matches!(
            encode_node(&too_many_entries, 4096),
            Err(NodeError::FieldOverflow("prefix count"))
        ));
        let wide_lsr = Node::Leaf(LeafNode {
            continued: false,
            unmatched_bits: 64,
            continuation: 0,
            entries: alloc::vec![],
        });
        assert!(matches!(
            encode_node(&wide_lsr, 512),
            Err(NodeError::FieldOverflow("LSR"))
        ));
        let bad_cuts = Node::Trie(TrieNode {
            cuts_log2: 11,
            child_base: 0,
            ltoh: alloc::vec![0],
            htol: alloc::vec![],
        });
        assert!(encode_node(&bad_cuts, 512).is_err());
        let overflow_payload = Node::Leaf(LeafNode {
            continued: false,
            unmatched_bits: 63,
            continuation: 0,
            entries: alloc::vec![
                LeafEntry {
                    bits: 0,
                    len: 0,
                    nhi: 0
                };
                12
            ],
        });
        assert!(matches!(
            encode_node(&overflow_payload, 128),
            Err(NodeError::NodeTooSmall { .. })
        ));
    }

    #[test]
    fn array_padding_is_unambiguous() {
        let node = Node::Trie(TrieNode {
            cuts_log2: 4,
            child_base: 3,
            ltoh: alloc::vec![0, 2, 3],
            htol: alloc::vec![9, 10, 12],
        });
        let img = encode_node(&node, 512).unwrap();
        assert_eq!(decode_node(&img).unwrap(), node);
        let single = Node::Trie(TrieNode {
            cuts_log2: 1,
            child_base: 1,
            ltoh: alloc::vec![0, 1],
            htol: alloc::vec![],
        });
        let img = encode_node(&single, 512).unwrap();
        assert_eq!(decode_node(&img).unwrap(), single);
    }
}
