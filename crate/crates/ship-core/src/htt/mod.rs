//! The hybrid trie-tree: a density-adaptive trie with selective node merge,
//! terminated by reduced D-Tree leaves.
//!
//! A trie node cuts its region into `2^s` equi-sized children; adjacent
//! low-density children are merged into power-of-two aligned spans recorded
//! in the node's LtoH/HtoL index arrays, so merged regions occupy one stored
//! child instead of many. Regions holding at most `b` prefixes become leaves
//! that store only the prefix bits left unmatched on the path. All nodes are
//! encoded into fixed-width images so that one node read is one memory
//! access.

mod build;
mod lookup;
pub mod node;
pub mod region;
pub mod snm;

pub use build::{build_htt, HttBuildError};
pub use lookup::lookup_htt;
pub use node::{decode_node, encode_node, LeafEntry, LeafNode, Node, NodeError, TrieNode};
pub use region::{count_partitions, PartitionDecision, Region, RegionPrefix};
pub use snm::{apply_snm, compute_child_index, SnmOutcome, Span};

use alloc::vec::Vec;
use core::fmt;

/// Widest value the 6-bit leaf LSR field can carry.
pub const MAX_UNMATCHED_BITS: u8 = 63;

/// Number of address bits a trie-tree can discriminate: everything below the
/// 23 binning bits.
pub const REMAINDER_BITS: u8 = 105;

/// Build-time knobs for one hybrid trie-tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HttConfig {
    /// Regions holding at most this many prefixes become leaves.
    pub leaf_threshold_b: u8,
    /// Merge two spans when the union stays below this, even if replication
    /// would drop. Defaults to `leaf_threshold_b`.
    pub merge_threshold: u32,
    /// Upper bound on bits cut per node; indices in the SNM arrays are 10
    /// bits, so at most 10.
    pub max_stride_bits: u8,
    /// Usable entries per SNM direction array (encoded slots hold 5).
    pub snm_array_len: u8,
    /// Fixed encoded node width; the model's memory bus width.
    pub node_size_bits: u32,
}

impl Default for HttConfig {
    fn default() -> Self {
        Self {
            leaf_threshold_b: 12,
            merge_threshold: 12,
            max_stride_bits: 10,
            snm_array_len: 5,
            node_size_bits: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    LeafThreshold(u8),
    MaxStride(u8),
    SnmArrayLen(u8),
    NodeSize(u32),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::LeafThreshold(b) => {
                write!(f, "leaf threshold {b} outside 1-12 (4-bit prefix count)")
            }
            ConfigError::MaxStride(s) => write!(f, "max stride {s} outside 1-10 (10-bit indices)"),
            ConfigError::SnmArrayLen(l) => write!(f, "SNM array length {l} outside 1-5"),
            ConfigError::NodeSize(n) => {
                write!(f, "node size {n} bits: need a multiple of 8, 128-65536")
            }
        }
    }
}

impl core::error::Error for ConfigError {}

impl HttConfig {
    /// Config with `leaf_threshold_b` and the merge threshold tied to it.
    pub fn with_leaf_threshold(b: u8) -> Self {
        Self {
            leaf_threshold_b: b,
            merge_threshold: b as u32,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=12).contains(&self.leaf_threshold_b) {
            return Err(ConfigError::LeafThreshold(self.leaf_threshold_b));
        }
        if !(1..=10).contains(&self.max_stride_bits) {
            return Err(ConfigError::MaxStride(self.max_stride_bits));
        }
        if !(1..=5).contains(&self.snm_array_len) {
            return Err(ConfigError::SnmArrayLen(self.snm_array_len));
        }
        if !self.node_size_bits.is_multiple_of(8) || !(128..=65536).contains(&self.node_size_bits) {
            return Err(ConfigError::NodeSize(self.node_size_bits));
        }
        Ok(())
    }

    pub fn node_size_bytes(&self) -> usize {
        (self.node_size_bits / 8) as usize
    }
}

/// One built hybrid trie-tree: a flat array of fixed-width node images.
///
/// `spanning_lengths` records, per leaf-chain head, the true length of the
/// single entry whose bits were all consumed on the path (its in-leaf
/// remainder length is zero, so the node image alone cannot reproduce the
/// length the match must report).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttStructure {
    node_size_bytes: usize,
    root: u16,
    images: Vec<u8>,
    spanning_lengths: Vec<(u16, u8)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HttError {
    Node(NodeError),
    IndexOutOfRange { node: u16 },
    CyclicOrUnreachable,
    Geometry,
}

impl fmt::Display for HttError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HttError::Node(e) => write!(f, "node: {e}"),
            HttError::IndexOutOfRange { node } => write!(f, "node index {node} out of range"),
            HttError::CyclicOrUnreachable => {
                write!(f, "node graph is cyclic or has unreachable nodes")
            }
            HttError::Geometry => write!(f, "image length is not a whole number of nodes"),
        }
    }
}

impl core::error::Error for HttError {}

impl From<NodeError> for HttError {
    fn from(e: NodeError) -> Self {
        HttError::Node(e)
    }
}

impl HttStructure {
    pub fn from_parts(
        node_size_bytes: usize,
        root: u16,
        images: Vec<u8>,
        spanning_lengths: Vec<(u16, u8)>,
    ) -> Result<Self, HttError> {
        if node_size_bytes == 0 || !images.len().is_multiple_of(node_size_bytes) {
            return Err(HttError::Geometry);
        }
        let s = Self {
            node_size_bytes,
            root,
            images,
            spanning_lengths,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn node_count(&self) -> usize {
        self.images.len() / self.node_size_bytes
    }

    pub fn root(&self) -> u16 {
        self.root
    }

    pub fn node_size_bytes(&self) -> usize {
        self.node_size_bytes
    }

    pub fn images(&self) -> &[u8] {
        &self.images
    }

    pub fn spanning_lengths(&self) -> &[(u16, u8)] {
        &self.spanning_lengths
    }

    pub fn node_image(&self, idx: u16) -> Result<&[u8], HttError> {
        let start = idx as usize * self.node_size_bytes;
        self.images
            .get(start..start + self.node_size_bytes)
            .ok_or(HttError::IndexOutOfRange { node: idx })
    }

    pub fn decode(&self, idx: u16) -> Result<Node, HttError> {
        Ok(decode_node(self.node_image(idx)?)?)
    }

    /// Length reported for the path-spanning entry of the leaf chain headed
    /// at `head`.
    pub fn spanning_length(&self, head: u16) -> Option<u8> {
        self.spanning_lengths
            .binary_search_by_key(&head, |&(n, _)| n)
            .ok()
            .map(|i| self.spanning_lengths[i].1)
    }

    /// Accounted structure size: nodes times the node width.
    pub fn footprint_bytes(&self) -> u64 {
        self.images.len() as u64
    }

    /// Indices of every leaf-chain head (a leaf entered from a trie node or
    /// the root, not via a continuation pointer).
    pub fn leaf_heads(&self) -> Result<Vec<u16>, HttError> {
        let mut heads = Vec::new();
        self.walk(|idx, node, _| {
            if matches!(node, Node::Leaf(_)) {
                heads.push(idx);
            }
        })?;
        Ok(heads)
    }

    /// Depth-first walk over the logical children graph (continuations are
    /// followed as part of their chain, not reported as separate heads).
    /// The callback sees (index, node, consumed-bits-on-path).
    pub(crate) fn walk<F: FnMut(u16, &Node, u8)>(&self, mut f: F) -> Result<(), HttError> {
        let count = self.node_count();
        if count == 0 {
            return Ok(());
        }
        let mut visited = alloc::vec![false; count];
        let mut stack: Vec<(u16, u8)> = alloc::vec![(self.root, 0)];
        let mut seen = 0usize;
        while let Some((idx, depth)) = stack.pop() {
            if idx as usize >= count {
                return Err(HttError::IndexOutOfRange { node: idx });
            }
            if visited[idx as usize] {
                return Err(HttError::CyclicOrUnreachable);
            }
            visited[idx as usize] = true;
            seen += 1;
            let node = self.decode(idx)?;
            match &node {
                Node::Trie(t) => {
                    let spans = t.spans()?;
                    for (child, span) in spans.iter().enumerate() {
                        let consumed = t.cuts_log2 - span.size.trailing_zeros() as u8;
                        stack.push((
                            t.child_base
                                .checked_add(child as u16)
                                .ok_or(HttError::CyclicOrUnreachable)?,
                            depth.saturating_add(consumed),
                        ));
                    }
                    f(idx, &node, depth);
                }
                Node::Leaf(leaf) => {
                    f(idx, &node, depth);
                    // Continuations are visited inline so cycle/reachability
                    // accounting still covers them.
                    let mut cur = leaf.clone();
                    while cur.continued {
                        let next = cur.continuation;
                        if next as usize >= count {
                            return Err(HttError::IndexOutOfRange { node: next });
                        }
                        if visited[next as usize] {
                            return Err(HttError::CyclicOrUnreachable);
                        }
                        visited[next as usize] = true;
                        seen += 1;
                        match self.decode(next)? {
                            Node::Leaf(l) => cur = l,
                            Node::Trie(_) => return Err(HttError::CyclicOrUnreachable),
                        }
                    }
                }
            }
        }
        if seen != count {
            return Err(HttError::CyclicOrUnreachable);
        }
        Ok(())
    }

    /// Full structural validation: decodable nodes, in-range indices, an
    /// acyclic graph reaching every node.
    pub fn validate(&self) -> Result<(), HttError> {
        if self.node_count() == 0 || self.root as usize >= self.node_count() {
            return Err(HttError::IndexOutOfRange { node: self.root });
        }
        self.walk(|_, _, _| {})
    }
}
