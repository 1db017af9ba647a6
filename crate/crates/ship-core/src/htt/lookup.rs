//! Hybrid trie-tree traversal.
//!
//! Trie nodes are walked by the SNM child-index arithmetic, consuming the
//! bits the matched child pins down; a leaf chain is read node by node and
//! every entry's remainder is matched against the unconsumed key bits. Each
//! node read counts as one memory access.

use crate::normalize::BINNING_BITS;
use crate::prefix::RouteMatch;

use super::node::Node;
use super::snm::resolve_child;
use super::{HttError, HttStructure};

/// Looks up `key` (the address bits below the binning bits, left-aligned)
/// and returns the longest positive match with the number of node reads.
///
/// The reported length is the matched prefix's original length: for entries
/// with unmatched bits it is reconstructed from the path depth, for the one
/// fully-consumed entry per leaf it comes from the spanning side table.
pub fn lookup_htt(htt: &HttStructure, key: u128) -> Result<(Option<RouteMatch>, u32), HttError> {
    let mut idx = htt.root();
    let mut depth: u8 = 0;
    let mut accesses: u32 = 0;
    loop {
        let node = htt.decode(idx)?;
        accesses += 1;
        match node {
            Node::Trie(t) => {
                let s = t.cuts_log2;
                let bits = ((key << depth) >> (128 - s as u32)) as u16;
                let (child, consumed) = resolve_child(bits, &t.ltoh, &t.htol, s);
                idx = t
                    .child_base
                    .checked_add(child)
                    .ok_or(HttError::IndexOutOfRange { node: t.child_base })?;
                depth += consumed;
            }
            Node::Leaf(first) => {
                let head = idx;
                let mut best: Option<(u8, RouteMatch)> = None;
                let mut leaf = first;
                loop {
                    for e in &leaf.entries {
                        let matched = e.len == 0
                            || ((key << depth) >> (128 - e.len as u32)) as u64 == e.bits;
                        if !matched {
                            continue;
                        }
                        let better = match &best {
                            Some((len, _)) => e.len > *len,
                            None => true,
                        };
                        if better {
                            let prefix_length = if e.len == 0 {
                                htt.spanning_length(head).unwrap_or(BINNING_BITS + depth)
                            } else {
                                BINNING_BITS + depth + e.len
                            };
                            best = Some((
                                e.len,
                                RouteMatch {
                                    prefix_length,
                                    nhi: e.nhi,
                                },
                            ));
                        }
                    }
                    if !leaf.continued {
                        break;
                    }
                    leaf = match htt.decode(leaf.continuation)? {
                        Node::Leaf(l) => l,
                        Node::Trie(_) => {
                            return Err(HttError::IndexOutOfRange {
                                node: leaf.continuation,
                            })
                        }
                    };
                    accesses += 1;
                }
                return Ok((best.map(|(_, m)| m), accesses));
            }
        }
    }
}
