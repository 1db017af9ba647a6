//! SHIP: a two-level IPv6 longest-prefix-match data structure.
//!
//! Level one bins prefixes by their 23 most significant bits and resolves the
//! bin with a perfect hash table in exactly two memory accesses. Level two
//! sorts each bin's prefixes into K disjoint prefix-length ranges and encodes
//! every non-empty group as a hybrid trie-tree: a density-adaptive trie whose
//! sparse regions are merged by Selective Node Merge, terminated by reduced
//! D-Tree leaves that store only the prefix bits left unmatched on the path.
//!
//! The crate is `no_std` (with `alloc`) and carries no IO: table text parsing,
//! structure construction, lookup, bit-exact node encoding, the index byte
//! codec, footprint/access accounting, and synthetic table generation are all
//! pure. File handling and the CLI live in the companion `ship-cli` crate.
//!
//! ```
//! use ship_core::prefix::{parse_table, oracle_lpm};
//! use ship_core::engine::{build_ship, BuildOptions};
//! use ship_core::htt::HttConfig;
//!
//! let table = parse_table("2001:db8::/32 7\n2001:db8:a::/48 9\n", "doc").unwrap();
//! let index = build_ship(&table, 3, &HttConfig::default(), &BuildOptions::default()).unwrap();
//! let addr = u128::from_be_bytes("2001:db8::1".parse::<core::net::Ipv6Addr>().unwrap().octets());
//! let (hit, stats) = index.lookup(addr);
//! assert_eq!(hit, oracle_lpm(&table, addr));
//! assert_eq!(stats.hash_accesses, 2);
//! ```

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod binning;
pub mod codec;
pub mod engine;
pub mod htt;
pub mod normalize;
pub mod pls;
pub mod prefix;
pub mod rng;
pub mod synthgen;

pub use engine::{build_ship, BuildOptions, ShipIndex};
pub use htt::HttConfig;
pub use prefix::{oracle_lpm, parse_table, Ipv6Prefix, PrefixTable, RouteMatch};
