#![forbid(unsafe_code)]
//! Referable NFT (rNFT) toolkit.
//!
//! An rNFT is a non-fungible token that carries explicit reference
//! relationships: a write-once `referring` list of older tokens it cites and
//! an append-only `referred` list of newer tokens that cite it. Together the
//! referring edges of a registry form a growing DAG.
//!
//! The crate is split into four layers:
//!
//! * [`graph`] — the token registry: records, dual reference indices, DAG
//!   enforcement, and traversal queries.
//! * [`chain`] — a deterministic single-node ledger: identities, signed
//!   transactions, block sealing, and contract execution against the registry.
//! * [`incentive`] — the pure payoff mathematics: initial price and profit
//!   shares, interest and descending rates, outcome/income streams, utility,
//!   and a numerical curvature probe of the payoff surface.
//! * [`scenario`] — seeded scenario growth of reference graphs over rounds,
//!   with per-token payoff reporting.

pub mod chain;
pub mod codec;
pub mod graph;
pub mod incentive;
pub mod primitives;
pub mod scenario;
pub mod sig;

pub use chain::{Block, ChainError, ChainState, GenesisConfig, Payload, Receipt, Transaction};
pub use graph::{
    BlockCoords, GraphError, RNftRecord, ReferenceGraph, Relationship, TokenId,
};
pub use incentive::{
    HessianProbe, IncentiveError, IncentiveParams, PayoffBreakdown, WeightVector,
};
pub use primitives::{Address, Digest};
pub use scenario::{ReportRow, ScenarioConfig, ScenarioError};
