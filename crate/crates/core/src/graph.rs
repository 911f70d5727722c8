//! The rNFT registry.
//!
//! Every token carries a `Relationship`: a write-once `referring` list (the
//! older tokens it cites, with profit-sharing weights) and an append-only
//! `referred` list (the newer tokens that cite it). The registry maintains
//! both indices in lockstep and enforces the structural invariants:
//!
//! * Dual-index symmetry: `j ∈ referring(i)` iff `i ∈ referred(j)`.
//! * Temporal order: every referent was minted strictly earlier, compared by
//!   `(createdHeight, intraBlockIndex)`. Acyclicity follows, but an explicit
//!   cycle check runs as defense in depth.
//! * Weight shape: `profitSharing` has one entry per referring edge, each
//!   weight is non-negative, and the weights sum to at most 1 (the residual
//!   is the token's self-reference weight).
//!
//! All mutating operations validate fully before touching state, so a
//! rejected operation leaves the registry byte-identical.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::primitives::Address;

/// Tolerance used when checking that profit weights sum to at most 1.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Unique token identifier, assigned sequentially and never reused.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct TokenId(pub u64);

impl TokenId {
    pub fn value(&self) -> u64 {
        self.0
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TokenId({})", self.0)
    }
}

impl From<u64> for TokenId {
    fn from(v: u64) -> Self {
        TokenId(v)
    }
}

/// Where a mint landed on the ledger: sealing block height and timestamp,
/// plus the position of the minting transaction within its block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCoords {
    pub height: u64,
    pub timestamp: u64,
    pub index: u32,
}

impl BlockCoords {
    pub fn new(height: u64, timestamp: u64, index: u32) -> Self {
        Self {
            height,
            timestamp,
            index,
        }
    }

    /// The pair that totally orders all mints.
    fn order_key(&self) -> (u64, u32) {
        (self.height, self.index)
    }
}

/// The reference relationships and advanced indicators of one token.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Relationship {
    /// Out-edges: the older tokens this one cites. Write-once.
    pub referring: Vec<TokenId>,
    /// In-edges: the newer tokens citing this one. Append-only.
    pub referred: Vec<TokenId>,
    pub created_timestamp: u64,
    pub created_height: u64,
    pub intra_block_index: u32,
    /// Free-form attribute labels.
    pub labels: Vec<String>,
    /// Profit-sharing weight per referring edge; the residual `1 - Σ` is the
    /// token's self-reference weight.
    pub profit_sharing: Vec<f64>,
}

/// A token record: identity, current owner, relationship.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RNftRecord {
    pub token_id: TokenId,
    pub owner: Address,
    #[serde(flatten)]
    pub relationship: Relationship,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown token {0}")]
    UnknownToken(TokenId),
    #[error("referent {0} does not exist")]
    UnknownReferent(TokenId),
    #[error("referent {0} listed more than once")]
    DuplicateReferent(TokenId),
    #[error("expected {expected} weights for {expected} referents, got {actual}")]
    WeightShapeMismatch { expected: usize, actual: usize },
    #[error("profit weights sum to {0}, which exceeds 1")]
    WeightSumExceedsOne(String),
    #[error("weight {0} is negative")]
    NegativeWeight(String),
    #[error("token {0} already has a referring list")]
    AlreadyReferenced(TokenId),
    #[error("referent {referent} is not strictly older than token {token}")]
    TemporalOrderViolation { token: TokenId, referent: TokenId },
    #[error("reference cycle detected")]
    CycleDetected,
    #[error("mint at (height {at_height}, index {at_index}) does not follow (height {last_height}, index {last_index})")]
    CoordsNotIncreasing {
        at_height: u64,
        at_index: u32,
        last_height: u64,
        last_index: u32,
    },
    #[error("{from} is not the owner of token {token}")]
    NotOwner { token: TokenId, from: Address },
    #[error("registry corrupt: {0}")]
    RegistryCorrupt(String),
}

impl GraphError {
    /// Stable machine-readable error name.
    pub fn code(&self) -> &'static str {
        match self {
            GraphError::UnknownToken(_) => "UnknownToken",
            GraphError::UnknownReferent(_) => "UnknownReferent",
            GraphError::DuplicateReferent(_) => "DuplicateReferent",
            GraphError::WeightShapeMismatch { .. } => "WeightShapeMismatch",
            GraphError::WeightSumExceedsOne(_) => "WeightSumExceedsOne",
            GraphError::NegativeWeight(_) => "NegativeWeight",
            GraphError::AlreadyReferenced(_) => "AlreadyReferenced",
            GraphError::TemporalOrderViolation { .. } => "TemporalOrderViolation",
            GraphError::CycleDetected => "CycleDetected",
            GraphError::CoordsNotIncreasing { .. } => "CoordsNotIncreasing",
            GraphError::NotOwner { .. } => "NotOwner",
            GraphError::RegistryCorrupt(_) => "RegistryCorrupt",
        }
    }
}

type Result<T> = std::result::Result<T, GraphError>;

/// The token registry: id-ordered records plus the next id to assign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "GraphSnapshot", try_from = "GraphSnapshot")]
pub struct ReferenceGraph {
    records: BTreeMap<TokenId, RNftRecord>,
    next_token_id: u64,
    /// Order key of the most recent mint; mints must strictly increase.
    last_mint: Option<(u64, u32)>,
}

impl Default for ReferenceGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl ReferenceGraph {
    pub fn new() -> Self {
        Self {
            records: BTreeMap::new(),
            next_token_id: 1,
            last_mint: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn next_token_id(&self) -> TokenId {
        TokenId(self.next_token_id)
    }

    pub fn contains(&self, token: TokenId) -> bool {
        self.records.contains_key(&token)
    }

    /// Records in ascending token-id order.
    pub fn records(&self) -> impl Iterator<Item = &RNftRecord> {
        self.records.values()
    }

    pub fn token_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.records.keys().copied()
    }

    pub fn get(&self, token: TokenId) -> Result<&RNftRecord> {
        self.records
            .get(&token)
            .ok_or(GraphError::UnknownToken(token))
    }

    /// Mints a new token owned by `owner`, citing `referring` with the given
    /// profit weights, at the given block coordinates. Fully validates before
    /// mutating; on success the dual indices are updated and the fresh id is
    /// returned.
    pub fn safe_mint(
        &mut self,
        owner: Address,
        referring: &[TokenId],
        weights: &[f64],
        labels: Vec<String>,
        at: BlockCoords,
    ) -> Result<TokenId> {
        if let Some((last_height, last_index)) = self.last_mint {
            if at.order_key() <= (last_height, last_index) {
                return Err(GraphError::CoordsNotIncreasing {
                    at_height: at.height,
                    at_index: at.index,
                    last_height,
                    last_index,
                });
            }
        }
        self.validate_references(TokenId(self.next_token_id), at.order_key(), referring, weights)?;

        let token = TokenId(self.next_token_id);
        self.next_token_id += 1;
        self.last_mint = Some(at.order_key());
        self.records.insert(
            token,
            RNftRecord {
                token_id: token,
                owner,
                relationship: Relationship {
                    referring: Vec::new(),
                    referred: Vec::new(),
                    created_timestamp: at.timestamp,
                    created_height: at.height,
                    intra_block_index: at.index,
                    labels,
                    profit_sharing: Vec::new(),
                },
            },
        );
        // A fresh token has no in-edges, so the cycle pre-check is vacuous.
        self.set_node_referring(token, referring, weights);
        self.set_node_referred(token, referring);
        Ok(token)
    }

    /// Attaches a referring list to a token minted without one. Write-once:
    /// a second invocation fails with `AlreadyReferenced`.
    pub fn set_node(
        &mut self,
        token: TokenId,
        referring: &[TokenId],
        weights: &[f64],
    ) -> Result<()> {
        let record = self.get(token)?;
        if !record.relationship.referring.is_empty() {
            return Err(GraphError::AlreadyReferenced(token));
        }
        let subject = (
            record.relationship.created_height,
            record.relationship.intra_block_index,
        );
        self.validate_references(token, subject, referring, weights)?;
        for referent in referring {
            if *referent == token || self.reaches(*referent, token) {
                // Unreachable while temporal order holds; kept as defense in
                // depth against registry corruption.
                return Err(GraphError::CycleDetected);
            }
        }
        self.set_node_referring(token, referring, weights);
        self.set_node_referred(token, referring);
        Ok(())
    }

    /// First half of `set_node`: writes the out-list and weights on `token`.
    fn set_node_referring(&mut self, token: TokenId, referents: &[TokenId], weights: &[f64]) {
        let record = self.records.get_mut(&token).expect("validated");
        record.relationship.referring = referents.to_vec();
        record.relationship.profit_sharing = weights.to_vec();
    }

    /// Second half of `set_node`: appends `token` to each referent's in-list,
    /// preserving the order of `referents`.
    fn set_node_referred(&mut self, token: TokenId, referents: &[TokenId]) {
        for referent in referents {
            let record = self.records.get_mut(referent).expect("validated");
            record.relationship.referred.push(token);
        }
    }

    fn validate_references(
        &self,
        subject_token: TokenId,
        subject: (u64, u32),
        referring: &[TokenId],
        weights: &[f64],
    ) -> Result<()> {
        if weights.len() != referring.len() {
            return Err(GraphError::WeightShapeMismatch {
                expected: referring.len(),
                actual: weights.len(),
            });
        }
        for w in weights {
            if *w < 0.0 || !w.is_finite() {
                return Err(GraphError::NegativeWeight(format!("{w}")));
            }
        }
        let sum: f64 = weights.iter().sum();
        if sum > 1.0 + WEIGHT_SUM_TOLERANCE {
            return Err(GraphError::WeightSumExceedsOne(format!("{sum}")));
        }
        let mut seen = HashSet::new();
        for referent in referring {
            if !seen.insert(*referent) {
                return Err(GraphError::DuplicateReferent(*referent));
            }
            let record = self
                .records
                .get(referent)
                .ok_or(GraphError::UnknownReferent(*referent))?;
            let referent_key = (
                record.relationship.created_height,
                record.relationship.intra_block_index,
            );
            if referent_key >= subject {
                return Err(GraphError::TemporalOrderViolation {
                    token: subject_token,
                    referent: *referent,
                });
            }
        }
        Ok(())
    }

    /// Whether `to` is reachable from `from` along referring edges.
    fn reaches(&self, from: TokenId, to: TokenId) -> bool {
        let mut stack = vec![from];
        let mut seen = HashSet::new();
        while let Some(node) = stack.pop() {
            if node == to {
                return true;
            }
            if !seen.insert(node) {
                continue;
            }
            if let Some(record) = self.records.get(&node) {
                stack.extend(record.relationship.referring.iter().copied());
            }
        }
        false
    }

    pub fn referring_of(&self, token: TokenId) -> Result<Vec<TokenId>> {
        Ok(self.get(token)?.relationship.referring.clone())
    }

    pub fn referred_of(&self, token: TokenId) -> Result<Vec<TokenId>> {
        Ok(self.get(token)?.relationship.referred.clone())
    }

    pub fn created_timestamp_of(&self, token: TokenId) -> Result<u64> {
        Ok(self.get(token)?.relationship.created_timestamp)
    }

    pub fn owner_of(&self, token: TokenId) -> Result<Address> {
        Ok(self.get(token)?.owner)
    }

    /// Reassigns ownership. The relationship is untouched.
    pub fn transfer_from(&mut self, from: Address, to: Address, token: TokenId) -> Result<()> {
        let record = self.get(token)?;
        if record.owner != from {
            return Err(GraphError::NotOwner { token, from });
        }
        self.records.get_mut(&token).expect("checked").owner = to;
        Ok(())
    }

    /// A token with no references in either direction is an original item.
    pub fn is_original(&self, token: TokenId) -> Result<bool> {
        let rel = &self.get(token)?.relationship;
        Ok(rel.referring.is_empty() && rel.referred.is_empty())
    }

    /// Transitive closure along referring edges, excluding the token itself.
    pub fn ancestors(&self, token: TokenId) -> Result<BTreeSet<TokenId>> {
        self.closure(token, |rel| &rel.referring)
    }

    /// Transitive closure along referred edges, excluding the token itself.
    pub fn descendants(&self, token: TokenId) -> Result<BTreeSet<TokenId>> {
        self.closure(token, |rel| &rel.referred)
    }

    fn closure(
        &self,
        token: TokenId,
        edges: impl Fn(&Relationship) -> &Vec<TokenId>,
    ) -> Result<BTreeSet<TokenId>> {
        self.get(token)?;
        let mut out = BTreeSet::new();
        let mut stack = vec![token];
        while let Some(node) = stack.pop() {
            let record = self.records.get(&node).expect("index symmetry");
            for next in edges(&record.relationship) {
                if out.insert(*next) {
                    stack.push(*next);
                }
            }
        }
        out.remove(&token);
        Ok(out)
    }

    /// Referrer counts per height for the `depth` rounds after the token's
    /// mint: entry `k` counts tokens minted at `createdHeight + k + 1` whose
    /// referring list contains `token`.
    pub fn referrer_counts_by_height(&self, token: TokenId, depth: u32) -> Result<Vec<u64>> {
        let base = self.get(token)?.relationship.created_height;
        let mut counts = vec![0u64; depth as usize];
        for referrer in &self.get(token)?.relationship.referred {
            let h = self
                .records
                .get(referrer)
                .expect("index symmetry")
                .relationship
                .created_height;
            if h > base {
                let offset = (h - base - 1) as usize;
                if offset < counts.len() {
                    counts[offset] += 1;
                }
            }
        }
        Ok(counts)
    }

    /// Passes iff no directed cycle exists along referring edges.
    pub fn assert_acyclic(&self) -> Result<()> {
        // Iterative DFS with three colors: 0 unseen, 1 on stack, 2 done.
        let mut color: BTreeMap<TokenId, u8> = BTreeMap::new();
        for &start in self.records.keys() {
            if color.get(&start).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            color.insert(start, 1);
            while let Some((node, edge_idx)) = stack.pop() {
                let referring = &self.records[&node].relationship.referring;
                if edge_idx < referring.len() {
                    stack.push((node, edge_idx + 1));
                    let next = referring[edge_idx];
                    match color.get(&next).copied().unwrap_or(0) {
                        0 => {
                            color.insert(next, 1);
                            stack.push((next, 0));
                        }
                        1 => return Err(GraphError::CycleDetected),
                        _ => {}
                    }
                } else {
                    color.insert(node, 2);
                }
            }
        }
        Ok(())
    }

    /// A topological order of all tokens: every token precedes the tokens
    /// referring to it, ties broken by `(createdHeight, intraBlockIndex)`.
    pub fn topological_order(&self) -> Result<Vec<TokenId>> {
        // Kahn's algorithm over referent -> referrer precedence, with a
        // min-heap on block coordinates for deterministic tie-breaking.
        let mut out_remaining: BTreeMap<TokenId, usize> = BTreeMap::new();
        for record in self.records.values() {
            out_remaining.insert(record.token_id, record.relationship.referring.len());
        }
        let mut heap = BinaryHeap::new();
        for record in self.records.values() {
            if record.relationship.referring.is_empty() {
                heap.push(std::cmp::Reverse((
                    record.relationship.created_height,
                    record.relationship.intra_block_index,
                    record.token_id,
                )));
            }
        }
        let mut order = Vec::with_capacity(self.records.len());
        while let Some(std::cmp::Reverse((_, _, token))) = heap.pop() {
            order.push(token);
            for referrer in &self.records[&token].relationship.referred {
                let remaining = out_remaining.get_mut(referrer).expect("index symmetry");
                *remaining -= 1;
                if *remaining == 0 {
                    let rel = &self.records[referrer].relationship;
                    heap.push(std::cmp::Reverse((
                        rel.created_height,
                        rel.intra_block_index,
                        *referrer,
                    )));
                }
            }
        }
        if order.len() != self.records.len() {
            return Err(GraphError::CycleDetected);
        }
        Ok(order)
    }

    /// Full structural sweep: dual-index symmetry, temporal order, weight
    /// shape, and acyclicity. Intended for test harnesses and the CLI's
    /// invariant-checking mode.
    pub fn check_invariants(&self) -> Result<()> {
        for record in self.records.values() {
            let token = record.token_id;
            let rel = &record.relationship;
            if rel.profit_sharing.len() != rel.referring.len() {
                return Err(GraphError::RegistryCorrupt(format!(
                    "token {token}: profit sharing shape mismatch"
                )));
            }
            let sum: f64 = rel.profit_sharing.iter().sum();
            if rel.profit_sharing.iter().any(|w| *w < 0.0) || sum > 1.0 + WEIGHT_SUM_TOLERANCE {
                return Err(GraphError::RegistryCorrupt(format!(
                    "token {token}: invalid profit weights"
                )));
            }
            let mut seen = HashSet::new();
            for referent in &rel.referring {
                if *referent == token || !seen.insert(*referent) {
                    return Err(GraphError::RegistryCorrupt(format!(
                        "token {token}: self or duplicate referent {referent}"
                    )));
                }
                let other = self.records.get(referent).ok_or_else(|| {
                    GraphError::RegistryCorrupt(format!(
                        "token {token} refers to missing {referent}"
                    ))
                })?;
                let other_rel = &other.relationship;
                if (other_rel.created_height, other_rel.intra_block_index)
                    >= (rel.created_height, rel.intra_block_index)
                {
                    return Err(GraphError::RegistryCorrupt(format!(
                        "token {token}: referent {referent} not strictly older"
                    )));
                }
                if !other_rel.referred.contains(&token) {
                    return Err(GraphError::RegistryCorrupt(format!(
                        "symmetry broken: {token} -> {referent} missing in referred"
                    )));
                }
            }
            for referrer in &rel.referred {
                let other = self.records.get(referrer).ok_or_else(|| {
                    GraphError::RegistryCorrupt(format!(
                        "token {token} referred by missing {referrer}"
                    ))
                })?;
                if !other.relationship.referring.contains(&token) {
                    return Err(GraphError::RegistryCorrupt(format!(
                        "symmetry broken: {referrer} in referred of {token}"
                    )));
                }
            }
        }
        self.assert_acyclic()
    }

    /// Graphviz DOT rendering: one node per token labeled `id@height`, one
    /// edge per referring entry labeled with its profit weight.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph rnft {\n");
        for record in self.records.values() {
            out.push_str(&format!(
                "    \"{}\" [label=\"{}@{}\"];\n",
                record.token_id, record.token_id, record.relationship.created_height
            ));
        }
        for record in self.records.values() {
            for (i, referent) in record.relationship.referring.iter().enumerate() {
                out.push_str(&format!(
                    "    \"{}\" -> \"{}\" [label=\"{}\"];\n",
                    record.token_id, referent, record.relationship.profit_sharing[i]
                ));
            }
        }
        out.push_str("}\n");
        out
    }

    /// Pretty-printed JSON snapshot; parses back bit-exactly.
    pub fn to_snapshot_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }
}

/// Serde representation of the registry: `nextTokenId` plus the records as an
/// id-ordered list.
#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphSnapshot {
    next_token_id: u64,
    records: Vec<RNftRecord>,
}

impl From<ReferenceGraph> for GraphSnapshot {
    fn from(graph: ReferenceGraph) -> Self {
        GraphSnapshot {
            next_token_id: graph.next_token_id,
            records: graph.records.into_values().collect(),
        }
    }
}

impl TryFrom<GraphSnapshot> for ReferenceGraph {
    type Error = String;

    fn try_from(snapshot: GraphSnapshot) -> std::result::Result<Self, String> {
        let mut records = BTreeMap::new();
        let mut last_mint: Option<(u64, u32)> = None;
        for record in snapshot.records {
            let key = (
                record.relationship.created_height,
                record.relationship.intra_block_index,
            );
            last_mint = last_mint.max(Some(key));
            if record.token_id.value() >= snapshot.next_token_id {
                return Err(format!(
                    "record {} not below nextTokenId {}",
                    record.token_id, snapshot.next_token_id
                ));
            }
            if records.insert(record.token_id, record.clone()).is_some() {
                return Err(format!("duplicate record for token {}", record.token_id));
            }
        }
        let graph = ReferenceGraph {
            records,
            next_token_id: snapshot.next_token_id,
            last_mint,
        };
        graph
            .check_invariants()
            .map_err(|e| format!("snapshot violates registry invariants: {e}"))?;
        Ok(graph)
    }
}
