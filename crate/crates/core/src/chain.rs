//! Deterministic single-node ledger.
//!
//! The ledger is a pure state machine: identities come from seeded key
//! generation, transactions are signed over canonical bytes, and sealing
//! drains the mempool in FIFO order into a block with a deterministic clock
//! (`genesisTime + height * blockInterval`). Contract execution maps each
//! payload onto one registry operation.
//!
//! Failure semantics: a transaction that fails execution is recorded with a
//! failure reason and consumes nothing — no registry change, no nonce bump,
//! no block coordinate. Removing a failed transaction from a block therefore
//! reproduces the exact same post-state. Nonces are checked optimistically at
//! admission (account nonce plus pending transactions) and strictly again at
//! execution.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::{self, CanonicalWriter};
use crate::graph::{BlockCoords, GraphError, ReferenceGraph, TokenId};
use crate::primitives::{Address, Digest};
use crate::sig::{self, KeyPair, KeyedDigest, PublicKey, Signature, SignatureScheme};

/// Ledger genesis parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GenesisConfig {
    /// Timestamp of the genesis block, in seconds.
    pub genesis_time: u64,
    /// Seconds between consecutive blocks.
    pub block_interval: u64,
    /// Accounts registered at genesis with nonce 0.
    pub initial_accounts: Vec<Address>,
}

impl Default for GenesisConfig {
    fn default() -> Self {
        Self {
            genesis_time: 0,
            block_interval: 12,
            initial_accounts: Vec::new(),
        }
    }
}

/// What a transaction asks the contract to do.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Payload {
    Mint {
        referring: Vec<TokenId>,
        weights: Vec<f64>,
        labels: Vec<String>,
    },
    SetNode {
        token_id: TokenId,
        referring: Vec<TokenId>,
        weights: Vec<f64>,
    },
    Transfer {
        to: Address,
        token_id: TokenId,
    },
}

/// A signed transaction. The signature covers the canonical bytes of
/// `(metadata, payload, nonce)`; the public key is carried so admission can
/// verify it and match it against the sender address.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Transaction {
    pub sender: Address,
    #[serde(with = "serde_bytes32")]
    pub sender_pk: PublicKey,
    pub nonce: u64,
    pub payload: Payload,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
    #[serde(with = "serde_bytes32")]
    pub signature: Signature,
}

mod serde_bytes32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&bytes.iter().map(|b| format!("{b:02x}")).collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let hex = String::deserialize(d)?;
        if hex.len() != 64 {
            return Err(serde::de::Error::custom("expected 64 hex chars"));
        }
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(serde::de::Error::custom)?;
        }
        Ok(out)
    }
}

/// Execution result of one transaction in a sealed block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum Receipt {
    Success {
        #[serde(skip_serializing_if = "Option::is_none")]
        minted: Option<TokenId>,
    },
    Failed {
        reason: String,
    },
}

impl Receipt {
    pub fn is_success(&self) -> bool {
        matches!(self, Receipt::Success { .. })
    }
}

/// A sealed block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Block {
    pub height: u64,
    pub timestamp: u64,
    pub parent_hash: Digest,
    pub transactions: Vec<Transaction>,
    pub receipts: Vec<Receipt>,
    pub state_root: Digest,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("signature does not verify for the declared sender")]
    InvalidSignature,
    #[error("bad nonce: expected {expected}, got {actual}")]
    BadNonce { expected: u64, actual: u64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl ChainError {
    pub fn code(&self) -> &'static str {
        match self {
            ChainError::InvalidSignature => "InvalidSignature",
            ChainError::BadNonce { .. } => "BadNonce",
            ChainError::Graph(e) => e.code(),
        }
    }
}

type Result<T> = std::result::Result<T, ChainError>;

/// The full ledger state: registry, account nonces, sealed blocks, mempool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainState {
    pub config: GenesisConfig,
    graph: ReferenceGraph,
    accounts: BTreeMap<Address, u64>,
    blocks: Vec<Block>,
    mempool: Vec<Transaction>,
}

/// Canonical signing bytes for `(metadata, payload, nonce)`.
pub fn signing_bytes(metadata: &BTreeMap<String, String>, payload: &Payload, nonce: u64) -> Vec<u8> {
    let mut w = CanonicalWriter::new();
    w.put_str("rnft.tx.v1");
    w.put_string_map(metadata);
    w.put_u64(nonce);
    encode_payload(&mut w, payload);
    w.into_bytes()
}

fn encode_payload(w: &mut CanonicalWriter, payload: &Payload) {
    match payload {
        Payload::Mint {
            referring,
            weights,
            labels,
        } => {
            w.put_str("mint");
            w.put_len(labels.len());
            for label in labels {
                w.put_str(label);
            }
            codec::encode_token_ids(w, referring);
            w.put_len(weights.len());
            for weight in weights {
                w.put_f64(*weight);
            }
        }
        Payload::SetNode {
            token_id,
            referring,
            weights,
        } => {
            w.put_str("setNode");
            codec::encode_token_ids(w, referring);
            w.put_u64(token_id.value());
            w.put_len(weights.len());
            for weight in weights {
                w.put_f64(*weight);
            }
        }
        Payload::Transfer { to, token_id } => {
            w.put_str("transfer");
            w.put_bytes(to.as_bytes());
            w.put_u64(token_id.value());
        }
    }
}

fn encode_transaction(w: &mut CanonicalWriter, tx: &Transaction) {
    w.put_string_map(&tx.metadata);
    w.put_u64(tx.nonce);
    encode_payload(w, &tx.payload);
    w.put_bytes(tx.sender.as_bytes());
    w.put_bytes(&tx.sender_pk);
    w.put_bytes(&tx.signature);
}

/// Hash of a block's canonical encoding (receipts excluded: they are derived
/// from execution and carry no state of their own).
pub fn block_hash(block: &Block) -> Digest {
    let mut w = CanonicalWriter::new();
    w.put_str("rnft.block.v1");
    w.put_u64(block.height);
    w.put_bytes(block.parent_hash.as_bytes());
    w.put_bytes(block.state_root.as_bytes());
    w.put_u64(block.timestamp);
    w.put_len(block.transactions.len());
    for tx in &block.transactions {
        encode_transaction(&mut w, tx);
    }
    codec::sha256(&w.into_bytes())
}

/// Builds a signed transaction from a key pair.
pub fn tran_gen(
    pair: &KeyPair,
    payload: Payload,
    nonce: u64,
    metadata: BTreeMap<String, String>,
) -> Transaction {
    let message = signing_bytes(&metadata, &payload, nonce);
    let signature = KeyedDigest.sign(&pair.sk, &message);
    Transaction {
        sender: pair.address(),
        sender_pk: pair.pk,
        nonce,
        payload,
        metadata,
        signature,
    }
}

/// Verifies a transaction's signature and sender binding.
pub fn verify_tx(tx: &Transaction) -> bool {
    if sig::address_gen(&tx.sender_pk) != tx.sender {
        return false;
    }
    let message = signing_bytes(&tx.metadata, &tx.payload, tx.nonce);
    KeyedDigest.verify(&tx.sender_pk, &message, &tx.signature)
}

impl ChainState {
    /// Fresh ledger: registers the genesis accounts and seals the genesis
    /// block at height 0.
    pub fn new(config: GenesisConfig) -> Self {
        let mut accounts = BTreeMap::new();
        for addr in &config.initial_accounts {
            accounts.insert(*addr, 0u64);
        }
        let graph = ReferenceGraph::new();
        let state_root = compute_state_root(&graph, &accounts);
        let genesis = Block {
            height: 0,
            timestamp: config.genesis_time,
            parent_hash: Digest::default(),
            transactions: Vec::new(),
            receipts: Vec::new(),
            state_root,
        };
        Self {
            config,
            graph,
            accounts,
            blocks: vec![genesis],
            mempool: Vec::new(),
        }
    }

    pub fn graph(&self) -> &ReferenceGraph {
        &self.graph
    }

    pub fn accounts(&self) -> &BTreeMap<Address, u64> {
        &self.accounts
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn mempool(&self) -> &[Transaction] {
        &self.mempool
    }

    pub fn latest_block(&self) -> &Block {
        self.blocks.last().expect("genesis always present")
    }

    /// Digest over the canonical serialization of accounts and registry.
    /// Mempool contents never influence it; only sealed state counts.
    pub fn state_root(&self) -> Digest {
        compute_state_root(&self.graph, &self.accounts)
    }

    /// Admits a transaction to the mempool. The signature must verify and the
    /// nonce must be the next one for the sender, counting pending
    /// transactions already admitted.
    pub fn submit_tx(&mut self, tx: Transaction) -> Result<()> {
        if !verify_tx(&tx) {
            return Err(ChainError::InvalidSignature);
        }
        let pending = self
            .mempool
            .iter()
            .filter(|p| p.sender == tx.sender)
            .count() as u64;
        let expected = self.accounts.get(&tx.sender).copied().unwrap_or(0) + pending;
        if tx.nonce != expected {
            return Err(ChainError::BadNonce {
                expected,
                actual: tx.nonce,
            });
        }
        self.mempool.push(tx);
        Ok(())
    }

    /// Seals the next block: drains the mempool in FIFO order, executes each
    /// transaction atomically against the registry, assigns the deterministic
    /// height and timestamp, computes the state root, and appends the block.
    /// Failed transactions are recorded with a reason and change nothing.
    pub fn seal_block(&mut self) -> &Block {
        let height = self.blocks.len() as u64;
        let timestamp = self.config.genesis_time + height * self.config.block_interval;
        let transactions: Vec<Transaction> = std::mem::take(&mut self.mempool);
        let mut receipts = Vec::with_capacity(transactions.len());
        // Failed transactions occupy no coordinate slot, so the index below
        // counts successful executions only.
        let mut exec_index: u32 = 0;
        for tx in &transactions {
            let receipt = match self.execute(tx, height, timestamp, exec_index) {
                Ok(minted) => {
                    exec_index += 1;
                    Receipt::Success { minted }
                }
                Err(err) => Receipt::Failed {
                    reason: format!("{}: {}", err.code(), err),
                },
            };
            receipts.push(receipt);
        }
        let state_root = compute_state_root(&self.graph, &self.accounts);
        let parent_hash = block_hash(self.latest_block());
        self.blocks.push(Block {
            height,
            timestamp,
            parent_hash,
            transactions,
            receipts,
            state_root,
        });
        self.latest_block()
    }

    /// Runs one transaction against the registry. Validation happens before
    /// any mutation, so an error here means nothing changed.
    fn execute(
        &mut self,
        tx: &Transaction,
        height: u64,
        timestamp: u64,
        exec_index: u32,
    ) -> Result<Option<TokenId>> {
        let account_nonce = self.accounts.get(&tx.sender).copied().unwrap_or(0);
        if tx.nonce != account_nonce {
            return Err(ChainError::BadNonce {
                expected: account_nonce,
                actual: tx.nonce,
            });
        }
        let minted = match &tx.payload {
            Payload::Mint {
                referring,
                weights,
                labels,
            } => {
                let coords = BlockCoords::new(height, timestamp, exec_index);
                let token =
                    self.graph
                        .safe_mint(tx.sender, referring, weights, labels.clone(), coords)?;
                Some(token)
            }
            Payload::SetNode {
                token_id,
                referring,
                weights,
            } => {
                let owner = self.graph.owner_of(*token_id)?;
                if owner != tx.sender {
                    return Err(GraphError::NotOwner {
                        token: *token_id,
                        from: tx.sender,
                    }
                    .into());
                }
                self.graph.set_node(*token_id, referring, weights)?;
                None
            }
            Payload::Transfer { to, token_id } => {
                self.graph.transfer_from(tx.sender, *to, *token_id)?;
                self.accounts.entry(*to).or_insert(0);
                None
            }
        };
        *self.accounts.entry(tx.sender).or_insert(0) += 1;
        Ok(minted)
    }

    /// End-to-end structural check: contiguous heights, linked parent hashes,
    /// deterministic timestamps, and a latest state root matching a fresh
    /// digest of the current state.
    pub fn verify_chain(&self) -> Result<()> {
        for (i, block) in self.blocks.iter().enumerate() {
            if block.height != i as u64 {
                return Err(GraphError::RegistryCorrupt(format!(
                    "block {} has height {}",
                    i, block.height
                ))
                .into());
            }
            let expected_time =
                self.config.genesis_time + block.height * self.config.block_interval;
            if block.timestamp != expected_time {
                return Err(GraphError::RegistryCorrupt(format!(
                    "block {} timestamp {} != {}",
                    i, block.timestamp, expected_time
                ))
                .into());
            }
            let expected_parent = if i == 0 {
                Digest::default()
            } else {
                block_hash(&self.blocks[i - 1])
            };
            if block.parent_hash != expected_parent {
                return Err(GraphError::RegistryCorrupt(format!(
                    "block {} parent hash mismatch",
                    i
                ))
                .into());
            }
        }
        if self.latest_block().state_root != self.state_root() {
            return Err(GraphError::RegistryCorrupt(
                "latest state root does not match current state".into(),
            )
            .into());
        }
        Ok(())
    }

    /// One JSON object per transaction, in chain order, with receipt status.
    pub fn tx_log_jsonl(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            for (i, (tx, receipt)) in block.transactions.iter().zip(&block.receipts).enumerate() {
                let mut entry = serde_json::json!({
                    "height": block.height,
                    "txIndex": i,
                    "sender": tx.sender,
                    "nonce": tx.nonce,
                    "payload": tx.payload,
                });
                match receipt {
                    Receipt::Success { minted } => {
                        entry["status"] = "success".into();
                        if let Some(token) = minted {
                            entry["minted"] = serde_json::json!(token);
                        }
                    }
                    Receipt::Failed { reason } => {
                        entry["status"] = "failed".into();
                        entry["reason"] = serde_json::json!(reason);
                    }
                }
                out.push_str(&serde_json::to_string(&entry).expect("log serializes"));
                out.push('\n');
            }
        }
        out
    }
}

fn compute_state_root(graph: &ReferenceGraph, accounts: &BTreeMap<Address, u64>) -> Digest {
    let mut w = CanonicalWriter::new();
    w.put_str("rnft.state.v1");
    w.put_bytes(&codec::encode_accounts(accounts));
    w.put_bytes(&codec::encode_graph(graph));
    codec::sha256(&w.into_bytes())
}
