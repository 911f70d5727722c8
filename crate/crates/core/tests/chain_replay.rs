//! Ledger-level integration: the canonical five-token scenario replayed
//! through signed transactions, replay determinism, per-transaction
//! atomicity, and identity properties.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use rnft_core::chain::{
    signing_bytes, tran_gen, ChainState, GenesisConfig, Payload, Receipt,
};
use rnft_core::graph::TokenId;
use rnft_core::sig::{key_gen, KeyedDigest, SignatureScheme};

fn mint(referring: Vec<u64>, weights: Vec<f64>) -> Payload {
    Payload::Mint {
        referring: referring.into_iter().map(TokenId).collect(),
        weights,
        labels: vec![],
    }
}

/// Mints A, B, C in block 1, D (refers A) in block 2, E (refers A, B, C) in
/// block 3 — all through signed transactions.
fn replay_five_token_scenario() -> ChainState {
    let mut state = ChainState::new(GenesisConfig::default());
    let users: Vec<_> = ["alice", "bob", "carol", "dave", "erin"]
        .iter()
        .map(|name| key_gen(name.as_bytes()))
        .collect();
    for user in &users[..3] {
        state
            .submit_tx(tran_gen(user, mint(vec![], vec![]), 0, BTreeMap::new()))
            .unwrap();
    }
    state.seal_block();
    state
        .submit_tx(tran_gen(&users[3], mint(vec![1], vec![0.3]), 0, BTreeMap::new()))
        .unwrap();
    state.seal_block();
    state
        .submit_tx(tran_gen(
            &users[4],
            mint(vec![1, 2, 3], vec![0.2, 0.2, 0.2]),
            0,
            BTreeMap::new(),
        ))
        .unwrap();
    state.seal_block();
    state
}

#[test]
fn five_token_scenario_reference_sets() {
    let state = replay_five_token_scenario();
    let graph = state.graph();
    let ids: Vec<TokenId> = (1..=5).map(TokenId).collect();
    let [a, b, c, d, e] = [ids[0], ids[1], ids[2], ids[3], ids[4]];
    assert_eq!(graph.referred_of(a).unwrap(), vec![d, e]);
    assert_eq!(graph.referred_of(b).unwrap(), vec![e]);
    assert_eq!(graph.referred_of(c).unwrap(), vec![e]);
    assert_eq!(graph.referring_of(d).unwrap(), vec![a]);
    assert_eq!(graph.ancestors(e).unwrap().len(), 3);
    assert_eq!(graph.topological_order().unwrap(), ids);
}

#[test]
fn token_coordinates_match_sealing_blocks() {
    let state = replay_five_token_scenario();
    let graph = state.graph();
    for record in graph.records() {
        let block = &state.blocks()[record.relationship.created_height as usize];
        assert_eq!(record.relationship.created_timestamp, block.timestamp);
        assert_eq!(
            block.timestamp,
            state.config.genesis_time + block.height * state.config.block_interval
        );
    }
    // A and D land one and two blocks after A's sealing height respectively.
    assert_eq!(
        graph.referrer_counts_by_height(TokenId(1), 2).unwrap(),
        vec![1, 1]
    );
    state.verify_chain().unwrap();
}

#[test]
fn replay_is_deterministic() {
    let a = replay_five_token_scenario();
    let b = replay_five_token_scenario();
    let roots_a: Vec<_> = a.blocks().iter().map(|blk| blk.state_root).collect();
    let roots_b: Vec<_> = b.blocks().iter().map(|blk| blk.state_root).collect();
    assert_eq!(roots_a, roots_b);
    assert_eq!(a, b);
}

#[test]
fn failed_transactions_are_equivalent_to_skipping_them() {
    let alice = key_gen(b"alice");
    let bob = key_gen(b"bob");
    let mallory = key_gen(b"mallory");

    let mut with_failure = ChainState::new(GenesisConfig::default());
    with_failure
        .submit_tx(tran_gen(&alice, mint(vec![], vec![]), 0, BTreeMap::new()))
        .unwrap();
    // Unknown referent: admitted, fails at execution.
    with_failure
        .submit_tx(tran_gen(&mallory, mint(vec![42], vec![0.5]), 0, BTreeMap::new()))
        .unwrap();
    with_failure
        .submit_tx(tran_gen(&bob, mint(vec![1], vec![0.4]), 0, BTreeMap::new()))
        .unwrap();
    let block = with_failure.seal_block().clone();
    assert!(block.receipts[0].is_success());
    assert!(matches!(&block.receipts[1], Receipt::Failed { reason } if reason.starts_with("UnknownReferent")));
    assert!(block.receipts[2].is_success());

    let mut without_failure = ChainState::new(GenesisConfig::default());
    without_failure
        .submit_tx(tran_gen(&alice, mint(vec![], vec![]), 0, BTreeMap::new()))
        .unwrap();
    without_failure
        .submit_tx(tran_gen(&bob, mint(vec![1], vec![0.4]), 0, BTreeMap::new()))
        .unwrap();
    without_failure.seal_block();

    assert_eq!(with_failure.state_root(), without_failure.state_root());
    assert_eq!(
        with_failure.graph().len(),
        without_failure.graph().len()
    );
}

#[test]
fn same_block_reference_to_earlier_transaction() {
    let mut state = ChainState::new(GenesisConfig::default());
    let alice = key_gen(b"alice");
    let bob = key_gen(b"bob");
    // Token ids are sequential, so the second transaction can cite the first
    // mint of the same block.
    state
        .submit_tx(tran_gen(&alice, mint(vec![], vec![]), 0, BTreeMap::new()))
        .unwrap();
    state
        .submit_tx(tran_gen(&bob, mint(vec![1], vec![0.4]), 0, BTreeMap::new()))
        .unwrap();
    let block = state.seal_block().clone();
    assert!(block.receipts.iter().all(Receipt::is_success));
    let graph = state.graph();
    assert_eq!(graph.referring_of(TokenId(2)).unwrap(), vec![TokenId(1)]);
    assert_eq!(graph.get(TokenId(1)).unwrap().relationship.intra_block_index, 0);
    assert_eq!(graph.get(TokenId(2)).unwrap().relationship.intra_block_index, 1);
    graph.check_invariants().unwrap();
}

#[test]
fn ledger_state_is_send_and_sync() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<ChainState>();
}

#[test]
fn ten_thousand_seeds_yield_distinct_addresses() {
    let mut addresses = HashSet::new();
    for i in 0u64..10_000 {
        let pair = key_gen(&i.to_be_bytes());
        assert!(addresses.insert(pair.address()), "collision at seed {i}");
    }
}

#[test]
fn signature_flips_under_payload_mutation() {
    let alice = key_gen(b"alice");
    let tx = tran_gen(&alice, mint(vec![1, 2], vec![0.2, 0.3]), 7, BTreeMap::new());
    let message = signing_bytes(&tx.metadata, &tx.payload, tx.nonce);
    assert!(KeyedDigest.verify(&alice.pk, &message, &tx.signature));

    let mut rng = ChaCha12Rng::seed_from_u64(5);
    for _ in 0..100 {
        let mut mutated = message.clone();
        let pos = rng.gen_range(0..mutated.len());
        let bit = 1u8 << rng.gen_range(0..8);
        mutated[pos] ^= bit;
        assert!(!KeyedDigest.verify(&alice.pk, &mutated, &tx.signature));
    }
}

#[test]
fn empty_state_digest_is_stable_and_mint_changes_it() {
    let a = ChainState::new(GenesisConfig::default());
    let b = ChainState::new(GenesisConfig::default());
    assert_eq!(a.state_root(), b.state_root());

    let mut c = ChainState::new(GenesisConfig::default());
    c.submit_tx(tran_gen(
        &key_gen(b"alice"),
        mint(vec![], vec![]),
        0,
        BTreeMap::new(),
    ))
    .unwrap();
    c.seal_block();
    assert_ne!(c.state_root(), a.state_root());
}

#[test]
fn genesis_config_file_round_trip() {
    let json = r#"{
        "genesisTime": 1000,
        "blockInterval": 6,
        "initialAccounts": ["00000000000000000000000000000000000000aa"]
    }"#;
    let config: GenesisConfig = serde_json::from_str(json).unwrap();
    assert_eq!(config.genesis_time, 1000);
    assert_eq!(config.block_interval, 6);
    let state = ChainState::new(config.clone());
    assert_eq!(state.accounts().len(), 1);
    assert_eq!(state.latest_block().timestamp, 1000);
    let back: GenesisConfig =
        serde_json::from_str(&serde_json::to_string(&config).unwrap()).unwrap();
    assert_eq!(back, config);

    // Defaults apply when fields are omitted.
    let minimal: GenesisConfig = serde_json::from_str("{}").unwrap();
    assert_eq!(minimal.block_interval, 12);
}

#[test]
fn tx_log_lists_every_transaction_with_status() {
    let state = replay_five_token_scenario();
    let log = state.tx_log_jsonl();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 5);
    for line in &lines {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(value["status"], "success");
        assert!(value["minted"].is_number());
        assert!(value["height"].is_number());
    }
}

#[test]
fn metadata_is_covered_by_signatures() {
    let alice = key_gen(b"alice");
    let mut metadata = BTreeMap::new();
    metadata.insert("memo".to_string(), "first".to_string());
    let tx = tran_gen(&alice, mint(vec![], vec![]), 0, metadata.clone());

    let mut altered = tx.clone();
    altered.metadata.insert("memo".to_string(), "second".to_string());
    let mut state = ChainState::new(GenesisConfig::default());
    assert!(state.submit_tx(altered).is_err());
    assert!(state.submit_tx(tx).is_ok());
}
