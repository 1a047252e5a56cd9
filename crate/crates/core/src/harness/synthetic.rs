//! A seeded three-contract scenario exercising both datasets:
//!
//! * `arith` reads a constant slot and returns a sum (D1, constant gas);
//! * `wallet` credits deposits per sender, so its costs depend on whether
//!   the sender's slot is still zero (D1, state dependent);
//! * `deadline` takes a cheap counter path until the block timestamp passes
//!   a stored deadline and a costly fresh-slot write afterwards (D2).
//!
//! Block diffs carry the contracts' state changes; senders are funded once
//! and their balances are not tracked.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{BlockFile, ScenarioFile, TxFile};
use crate::asm::assemble;
use crate::asm::corpus::build_deposit_like;
use crate::chain::snapshot::{AccountPatch, HexWord, StateSnapshot};
use crate::keccak::keccak256_word;
use crate::types::{Address, Wei, Word};

pub const SYNTHETIC_BLOCKS: u64 = 120;
pub const GENESIS_TIMESTAMP: u64 = 1_700_000_000;
pub const BLOCK_TIME: u64 = 12;
/// Deadline of the `deadline` contract: the timestamp of this block.
pub const DEADLINE_BLOCK: u64 = 60;
pub const DEFAULT_SEED: u64 = 42;

const ARITH_SOURCE: &str = "\
PUSH1 0x04
CALLDATALOAD
PUSH1 0x01
SLOAD
ADD
PUSH1 0x00
MSTORE
PUSH1 0x20
PUSH1 0x00
RETURN
";

const DEADLINE_SOURCE: &str = "\
// late when deadline < timestamp
TIMESTAMP
PUSH1 0x00
SLOAD
LT
@late
JUMPI
// counter += 1
PUSH1 0x01
SLOAD
PUSH1 0x01
ADD
PUSH1 0x01
SSTORE
STOP
late:
JUMPDEST
// mark this block's slot
PUSH1 0x01
NUMBER
SSTORE
STOP
";

pub fn arith_contract() -> Address {
    Address::from_low_u64(0xa1)
}

pub fn wallet_contract() -> Address {
    Address::from_low_u64(0xb2)
}

pub fn deadline_contract() -> Address {
    Address::from_low_u64(0xc3)
}

pub fn synthetic_senders() -> Vec<Address> {
    (1..=5).map(|i| Address::from_low_u64(0x1000 + i)).collect()
}

pub fn block_timestamp(number: u64) -> u64 {
    GENESIS_TIMESTAMP + BLOCK_TIME * number
}

fn wallet_key(sender: Address) -> Word {
    let mut preimage = [0u8; 64];
    preimage[..32].copy_from_slice(&sender.to_word().to_big_endian());
    keccak256_word(&preimage)
}

fn word_bytes(w: Word) -> [u8; 32] {
    w.to_big_endian()
}

fn patch_slot(diff: &mut StateSnapshot, address: Address, key: Word, value: Word) {
    diff.accounts
        .entry(address)
        .or_default()
        .storage
        .insert(HexWord(key), HexWord(value));
}

pub fn synthetic_scenario(seed: u64) -> ScenarioFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let senders = synthetic_senders();
    let deadline = block_timestamp(DEADLINE_BLOCK);

    let mut base = StateSnapshot::default();
    for s in &senders {
        base.accounts.insert(
            *s,
            AccountPatch {
                balance: Some(BigUint::from(10u64).pow(21)),
                ..Default::default()
            },
        );
    }
    let code = |src: &str| assemble(src).expect("synthetic contract assembles");
    base.accounts.insert(
        arith_contract(),
        AccountPatch {
            code: Some(code(ARITH_SOURCE)),
            storage: BTreeMap::from([(HexWord(Word::one()), HexWord(Word::from(7)))]),
            ..Default::default()
        },
    );
    base.accounts.insert(
        wallet_contract(),
        AccountPatch {
            code: Some(build_deposit_like().code),
            ..Default::default()
        },
    );
    base.accounts.insert(
        deadline_contract(),
        AccountPatch {
            code: Some(code(DEADLINE_SOURCE)),
            storage: BTreeMap::from([
                (HexWord(Word::zero()), HexWord(Word::from(deadline))),
                (HexWord(Word::one()), HexWord(Word::one())),
            ]),
            ..Default::default()
        },
    );

    let mut arith_data = vec![0x11, 0x22, 0x33, 0x44];
    arith_data.extend_from_slice(&word_bytes(Word::from(0x2a)));
    let gas_price: Wei = BigUint::from(1_000_000_000u64);

    let mut deposits: BTreeMap<Address, BigUint> = BTreeMap::new();
    let mut wallet_total = BigUint::default();
    let mut counter = Word::one();
    let mut blocks = Vec::new();
    let mut transactions = Vec::new();

    for number in 1..=SYNTHETIC_BLOCKS {
        let mut diff = StateSnapshot::default();
        let mut calls: Vec<(Address, Address, Vec<u8>, Wei)> = Vec::new();

        if number >= 2 {
            if rng.gen_bool(0.35) {
                let from = senders[rng.gen_range(0..senders.len())];
                calls.push((from, arith_contract(), arith_data.clone(), Wei::default()));
            }
            for _ in 0..rng.gen_range(0..=2) {
                let from = senders[rng.gen_range(0..senders.len())];
                let value = BigUint::from(rng.gen_range(1u64..1_000_000_000_000_000));
                calls.push((from, wallet_contract(), vec![0xd0, 0xe3, 0x0d, 0xb0], value));
            }
            let forced = (DEADLINE_BLOCK + 2..=DEADLINE_BLOCK + 6).contains(&number);
            if forced || rng.gen_bool(0.25) {
                let from = senders[rng.gen_range(0..senders.len())];
                calls.push((from, deadline_contract(), vec![0x5c, 0x0f, 0xfe, 0xe5], Wei::default()));
            }
        }

        for (from, to, data, value) in calls {
            if to == wallet_contract() {
                let total = deposits.entry(from).or_default();
                *total += &value;
                let stored = Word::from_big_endian(&total.to_bytes_be());
                patch_slot(&mut diff, to, wallet_key(from), stored);
                wallet_total += &value;
                diff.accounts.entry(to).or_default().balance = Some(wallet_total.clone());
            } else if to == deadline_contract() {
                if block_timestamp(number) > deadline {
                    patch_slot(&mut diff, to, Word::from(number), Word::one());
                } else {
                    counter = counter + Word::one();
                    patch_slot(&mut diff, to, Word::one(), counter);
                }
            }
            transactions.push(TxFile {
                id: format!("tx{:04}", transactions.len() + 1),
                from,
                to,
                value,
                data,
                gas_limit: 150_000,
                gas_price: gas_price.clone(),
                access_list: Vec::new(),
                block: number,
                is_create: false,
            });
        }

        let number_word = word_bytes(Word::from(number));
        blocks.push(BlockFile {
            number,
            timestamp: block_timestamp(number),
            coinbase: Address::from_low_u64(0xfee),
            gas_limit: Some(30_000_000),
            base_fee: BigUint::from(7u8),
            prevrandao: Some(HexWord(keccak256_word(&[&b"randao"[..], &number_word].concat()))),
            hash: Some(HexWord(keccak256_word(&number_word))),
            diff,
        });
    }

    ScenarioFile {
        schedule: None,
        base_state: base,
        blocks,
        transactions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::Scenario;

    #[test]
    fn seeded_and_valid() {
        let a = synthetic_scenario(DEFAULT_SEED);
        assert_eq!(a, synthetic_scenario(DEFAULT_SEED));
        assert_ne!(a, synthetic_scenario(DEFAULT_SEED + 1));
        assert_eq!(a.blocks.len(), SYNTHETIC_BLOCKS as usize);
        let s = Scenario::from_file(&a, None).unwrap();
        let late: Vec<_> = s
            .transactions
            .iter()
            .filter(|t| t.tx.to == deadline_contract() && t.block > DEADLINE_BLOCK + 1)
            .collect();
        assert!(late.len() >= 5);
    }

    #[test]
    fn bundled_copy_matches_generator() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/synthetic.json");
        let text = std::fs::read_to_string(path).expect("bundled synthetic scenario");
        let (file, warnings) = ScenarioFile::parse(&text, false).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(file, synthetic_scenario(DEFAULT_SEED));
    }

    #[test]
    fn wallet_key_matches_contract() {
        use crate::chain::BlockContext;
        use crate::interpreter::execute;

        let file = synthetic_scenario(DEFAULT_SEED);
        let mut state = file.base_state.to_state();
        let sender = synthetic_senders()[0];
        let mut tx = crate::chain::Transaction::call(sender, wallet_contract(), 150_000);
        tx.value = BigUint::from(5u8);
        let out = execute(&mut state, &BlockContext::new(1, 0, 30_000_000), &tx, &Default::default()).unwrap();
        assert!(out.succeeded());
        assert_eq!(state.storage(&wallet_contract(), &wallet_key(sender)), Word::from(5));
    }
}
