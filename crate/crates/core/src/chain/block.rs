use std::collections::BTreeMap;

use crate::types::{Address, Gas, Wei, Word};

/// Number of ancestors whose hashes BLOCKHASH may observe.
pub const BLOCKHASH_WINDOW: u64 = 256;

/// Values the block-context opcodes read.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockContext {
    pub number: u64,
    pub timestamp: u64,
    pub coinbase: Address,
    pub gas_limit: Gas,
    pub base_fee: Wei,
    pub prevrandao: Word,
    /// Hashes of earlier blocks, by number.
    pub hash_lookup: BTreeMap<u64, Word>,
    pub parent_number: u64,
}

impl BlockContext {
    pub fn new(number: u64, timestamp: u64, gas_limit: Gas) -> Self {
        BlockContext {
            number,
            timestamp,
            gas_limit,
            parent_number: number.saturating_sub(1),
            ..Default::default()
        }
    }

    /// BLOCKHASH semantics: only the 256 blocks strictly before `number`
    /// are visible; anything else, or an unknown hash, reads as zero.
    pub fn block_hash(&self, n: u64) -> Word {
        if n >= self.number || self.number - n > BLOCKHASH_WINDOW {
            return Word::zero();
        }
        self.hash_lookup.get(&n).copied().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blockhash_window() {
        let mut b = BlockContext::new(300, 0, 30_000_000);
        for n in 0..300 {
            b.hash_lookup.insert(n, Word::from(n + 1));
        }
        assert_eq!(b.block_hash(299), Word::from(300));
        assert_eq!(b.block_hash(44), Word::from(45));
        assert_eq!(b.block_hash(43), Word::zero());
        assert_eq!(b.block_hash(300), Word::zero());
        assert_eq!(b.block_hash(1000), Word::zero());
    }
}
