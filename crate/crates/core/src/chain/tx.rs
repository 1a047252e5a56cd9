use crate::types::{Address, Gas, Wei, Word};

/// Four-byte function selector: the leading bytes of the call data.
pub type Selector = [u8; 4];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transaction {
    pub from: Address,
    /// Ignored when `is_create` is set.
    pub to: Address,
    pub value: Wei,
    pub data: Vec<u8>,
    pub gas_limit: Gas,
    pub gas_price: Wei,
    pub access_list: Vec<(Address, Vec<Word>)>,
    pub is_create: bool,
}

impl Transaction {
    pub fn call(from: Address, to: Address, gas_limit: Gas) -> Self {
        Transaction {
            from,
            to,
            gas_limit,
            ..Default::default()
        }
    }

    /// The same transaction with its gas limit replaced.
    pub fn with_gas_limit(&self, gas_limit: Gas) -> Self {
        Transaction {
            gas_limit,
            ..self.clone()
        }
    }

    /// First four bytes of the call data; shorter data is zero-padded, so
    /// empty call data maps to the zero selector.
    pub fn selector(&self) -> Selector {
        let mut out = [0u8; 4];
        let n = self.data.len().min(4);
        out[..n].copy_from_slice(&self.data[..n]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_padding() {
        let mut tx = Transaction::call(Address::ZERO, Address::from_low_u64(1), 21000);
        assert_eq!(tx.selector(), [0; 4]);
        tx.data = vec![0xaa, 0xbb];
        assert_eq!(tx.selector(), [0xaa, 0xbb, 0, 0]);
        tx.data = vec![1, 2, 3, 4, 5];
        assert_eq!(tx.selector(), [1, 2, 3, 4]);
    }
}
