//! Every gas constant the interpreter charges, London/Paris-era defaults.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::opcode::Opcode;
use crate::types::Gas;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GasSchedule {
    /// Static cost charged before an opcode runs. Opcodes with purely
    /// dynamic pricing (SLOAD, SSTORE, BALANCE, KECCAK256) carry 0 here.
    pub op_costs: [Gas; 256],
    pub g_tx: Gas,
    pub g_create: Gas,
    pub data_zero_byte: Gas,
    pub data_nonzero_byte: Gas,
    pub access_list_address: Gas,
    pub access_list_slot: Gas,
    pub cold_sload: Gas,
    /// Also the price of a warm account access.
    pub warm_sload: Gas,
    pub cold_account_access: Gas,
    pub sstore_set: Gas,
    pub sstore_reset: Gas,
    pub sstore_warm_dirty: Gas,
    pub sstore_clear_refund: Gas,
    pub sstore_stipend: Gas,
    pub memory_word_linear: Gas,
    pub memory_quadratic_divisor: Gas,
    pub keccak_base: Gas,
    pub keccak_per_word: Gas,
    /// Maximum fraction of the unspent budget a refund may claim: 1/quotient.
    pub refund_quotient: Gas,
    pub default_block_gas_limit: Gas,
}

impl Default for GasSchedule {
    fn default() -> Self {
        let mut op_costs = [0; 256];
        let mut set = |op: Opcode, cost: Gas| op_costs[op.0 as usize] = cost;
        for op in [
            Opcode::ADD,
            Opcode::SUB,
            Opcode::LT,
            Opcode::GT,
            Opcode::EQ,
            Opcode::ISZERO,
            Opcode::AND,
            Opcode::OR,
            Opcode::XOR,
            Opcode::NOT,
            Opcode::MLOAD,
            Opcode::MSTORE,
            Opcode::CALLDATALOAD,
        ] {
            set(op, 3);
        }
        set(Opcode::MUL, 5);
        set(Opcode::DIV, 5);
        for op in [
            Opcode::ADDRESS,
            Opcode::CALLER,
            Opcode::CALLVALUE,
            Opcode::CALLDATASIZE,
            Opcode::COINBASE,
            Opcode::TIMESTAMP,
            Opcode::NUMBER,
            Opcode::PREVRANDAO,
            Opcode::GASLIMIT,
            Opcode::BASEFEE,
            Opcode::POP,
            Opcode::PC,
            Opcode::GAS,
        ] {
            set(op, 2);
        }
        set(Opcode::SELFBALANCE, 5);
        set(Opcode::BLOCKHASH, 20);
        set(Opcode::JUMP, 8);
        set(Opcode::JUMPI, 10);
        set(Opcode::JUMPDEST, 1);
        for b in 0x60..=0x9f {
            op_costs[b] = 3;
        }

        GasSchedule {
            op_costs,
            g_tx: 21000,
            g_create: 32000,
            data_zero_byte: 4,
            data_nonzero_byte: 16,
            access_list_address: 2400,
            access_list_slot: 1900,
            cold_sload: 2100,
            warm_sload: 100,
            cold_account_access: 2600,
            sstore_set: 20000,
            sstore_reset: 2900,
            sstore_warm_dirty: 100,
            sstore_clear_refund: 4800,
            sstore_stipend: 2300,
            memory_word_linear: 3,
            memory_quadratic_divisor: 512,
            keccak_base: 30,
            keccak_per_word: 6,
            refund_quotient: 5,
            default_block_gas_limit: 30_000_000,
        }
    }
}

impl GasSchedule {
    pub fn op_cost(&self, op: Opcode) -> Gas {
        self.op_costs[op.0 as usize]
    }

    /// Total memory cost of `words` 32-byte words; `None` on overflow.
    pub fn memory_cost(&self, words: u64) -> Option<Gas> {
        let linear = words.checked_mul(self.memory_word_linear)?;
        let quadratic = words.checked_mul(words)? / self.memory_quadratic_divisor.max(1);
        linear.checked_add(quadratic)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error("unknown opcode mnemonic {0:?} in schedule overrides")]
    UnknownOpcode(String),
}

/// Partial schedule as found in scenario files and `--schedule` documents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleOverrides {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub opcodes: BTreeMap<String, Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_tx: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_create: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_zero_byte: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_nonzero_byte: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access_list_address: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access_list_slot: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cold_sload: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_sload: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cold_account_access: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sstore_set: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sstore_reset: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sstore_warm_dirty: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sstore_clear_refund: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sstore_stipend: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_word_linear: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_quadratic_divisor: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keccak_base: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keccak_per_word: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refund_quotient: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_block_gas_limit: Option<Gas>,
}

impl ScheduleOverrides {
    pub fn apply(&self, base: &GasSchedule) -> Result<GasSchedule, ScheduleError> {
        let mut s = base.clone();
        for (name, cost) in &self.opcodes {
            let op = Opcode::from_mnemonic(name)
                .ok_or_else(|| ScheduleError::UnknownOpcode(name.clone()))?;
            s.op_costs[op.0 as usize] = *cost;
        }
        macro_rules! merge {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { s.$field = v; })*
            };
        }
        merge!(
            g_tx,
            g_create,
            data_zero_byte,
            data_nonzero_byte,
            access_list_address,
            access_list_slot,
            cold_sload,
            warm_sload,
            cold_account_access,
            sstore_set,
            sstore_reset,
            sstore_warm_dirty,
            sstore_clear_refund,
            sstore_stipend,
            memory_word_linear,
            memory_quadratic_divisor,
            keccak_base,
            keccak_per_word,
            refund_quotient,
            default_block_gas_limit
        );
        Ok(s)
    }

    /// Layers `other` on top of `self`.
    pub fn merged_with(&self, other: &ScheduleOverrides) -> ScheduleOverrides {
        let mut out = self.clone();
        out.opcodes
            .extend(other.opcodes.iter().map(|(k, v)| (k.clone(), *v)));
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { out.$field = other.$field; })*
            };
        }
        take!(
            g_tx,
            g_create,
            data_zero_byte,
            data_nonzero_byte,
            access_list_address,
            access_list_slot,
            cold_sload,
            warm_sload,
            cold_account_access,
            sstore_set,
            sstore_reset,
            sstore_warm_dirty,
            sstore_clear_refund,
            sstore_stipend,
            memory_word_linear,
            memory_quadratic_divisor,
            keccak_base,
            keccak_per_word,
            refund_quotient,
            default_block_gas_limit
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_defaults() {
        let s = GasSchedule::default();
        assert_eq!(s.g_tx, 21000);
        assert_eq!(s.g_create, 32000);
        assert_eq!(s.cold_sload, 2100);
        assert_eq!(s.sstore_clear_refund, 4800);
        assert_eq!(s.sstore_stipend, 2300);
        assert_eq!(s.refund_quotient, 5);
        assert_eq!(s.op_cost(Opcode::ADD), 3);
        assert_eq!(s.op_cost(Opcode::JUMP), 8);
        assert_eq!(s.op_cost(Opcode::PUSH32), 3);
        assert_eq!(s.op_cost(Opcode::SWAP1), 3);
    }

    #[test]
    fn memory_cost_formula() {
        let s = GasSchedule::default();
        assert_eq!(s.memory_cost(0), Some(0));
        assert_eq!(s.memory_cost(1), Some(3));
        assert_eq!(s.memory_cost(32), Some(98));
        assert_eq!(s.memory_cost(u64::MAX), None);
    }

    #[test]
    fn overrides_merge() {
        let o: ScheduleOverrides =
            serde_json::from_str(r#"{"opcodes": {"ADD": 7}, "cold_sload": 2600}"#).unwrap();
        let s = o.apply(&GasSchedule::default()).unwrap();
        assert_eq!(s.op_cost(Opcode::ADD), 7);
        assert_eq!(s.cold_sload, 2600);
        assert_eq!(s.warm_sload, 100);

        let bad: ScheduleOverrides = serde_json::from_str(r#"{"opcodes": {"CALL": 1}}"#).unwrap();
        assert!(bad.apply(&GasSchedule::default()).is_err());
    }
}
