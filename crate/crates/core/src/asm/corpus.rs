//! Hand-assembled programs reproducing the budget-dependent gas phenomena.
//!
//! Builders take gas parameters and emit assembly text; thresholds are
//! derived from the default schedule. Nothing here claims a measured
//! cost: tests run the interpreter to measure tails and minima.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigUint;

use super::{assemble, AsmError};
use crate::chain::{AccountState, Transaction, WorldState};
use crate::opcode::Opcode;
use crate::schedule::GasSchedule;
use crate::types::{parse_word, word_to_hex, Address, Gas, Word};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("{builder}: parameters not realizable: {reason}")]
    ParameterInfeasible {
        builder: &'static str,
        reason: String,
    },
}

fn infeasible(builder: &'static str, reason: impl Into<String>) -> BuildError {
    BuildError::ParameterInfeasible {
        builder,
        reason: reason.into(),
    }
}

pub fn corpus_contract() -> Address {
    Address::from_low_u64(0xc0de)
}

pub fn corpus_sender() -> Address {
    Address::from_low_u64(0x5e4d)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusProgram {
    pub name: String,
    pub source: String,
    pub code: Vec<u8>,
    /// Storage of the contract before the transaction.
    pub storage: Vec<(Word, Word)>,
}

impl CorpusProgram {
    pub fn from_source(name: impl Into<String>, source: String, storage: Vec<(Word, Word)>) -> Self {
        let name = name.into();
        let code = assemble(&source)
            .unwrap_or_else(|e| panic!("corpus program {name} does not assemble: {e}"));
        CorpusProgram {
            name,
            source,
            code,
            storage,
        }
    }

    /// Reads a program written by [`write_corpus`]: `// storage k = v`
    /// comment lines give the initial storage, the rest is assembly.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, AsmError> {
        let code = assemble(text)?;
        let mut storage = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let Some(entry) = line.trim().strip_prefix("// storage ") else {
                continue;
            };
            let bad = |text: &str, source| AsmError::BadImmediate {
                line: idx + 1,
                text: text.to_string(),
                source,
            };
            let (k, v) = entry.split_once('=').ok_or_else(|| AsmError::ImmediateWidthMismatch {
                line: idx + 1,
                detail: format!("storage line {entry:?} needs `key = value`"),
            })?;
            let key = parse_word(k.trim()).map_err(|e| bad(k.trim(), e))?;
            let value = parse_word(v.trim()).map_err(|e| bad(v.trim(), e))?;
            storage.push((key, value));
        }
        Ok(CorpusProgram {
            name: name.into(),
            source: text.to_string(),
            code,
            storage,
        })
    }

    /// The contract at [`corpus_contract`] and a sender holding 1 ether.
    pub fn state(&self) -> WorldState {
        let mut contract = AccountState::with_code(self.code.clone());
        for (k, v) in &self.storage {
            contract = contract.storage(*k, *v);
        }
        let mut accounts = BTreeMap::new();
        accounts.insert(corpus_contract(), contract);
        accounts.insert(
            corpus_sender(),
            AccountState::with_balance(BigUint::from(10u64).pow(18)),
        );
        WorldState::from_accounts(accounts)
    }

    pub fn tx(&self, gas_limit: Gas) -> Transaction {
        Transaction::call(corpus_sender(), corpus_contract(), gas_limit)
    }
}

fn cost(op: Opcode) -> Gas {
    GasSchedule::default().op_cost(op)
}

/// Straight-line filler costing exactly `gas`.
pub fn padding(gas: Gas) -> String {
    let pair = cost(Opcode::PUSH1) + cost(Opcode::POP);
    let mut out = String::new();
    for _ in 0..gas / pair {
        out.push_str("PUSH1 0x00\nPOP\n");
    }
    for _ in 0..(gas % pair) / cost(Opcode::JUMPDEST) {
        out.push_str("JUMPDEST\n");
    }
    out
}

/// Smallest PUSH that holds `value`.
fn push(value: Gas) -> String {
    let bytes = (64 - value.leading_zeros()).div_ceil(8).max(1);
    format!("PUSH{bytes} {value:#x}\n")
}

/// Writes zero to slot 0, which holds 0x2a before the transaction.
pub fn build_clear_slot() -> CorpusProgram {
    let source = "\
// clear a nonzero slot: refunded at the end, charged in full up front
PUSH1 0x00
PUSH1 0x00
SSTORE
STOP
"
    .to_string();
    CorpusProgram::from_source(
        "clear_slot",
        source,
        vec![(Word::zero(), Word::from(0x2a))],
    )
}

/// Two writes to slot 0; the second sees a warm dirty slot, so it costs
/// the warm price but still needs more than the stipend left. The tail
/// from the second SSTORE to STOP costs `h_target`.
pub fn build_warm_tail(h_target: Gas) -> Result<CorpusProgram, BuildError> {
    let s = GasSchedule::default();
    if h_target < s.sstore_warm_dirty {
        return Err(infeasible(
            "warm_tail",
            format!("tail must cover the warm write ({} gas)", s.sstore_warm_dirty),
        ));
    }
    if h_target > s.sstore_stipend + 1 {
        return Err(infeasible(
            "warm_tail",
            format!(
                "a tail above {} is bound by its own cost, not the stipend",
                s.sstore_stipend + 1
            ),
        ));
    }
    let mut source = String::from(
        "// first write: cold, clean slot\n\
         PUSH1 0x04\nPUSH1 0x00\nSSTORE\n\
         // second write: warm and dirty\n\
         PUSH1 0x03\nPUSH1 0x00\nSSTORE\n",
    );
    source.push_str(&padding(h_target - s.sstore_warm_dirty));
    source.push_str("STOP\n");
    Ok(CorpusProgram::from_source(
        format!("warm_tail_{h_target}"),
        source,
        vec![],
    ))
}

/// Reverts unless more than `c` gas is left when GAS executes.
pub fn build_gas_gate(c: Gas) -> Result<CorpusProgram, BuildError> {
    let g = cost(Opcode::GAS);
    let tail = g
        + cost(Opcode::PUSH1)
        + cost(Opcode::LT)
        + cost(Opcode::PUSH2)
        + cost(Opcode::JUMPI)
        + cost(Opcode::JUMPDEST)
        + cost(Opcode::STOP);
    if c < tail {
        return Err(infeasible(
            "gas_gate",
            format!("threshold {c} is below the gate's own tail of {tail}"),
        ));
    }
    let mut source = String::from("GAS\n");
    source.push_str(&push(c - g));
    source.push_str(
        "LT\n\
         @pass\n\
         JUMPI\n\
         PUSH1 0x00\nDUP1\nREVERT\n\
         pass:\n\
         JUMPDEST\n\
         STOP\n",
    );
    Ok(CorpusProgram::from_source(format!("gas_gate_{c}"), source, vec![]))
}

/// With more than `c` gas left at GAS the program takes a branch costing
/// `costly`; otherwise a branch costing `cheap`. Large budgets therefore use
/// more gas than the minimum budget needs.
pub fn build_discrepancy(c: Gas, cheap: Gas, costly: Gas) -> Result<CorpusProgram, BuildError> {
    let g = cost(Opcode::GAS);
    let head = g + cost(Opcode::PUSH1) + cost(Opcode::LT) + cost(Opcode::PUSH2) + cost(Opcode::JUMPI);
    if cheap >= costly {
        return Err(infeasible("discrepancy", "cheap branch must cost less than the costly one"));
    }
    if head + cheap > c {
        return Err(infeasible(
            "discrepancy",
            format!("cheap branch ({} with the head) does not fit under {c}", head + cheap),
        ));
    }
    let mut source = String::from("GAS\n");
    source.push_str(&push(c - g));
    source.push_str("LT\n@costly\nJUMPI\n// cheap branch\n");
    source.push_str(&padding(cheap));
    source.push_str("STOP\ncostly:\nJUMPDEST\n");
    source.push_str(&padding(costly));
    source.push_str("STOP\n");
    Ok(CorpusProgram::from_source(
        format!("discrepancy_{c}_{cheap}_{costly}"),
        source,
        vec![],
    ))
}

/// Reverts iff `c_low < gas_left < c_high` at the GAS instruction, which
/// splits the committing budgets into two intervals.
pub fn build_discontinuity(c_low: Gas, c_high: Gas) -> Result<CorpusProgram, BuildError> {
    let g = cost(Opcode::GAS);
    let tail = g
        + cost(Opcode::DUP1)
        + cost(Opcode::PUSH1)
        + cost(Opcode::LT)
        + cost(Opcode::SWAP1)
        + cost(Opcode::PUSH1)
        + cost(Opcode::GT)
        + cost(Opcode::AND)
        + cost(Opcode::PUSH2)
        + cost(Opcode::JUMPI)
        + cost(Opcode::STOP);
    if c_low < tail {
        return Err(infeasible(
            "discontinuity",
            format!("c_low {c_low} leaves no room for the success tail of {tail}"),
        ));
    }
    if c_high < c_low + 2 {
        return Err(infeasible("discontinuity", "need c_high >= c_low + 2 for a gap"));
    }
    let mut source = String::from("GAS\nDUP1\n");
    source.push_str(&push(c_low - g));
    source.push_str("LT          // c_low < gas\nSWAP1\n");
    source.push_str(&push(c_high - g));
    source.push_str(
        "GT          // gas < c_high\n\
         AND\n\
         @fail\n\
         JUMPI\n\
         STOP\n\
         fail:\n\
         JUMPDEST\n\
         PUSH1 0x00\nDUP1\nREVERT\n",
    );
    Ok(CorpusProgram::from_source(
        format!("discontinuity_{c_low}_{c_high}"),
        source,
        vec![],
    ))
}

/// `balances[msg.sender] += msg.value` in the style of compiled wallet code.
pub fn build_deposit_like() -> CorpusProgram {
    let source = "\
// balances[msg.sender] + msg.value
CALLVALUE
PUSH1 0x00
DUP1
CALLER
PUSH20 0xffffffffffffffffffffffffffffffffffffffff
AND
PUSH20 0xffffffffffffffffffffffffffffffffffffffff
AND
DUP2
MSTORE
PUSH1 0x20
ADD
SWAP1
DUP2
MSTORE
PUSH1 0x20
ADD
PUSH1 0x00
KECCAK256
SLOAD
ADD
// store it back under the same key
PUSH1 0x40
PUSH1 0x00
KECCAK256
SSTORE
STOP
"
    .to_string();
    CorpusProgram::from_source("deposit_like", source, vec![])
}

/// The bundled instances, one per builder.
pub fn default_corpus() -> Vec<CorpusProgram> {
    vec![
        build_clear_slot(),
        build_warm_tail(2000).expect("feasible"),
        build_gas_gate(30000).expect("feasible"),
        build_discrepancy(30000, 100, 5000).expect("feasible"),
        build_discontinuity(30000, 60000).expect("feasible"),
        build_deposit_like(),
    ]
}

/// Writes each default program as `<name>.easm` into `dir`.
pub fn write_corpus(dir: &std::path::Path) -> std::io::Result<Vec<std::path::PathBuf>> {
    write_programs(dir, &default_corpus())
}

/// Writes programs as `<name>.easm`, storage first as `// storage k = v`.
pub fn write_programs(
    dir: &std::path::Path,
    programs: &[CorpusProgram],
) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for p in programs {
        let path = dir.join(format!("{}.easm", p.name));
        let mut text = String::new();
        for (k, v) in &p.storage {
            let _ = writeln!(text, "// storage {} = {}", word_to_hex(k), word_to_hex(v));
        }
        text.push_str(&p.source);
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::disassemble;

    #[test]
    fn padding_is_exact() {
        for gas in 0..40 {
            let code = assemble(&padding(gas)).unwrap();
            let mut total = 0;
            let mut pc = 0;
            while pc < code.len() {
                let op = Opcode(code[pc]);
                total += cost(op);
                pc += 1 + op.push_width().unwrap_or(0);
            }
            assert_eq!(total, gas);
        }
    }

    #[test]
    fn infeasible_parameters() {
        assert!(build_warm_tail(99).is_err());
        assert!(build_warm_tail(2302).is_err());
        assert!(build_warm_tail(2301).is_ok());
        assert!(build_gas_gate(10).is_err());
        assert!(build_discrepancy(100, 50, 40).is_err());
        assert!(build_discrepancy(30, 20, 400).is_err());
        assert!(build_discontinuity(20, 1000).is_err());
        assert!(build_discontinuity(1000, 1001).is_err());
    }

    #[test]
    fn default_corpus_round_trips() {
        for p in default_corpus() {
            assert_eq!(assemble(&disassemble(&p.code)).unwrap(), p.code, "{}", p.name);
        }
    }

    #[test]
    fn bundled_files_match_builders() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
        for p in default_corpus() {
            let text = std::fs::read_to_string(dir.join(format!("{}.easm", p.name))).unwrap();
            let loaded = CorpusProgram::parse(&p.name, &text).unwrap();
            assert_eq!(loaded.code, p.code, "{}", p.name);
            assert_eq!(loaded.storage, p.storage, "{}", p.name);
        }
    }

    #[test]
    fn written_corpus_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_corpus(dir.path()).unwrap();
        assert_eq!(paths.len(), default_corpus().len());
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        let loaded = CorpusProgram::parse("clear_slot", &text).unwrap();
        assert_eq!(loaded.storage, build_clear_slot().storage);
    }
}
