//! Single-frame EVM execution with exact gas accounting.

mod gas;
mod machine;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use serde::Serialize;

use crate::chain::{BlockContext, StateError, Transaction, WorldState};
use crate::keccak::keccak256;
use crate::opcode::{valid_jump_destinations, Opcode};
use crate::schedule::GasSchedule;
use crate::types::{wei_to_word, Address, Gas, Wei, Word};

pub use gas::{
    charge_account_access, charge_memory_expansion, charge_sload, charge_sstore, intrinsic_gas,
};
pub use machine::{Machine, STACK_LIMIT};

use machine::memory_range;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HaltReason {
    Stop,
    Return(Vec<u8>),
    Revert(Vec<u8>),
    OutOfGas,
    StackUnderflow,
    StackOverflow,
    InvalidOpcode(u8),
    InvalidJumpDestination,
    StipendViolation,
}

impl HaltReason {
    pub fn is_success(&self) -> bool {
        matches!(self, HaltReason::Stop | HaltReason::Return(_))
    }

    /// Halts other than STOP, RETURN and REVERT; these consume the whole budget.
    pub fn is_exceptional(&self) -> bool {
        !matches!(
            self,
            HaltReason::Stop | HaltReason::Return(_) | HaltReason::Revert(_)
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            HaltReason::Stop => "Stop",
            HaltReason::Return(_) => "Return",
            HaltReason::Revert(_) => "Revert",
            HaltReason::OutOfGas => "OutOfGas",
            HaltReason::StackUnderflow => "StackUnderflow",
            HaltReason::StackOverflow => "StackOverflow",
            HaltReason::InvalidOpcode(_) => "InvalidOpcode",
            HaltReason::InvalidJumpDestination => "InvalidJumpDestination",
            HaltReason::StipendViolation => "StipendViolation",
        }
    }
}

impl fmt::Display for HaltReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HaltReason::InvalidOpcode(b) => write!(f, "InvalidOpcode(0x{b:02x})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub pc: usize,
    #[serde(rename = "op", serialize_with = "serialize_op")]
    pub opcode: Opcode,
    pub gas_before: Gas,
    pub gas_charged: Gas,
}

fn serialize_op<S: serde::Serializer>(op: &Opcode, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&op.name())
}

/// Accounts and slots the execution touched, captured before any revert.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessRecord {
    pub addresses: BTreeSet<Address>,
    pub slots: BTreeSet<(Address, Word)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionOutcome {
    pub z: u8,
    pub gas_limit: Gas,
    pub intrinsic_gas: Gas,
    pub gas_used: Gas,
    /// g0 plus everything the opcodes charged; T_g on exceptional halts.
    pub gas_cost: Gas,
    pub refund_applied: Gas,
    /// Refund counter at halt, before the cap.
    pub refund_counter: Gas,
    pub remaining_gas: Gas,
    pub halt: HaltReason,
    /// Empty unless tracing was requested.
    pub trace: Vec<StepRecord>,
    pub access: Option<AccessRecord>,
}

impl ExecutionOutcome {
    pub fn succeeded(&self) -> bool {
        self.z == 1
    }

    /// Gas charged by opcodes alone.
    pub fn execution_cost(&self) -> Gas {
        self.gas_cost - self.intrinsic_gas
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("gas limit {gas_limit} is below the intrinsic gas {intrinsic}")]
    IntrinsicUnderflow { intrinsic: Gas, gas_limit: Gas },
    #[error("sender balance {balance} does not cover {required}")]
    InsufficientSenderBalance { required: Wei, balance: Wei },
    #[error("contract creation transactions are not executed")]
    CreationUnsupported,
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExecOptions {
    pub trace: bool,
}

impl ExecOptions {
    pub const TRACE: ExecOptions = ExecOptions { trace: true };
    pub const QUIET: ExecOptions = ExecOptions { trace: false };
}

/// Executes `tx` against `state` with tracing on. See [`execute_with`].
pub fn execute(
    state: &mut WorldState,
    block: &BlockContext,
    tx: &Transaction,
    schedule: &GasSchedule,
) -> Result<ExecutionOutcome, ExecError> {
    execute_with(state, block, tx, schedule, ExecOptions::TRACE)
}

/// Runs one transaction to completion and leaves its effects in `state`:
/// committed on success, reverted otherwise, with the sender debited for
/// the gas used in either case. The fee is not credited anywhere.
pub fn execute_with(
    state: &mut WorldState,
    block: &BlockContext,
    tx: &Transaction,
    schedule: &GasSchedule,
    options: ExecOptions,
) -> Result<ExecutionOutcome, ExecError> {
    if tx.is_create {
        return Err(ExecError::CreationUnsupported);
    }
    let g0 = intrinsic_gas(tx, schedule);
    if tx.gas_limit < g0 {
        return Err(ExecError::IntrinsicUnderflow {
            intrinsic: g0,
            gas_limit: tx.gas_limit,
        });
    }
    let prepaid = BigUint::from(tx.gas_limit) * &tx.gas_price;
    let required = &prepaid + &tx.value;
    let balance = state.balance(&tx.from);
    if balance < required {
        return Err(ExecError::InsufficientSenderBalance { required, balance });
    }

    state.reset_transaction_scope();
    state.sub_balance(tx.from, &prepaid)?;
    state.touch_address(tx.from);
    state.touch_address(tx.to);
    for (address, keys) in &tx.access_list {
        state.touch_address(*address);
        for key in keys {
            state.touch_slot(*address, *key);
        }
    }

    let checkpoint = state.checkpoint();
    state.transfer(tx.from, tx.to, &tx.value)?;

    let code = state.code(&tx.to);
    let mut machine = Machine::new(tx.gas_limit - g0);
    let mut trace = Vec::new();
    let halt = run(state, block, tx, schedule, &code, &mut machine, options.trace.then_some(&mut trace));

    let refund_counter = state.refund_counter();
    let access = options.trace.then(|| AccessRecord {
        addresses: state.warm_addresses().clone(),
        slots: state.warm_slots().clone(),
    });

    let remaining_gas = machine.gas_left;
    let gas_cost = tx.gas_limit - remaining_gas;
    let (z, refund_applied) = if halt.is_success() {
        state.commit(checkpoint)?;
        let cap = (tx.gas_limit - gas_cost) / schedule.refund_quotient.max(1);
        (1, cap.min(refund_counter))
    } else {
        state.revert_to(checkpoint)?;
        (0, 0)
    };
    let gas_used = gas_cost - refund_applied;

    let unused = BigUint::from(tx.gas_limit - gas_used) * &tx.gas_price;
    state.add_balance(tx.from, &unused);
    state.reset_transaction_scope();

    Ok(ExecutionOutcome {
        z,
        gas_limit: tx.gas_limit,
        intrinsic_gas: g0,
        gas_used,
        gas_cost,
        refund_applied,
        refund_counter,
        remaining_gas,
        halt,
        trace,
        access,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceCallResult {
    pub z: u8,
    pub gas_used: Gas,
}

/// Executes on a fork of `state`, reporting only the status code and gas used.
pub fn trace_call(
    state: &WorldState,
    block: &BlockContext,
    tx: &Transaction,
    schedule: &GasSchedule,
) -> Result<TraceCallResult, ExecError> {
    let mut fork = state.fork();
    let outcome = execute_with(&mut fork, block, tx, schedule, ExecOptions::QUIET)?;
    Ok(TraceCallResult {
        z: outcome.z,
        gas_used: outcome.gas_used,
    })
}

enum Flow {
    Continue,
    Halt(HaltReason),
}

fn run(
    state: &mut WorldState,
    block: &BlockContext,
    tx: &Transaction,
    schedule: &GasSchedule,
    code: &[u8],
    m: &mut Machine,
    mut trace: Option<&mut Vec<StepRecord>>,
) -> HaltReason {
    let jumpdests = valid_jump_destinations(code);
    loop {
        let Some(&byte) = code.get(m.pc) else {
            return HaltReason::Stop;
        };
        let pc = m.pc;
        let gas_before = m.gas_left;
        let result = step(state, block, tx, schedule, code, &jumpdests, m);
        if let Err(_) = &result {
            m.gas_left = 0;
        }
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(StepRecord {
                pc,
                opcode: Opcode(byte),
                gas_before,
                gas_charged: gas_before - m.gas_left,
            });
        }
        match result {
            Ok(Flow::Continue) => {}
            Ok(Flow::Halt(reason)) | Err(reason) => return reason,
        }
    }
}

fn step(
    state: &mut WorldState,
    block: &BlockContext,
    tx: &Transaction,
    schedule: &GasSchedule,
    code: &[u8],
    jumpdests: &[bool],
    m: &mut Machine,
) -> Result<Flow, HaltReason> {
    let op = Opcode(code[m.pc]);
    let info = match op.info() {
        Some(info) if op != Opcode::INVALID => info,
        _ => return Err(HaltReason::InvalidOpcode(op.0)),
    };
    let (inputs, outputs) = (info.inputs as usize, info.outputs as usize);
    if m.stack.len() < inputs {
        return Err(HaltReason::StackUnderflow);
    }
    if m.stack.len() - inputs + outputs > STACK_LIMIT {
        return Err(HaltReason::StackOverflow);
    }
    m.charge(schedule.op_cost(op))?;

    let this = tx.to;
    let mut next_pc = m.pc + 1;
    match op {
        Opcode::STOP => return Ok(Flow::Halt(HaltReason::Stop)),
        Opcode::ADD => {
            let (a, b) = (m.pop(), m.pop());
            m.push(a.overflowing_add(b).0);
        }
        Opcode::MUL => {
            let (a, b) = (m.pop(), m.pop());
            m.push(a.overflowing_mul(b).0);
        }
        Opcode::SUB => {
            let (a, b) = (m.pop(), m.pop());
            m.push(a.overflowing_sub(b).0);
        }
        Opcode::DIV => {
            let (a, b) = (m.pop(), m.pop());
            m.push(a.checked_div(b).unwrap_or_default());
        }
        Opcode::LT => {
            let (a, b) = (m.pop(), m.pop());
            m.push_bool(a < b);
        }
        Opcode::GT => {
            let (a, b) = (m.pop(), m.pop());
            m.push_bool(a > b);
        }
        Opcode::EQ => {
            let (a, b) = (m.pop(), m.pop());
            m.push_bool(a == b);
        }
        Opcode::ISZERO => {
            let a = m.pop();
            m.push_bool(a.is_zero());
        }
        Opcode::AND => {
            let (a, b) = (m.pop(), m.pop());
            m.push(a & b);
        }
        Opcode::OR => {
            let (a, b) = (m.pop(), m.pop());
            m.push(a | b);
        }
        Opcode::XOR => {
            let (a, b) = (m.pop(), m.pop());
            m.push(a ^ b);
        }
        Opcode::NOT => {
            let a = m.pop();
            m.push(!a);
        }
        Opcode::KECCAK256 => {
            let (offset, size) = (m.pop(), m.pop());
            let range = memory_range(offset, size)?;
            let len = range.map_or(0, |(_, len)| len as u64);
            let words = machine::words_for(len);
            m.charge(
                schedule
                    .keccak_per_word
                    .checked_mul(words)
                    .and_then(|w| w.checked_add(schedule.keccak_base))
                    .ok_or(HaltReason::OutOfGas)?,
            )?;
            let digest = match range {
                Some((offset, len)) => {
                    charge_memory_expansion(m, schedule, (offset + len) as u64)?;
                    keccak256(m.read_memory(offset, len))
                }
                None => keccak256(&[]),
            };
            m.push(Word::from_big_endian(&digest));
        }
        Opcode::ADDRESS => m.push(this.to_word()),
        Opcode::BALANCE => {
            let address = Address::from_word(m.pop());
            charge_account_access(state, m, schedule, address)?;
            m.push(wei_to_word(&state.balance(&address)));
        }
        Opcode::CALLER => m.push(tx.from.to_word()),
        Opcode::CALLVALUE => m.push(wei_to_word(&tx.value)),
        Opcode::CALLDATALOAD => {
            let offset = m.pop();
            let mut buf = [0u8; 32];
            if offset.bits() <= 64 {
                let start = offset.low_u64();
                if start < tx.data.len() as u64 {
                    let start = start as usize;
                    let end = (start + 32).min(tx.data.len());
                    buf[..end - start].copy_from_slice(&tx.data[start..end]);
                }
            }
            m.push(Word::from_big_endian(&buf));
        }
        Opcode::CALLDATASIZE => m.push(Word::from(tx.data.len())),
        Opcode::BLOCKHASH => {
            let n = m.pop();
            let hash = if n.bits() <= 64 {
                block.block_hash(n.low_u64())
            } else {
                Word::zero()
            };
            m.push(hash);
        }
        Opcode::COINBASE => m.push(block.coinbase.to_word()),
        Opcode::TIMESTAMP => m.push(Word::from(block.timestamp)),
        Opcode::NUMBER => m.push(Word::from(block.number)),
        Opcode::PREVRANDAO => m.push(block.prevrandao),
        Opcode::GASLIMIT => m.push(Word::from(block.gas_limit)),
        Opcode::SELFBALANCE => m.push(wei_to_word(&state.balance(&this))),
        Opcode::BASEFEE => m.push(wei_to_word(&block.base_fee)),
        Opcode::POP => {
            m.pop();
        }
        Opcode::MLOAD => {
            let offset = m.pop();
            let (offset, _) = memory_range(offset, Word::from(32))?.expect("nonzero size");
            charge_memory_expansion(m, schedule, (offset + 32) as u64)?;
            let value = Word::from_big_endian(m.read_memory(offset, 32));
            m.push(value);
        }
        Opcode::MSTORE => {
            let (offset, value) = (m.pop(), m.pop());
            let (offset, _) = memory_range(offset, Word::from(32))?.expect("nonzero size");
            charge_memory_expansion(m, schedule, (offset + 32) as u64)?;
            m.write_memory(offset, &value.to_big_endian());
        }
        Opcode::SLOAD => {
            let key = m.pop();
            charge_sload(state, m, schedule, this, key)?;
            m.push(state.storage(&this, &key));
        }
        Opcode::SSTORE => {
            let (key, value) = (m.pop(), m.pop());
            charge_sstore(state, m, schedule, this, key, value)?;
            state.set_storage(this, key, value);
        }
        Opcode::JUMP => {
            next_pc = jump_target(m.pop(), jumpdests)?;
        }
        Opcode::JUMPI => {
            let (dest, cond) = (m.pop(), m.pop());
            if !cond.is_zero() {
                next_pc = jump_target(dest, jumpdests)?;
            }
        }
        Opcode::PC => m.push(Word::from(m.pc)),
        Opcode::GAS => m.push(Word::from(m.gas_left)),
        Opcode::JUMPDEST => {}
        Opcode::RETURN | Opcode::REVERT => {
            let (offset, size) = (m.pop(), m.pop());
            let data = match memory_range(offset, size)? {
                Some((offset, len)) => {
                    charge_memory_expansion(m, schedule, (offset + len) as u64)?;
                    m.read_memory(offset, len).to_vec()
                }
                None => Vec::new(),
            };
            let reason = if op == Opcode::RETURN {
                HaltReason::Return(data)
            } else {
                HaltReason::Revert(data)
            };
            return Ok(Flow::Halt(reason));
        }
        _ => {
            if let Some(width) = op.push_width() {
                let start = (m.pc + 1).min(code.len());
                let end = (m.pc + 1 + width).min(code.len());
                let mut buf = [0u8; 32];
                // a truncated immediate reads as if padded with zeros on the right
                buf[32 - width..32 - width + (end - start)].copy_from_slice(&code[start..end]);
                m.push(Word::from_big_endian(&buf));
                next_pc = m.pc + 1 + width;
            } else if (0x80..=0x8f).contains(&op.0) {
                let n = (op.0 - 0x7f) as usize;
                let value = m.stack[m.stack.len() - n];
                m.push(value);
            } else if (0x90..=0x9f).contains(&op.0) {
                let n = (op.0 - 0x8f) as usize;
                let top = m.stack.len() - 1;
                m.stack.swap(top, top - n);
            } else {
                unreachable!("opcode {op} is in the table but has no handler");
            }
        }
    }
    m.pc = next_pc;
    Ok(Flow::Continue)
}

fn jump_target(dest: Word, jumpdests: &[bool]) -> Result<usize, HaltReason> {
    if dest.bits() > 64 {
        return Err(HaltReason::InvalidJumpDestination);
    }
    let dest = dest.low_u64() as usize;
    if jumpdests.get(dest).copied().unwrap_or(false) {
        Ok(dest)
    } else {
        Err(HaltReason::InvalidJumpDestination)
    }
}

#[cfg(test)]
mod tests;
