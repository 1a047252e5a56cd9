use crate::types::{Gas, Word};

use super::HaltReason;

pub const STACK_LIMIT: usize = 1024;

/// Memory beyond this many bytes is treated as unaffordable.
const MEMORY_LIMIT: u64 = 1 << 32;

/// Execution state of a single frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    pub stack: Vec<Word>,
    /// Always a whole number of 32-byte words.
    pub memory: Vec<u8>,
    pub pc: usize,
    pub gas_left: Gas,
}

impl Machine {
    pub fn new(gas: Gas) -> Self {
        Machine {
            stack: Vec::with_capacity(32),
            memory: Vec::new(),
            pc: 0,
            gas_left: gas,
        }
    }

    pub fn charge(&mut self, amount: Gas) -> Result<(), HaltReason> {
        match self.gas_left.checked_sub(amount) {
            Some(left) => {
                self.gas_left = left;
                Ok(())
            }
            None => Err(HaltReason::OutOfGas),
        }
    }

    pub(crate) fn pop(&mut self) -> Word {
        // arity is validated against the opcode table before dispatch
        self.stack.pop().expect("stack arity checked before dispatch")
    }

    pub(crate) fn push(&mut self, w: Word) {
        debug_assert!(self.stack.len() < STACK_LIMIT);
        self.stack.push(w);
    }

    pub(crate) fn push_bool(&mut self, b: bool) {
        self.push(if b { Word::one() } else { Word::zero() });
    }

    pub fn memory_words(&self) -> u64 {
        (self.memory.len() / 32) as u64
    }

    pub(crate) fn read_memory(&self, offset: usize, len: usize) -> &[u8] {
        &self.memory[offset..offset + len]
    }

    pub(crate) fn write_memory(&mut self, offset: usize, data: &[u8]) {
        self.memory[offset..offset + data.len()].copy_from_slice(data);
    }
}

/// Resolves a memory access `[offset, offset + size)` given as stack words.
/// Zero-size accesses touch nothing and return `None`; ranges past the
/// memory limit are out of gas.
pub(crate) fn memory_range(offset: Word, size: Word) -> Result<Option<(usize, usize)>, HaltReason> {
    if size.is_zero() {
        return Ok(None);
    }
    if offset.bits() > 64 || size.bits() > 64 {
        return Err(HaltReason::OutOfGas);
    }
    let (offset, size) = (offset.low_u64(), size.low_u64());
    match offset.checked_add(size) {
        Some(end) if end <= MEMORY_LIMIT => Ok(Some((offset as usize, size as usize))),
        _ => Err(HaltReason::OutOfGas),
    }
}

pub(crate) fn words_for(bytes: u64) -> u64 {
    bytes.div_ceil(32)
}
