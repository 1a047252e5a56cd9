//! The supported instruction set: byte values, mnemonics and stack arity.

use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Opcode(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpInfo {
    pub name: &'static str,
    pub inputs: u8,
    pub outputs: u8,
    /// Immediate bytes following the opcode (PUSHn only).
    pub immediate: u8,
}

macro_rules! opcodes {
    ($($name:ident = $byte:expr, $inputs:expr, $outputs:expr;)*) => {
        impl Opcode {
            $(pub const $name: Opcode = Opcode($byte);)*
        }

        const fn build_table() -> [Option<OpInfo>; 256] {
            let mut t: [Option<OpInfo>; 256] = [None; 256];
            $(t[$byte as usize] = Some(OpInfo {
                name: stringify!($name),
                inputs: $inputs,
                outputs: $outputs,
                immediate: 0,
            });)*
            t
        }
    };
}

opcodes! {
    STOP = 0x00, 0, 0;
    ADD = 0x01, 2, 1;
    MUL = 0x02, 2, 1;
    SUB = 0x03, 2, 1;
    DIV = 0x04, 2, 1;
    LT = 0x10, 2, 1;
    GT = 0x11, 2, 1;
    EQ = 0x14, 2, 1;
    ISZERO = 0x15, 1, 1;
    AND = 0x16, 2, 1;
    OR = 0x17, 2, 1;
    XOR = 0x18, 2, 1;
    NOT = 0x19, 1, 1;
    KECCAK256 = 0x20, 2, 1;
    ADDRESS = 0x30, 0, 1;
    BALANCE = 0x31, 1, 1;
    CALLER = 0x33, 0, 1;
    CALLVALUE = 0x34, 0, 1;
    CALLDATALOAD = 0x35, 1, 1;
    CALLDATASIZE = 0x36, 0, 1;
    BLOCKHASH = 0x40, 1, 1;
    COINBASE = 0x41, 0, 1;
    TIMESTAMP = 0x42, 0, 1;
    NUMBER = 0x43, 0, 1;
    PREVRANDAO = 0x44, 0, 1;
    GASLIMIT = 0x45, 0, 1;
    SELFBALANCE = 0x47, 0, 1;
    BASEFEE = 0x48, 0, 1;
    POP = 0x50, 1, 0;
    MLOAD = 0x51, 1, 1;
    MSTORE = 0x52, 2, 0;
    SLOAD = 0x54, 1, 1;
    SSTORE = 0x55, 2, 0;
    JUMP = 0x56, 1, 0;
    JUMPI = 0x57, 2, 0;
    PC = 0x58, 0, 1;
    GAS = 0x5a, 0, 1;
    JUMPDEST = 0x5b, 0, 0;
    RETURN = 0xf3, 2, 0;
    REVERT = 0xfd, 2, 0;
    INVALID = 0xfe, 0, 0;
}

const PUSH_NAMES: [&str; 32] = [
    "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7", "PUSH8", "PUSH9", "PUSH10",
    "PUSH11", "PUSH12", "PUSH13", "PUSH14", "PUSH15", "PUSH16", "PUSH17", "PUSH18", "PUSH19",
    "PUSH20", "PUSH21", "PUSH22", "PUSH23", "PUSH24", "PUSH25", "PUSH26", "PUSH27", "PUSH28",
    "PUSH29", "PUSH30", "PUSH31", "PUSH32",
];
const DUP_NAMES: [&str; 16] = [
    "DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8", "DUP9", "DUP10", "DUP11",
    "DUP12", "DUP13", "DUP14", "DUP15", "DUP16",
];
const SWAP_NAMES: [&str; 16] = [
    "SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6", "SWAP7", "SWAP8", "SWAP9", "SWAP10",
    "SWAP11", "SWAP12", "SWAP13", "SWAP14", "SWAP15", "SWAP16",
];

const fn full_table() -> [Option<OpInfo>; 256] {
    let mut t = build_table();
    let mut i = 0;
    while i < 32 {
        t[0x60 + i] = Some(OpInfo {
            name: PUSH_NAMES[i],
            inputs: 0,
            outputs: 1,
            immediate: (i + 1) as u8,
        });
        i += 1;
    }
    let mut i = 0;
    while i < 16 {
        t[0x80 + i] = Some(OpInfo {
            name: DUP_NAMES[i],
            inputs: (i + 1) as u8,
            outputs: (i + 2) as u8,
            immediate: 0,
        });
        t[0x90 + i] = Some(OpInfo {
            name: SWAP_NAMES[i],
            inputs: (i + 2) as u8,
            outputs: (i + 2) as u8,
            immediate: 0,
        });
        i += 1;
    }
    t
}

static TABLE: [Option<OpInfo>; 256] = full_table();

impl Opcode {
    pub const PUSH1: Opcode = Opcode(0x60);
    pub const PUSH2: Opcode = Opcode(0x61);
    pub const PUSH32: Opcode = Opcode(0x7f);
    pub const DUP1: Opcode = Opcode(0x80);
    pub const SWAP1: Opcode = Opcode(0x90);

    pub fn info(self) -> Option<&'static OpInfo> {
        TABLE[self.0 as usize].as_ref()
    }

    pub fn is_supported(self) -> bool {
        TABLE[self.0 as usize].is_some()
    }

    /// Mnemonic; unsupported bytes render as `INVALID(0xNN)`.
    pub fn name(self) -> String {
        match self.info() {
            Some(info) => info.name.to_string(),
            None => format!("INVALID(0x{:02x})", self.0),
        }
    }

    pub fn push_width(self) -> Option<usize> {
        (0x60..=0x7f)
            .contains(&self.0)
            .then(|| (self.0 - 0x5f) as usize)
    }

    pub fn push(width: usize) -> Option<Opcode> {
        (1..=32).contains(&width).then(|| Opcode(0x5f + width as u8))
    }

    /// Looks a mnemonic up, case-insensitively. `DIFFICULTY` is accepted as
    /// the pre-merge name of PREVRANDAO.
    pub fn from_mnemonic(name: &str) -> Option<Opcode> {
        let upper = name.to_ascii_uppercase();
        let upper = match upper.as_str() {
            "DIFFICULTY" => "PREVRANDAO",
            "SHA3" => "KECCAK256",
            other => other,
        };
        TABLE
            .iter()
            .position(|e| e.is_some_and(|info| info.name == upper))
            .map(|i| Opcode(i as u8))
    }

    /// Every supported opcode byte, ascending.
    pub fn all_supported() -> impl Iterator<Item = Opcode> {
        (0u16..256).map(|b| Opcode(b as u8)).filter(|op| op.is_supported())
    }
}

impl fmt::Debug for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Marks every byte offset holding a JUMPDEST that is not part of a PUSH
/// immediate.
pub fn valid_jump_destinations(code: &[u8]) -> Vec<bool> {
    let mut valid = vec![false; code.len()];
    let mut pc = 0;
    while pc < code.len() {
        let op = Opcode(code[pc]);
        if op == Opcode::JUMPDEST {
            valid[pc] = true;
        }
        pc += 1 + op.push_width().unwrap_or(0);
    }
    valid
}
