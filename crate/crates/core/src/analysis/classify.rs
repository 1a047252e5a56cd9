use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::interpreter::StepRecord;
use crate::opcode::Opcode;

/// Opcodes whose result depends on the block being built, plus GAS,
/// whose result depends on the budget.
pub const BLOCK_CONTEXT_OPCODES: [Opcode; 8] = [
    Opcode::BLOCKHASH,
    Opcode::COINBASE,
    Opcode::TIMESTAMP,
    Opcode::NUMBER,
    Opcode::GASLIMIT,
    Opcode::BASEFEE,
    Opcode::PREVRANDAO,
    Opcode::GAS,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dataset {
    D1,
    D2,
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::D1 => "D1",
            Dataset::D2 => "D2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OpcodeClass {
    pub dataset: Dataset,
    pub triggering_opcodes: BTreeSet<String>,
}

pub fn classify_trace(trace: &[StepRecord]) -> OpcodeClass {
    let triggering_opcodes: BTreeSet<String> = trace
        .iter()
        .filter(|step| BLOCK_CONTEXT_OPCODES.contains(&step.opcode))
        .map(|step| step.opcode.name())
        .collect();
    let dataset = if triggering_opcodes.is_empty() {
        Dataset::D1
    } else {
        Dataset::D2
    };
    OpcodeClass {
        dataset,
        triggering_opcodes,
    }
}
