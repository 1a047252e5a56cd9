//! Seeded random programs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::CorpusProgram;
use crate::opcode::Opcode;
use crate::types::Word;

/// Random supported instructions with complete PUSH immediates. The
/// result need not execute successfully.
pub fn random_bytecode<R: Rng>(rng: &mut R, instructions: usize) -> Vec<u8> {
    let ops: Vec<Opcode> = Opcode::all_supported().collect();
    let mut code = Vec::new();
    for _ in 0..instructions {
        let op = *ops.choose(rng).expect("opcode table is not empty");
        code.push(op.0);
        for _ in 0..op.push_width().unwrap_or(0) {
            code.push(rng.gen());
        }
    }
    code
}

/// A program whose commit status is monotone in the gas budget: every
/// path is fixed except budget gates that revert when gas is low, so the
/// committing budgets form a single interval. Storage writes exercise the
/// stipend rule and refunds; memory and hashing add nonlinear costs.
pub fn random_monotone_program<R: Rng>(rng: &mut R, name: impl Into<String>) -> CorpusProgram {
    let mut source = String::new();
    let mut storage = Vec::new();
    for slot in 0..4u64 {
        let v: u64 = rng.gen_range(0..3);
        if v != 0 {
            storage.push((Word::from(slot), Word::from(v)));
        }
    }

    let segments = rng.gen_range(1..=6);
    for i in 0..segments {
        match rng.gen_range(0..6) {
            0 => {
                for _ in 0..rng.gen_range(1..8) {
                    let op = ["ADD", "MUL", "SUB", "DIV", "XOR", "AND", "OR", "LT", "GT", "EQ"]
                        .choose(rng)
                        .expect("nonempty");
                    source.push_str(&format!(
                        "PUSH1 {:#04x}\nPUSH1 {:#04x}\n{op}\nPOP\n",
                        rng.gen::<u8>(),
                        rng.gen::<u8>()
                    ));
                }
            }
            1 => {
                let offset: u16 = rng.gen_range(0..2048);
                if rng.gen_bool(0.5) {
                    source.push_str(&format!("PUSH2 {offset:#06x}\nMLOAD\nPOP\n"));
                } else {
                    source.push_str(&format!(
                        "PUSH1 {:#04x}\nPUSH2 {offset:#06x}\nMSTORE\n",
                        rng.gen::<u8>()
                    ));
                }
            }
            2 => {
                let slot: u8 = rng.gen_range(0..4);
                source.push_str(&format!("PUSH1 {slot:#04x}\nSLOAD\nPOP\n"));
            }
            3 => {
                let slot: u8 = rng.gen_range(0..4);
                let value: u8 = rng.gen_range(0..3);
                source.push_str(&format!("PUSH1 {value:#04x}\nPUSH1 {slot:#04x}\nSSTORE\n"));
            }
            4 => {
                let threshold: u32 = rng.gen_range(0..20000);
                source.push_str(&format!(
                    "GAS\nPUSH3 {threshold:#08x}\nLT\n@pass{i}\nJUMPI\nPUSH1 0x00\nDUP1\nREVERT\npass{i}:\nJUMPDEST\n"
                ));
            }
            _ => {
                let size: u8 = rng.gen_range(0..=128);
                source.push_str(&format!("PUSH1 {size:#04x}\nPUSH1 0x00\nKECCAK256\nPOP\n"));
            }
        }
    }
    source.push_str("STOP\n");
    CorpusProgram::from_source(name, source, storage)
}

/// `count` seeded monotone programs named `random_000`, `random_001`, ...
pub fn random_corpus(seed: u64, count: usize) -> Vec<CorpusProgram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| random_monotone_program(&mut rng, format!("random_{i:03}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::{assemble, disassemble};

    #[test]
    fn random_bytecode_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let len = rng.gen_range(0..64);
            let code = random_bytecode(&mut rng, len);
            assert_eq!(assemble(&disassemble(&code)).unwrap(), code);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let a = random_monotone_program(&mut ChaCha8Rng::seed_from_u64(3), "p");
        let b = random_monotone_program(&mut ChaCha8Rng::seed_from_u64(3), "p");
        assert_eq!(a, b);
    }
}
