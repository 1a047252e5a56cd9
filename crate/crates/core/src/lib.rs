//! A desk-scale EVM gas laboratory: a metered single-frame interpreter,
//! gas-limit estimators and the tooling to evaluate them on replayable
//! scenarios.

pub mod analysis;
pub mod asm;
pub mod chain;
pub mod estimators;
pub mod harness;
pub mod interpreter;
pub mod keccak;
pub mod opcode;
pub mod schedule;
pub mod types;

pub use chain::{BlockContext, Transaction, WorldState};
pub use interpreter::{execute, trace_call, ExecError, ExecutionOutcome, HaltReason};
pub use schedule::GasSchedule;
pub use types::{Address, Gas, Wei, Word};
