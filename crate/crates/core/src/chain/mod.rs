//! Blockchain state, block context and transactions.

mod block;
pub mod snapshot;
mod state;
mod tx;

pub use block::{BlockContext, BLOCKHASH_WINDOW};
pub use state::{fork, AccountState, CheckpointId, StateError, WorldState};
pub use tx::{Selector, Transaction};
