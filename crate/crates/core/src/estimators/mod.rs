//! Gas-limit estimators: the binary search used by clients, an exact
//! linear-scan oracle, interval enumeration, the budget taxonomy and
//! history-based baselines.

mod budget;
mod rgum;
mod search;

pub use budget::{classify_budget, BudgetOutcome, ClassifyError};
pub use rgum::{
    record_gas_used, rgum_estimate, CallHistory, HistoryRegistry, RgumVariant, HISTORY_CAPACITY,
};
pub use search::{
    binary_search_min, estimate_gas, estimate_gas_logged, min_gas_limit_exact,
    non_reverting_intervals, probe, EstimateError, GasInterval, Probe, SearchBounds, SearchLog,
};
