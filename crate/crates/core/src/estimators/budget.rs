use serde::Serialize;

use super::SearchBounds;
use crate::interpreter::{ExecError, ExecutionOutcome};
use crate::types::Gas;

/// Where a chosen gas limit lands relative to the instance's bounds and
/// its minimum committing budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "ict")]
pub enum BudgetOutcome {
    InvalidIntrinsic,
    RevertedPartialConsumption,
    RevertedFullConsumption,
    Committed,
    ExceedsBlockLimit,
    UnaffordableSender,
    /// Committed with `ict` gas more than the minimum.
    OverfundedIncentive(Gas),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
}

fn inconsistent(msg: impl Into<String>) -> ClassifyError {
    ClassifyError::InconsistentInputs(msg.into())
}

/// Classifies budget `t_g` given the outcome of running with it. Bound
/// violations take precedence over the outcome, in the order intrinsic,
/// block limit, sender funds.
pub fn classify_budget(
    t_g: Gas,
    bounds: &SearchBounds,
    g_min: Option<Gas>,
    outcome: Result<&ExecutionOutcome, &ExecError>,
) -> Result<BudgetOutcome, ClassifyError> {
    if t_g < bounds.g0 {
        return Ok(BudgetOutcome::InvalidIntrinsic);
    }
    if t_g > bounds.g_block {
        return Ok(BudgetOutcome::ExceedsBlockLimit);
    }
    if t_g > bounds.g_from {
        return Ok(BudgetOutcome::UnaffordableSender);
    }
    let outcome = match outcome {
        Ok(o) => o,
        // also reached when the transferred value, not the gas, is unaffordable
        Err(ExecError::InsufficientSenderBalance { .. }) => {
            return Ok(BudgetOutcome::UnaffordableSender)
        }
        Err(e) => return Err(inconsistent(format!("budget {t_g} is within bounds but failed: {e}"))),
    };
    if outcome.gas_limit != t_g {
        return Err(inconsistent(format!(
            "outcome was produced with {} gas, not {t_g}",
            outcome.gas_limit
        )));
    }
    if outcome.z == 0 {
        return Ok(if outcome.halt.is_exceptional() {
            BudgetOutcome::RevertedFullConsumption
        } else {
            BudgetOutcome::RevertedPartialConsumption
        });
    }
    match g_min {
        None => Err(inconsistent("committed, but no minimum gas limit was given")),
        Some(m) if t_g < m => Err(inconsistent(format!(
            "committed at {t_g}, below the stated minimum {m}"
        ))),
        Some(m) if t_g == m => Ok(BudgetOutcome::Committed),
        Some(m) => Ok(BudgetOutcome::OverfundedIncentive(t_g - m)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::corpus::build_gas_gate;
    use crate::chain::BlockContext;
    use crate::estimators::min_gas_limit_exact;
    use crate::interpreter::execute;
    use crate::schedule::GasSchedule;

    #[test]
    fn taxonomy() {
        let s = GasSchedule::default();
        let p = build_gas_gate(5000).unwrap();
        let state = p.state();
        let block = BlockContext::new(1, 0, 100_000);
        let tx = p.tx(0);
        let bounds = SearchBounds::compute(&state, &block, &tx, &s);
        let g_min = min_gas_limit_exact(&state, &block, &tx, &s, 100_000).unwrap();
        let m = g_min.unwrap();
        let classify = |t_g: Gas| {
            let result = execute(&mut state.fork(), &block, &tx.with_gas_limit(t_g), &s);
            classify_budget(t_g, &bounds, g_min, result.as_ref())
        };
        assert_eq!(classify(20000), Ok(BudgetOutcome::InvalidIntrinsic));
        assert_eq!(classify(m - 1), Ok(BudgetOutcome::RevertedPartialConsumption));
        assert_eq!(classify(21001), Ok(BudgetOutcome::RevertedFullConsumption));
        assert_eq!(classify(m), Ok(BudgetOutcome::Committed));
        assert_eq!(classify(m + 500), Ok(BudgetOutcome::OverfundedIncentive(500)));
        assert_eq!(classify(100_001), Ok(BudgetOutcome::ExceedsBlockLimit));
    }

    #[test]
    fn inconsistent_inputs() {
        let s = GasSchedule::default();
        let p = build_gas_gate(5000).unwrap();
        let state = p.state();
        let block = BlockContext::new(1, 0, 100_000);
        let tx = p.tx(50_000);
        let bounds = SearchBounds::compute(&state, &block, &tx, &s);
        let out = execute(&mut state.fork(), &block, &tx, &s).unwrap();
        assert!(classify_budget(60_000, &bounds, Some(26000), Ok(&out)).is_err());
        assert!(classify_budget(50_000, &bounds, None, Ok(&out)).is_err());
        assert!(classify_budget(50_000, &bounds, Some(50_001), Ok(&out)).is_err());
    }
}
