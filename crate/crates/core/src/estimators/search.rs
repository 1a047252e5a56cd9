use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::chain::{BlockContext, Transaction, WorldState};
use crate::interpreter::{intrinsic_gas, trace_call, ExecError};
use crate::schedule::GasSchedule;
use crate::types::Gas;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EstimateError {
    #[error("search range is empty: upper bound {g_top} is below the intrinsic gas {g0}")]
    BoundsInfeasible { g0: Gas, g_top: Gas },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchBounds {
    pub g0: Gas,
    pub g_top: Gas,
    pub g_block: Gas,
    /// Largest budget the sender can prepay.
    pub g_from: Gas,
}

impl SearchBounds {
    pub fn compute(
        state: &WorldState,
        block: &BlockContext,
        tx: &Transaction,
        schedule: &GasSchedule,
    ) -> SearchBounds {
        let g_block = block.gas_limit;
        let g_from = if tx.gas_price.is_zero() {
            g_block
        } else {
            let affordable: BigUint = state.balance(&tx.from) / &tx.gas_price;
            affordable.to_u64().unwrap_or(Gas::MAX)
        };
        SearchBounds {
            g0: intrinsic_gas(tx, schedule),
            g_top: g_block.min(g_from),
            g_block,
            g_from,
        }
    }

    fn check(&self) -> Result<(), EstimateError> {
        if self.g_top < self.g0 {
            return Err(EstimateError::BoundsInfeasible {
                g0: self.g0,
                g_top: self.g_top,
            });
        }
        Ok(())
    }
}

/// A maximal run of committing budgets, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GasInterval {
    pub lo: Gas,
    pub hi: Gas,
}

/// Runs `tx` with budget `g` on a fork. Budgets the transaction cannot be
/// processed with (unaffordable, below intrinsic) count as not committing.
pub fn probe(
    state: &WorldState,
    block: &BlockContext,
    tx: &Transaction,
    schedule: &GasSchedule,
    g: Gas,
) -> Result<bool, EstimateError> {
    match trace_call(state, block, &tx.with_gas_limit(g), schedule) {
        Ok(r) => Ok(r.z == 1),
        Err(ExecError::IntrinsicUnderflow { .. } | ExecError::InsufficientSenderBalance { .. }) => {
            Ok(false)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Probe {
    pub gas: Gas,
    pub committed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SearchLog {
    pub estimate: Option<Gas>,
    pub probes: Vec<Probe>,
}

/// The client binary search over `[g0, g_top]`, probing `g_top` first and
/// then midpoints; `z` answers whether a budget commits.
pub fn binary_search_min<F>(g0: Gas, g_top: Gas, mut z: F) -> Result<SearchLog, EstimateError>
where
    F: FnMut(Gas) -> Result<bool, EstimateError>,
{
    let mut log = SearchLog::default();
    let (mut lo, mut hi) = (i128::from(g0), i128::from(g_top));
    let mut g = hi;
    while lo <= hi {
        let gas = g as Gas;
        let committed = z(gas)?;
        log.probes.push(Probe { gas, committed });
        if committed {
            log.estimate = Some(gas);
            hi = g - 1;
        } else {
            lo = g + 1;
        }
        g = (lo + hi).div_euclid(2);
    }
    Ok(log)
}

pub fn estimate_gas_logged(
    state: &WorldState,
    block: &BlockContext,
    tx: &Transaction,
    schedule: &GasSchedule,
) -> Result<SearchLog, EstimateError> {
    if tx.is_create {
        return Err(ExecError::CreationUnsupported.into());
    }
    let bounds = SearchBounds::compute(state, block, tx, schedule);
    bounds.check()?;
    binary_search_min(bounds.g0, bounds.g_top, |g| probe(state, block, tx, schedule, g))
}

pub fn estimate_gas(
    state: &WorldState,
    block: &BlockContext,
    tx: &Transaction,
    schedule: &GasSchedule,
) -> Result<Option<Gas>, EstimateError> {
    estimate_gas_logged(state, block, tx, schedule).map(|log| log.estimate)
}

/// Smallest committing budget, by scanning up from g0 to
/// `min(g_top, scan_cap)`.
pub fn min_gas_limit_exact(
    state: &WorldState,
    block: &BlockContext,
    tx: &Transaction,
    schedule: &GasSchedule,
    scan_cap: Gas,
) -> Result<Option<Gas>, EstimateError> {
    if tx.is_create {
        return Err(ExecError::CreationUnsupported.into());
    }
    let bounds = SearchBounds::compute(state, block, tx, schedule);
    bounds.check()?;
    let upper = bounds.g_top.min(scan_cap);
    for g in bounds.g0..=upper {
        if probe(state, block, tx, schedule, g)? {
            return Ok(Some(g));
        }
    }
    if upper < bounds.g_top {
        log::warn!(
            "scan cap {scan_cap} is below the search bound {}; a committing budget may exist above it",
            bounds.g_top
        );
    }
    Ok(None)
}

pub fn non_reverting_intervals(
    state: &WorldState,
    block: &BlockContext,
    tx: &Transaction,
    schedule: &GasSchedule,
    lo: Gas,
    hi: Gas,
) -> Result<Vec<GasInterval>, EstimateError> {
    let mut out: Vec<GasInterval> = Vec::new();
    let mut open: Option<Gas> = None;
    for g in lo..=hi {
        let committed = probe(state, block, tx, schedule, g)?;
        match (committed, open) {
            (true, None) => open = Some(g),
            (false, Some(start)) => {
                out.push(GasInterval { lo: start, hi: g - 1 });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        out.push(GasInterval { lo: start, hi });
    }
    Ok(out)
}
