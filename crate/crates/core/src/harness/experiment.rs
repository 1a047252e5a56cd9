//! Replay of transactions at state offsets: estimates at the end of block
//! B−Δ are compared with the values at the end of B−1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{ContextMode, Scenario, ScenarioTx};
use crate::analysis::{ape, classify_trace, ks_two_sample, summary, Dataset, KsResult, Percent, Summary};
use crate::chain::Selector;
use crate::estimators::{estimate_gas, rgum_estimate, CallHistory, RgumVariant};
use crate::interpreter::{execute, execute_with, trace_call, AccessRecord, ExecOptions};
use crate::types::{Address, Gas};

/// The offsets evaluated by default.
pub const DEFAULT_DELTAS: [u64; 5] = [1, 6, 11, 21, 101];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Experiment {
    /// Estimating the minimum gas limit.
    E1,
    /// Estimating the gas used.
    E2,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::E1 => "E1",
            Experiment::E2 => "E2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Estimator {
    EstimateGas,
    TraceCall,
    Rgum(RgumVariant),
}

impl Estimator {
    pub fn all() -> Vec<Estimator> {
        let mut out = vec![Estimator::EstimateGas, Estimator::TraceCall];
        out.extend(RgumVariant::ALL.map(Estimator::Rgum));
        out
    }

    pub fn experiments(self) -> &'static [Experiment] {
        match self {
            Estimator::EstimateGas => &[Experiment::E1],
            Estimator::TraceCall => &[Experiment::E2],
            Estimator::Rgum(_) => &[Experiment::E1, Experiment::E2],
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::EstimateGas => f.write_str("EstimateGas"),
            Estimator::TraceCall => f.write_str("TraceCall"),
            Estimator::Rgum(v) => write!(f, "RGUM-{v}"),
        }
    }
}

impl FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "estimategas" => Ok(Estimator::EstimateGas),
            "tracecall" => Ok(Estimator::TraceCall),
            _ => lower
                .strip_prefix("rgum-")
                .and_then(|v| v.parse().ok())
                .map(Estimator::Rgum)
                .ok_or_else(|| format!("unknown estimator {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvaluationRecord {
    pub tx_id: String,
    pub delta: u64,
    pub experiment: Experiment,
    pub estimator: String,
    pub dataset: Dataset,
    pub estimate: Option<Gas>,
    pub truth: Gas,
    pub ape: Option<Percent>,
    /// Every estimator of this experiment produced an estimate at this Δ.
    pub included: bool,
    /// No block diff between B−Δ and B−1 touches what the truth run accessed.
    pub reads_untouched: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedTx {
    pub tx_id: String,
    /// `None` when the whole transaction was skipped.
    pub delta: Option<u64>,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExclusionCount {
    pub experiment: Experiment,
    pub delta: u64,
    pub evaluated: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ExperimentReport {
    pub records: Vec<EvaluationRecord>,
    pub skipped: Vec<SkippedTx>,
    pub exclusions: Vec<ExclusionCount>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub deltas: Vec<u64>,
    pub estimators: Vec<Estimator>,
    pub context: ContextMode,
    /// 0 lets the pool pick.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            deltas: DEFAULT_DELTAS.to_vec(),
            estimators: Estimator::all(),
            context: ContextMode::Prev,
            threads: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("cannot start worker pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("no deltas requested")]
    NoDeltas,
    #[error("delta must be at least 1")]
    ZeroDelta,
    #[error("no estimators requested")]
    NoEstimators,
}

/// Values at Δ=1 for one transaction.
struct Truth {
    min_gas: Gas,
    gas_used: Gas,
    dataset: Dataset,
    access: AccessRecord,
}

struct TruthRun {
    /// Gas used by the truth execution, committed or not; feeds histories.
    receipt_gas: Option<Gas>,
    truth: Result<Truth, String>,
}

fn truth_for(scenario: &Scenario, stx: &ScenarioTx, context: ContextMode) -> TruthRun {
    let fail = |reason: String| TruthRun {
        receipt_gas: None,
        truth: Err(reason),
    };
    if stx.tx.is_create {
        return fail("contract creation is not replayed".into());
    }
    let Some((state, block)) = scenario.replay_point(stx.block, 1, context) else {
        return fail(format!("no replay point for block {}", stx.block - 1));
    };
    let mut fork = state.fork();
    let outcome = match execute(&mut fork, block, &stx.tx, &scenario.schedule) {
        Ok(o) => o,
        Err(e) => return fail(format!("truth execution failed: {e}")),
    };
    let receipt_gas = Some(outcome.gas_used);
    let truth = if !outcome.succeeded() {
        Err(format!("reverts at truth ({})", outcome.halt.label()))
    } else {
        match estimate_gas(state, block, &stx.tx, &scenario.schedule) {
            Ok(Some(min_gas)) => Ok(Truth {
                min_gas,
                gas_used: outcome.gas_used,
                dataset: classify_trace(&outcome.trace).dataset,
                access: outcome.access.unwrap_or_default(),
            }),
            Ok(None) => Err("no committing budget at truth".into()),
            Err(e) => Err(format!("truth estimate failed: {e}")),
        }
    };
    TruthRun { receipt_gas, truth }
}

fn reads_untouched(scenario: &Scenario, access: &AccessRecord, from: u64, to: u64) -> bool {
    scenario
        .blocks
        .iter()
        .filter(|b| b.context.number > from && b.context.number <= to)
        .all(|b| {
            access.addresses.iter().all(|a| !b.diff.touches_address(a))
                && access.slots.iter().all(|(a, k)| !b.diff.touches_slot(a, k))
        })
}

type HistoryKey = (Address, Selector);

/// Receipt gas of every replayed transaction per (contract, selector), in
/// canonical order.
fn history_index(scenario: &Scenario, truths: &[TruthRun]) -> BTreeMap<HistoryKey, Vec<(u64, Gas)>> {
    let mut index: BTreeMap<HistoryKey, Vec<(u64, Gas)>> = BTreeMap::new();
    for (stx, run) in scenario.transactions.iter().zip(truths) {
        if let Some(g) = run.receipt_gas {
            index
                .entry((stx.tx.to, stx.tx.selector()))
                .or_default()
                .push((stx.block, g));
        }
    }
    index
}

/// History of the last transactions whose block is at most `upto`.
fn history_at(index: &BTreeMap<HistoryKey, Vec<(u64, Gas)>>, stx: &ScenarioTx, upto: u64) -> CallHistory {
    let key = (stx.tx.to, stx.tx.selector());
    let mut history = CallHistory::new(key.0, key.1);
    if let Some(entries) = index.get(&key) {
        for (_, g) in entries.iter().take_while(|(b, _)| *b <= upto) {
            history.push(*g);
        }
    }
    history
}

fn estimate_one(
    scenario: &Scenario,
    stx: &ScenarioTx,
    estimator: Estimator,
    delta: u64,
    context: ContextMode,
    index: &BTreeMap<HistoryKey, Vec<(u64, Gas)>>,
) -> Option<Gas> {
    let (state, block) = scenario.replay_point(stx.block, delta, context)?;
    match estimator {
        Estimator::EstimateGas => estimate_gas(state, block, &stx.tx, &scenario.schedule)
            .ok()
            .flatten(),
        Estimator::TraceCall => trace_call(state, block, &stx.tx, &scenario.schedule)
            .ok()
            .filter(|r| r.z == 1)
            .map(|r| r.gas_used),
        Estimator::Rgum(v) => rgum_estimate(&history_at(index, stx, stx.block - delta), v),
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, ExperimentError> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

pub fn run_experiment(
    scenario: &Scenario,
    config: &ExperimentConfig,
) -> Result<ExperimentReport, ExperimentError> {
    if config.deltas.is_empty() {
        return Err(ExperimentError::NoDeltas);
    }
    if config.deltas.contains(&0) {
        return Err(ExperimentError::ZeroDelta);
    }
    if config.estimators.is_empty() {
        return Err(ExperimentError::NoEstimators);
    }
    let mut deltas = config.deltas.clone();
    deltas.sort_unstable();
    deltas.dedup();
    let mut estimators = config.estimators.clone();
    estimators.sort();
    estimators.dedup();

    let pool = pool(config.threads)?;
    let truths: Vec<TruthRun> = pool.install(|| {
        scenario
            .transactions
            .par_iter()
            .map(|stx| truth_for(scenario, stx, config.context))
            .collect()
    });
    let index = history_index(scenario, &truths);

    let per_tx: Vec<(Vec<EvaluationRecord>, Vec<SkippedTx>)> = pool.install(|| {
        scenario
            .transactions
            .par_iter()
            .zip(truths.par_iter())
            .map(|(stx, run)| {
                let truth = match &run.truth {
                    Ok(t) => t,
                    Err(reason) => {
                        return (
                            Vec::new(),
                            vec![SkippedTx {
                                tx_id: stx.id.clone(),
                                delta: None,
                                reason: reason.clone(),
                            }],
                        )
                    }
                };
                let mut records = Vec::new();
                let mut skipped = Vec::new();
                for &delta in &deltas {
                    if scenario.replay_point(stx.block, delta, config.context).is_none() {
                        skipped.push(SkippedTx {
                            tx_id: stx.id.clone(),
                            delta: Some(delta),
                            reason: format!("scenario has no block {} to replay at", stx.block as i128 - delta as i128),
                        });
                        continue;
                    }
                    let untouched = reads_untouched(scenario, &truth.access, stx.block - delta, stx.block - 1);
                    let estimates: Vec<(Estimator, Option<Gas>)> = estimators
                        .iter()
                        .map(|&e| (e, estimate_one(scenario, stx, e, delta, config.context, &index)))
                        .collect();
                    for experiment in [Experiment::E1, Experiment::E2] {
                        let members: Vec<&(Estimator, Option<Gas>)> = estimates
                            .iter()
                            .filter(|(e, _)| e.experiment_includes(experiment))
                            .collect();
                        let included = members.iter().all(|(_, est)| est.is_some());
                        let truth_value = match experiment {
                            Experiment::E1 => truth.min_gas,
                            Experiment::E2 => truth.gas_used,
                        };
                        for (e, est) in members {
                            records.push(EvaluationRecord {
                                tx_id: stx.id.clone(),
                                delta,
                                experiment,
                                estimator: e.to_string(),
                                dataset: truth.dataset,
                                estimate: *est,
                                truth: truth_value,
                                ape: est.map(|g| ape(truth_value, g).expect("truth gas is at least g0 > 0")),
                                included,
                                reads_untouched: untouched,
                            });
                        }
                    }
                }
                (records, skipped)
            })
            .collect()
    });

    let mut report = ExperimentReport::default();
    for (records, skipped) in per_tx {
        report.records.extend(records);
        report.skipped.extend(skipped);
    }
    sort_records(&mut report.records);
    report
        .skipped
        .sort_by(|a, b| (&a.tx_id, a.delta).cmp(&(&b.tx_id, b.delta)));

    let mut counts: BTreeMap<(Experiment, u64), BTreeMap<&str, bool>> = BTreeMap::new();
    for r in &report.records {
        counts
            .entry((r.experiment, r.delta))
            .or_default()
            .insert(r.tx_id.as_str(), r.included);
    }
    report.exclusions = counts
        .into_iter()
        .map(|((experiment, delta), txs)| ExclusionCount {
            experiment,
            delta,
            evaluated: txs.len(),
            excluded: txs.values().filter(|inc| !**inc).count(),
        })
        .collect();
    Ok(report)
}

impl Estimator {
    fn experiment_includes(self, experiment: Experiment) -> bool {
        self.experiments().contains(&experiment)
    }
}

/// Report order: transaction id, Δ, experiment, estimator.
pub fn sort_records(records: &mut [EvaluationRecord]) {
    records.sort_by(|a, b| {
        (&a.tx_id, a.delta, a.experiment, &a.estimator).cmp(&(&b.tx_id, b.delta, b.experiment, &b.estimator))
    });
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivergenceRow {
    pub tx_id: String,
    pub dataset: Dataset,
    /// Minimum gas limit found by the binary search.
    pub g_min: Gas,
    /// Gas used when the budget is exactly `g_min`.
    pub g_used_at_g_min: Gas,
    /// Gas cost at the declared gas limit.
    pub g_cost: Gas,
    /// Gas used at the declared gas limit.
    pub gas_used: Gas,
    /// APE of `g_min` against `gas_used`.
    pub ape_between: Percent,
}

/// Per-transaction gas used versus minimum gas limit at the end of B−1.
/// Transactions that do not commit with their declared limit are skipped.
pub fn divergence_report(
    scenario: &Scenario,
    context: ContextMode,
    threads: usize,
) -> Result<(Vec<DivergenceRow>, Vec<SkippedTx>), ExperimentError> {
    let results: Vec<Result<DivergenceRow, SkippedTx>> = pool(threads)?.install(|| {
        scenario
            .transactions
            .par_iter()
            .map(|stx| divergence_row(scenario, stx, context))
            .collect()
    });
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(s) => skipped.push(s),
        }
    }
    rows.sort_by(|a, b| a.tx_id.cmp(&b.tx_id));
    skipped.sort_by(|a, b| a.tx_id.cmp(&b.tx_id));
    Ok((rows, skipped))
}

fn divergence_row(scenario: &Scenario, stx: &ScenarioTx, context: ContextMode) -> Result<DivergenceRow, SkippedTx> {
    let skip = |reason: String| SkippedTx {
        tx_id: stx.id.clone(),
        delta: None,
        reason,
    };
    if stx.tx.is_create {
        return Err(skip("contract creation is not replayed".into()));
    }
    let (state, block) = scenario
        .replay_point(stx.block, 1, context)
        .ok_or_else(|| skip(format!("no replay point for block {}", stx.block - 1)))?;
    let declared = execute(&mut state.fork(), block, &stx.tx, &scenario.schedule)
        .map_err(|e| skip(format!("execution failed: {e}")))?;
    if !declared.succeeded() {
        return Err(skip(format!("reverts with its declared limit ({})", declared.halt.label())));
    }
    let g_min = estimate_gas(state, block, &stx.tx, &scenario.schedule)
        .map_err(|e| skip(format!("estimate failed: {e}")))?
        .ok_or_else(|| skip("no committing budget".into()))?;
    let at_min = execute_with(
        &mut state.fork(),
        block,
        &stx.tx.with_gas_limit(g_min),
        &scenario.schedule,
        ExecOptions::QUIET,
    )
    .map_err(|e| skip(format!("execution at the minimum failed: {e}")))?;
    Ok(DivergenceRow {
        tx_id: stx.id.clone(),
        dataset: classify_trace(&declared.trace).dataset,
        g_min,
        g_used_at_g_min: at_min.gas_used,
        g_cost: declared.gas_cost,
        gas_used: declared.gas_used,
        ape_between: ape(declared.gas_used, g_min).expect("gas used is at least g0 > 0"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceSummary {
    pub dataset: Option<Dataset>,
    pub n: usize,
    pub ape: Summary,
    /// Gas used against minimum gas limit.
    pub ks: KsResult,
}

/// Summaries over all rows and per dataset; groups with no rows are left out.
pub fn divergence_summary(rows: &[DivergenceRow]) -> Vec<DivergenceSummary> {
    let mut out = Vec::new();
    for dataset in [None, Some(Dataset::D1), Some(Dataset::D2)] {
        let group: Vec<&DivergenceRow> = rows
            .iter()
            .filter(|r| dataset.is_none_or(|d| r.dataset == d))
            .collect();
        if group.is_empty() {
            continue;
        }
        let apes: Vec<f64> = group.iter().map(|r| r.ape_between.to_f64()).collect();
        let used: Vec<f64> = group.iter().map(|r| r.gas_used as f64).collect();
        let mins: Vec<f64> = group.iter().map(|r| r.g_min as f64).collect();
        out.push(DivergenceSummary {
            dataset,
            n: group.len(),
            ape: summary(&apes).expect("group is nonempty"),
            ks: ks_two_sample(&used, &mins).expect("samples are nonempty and finite"),
        });
    }
    out
}
