//! Replayable scenarios: a base state, a run of blocks with per-block state
//! patches, and the transactions to evaluate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::snapshot::{HexWord, StateSnapshot};
use crate::chain::{BlockContext, Transaction, WorldState, BLOCKHASH_WINDOW};
use crate::schedule::{GasSchedule, ScheduleError, ScheduleOverrides};
use crate::types::{serde_text, Address, Gas, Wei, Word};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown field(s): {}", .0.join(", "))]
    UnknownFields(Vec<String>),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("block {number} is outside the scenario range {first}..={last}")]
    UnknownBlock { number: u64, first: u64, last: u64 },
}

fn is_zero_wei(v: &Wei) -> bool {
    v == &Wei::default()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockFile {
    pub number: u64,
    pub timestamp: u64,
    #[serde(default)]
    pub coinbase: Address,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_limit: Option<Gas>,
    #[serde(default, with = "serde_text::wei", skip_serializing_if = "is_zero_wei")]
    pub base_fee: Wei,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prevrandao: Option<HexWord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<HexWord>,
    #[serde(default)]
    pub diff: StateSnapshot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxFile {
    pub id: String,
    pub from: Address,
    #[serde(default)]
    pub to: Address,
    #[serde(default, with = "serde_text::wei", skip_serializing_if = "is_zero_wei")]
    pub value: Wei,
    #[serde(default, with = "serde_text::bytes", skip_serializing_if = "Vec::is_empty")]
    pub data: Vec<u8>,
    pub gas_limit: Gas,
    #[serde(default, with = "serde_text::wei", skip_serializing_if = "is_zero_wei")]
    pub gas_price: Wei,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub access_list: Vec<(Address, Vec<HexWord>)>,
    pub block: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_create: bool,
}

impl TxFile {
    pub fn to_transaction(&self) -> Transaction {
        Transaction {
            from: self.from,
            to: self.to,
            value: self.value.clone(),
            data: self.data.clone(),
            gas_limit: self.gas_limit,
            gas_price: self.gas_price.clone(),
            access_list: self
                .access_list
                .iter()
                .map(|(a, keys)| (*a, keys.iter().map(|k| k.0).collect()))
                .collect(),
            is_create: self.is_create,
        }
    }
}

/// The on-disk scenario document.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleOverrides>,
    #[serde(default)]
    pub base_state: StateSnapshot,
    pub blocks: Vec<BlockFile>,
    #[serde(default)]
    pub transactions: Vec<TxFile>,
}

impl ScenarioFile {
    /// Parses a scenario document. In strict mode unknown fields are an
    /// error; otherwise they are returned as warnings.
    pub fn parse(text: &str, lenient: bool) -> Result<(ScenarioFile, Vec<String>), ScenarioError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            parse_error(e.into_inner(), &path)
        })?;
        de.end().map_err(|e| parse_error(e, ""))?;

        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| parse_error(e, ""))?;
        let mut unknown = Vec::new();
        let _: ScenarioFile = serde_ignored::deserialize(&value, |path| unknown.push(path.to_string()))
            .map_err(|e| parse_error(e, ""))?;
        if !unknown.is_empty() && !lenient {
            return Err(ScenarioError::UnknownFields(unknown));
        }
        Ok((file, unknown))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }
}

fn parse_error(e: serde_json::Error, path: &str) -> ScenarioError {
    ScenarioError::Parse {
        path: if path.is_empty() { "$".into() } else { path.to_string() },
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Which block's context a replay at state B−Δ executes under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    /// The block whose end state is used, B−Δ.
    #[default]
    Prev,
    /// The transaction's own block B.
    Own,
}

impl FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "prev" => Ok(ContextMode::Prev),
            "own" => Ok(ContextMode::Own),
            other => Err(format!("unknown context mode {other:?}, expected prev or own")),
        }
    }
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextMode::Prev => "prev",
            ContextMode::Own => "own",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioBlock {
    pub context: BlockContext,
    pub diff: StateSnapshot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioTx {
    pub id: String,
    pub tx: Transaction,
    /// Canonical block.
    pub block: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub schedule: GasSchedule,
    pub base_state: WorldState,
    pub blocks: Vec<ScenarioBlock>,
    /// In canonical order: by block, then by position in the file.
    pub transactions: Vec<ScenarioTx>,
    /// State at the end of each block, parallel to `blocks`.
    states: Vec<WorldState>,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub lenient: bool,
    /// Layered over the scenario's own schedule section.
    pub schedule: Option<ScheduleOverrides>,
}

impl Scenario {
    pub fn from_file(
        file: &ScenarioFile,
        extra: Option<&ScheduleOverrides>,
    ) -> Result<Scenario, ScenarioError> {
        let overrides = match (&file.schedule, extra) {
            (Some(a), Some(b)) => a.merged_with(b),
            (Some(a), None) => a.clone(),
            (None, Some(b)) => b.clone(),
            (None, None) => ScheduleOverrides::default(),
        };
        let schedule = overrides.apply(&GasSchedule::default())?;

        if file.blocks.is_empty() {
            return Err(ScenarioError::Validation("a scenario needs at least one block".into()));
        }
        for pair in file.blocks.windows(2) {
            if pair[1].number <= pair[0].number {
                return Err(ScenarioError::Validation(format!(
                    "block numbers must be strictly increasing: {} follows {}",
                    pair[1].number, pair[0].number
                )));
            }
        }
        if file.blocks[0].number == 0 {
            return Err(ScenarioError::Validation(
                "block numbers start at 1; the base state stands for the block before the first"
                    .into(),
            ));
        }
        let numbers: BTreeSet<u64> = file.blocks.iter().map(|b| b.number).collect();
        let mut ids = BTreeSet::new();
        for t in &file.transactions {
            if !ids.insert(t.id.as_str()) {
                return Err(ScenarioError::Validation(format!(
                    "transaction id {:?} appears twice",
                    t.id
                )));
            }
            if !numbers.contains(&t.block) {
                return Err(ScenarioError::Validation(format!(
                    "transaction {:?} refers to block {}, which is not in the scenario",
                    t.id, t.block
                )));
            }
        }

        let hashes: BTreeMap<u64, Word> = file
            .blocks
            .iter()
            .filter_map(|b| b.hash.map(|h| (b.number, h.0)))
            .collect();
        let blocks: Vec<ScenarioBlock> = file
            .blocks
            .iter()
            .map(|b| {
                let mut context = BlockContext::new(
                    b.number,
                    b.timestamp,
                    b.gas_limit.unwrap_or(schedule.default_block_gas_limit),
                );
                context.coinbase = b.coinbase;
                context.base_fee = b.base_fee.clone();
                context.prevrandao = b.prevrandao.map(|w| w.0).unwrap_or_default();
                context.hash_lookup = hashes
                    .range(b.number.saturating_sub(BLOCKHASH_WINDOW)..b.number)
                    .map(|(n, h)| (*n, *h))
                    .collect();
                ScenarioBlock {
                    context,
                    diff: b.diff.clone(),
                }
            })
            .collect();

        let base_state = file.base_state.to_state();
        let mut states = Vec::with_capacity(blocks.len());
        let mut current = base_state.clone();
        for b in &blocks {
            b.diff.apply_to(&mut current);
            states.push(current.clone());
        }

        let mut transactions: Vec<ScenarioTx> = file
            .transactions
            .iter()
            .map(|t| ScenarioTx {
                id: t.id.clone(),
                tx: t.to_transaction(),
                block: t.block,
            })
            .collect();
        transactions.sort_by_key(|t| t.block);

        Ok(Scenario {
            schedule,
            base_state,
            blocks,
            transactions,
            states,
        })
    }

    pub fn parse_str(
        text: &str,
        options: &LoadOptions,
    ) -> Result<(Scenario, Vec<String>), ScenarioError> {
        let (file, warnings) = ScenarioFile::parse(text, options.lenient)?;
        for w in &warnings {
            log::warn!("ignoring unknown scenario field {w}");
        }
        Ok((Scenario::from_file(&file, options.schedule.as_ref())?, warnings))
    }

    pub fn first_block(&self) -> u64 {
        self.blocks[0].context.number
    }

    pub fn last_block(&self) -> u64 {
        self.blocks[self.blocks.len() - 1].context.number
    }

    pub fn block(&self, number: u64) -> Option<&BlockContext> {
        self.blocks
            .binary_search_by_key(&number, |b| b.context.number)
            .ok()
            .map(|i| &self.blocks[i].context)
    }

    pub fn tx(&self, id: &str) -> Option<&ScenarioTx> {
        self.transactions.iter().find(|t| t.id == id)
    }

    /// State at the end of block `number`, borrowed. The block before the
    /// first one maps to the base state.
    pub fn state_ref(&self, number: u64) -> Result<&WorldState, ScenarioError> {
        let first = self.first_block();
        let last = self.last_block();
        if number + 1 < first || number > last {
            return Err(ScenarioError::UnknownBlock {
                number,
                first: first - 1,
                last,
            });
        }
        let applied = self.blocks.partition_point(|b| b.context.number <= number);
        Ok(if applied == 0 {
            &self.base_state
        } else {
            &self.states[applied - 1]
        })
    }

    /// A fresh fork of the state at the end of block `number`.
    pub fn state_at(&self, number: u64) -> Result<WorldState, ScenarioError> {
        self.state_ref(number).map(WorldState::fork)
    }

    /// State and context for replaying a transaction of block `tx_block`
    /// at offset `delta`. `None` when the scenario is not deep enough.
    pub fn replay_point(
        &self,
        tx_block: u64,
        delta: u64,
        mode: ContextMode,
    ) -> Option<(&WorldState, &BlockContext)> {
        let at = tx_block.checked_sub(delta)?;
        let state = self.state_ref(at).ok()?;
        let context = match mode {
            ContextMode::Prev => self.block(at)?,
            ContextMode::Own => self.block(tx_block)?,
        };
        Some((state, context))
    }
}

pub fn load_scenario(path: &Path, options: &LoadOptions) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::parse_str(&text, options).map(|(s, _)| s)
}

pub fn state_at(scenario: &Scenario, number: u64) -> Result<WorldState, ScenarioError> {
    scenario.state_at(number)
}
