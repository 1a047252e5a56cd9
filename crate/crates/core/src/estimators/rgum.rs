use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::chain::Selector;
use crate::types::{Address, Gas};

pub const HISTORY_CAPACITY: usize = 10;

/// The most recent gas-used values for one (contract, selector) pair,
/// oldest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallHistory {
    pub contract: Address,
    pub selector: Selector,
    recent: VecDeque<Gas>,
}

impl CallHistory {
    pub fn new(contract: Address, selector: Selector) -> Self {
        CallHistory {
            contract,
            selector,
            recent: VecDeque::with_capacity(HISTORY_CAPACITY),
        }
    }

    pub fn push(&mut self, gas_used: Gas) {
        if self.recent.len() == HISTORY_CAPACITY {
            self.recent.pop_front();
        }
        self.recent.push_back(gas_used);
    }

    pub fn recent(&self) -> Vec<Gas> {
        self.recent.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.recent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recent.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RgumVariant {
    Mean,
    Median,
    Max,
    Min,
}

impl RgumVariant {
    pub const ALL: [RgumVariant; 4] = [
        RgumVariant::Mean,
        RgumVariant::Median,
        RgumVariant::Max,
        RgumVariant::Min,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RgumVariant::Mean => "mean",
            RgumVariant::Median => "median",
            RgumVariant::Max => "max",
            RgumVariant::Min => "min",
        }
    }
}

impl fmt::Display for RgumVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RgumVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RgumVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown RGUM variant {s:?}"))
    }
}

/// Integer division rounding half up.
fn div_round(num: u128, den: u128) -> Gas {
    ((2 * num + den) / (2 * den)) as Gas
}

pub fn rgum_estimate(history: &CallHistory, variant: RgumVariant) -> Option<Gas> {
    if history.is_empty() {
        return None;
    }
    let values = &history.recent;
    Some(match variant {
        RgumVariant::Max => *values.iter().max().expect("nonempty"),
        RgumVariant::Min => *values.iter().min().expect("nonempty"),
        RgumVariant::Mean => {
            let sum: u128 = values.iter().map(|&v| u128::from(v)).sum();
            div_round(sum, values.len() as u128)
        }
        RgumVariant::Median => {
            let mut sorted = history.recent();
            sorted.sort_unstable();
            let n = sorted.len();
            if n % 2 == 1 {
                sorted[n / 2]
            } else {
                div_round(u128::from(sorted[n / 2 - 1]) + u128::from(sorted[n / 2]), 2)
            }
        }
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HistoryRegistry {
    histories: BTreeMap<(Address, Selector), CallHistory>,
}

impl HistoryRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, contract: &Address, selector: &Selector) -> Option<&CallHistory> {
        self.histories.get(&(*contract, *selector))
    }

    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histories.is_empty()
    }
}

pub fn record_gas_used(
    registry: &mut HistoryRegistry,
    contract: Address,
    selector: Selector,
    gas_used: Gas,
) {
    registry
        .histories
        .entry((contract, selector))
        .or_insert_with(|| CallHistory::new(contract, selector))
        .push(gas_used);
}
