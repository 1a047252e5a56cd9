//! JSON form of account state, used both for full snapshots (absent keys
//! mean zero/empty) and for per-block patches (absent keys mean unchanged).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::{AccountState, WorldState};
use crate::types::{parse_word, serde_text, word_to_hex, Address, Wei, Word};

/// A word used as a JSON object key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HexWord(pub Word);

impl fmt::Debug for HexWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&word_to_hex(&self.0))
    }
}

impl Serialize for HexWord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&word_to_hex(&self.0))
    }
}

impl<'de> Deserialize<'de> for HexWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_word(&s).map(HexWord).map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AccountPatch {
    #[serde(default, skip_serializing_if = "Option::is_none", with = "serde_text::opt_wei")]
    pub balance: Option<Wei>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "serde_text::opt_bytes")]
    pub code: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub storage: BTreeMap<HexWord, HexWord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StateSnapshot {
    #[serde(default)]
    pub accounts: BTreeMap<Address, AccountPatch>,
}

impl StateSnapshot {
    /// Builds a full state; missing fields default to zero or empty.
    pub fn to_state(&self) -> WorldState {
        let accounts = self
            .accounts
            .iter()
            .map(|(address, patch)| {
                let account = AccountState {
                    balance: patch.balance.clone().unwrap_or_default(),
                    code: Arc::from(patch.code.clone().unwrap_or_default()),
                    storage: patch
                        .storage
                        .iter()
                        .filter(|(_, v)| !v.0.is_zero())
                        .map(|(k, v)| (k.0, v.0))
                        .collect(),
                };
                (*address, account)
            })
            .collect();
        WorldState::from_accounts(accounts)
    }

    pub fn from_state(state: &WorldState) -> Self {
        let accounts = state
            .accounts()
            .iter()
            .map(|(address, account)| {
                let patch = AccountPatch {
                    balance: Some(account.balance.clone()),
                    code: (!account.code.is_empty()).then(|| account.code.to_vec()),
                    storage: account
                        .storage
                        .iter()
                        .map(|(k, v)| (HexWord(*k), HexWord(*v)))
                        .collect(),
                };
                (*address, patch)
            })
            .collect();
        StateSnapshot { accounts }
    }

    /// Applies this snapshot as a patch: listed fields overwrite, listed
    /// storage slots are set (zero deletes), everything else is kept. The
    /// state's transaction scope is left untouched.
    pub fn apply_to(&self, state: &mut WorldState) {
        for (address, patch) in &self.accounts {
            if let Some(balance) = &patch.balance {
                state.set_balance(*address, balance.clone());
            }
            if let Some(code) = &patch.code {
                state.set_code(*address, code.clone());
            }
            for (k, v) in &patch.storage {
                state.set_storage(*address, k.0, v.0);
            }
        }
        state.reset_transaction_scope();
    }

    pub fn touches_address(&self, address: &Address) -> bool {
        self.accounts
            .get(address)
            .is_some_and(|p| p.balance.is_some() || p.code.is_some())
    }

    pub fn touches_slot(&self, address: &Address, key: &Word) -> bool {
        self.accounts
            .get(address)
            .is_some_and(|p| p.storage.contains_key(&HexWord(*key)))
    }
}
