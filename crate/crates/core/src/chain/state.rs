use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::Zero;

use crate::types::{Address, Gas, Wei, Word};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("unknown or stale checkpoint {0:?}")]
    UnknownCheckpoint(CheckpointId),
    #[error("balance of {address} is {balance}, cannot debit {amount}")]
    InsufficientBalance {
        address: Address,
        balance: Wei,
        amount: Wei,
    },
    #[error("refund counter {counter} cannot be reduced by {amount}")]
    RefundUnderflow { counter: Gas, amount: Gas },
    #[error("refund counter overflow")]
    RefundOverflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AccountState {
    pub balance: Wei,
    pub code: Arc<[u8]>,
    /// Never holds an explicit zero value.
    pub storage: BTreeMap<Word, Word>,
}

impl AccountState {
    pub fn with_balance(balance: Wei) -> Self {
        AccountState {
            balance,
            ..Default::default()
        }
    }

    pub fn with_code(code: impl Into<Arc<[u8]>>) -> Self {
        AccountState {
            code: code.into(),
            ..Default::default()
        }
    }

    pub fn storage(mut self, key: Word, value: Word) -> Self {
        if !value.is_zero() {
            self.storage.insert(key, value);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CheckpointId(u64);

#[derive(Debug, Clone, PartialEq, Eq)]
enum JournalEntry {
    AccountCreated(Address),
    BalanceChanged { address: Address, previous: Wei },
    CodeChanged { address: Address, previous: Arc<[u8]> },
    StorageChanged { address: Address, key: Word, previous: Word },
    OriginalRecorded { address: Address, key: Word },
    AddressWarmed(Address),
    SlotWarmed(Address, Word),
    RefundChanged { previous: Gas },
}

/// Accounts plus the per-transaction bookkeeping the gas rules depend on:
/// the storage values seen at transaction start, the warm access sets and
/// the refund counter. Every mutation is journaled so that a checkpoint can
/// be restored exactly.
#[derive(Debug, Clone, Default)]
pub struct WorldState {
    accounts: BTreeMap<Address, AccountState>,
    original_storage: BTreeMap<(Address, Word), Word>,
    warm_addresses: BTreeSet<Address>,
    warm_slots: BTreeSet<(Address, Word)>,
    refund_counter: Gas,
    journal: Vec<JournalEntry>,
    checkpoints: Vec<(CheckpointId, usize)>,
    next_checkpoint: u64,
}

/// Structural equality over everything observable: accounts, original
/// values, warm sets and refund counter. The journal and checkpoint stack
/// are bookkeeping and are not compared.
impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.accounts == other.accounts
            && self.original_storage == other.original_storage
            && self.warm_addresses == other.warm_addresses
            && self.warm_slots == other.warm_slots
            && self.refund_counter == other.refund_counter
    }
}

impl Eq for WorldState {}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_accounts(accounts: BTreeMap<Address, AccountState>) -> Self {
        let mut state = WorldState::new();
        for (address, mut account) in accounts {
            account.storage.retain(|_, v| !v.is_zero());
            state.accounts.insert(address, account);
        }
        state
    }

    /// An independent copy of the accounts with empty warm sets, no journal
    /// and a zero refund counter.
    pub fn fork(&self) -> WorldState {
        WorldState {
            accounts: self.accounts.clone(),
            ..WorldState::default()
        }
    }

    pub fn accounts(&self) -> &BTreeMap<Address, AccountState> {
        &self.accounts
    }

    pub fn account(&self, address: &Address) -> Option<&AccountState> {
        self.accounts.get(address)
    }

    pub fn balance(&self, address: &Address) -> Wei {
        self.accounts
            .get(address)
            .map(|a| a.balance.clone())
            .unwrap_or_default()
    }

    pub fn code(&self, address: &Address) -> Arc<[u8]> {
        self.accounts
            .get(address)
            .map(|a| a.code.clone())
            .unwrap_or_else(|| Arc::from(Vec::new()))
    }

    pub fn storage(&self, address: &Address, key: &Word) -> Word {
        self.accounts
            .get(address)
            .and_then(|a| a.storage.get(key))
            .copied()
            .unwrap_or_default()
    }

    /// Value of the slot when the current transaction started.
    pub fn original_storage(&self, address: &Address, key: &Word) -> Word {
        match self.original_storage.get(&(*address, *key)) {
            Some(v) => *v,
            None => self.storage(address, key),
        }
    }

    pub fn refund_counter(&self) -> Gas {
        self.refund_counter
    }

    pub fn warm_addresses(&self) -> &BTreeSet<Address> {
        &self.warm_addresses
    }

    pub fn warm_slots(&self) -> &BTreeSet<(Address, Word)> {
        &self.warm_slots
    }

    pub fn is_address_warm(&self, address: &Address) -> bool {
        self.warm_addresses.contains(address)
    }

    pub fn is_slot_warm(&self, address: &Address, key: &Word) -> bool {
        self.warm_slots.contains(&(*address, *key))
    }

    fn account_mut(&mut self, address: Address) -> &mut AccountState {
        if !self.accounts.contains_key(&address) {
            self.journal.push(JournalEntry::AccountCreated(address));
        }
        self.accounts.entry(address).or_default()
    }

    pub fn set_balance(&mut self, address: Address, balance: Wei) {
        let account = self.account_mut(address);
        let previous = std::mem::replace(&mut account.balance, balance);
        self.journal
            .push(JournalEntry::BalanceChanged { address, previous });
    }

    pub fn add_balance(&mut self, address: Address, amount: &Wei) {
        if amount.is_zero() {
            return;
        }
        let next = self.balance(&address) + amount;
        self.set_balance(address, next);
    }

    pub fn sub_balance(&mut self, address: Address, amount: &Wei) -> Result<(), StateError> {
        let balance = self.balance(&address);
        if balance < *amount {
            return Err(StateError::InsufficientBalance {
                address,
                balance,
                amount: amount.clone(),
            });
        }
        if !amount.is_zero() {
            self.set_balance(address, balance - amount);
        }
        Ok(())
    }

    pub fn transfer(&mut self, from: Address, to: Address, amount: &Wei) -> Result<(), StateError> {
        self.sub_balance(from, amount)?;
        self.add_balance(to, amount);
        Ok(())
    }

    pub fn set_code(&mut self, address: Address, code: impl Into<Arc<[u8]>>) {
        let account = self.account_mut(address);
        let previous = std::mem::replace(&mut account.code, code.into());
        self.journal
            .push(JournalEntry::CodeChanged { address, previous });
    }

    /// Writes a slot. Zero removes the entry.
    pub fn set_storage(&mut self, address: Address, key: Word, value: Word) {
        if !self.original_storage.contains_key(&(address, key)) {
            let current = self.storage(&address, &key);
            self.original_storage.insert((address, key), current);
            self.journal
                .push(JournalEntry::OriginalRecorded { address, key });
        }
        let account = self.account_mut(address);
        let previous = if value.is_zero() {
            account.storage.remove(&key)
        } else {
            account.storage.insert(key, value)
        }
        .unwrap_or_default();
        self.journal.push(JournalEntry::StorageChanged {
            address,
            key,
            previous,
        });
    }

    /// Marks the address warm; returns whether it was cold before.
    pub fn touch_address(&mut self, address: Address) -> bool {
        let was_cold = self.warm_addresses.insert(address);
        if was_cold {
            self.journal.push(JournalEntry::AddressWarmed(address));
        }
        was_cold
    }

    /// Marks the slot warm; returns whether it was cold before.
    pub fn touch_slot(&mut self, address: Address, key: Word) -> bool {
        let was_cold = self.warm_slots.insert((address, key));
        if was_cold {
            self.journal.push(JournalEntry::SlotWarmed(address, key));
        }
        was_cold
    }

    pub fn add_refund(&mut self, amount: Gas) -> Result<(), StateError> {
        let next = self
            .refund_counter
            .checked_add(amount)
            .ok_or(StateError::RefundOverflow)?;
        self.set_refund(next);
        Ok(())
    }

    pub fn sub_refund(&mut self, amount: Gas) -> Result<(), StateError> {
        let next = self
            .refund_counter
            .checked_sub(amount)
            .ok_or(StateError::RefundUnderflow {
                counter: self.refund_counter,
                amount,
            })?;
        self.set_refund(next);
        Ok(())
    }

    fn set_refund(&mut self, value: Gas) {
        let previous = std::mem::replace(&mut self.refund_counter, value);
        self.journal.push(JournalEntry::RefundChanged { previous });
    }

    pub fn checkpoint(&mut self) -> CheckpointId {
        let id = CheckpointId(self.next_checkpoint);
        self.next_checkpoint += 1;
        self.checkpoints.push((id, self.journal.len()));
        id
    }

    fn checkpoint_index(&self, id: CheckpointId) -> Result<usize, StateError> {
        self.checkpoints
            .iter()
            .rposition(|(c, _)| *c == id)
            .ok_or(StateError::UnknownCheckpoint(id))
    }

    /// Undoes every change made since `id` was taken. `id` and any later
    /// checkpoints are discarded.
    pub fn revert_to(&mut self, id: CheckpointId) -> Result<(), StateError> {
        let idx = self.checkpoint_index(id)?;
        let (_, mark) = self.checkpoints[idx];
        self.checkpoints.truncate(idx);
        while self.journal.len() > mark {
            let entry = self.journal.pop().expect("journal longer than mark");
            self.undo(entry);
        }
        Ok(())
    }

    /// Keeps the changes made since `id`; `id` and later checkpoints can no
    /// longer be reverted to.
    pub fn commit(&mut self, id: CheckpointId) -> Result<(), StateError> {
        let idx = self.checkpoint_index(id)?;
        self.checkpoints.truncate(idx);
        if self.checkpoints.is_empty() {
            self.journal.clear();
        }
        Ok(())
    }

    fn undo(&mut self, entry: JournalEntry) {
        match entry {
            JournalEntry::AccountCreated(address) => {
                self.accounts.remove(&address);
            }
            JournalEntry::BalanceChanged { address, previous } => {
                if let Some(account) = self.accounts.get_mut(&address) {
                    account.balance = previous;
                }
            }
            JournalEntry::CodeChanged { address, previous } => {
                if let Some(account) = self.accounts.get_mut(&address) {
                    account.code = previous;
                }
            }
            JournalEntry::StorageChanged {
                address,
                key,
                previous,
            } => {
                if let Some(account) = self.accounts.get_mut(&address) {
                    if previous.is_zero() {
                        account.storage.remove(&key);
                    } else {
                        account.storage.insert(key, previous);
                    }
                }
            }
            JournalEntry::OriginalRecorded { address, key } => {
                self.original_storage.remove(&(address, key));
            }
            JournalEntry::AddressWarmed(address) => {
                self.warm_addresses.remove(&address);
            }
            JournalEntry::SlotWarmed(address, key) => {
                self.warm_slots.remove(&(address, key));
            }
            JournalEntry::RefundChanged { previous } => {
                self.refund_counter = previous;
            }
        }
    }

    /// Drops the transaction-scoped data: original values, warm sets, refund
    /// counter, journal and checkpoints. Accounts are kept.
    pub fn reset_transaction_scope(&mut self) {
        self.original_storage.clear();
        self.warm_addresses.clear();
        self.warm_slots.clear();
        self.refund_counter = 0;
        self.journal.clear();
        self.checkpoints.clear();
    }

    pub fn has_account(&self, address: &Address) -> bool {
        self.accounts.contains_key(address)
    }
}

/// Free-function spelling of [`WorldState::fork`].
pub fn fork(state: &WorldState) -> WorldState {
    state.fork()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn addr(v: u64) -> Address {
        Address::from_low_u64(v)
    }

    fn sample() -> WorldState {
        let mut accounts = BTreeMap::new();
        accounts.insert(addr(0), AccountState::with_balance(Wei::from(20u32)));
        accounts.insert(
            addr(1),
            AccountState::with_balance(Wei::from(5u32)).storage(Word::from(5), Word::from(1)),
        );
        WorldState::from_accounts(accounts)
    }

    #[test]
    fn fork_is_isolated() {
        let base = sample();
        let mut f = fork(&base);
        assert_eq!(f.balance(&addr(0)), Wei::from(20u32));
        f.set_storage(addr(1), Word::from(5), Word::from(9));
        assert_eq!(base.storage(&addr(1), &Word::from(5)), Word::from(1));
        assert_eq!(f.storage(&addr(1), &Word::from(5)), Word::from(9));
    }

    #[test]
    fn fork_starts_with_empty_transaction_scope() {
        let mut base = sample();
        base.touch_address(addr(0));
        base.touch_slot(addr(1), Word::from(5));
        base.add_refund(4800).unwrap();
        let f = base.fork();
        assert!(f.warm_addresses().is_empty());
        assert!(f.warm_slots().is_empty());
        assert_eq!(f.refund_counter(), 0);
    }

    #[test]
    fn many_forks_see_same_start() {
        let base = sample();
        let reference = base.clone();
        for i in 0..100u64 {
            let mut f = base.fork();
            f.set_storage(addr(1), Word::from(5), Word::from(i));
            f.add_balance(addr(0), &Wei::from(i));
            assert_eq!(base, reference);
        }
        assert_eq!(base.fork(), reference.fork());
    }

    #[test]
    fn revert_restores_slot() {
        let mut s = sample();
        let c = s.checkpoint();
        s.set_storage(addr(1), Word::from(5), Word::from(7));
        s.revert_to(c).unwrap();
        assert_eq!(s.storage(&addr(1), &Word::from(5)), Word::from(1));
    }

    #[test]
    fn revert_restores_refund() {
        let mut s = sample();
        s.add_refund(100).unwrap();
        let c = s.checkpoint();
        s.add_refund(4800).unwrap();
        s.revert_to(c).unwrap();
        assert_eq!(s.refund_counter(), 100);
    }

    #[test]
    fn nested_reverts_match_deep_copy() {
        let mut s = sample();
        let before = s.clone();
        let c1 = s.checkpoint();
        s.set_storage(addr(1), Word::from(5), Word::zero());
        s.touch_slot(addr(1), Word::from(5));
        let mid = s.clone();
        let c2 = s.checkpoint();
        s.transfer(addr(0), addr(7), &Wei::from(3u32)).unwrap();
        s.add_refund(4800).unwrap();
        s.revert_to(c2).unwrap();
        assert_eq!(s, mid);
        s.revert_to(c1).unwrap();
        assert_eq!(s, before);
        assert!(!s.has_account(&addr(7)));
    }

    #[test]
    fn stale_checkpoints_are_rejected() {
        let mut s = sample();
        let c1 = s.checkpoint();
        let c2 = s.checkpoint();
        s.revert_to(c1).unwrap();
        assert_eq!(s.revert_to(c2), Err(StateError::UnknownCheckpoint(c2)));
        assert_eq!(s.revert_to(c1), Err(StateError::UnknownCheckpoint(c1)));
        let c3 = s.checkpoint();
        s.commit(c3).unwrap();
        assert!(s.revert_to(c3).is_err());
        assert!(s.commit(c3).is_err());
    }

    #[test]
    fn touch_semantics() {
        let mut s = sample();
        assert!(s.touch_slot(addr(1), Word::from(3)));
        assert!(!s.touch_slot(addr(1), Word::from(3)));
        assert!(s.touch_address(addr(4)));
        assert!(!s.touch_address(addr(4)));
    }

    #[test]
    fn revert_restores_coldness() {
        let mut s = sample();
        let c = s.checkpoint();
        assert!(s.touch_slot(addr(1), Word::from(3)));
        s.revert_to(c).unwrap();
        assert!(s.touch_slot(addr(1), Word::from(3)));
    }

    #[test]
    fn zero_write_removes_entry() {
        let mut s = sample();
        s.set_storage(addr(1), Word::from(5), Word::zero());
        assert!(s.account(&addr(1)).unwrap().storage.is_empty());
        assert_eq!(s.storage(&addr(1), &Word::from(5)), Word::zero());
        assert_eq!(s.original_storage(&addr(1), &Word::from(5)), Word::from(1));
    }

    #[test]
    fn sub_balance_checks_funds() {
        let mut s = sample();
        assert!(s.sub_balance(addr(1), &Wei::from(6u32)).is_err());
        s.sub_balance(addr(1), &Wei::from(5u32)).unwrap();
        assert!(s.balance(&addr(1)).is_zero());
        assert!(s.sub_refund(1).is_err());
    }

    #[derive(Debug, Clone)]
    enum Op {
        Store(u8, u8, u8),
        Credit(u8, u16),
        Debit(u8, u16),
        Code(u8, u8),
        WarmAddr(u8),
        WarmSlot(u8, u8),
        Refund(u16),
        Checkpoint,
        Revert,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0u8..4, 0u8..4, 0u8..3).prop_map(|(a, k, v)| Op::Store(a, k, v)),
            (0u8..4, any::<u16>()).prop_map(|(a, v)| Op::Credit(a, v)),
            (0u8..4, any::<u16>()).prop_map(|(a, v)| Op::Debit(a, v)),
            (0u8..4, any::<u8>()).prop_map(|(a, b)| Op::Code(a, b)),
            (0u8..6).prop_map(Op::WarmAddr),
            (0u8..4, 0u8..4).prop_map(|(a, k)| Op::WarmSlot(a, k)),
            any::<u16>().prop_map(Op::Refund),
            Just(Op::Checkpoint),
            Just(Op::Revert),
        ]
    }

    proptest! {
        // Reverting to a checkpoint yields a state equal to a deep copy
        // taken when the checkpoint was created, for arbitrary mutation
        // sequences including nested checkpoints.
        #[test]
        fn revert_is_exact_inverse(ops in proptest::collection::vec(op(), 0..60)) {
            let mut s = sample();
            let mut stack: Vec<(CheckpointId, WorldState)> = Vec::new();
            let root = s.checkpoint();
            let root_copy = s.clone();
            for op in ops {
                match op {
                    Op::Store(a, k, v) => s.set_storage(addr(a as u64), Word::from(k), Word::from(v)),
                    Op::Credit(a, v) => s.add_balance(addr(a as u64), &Wei::from(v)),
                    Op::Debit(a, v) => { let _ = s.sub_balance(addr(a as u64), &Wei::from(v)); }
                    Op::Code(a, b) => s.set_code(addr(a as u64), vec![b]),
                    Op::WarmAddr(a) => { s.touch_address(addr(a as u64)); }
                    Op::WarmSlot(a, k) => { s.touch_slot(addr(a as u64), Word::from(k)); }
                    Op::Refund(v) => s.add_refund(v as u64).unwrap(),
                    Op::Checkpoint => { let c = s.checkpoint(); stack.push((c, s.clone())); }
                    Op::Revert => {
                        if let Some((c, copy)) = stack.pop() {
                            s.revert_to(c).unwrap();
                            prop_assert_eq!(&s, &copy);
                        }
                    }
                }
                for acc in s.accounts().values() {
                    prop_assert!(acc.storage.values().all(|v| !v.is_zero()));
                }
            }
            s.revert_to(root).unwrap();
            prop_assert_eq!(s, root_copy);
        }
    }
}
