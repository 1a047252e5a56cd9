//! Dynamic gas charges and intrinsic gas.

use crate::chain::{Transaction, WorldState};
use crate::schedule::GasSchedule;
use crate::types::{Address, Gas, Word};

use super::machine::{words_for, Machine};
use super::HaltReason;

/// g0: flat transaction cost, call data, creation surcharge and access
/// list entries (duplicates are charged each time they are listed).
pub fn intrinsic_gas(tx: &Transaction, schedule: &GasSchedule) -> Gas {
    let zeros = tx.data.iter().filter(|b| **b == 0).count() as Gas;
    let nonzeros = tx.data.len() as Gas - zeros;
    let data = zeros
        .saturating_mul(schedule.data_zero_byte)
        .saturating_add(nonzeros.saturating_mul(schedule.data_nonzero_byte));
    let create = if tx.is_create { schedule.g_create } else { 0 };
    let access = tx.access_list.iter().fold(0 as Gas, |acc, (_, keys)| {
        acc.saturating_add(schedule.access_list_address)
            .saturating_add((keys.len() as Gas).saturating_mul(schedule.access_list_slot))
    });
    data.saturating_add(create)
        .saturating_add(schedule.g_tx)
        .saturating_add(access)
}

/// Grows memory to cover `new_size_bytes`, charging the difference of the
/// total memory cost `3a + a²/512` between the new and old word counts.
pub fn charge_memory_expansion(
    machine: &mut Machine,
    schedule: &GasSchedule,
    new_size_bytes: u64,
) -> Result<Gas, HaltReason> {
    let new_words = words_for(new_size_bytes);
    let old_words = machine.memory_words();
    if new_words <= old_words {
        return Ok(0);
    }
    let new_cost = schedule.memory_cost(new_words).ok_or(HaltReason::OutOfGas)?;
    let old_cost = schedule.memory_cost(old_words).ok_or(HaltReason::OutOfGas)?;
    let charge = new_cost - old_cost;
    machine.charge(charge)?;
    machine.memory.resize((new_words * 32) as usize, 0);
    Ok(charge)
}

pub fn charge_sload(
    state: &mut WorldState,
    machine: &mut Machine,
    schedule: &GasSchedule,
    address: Address,
    key: Word,
) -> Result<Gas, HaltReason> {
    let cost = if state.touch_slot(address, key) {
        schedule.cold_sload
    } else {
        schedule.warm_sload
    };
    machine.charge(cost)?;
    Ok(cost)
}

pub fn charge_account_access(
    state: &mut WorldState,
    machine: &mut Machine,
    schedule: &GasSchedule,
    address: Address,
) -> Result<Gas, HaltReason> {
    let cost = if state.touch_address(address) {
        schedule.cold_account_access
    } else {
        schedule.warm_sload
    };
    machine.charge(cost)?;
    Ok(cost)
}

/// Charges an SSTORE of `new` into `key` and updates the refund counter.
/// The write itself is left to the caller.
///
/// Requires strictly more than the stipend in `gas_left`; the stipend is
/// not consumed, but falling short is an exceptional halt.
pub fn charge_sstore(
    state: &mut WorldState,
    machine: &mut Machine,
    schedule: &GasSchedule,
    address: Address,
    key: Word,
    new: Word,
) -> Result<Gas, HaltReason> {
    if machine.gas_left <= schedule.sstore_stipend {
        return Err(HaltReason::StipendViolation);
    }

    let mut cost = 0;
    if state.touch_slot(address, key) {
        cost += schedule.cold_sload;
    }
    let current = state.storage(&address, &key);
    let original = state.original_storage(&address, &key);

    cost += if new == current {
        schedule.warm_sload
    } else if current == original {
        if original.is_zero() {
            schedule.sstore_set
        } else {
            schedule.sstore_reset
        }
    } else {
        schedule.sstore_warm_dirty
    };
    machine.charge(cost)?;

    if new != current {
        let mut add = 0;
        let mut sub = 0;
        if current == original {
            if !original.is_zero() && new.is_zero() {
                add += schedule.sstore_clear_refund;
            }
        } else {
            if !original.is_zero() {
                if current.is_zero() {
                    sub += schedule.sstore_clear_refund;
                }
                if new.is_zero() {
                    add += schedule.sstore_clear_refund;
                }
            }
            if new == original {
                add += if original.is_zero() {
                    schedule.sstore_set - schedule.warm_sload
                } else {
                    schedule.sstore_reset - schedule.warm_sload
                };
            }
        }
        // A dirty slot at zero with a nonzero original was cleared earlier in
        // this transaction, which credited at least `sub`.
        state
            .add_refund(add)
            .and_then(|_| state.sub_refund(sub))
            .expect("refund counter stays within bounds");
    }
    Ok(cost)
}
