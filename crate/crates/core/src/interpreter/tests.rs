use std::collections::BTreeMap;

use super::*;
use crate::chain::AccountState;

const CONTRACT: u64 = 0xc0;
const SENDER: u64 = 0x5e;

fn contract() -> Address {
    Address::from_low_u64(CONTRACT)
}

fn sender() -> Address {
    Address::from_low_u64(SENDER)
}

fn setup(code: &[u8], storage: &[(u64, u64)]) -> WorldState {
    let mut account = AccountState::with_code(code.to_vec());
    for (k, v) in storage {
        account = account.storage(Word::from(*k), Word::from(*v));
    }
    let mut accounts = BTreeMap::new();
    accounts.insert(contract(), account);
    accounts.insert(sender(), AccountState::with_balance(Wei::from(10u64.pow(18))));
    WorldState::from_accounts(accounts)
}

fn block() -> BlockContext {
    BlockContext::new(100, 1_700_000_000, 30_000_000)
}

fn run(state: &mut WorldState, gas_limit: Gas) -> ExecutionOutcome {
    let tx = Transaction::call(sender(), contract(), gas_limit);
    execute(state, &block(), &tx, &GasSchedule::default()).unwrap()
}

fn run_code(code: &[u8], gas_limit: Gas) -> ExecutionOutcome {
    run(&mut setup(code, &[]), gas_limit)
}

#[test]
fn cold_sload_example() {
    // PUSH1 1, PUSH1 0, SLOAD, ADD, STOP
    let code = [0x60, 0x01, 0x60, 0x00, 0x54, 0x01, 0x00];
    let out = run_code(&code, 21000 + 10000);
    assert_eq!(out.remaining_gas, 7891);
    assert_eq!(out.execution_cost(), 2109);
    assert_eq!(out.z, 1);
}

#[test]
fn stop_costs_intrinsic_only() {
    let out = run_code(&[0x00], 21000);
    assert_eq!((out.z, out.gas_used), (1, 21000));
    let out = run_code(&[], 21000);
    assert_eq!((out.z, out.gas_used), (1, 21000));
}

#[test]
fn intrinsic_underflow_is_an_error() {
    let mut state = setup(&[0x00], &[]);
    let tx = Transaction::call(sender(), contract(), 20999);
    let err = execute(&mut state, &block(), &tx, &GasSchedule::default()).unwrap_err();
    assert!(matches!(err, ExecError::IntrinsicUnderflow { intrinsic: 21000, gas_limit: 20999 }));
}

#[test]
fn insufficient_balance_is_an_error() {
    let mut state = setup(&[0x00], &[]);
    let mut tx = Transaction::call(sender(), contract(), 21000);
    tx.gas_price = Wei::from(10u64.pow(18));
    let err = execute(&mut state, &block(), &tx, &GasSchedule::default()).unwrap_err();
    assert!(matches!(err, ExecError::InsufficientSenderBalance { .. }));
}

#[test]
fn add_pushes_sum() {
    // PUSH1 3, PUSH1 4, ADD, PUSH1 0, MSTORE, PUSH1 32, PUSH1 0, RETURN
    let code = [0x60, 3, 0x60, 4, 0x01, 0x60, 0, 0x52, 0x60, 32, 0x60, 0, 0xf3];
    let out = run_code(&code, 100_000);
    let HaltReason::Return(data) = &out.halt else { panic!("{:?}", out.halt) };
    assert_eq!(Word::from_big_endian(data), Word::from(7));
    assert_eq!(out.trace[2].opcode, Opcode::ADD);
    assert_eq!(out.trace[2].gas_charged, 3);
}

#[test]
fn clear_refund_is_capped() {
    // PUSH1 0, PUSH1 0, SSTORE, STOP
    let code = [0x60, 0, 0x60, 0, 0x55, 0x00];
    for gas_limit in [26006, 26010, 30000, 50_000, 100_000] {
        let out = run(&mut setup(&code, &[(0, 42)]), gas_limit);
        assert_eq!(out.z, 1);
        assert_eq!(out.gas_cost, 21000 + 5006);
        assert_eq!(out.refund_counter, 4800);
        let cap = (gas_limit - out.gas_cost) / 5;
        assert_eq!(out.refund_applied, cap.min(4800));
        assert_eq!(out.gas_used, out.gas_cost - out.refund_applied);
    }
}

#[test]
fn jump_into_push_immediate() {
    // PUSH1 3, JUMP, PUSH1 0x5b, STOP: offset 4 is the 0x5b immediate
    let code = [0x60, 0x04, 0x56, 0x60, 0x5b, 0x00];
    let out = run_code(&code, 50_000);
    assert_eq!(out.halt, HaltReason::InvalidJumpDestination);
    assert_eq!((out.z, out.gas_used), (0, 50_000));
}

#[test]
fn valid_jump() {
    // PUSH1 4, JUMP, INVALID, JUMPDEST, STOP
    let code = [0x60, 0x04, 0x56, 0xfe, 0x5b, 0x00];
    let out = run_code(&code, 50_000);
    assert_eq!(out.halt, HaltReason::Stop);
    assert_eq!(out.execution_cost(), 3 + 8 + 1);
}

#[test]
fn gas_pushes_after_own_charge() {
    // GAS, PUSH1 0, MSTORE, PUSH1 32, PUSH1 0, RETURN
    let code = [0x5a, 0x60, 0, 0x52, 0x60, 32, 0x60, 0, 0xf3];
    let out = run_code(&code, 21000 + 5000);
    let HaltReason::Return(data) = &out.halt else { panic!() };
    assert_eq!(Word::from_big_endian(data), Word::from(4998));
    assert_eq!(out.trace[0].gas_before, 5000);
}

#[test]
fn keccak_of_memory() {
    // PUSH1 0, PUSH1 0, KECCAK256, PUSH1 0, MSTORE, PUSH1 32, PUSH1 0, RETURN
    let code = [0x60, 0, 0x60, 0, 0x20, 0x60, 0, 0x52, 0x60, 32, 0x60, 0, 0xf3];
    let out = run_code(&code, 100_000);
    let HaltReason::Return(data) = &out.halt else { panic!() };
    assert_eq!(data.as_slice(), &keccak256(&[]));
    assert_eq!(out.trace[2].gas_charged, 30);

    // hash one word of memory: expansion 3 plus 30 + 6
    let code = [0x60, 32, 0x60, 0, 0x20, 0x00];
    let out = run_code(&code, 100_000);
    assert_eq!(out.trace[2].gas_charged, 39);
}

#[test]
fn invalid_and_unsupported_bytes_consume_everything() {
    for code in [[0xfe], [0x0c], [0xf1]] {
        let out = run_code(&code, 30_000);
        assert!(matches!(out.halt, HaltReason::InvalidOpcode(b) if b == code[0]));
        assert_eq!(out.gas_used, 30_000);
        assert_eq!(out.trace[0].gas_charged, 9000);
    }
}

#[test]
fn stack_errors() {
    let out = run_code(&[0x01], 30_000);
    assert_eq!(out.halt, HaltReason::StackUnderflow);
    // JUMPDEST, PUSH1 0, PUSH1 0, JUMP: grows the stack by one per loop
    let code = [0x5b, 0x60, 0x00, 0x60, 0x00, 0x56];
    let out = run_code(&code, 1_000_000);
    assert_eq!(out.halt, HaltReason::StackOverflow);
    assert_eq!(out.gas_used, 1_000_000);
}

#[test]
fn revert_keeps_partial_consumption_and_state() {
    // PUSH1 1, PUSH1 0, SSTORE, PUSH1 0, DUP1, REVERT
    let code = [0x60, 1, 0x60, 0, 0x55, 0x60, 0, 0x80, 0xfd];
    let mut state = setup(&code, &[]);
    let before = state.clone();
    let mut tx = Transaction::call(sender(), contract(), 100_000);
    tx.gas_price = Wei::from(2u32);
    tx.value = Wei::from(5u32);
    let out = execute(&mut state, &block(), &tx, &GasSchedule::default()).unwrap();
    assert_eq!(out.halt, HaltReason::Revert(vec![]));
    assert_eq!(out.refund_applied, 0);
    assert_eq!(out.gas_used, 21000 + 3 + 3 + 22100 + 3 + 3);
    let paid = Wei::from(out.gas_used) * Wei::from(2u32);
    let mut expected = before.clone();
    expected.set_balance(sender(), before.balance(&sender()) - paid);
    expected.reset_transaction_scope();
    assert_eq!(state, expected);
}

#[test]
fn success_commits_and_pays_for_gas_used() {
    let code = [0x60, 1, 0x60, 0, 0x55, 0x00];
    let mut state = setup(&code, &[]);
    let before = state.balance(&sender());
    let mut tx = Transaction::call(sender(), contract(), 100_000);
    tx.gas_price = Wei::from(3u32);
    tx.value = Wei::from(7u32);
    let out = execute(&mut state, &block(), &tx, &GasSchedule::default()).unwrap();
    assert_eq!(out.z, 1);
    assert_eq!(state.storage(&contract(), &Word::zero()), Word::one());
    assert_eq!(state.balance(&contract()), Wei::from(7u32));
    assert_eq!(
        state.balance(&sender()),
        before - Wei::from(7u32) - Wei::from(out.gas_used * 3)
    );
    assert!(state.warm_slots().is_empty());
    assert_eq!(state.refund_counter(), 0);
}

#[test]
fn stipend_violation_consumes_everything() {
    // PUSH1 1, PUSH1 0, SSTORE with exactly 2300 left at the SSTORE
    let code = [0x60, 1, 0x60, 0, 0x55, 0x00];
    let out = run_code(&code, 21000 + 6 + 2300);
    assert_eq!(out.halt, HaltReason::StipendViolation);
    assert_eq!(out.gas_used, 21000 + 6 + 2300);
    assert_eq!(out.trace[2].gas_charged, 2300);
}

#[test]
fn access_list_prewarms_slots() {
    // PUSH1 0, SLOAD, STOP
    let code = [0x60, 0, 0x54, 0x00];
    let mut state = setup(&code, &[]);
    let mut tx = Transaction::call(sender(), contract(), 100_000);
    tx.access_list = vec![(contract(), vec![Word::zero()])];
    let out = execute(&mut state, &block(), &tx, &GasSchedule::default()).unwrap();
    assert_eq!(out.trace[1].gas_charged, 100);
    assert_eq!(out.intrinsic_gas, 21000 + 2400 + 1900);
}

#[test]
fn balance_of_cold_and_warm_accounts() {
    // PUSH1 0x77, BALANCE, CALLER, BALANCE, STOP
    let code = [0x60, 0x77, 0x31, 0x33, 0x31, 0x00];
    let out = run_code(&code, 100_000);
    assert_eq!(out.trace[1].gas_charged, 2600);
    assert_eq!(out.trace[3].gas_charged, 100);
}

#[test]
fn block_context_opcodes() {
    let mut b = block();
    b.hash_lookup.insert(99, Word::from(0xabcdu64));
    // PUSH1 99, BLOCKHASH, TIMESTAMP, NUMBER, ADD, ADD, PUSH1 0, MSTORE, PUSH1 32, PUSH1 0, RETURN
    let code = [0x60, 99, 0x40, 0x42, 0x43, 0x01, 0x01, 0x60, 0, 0x52, 0x60, 32, 0x60, 0, 0xf3];
    let mut state = setup(&code, &[]);
    let tx = Transaction::call(sender(), contract(), 100_000);
    let out = execute(&mut state, &b, &tx, &GasSchedule::default()).unwrap();
    let HaltReason::Return(data) = &out.halt else { panic!() };
    assert_eq!(Word::from_big_endian(data), Word::from(0xabcdu64 + 1_700_000_000 + 100));
}

#[test]
fn calldata_reads_are_zero_padded() {
    // PUSH1 1, CALLDATALOAD, CALLDATASIZE, ADD, PUSH1 0, MSTORE, PUSH1 32, PUSH1 0, RETURN
    let code = [0x60, 1, 0x35, 0x36, 0x01, 0x60, 0, 0x52, 0x60, 32, 0x60, 0, 0xf3];
    let mut state = setup(&code, &[]);
    let mut tx = Transaction::call(sender(), contract(), 100_000);
    tx.data = vec![0xff, 0x01, 0x02];
    let out = execute(&mut state, &block(), &tx, &GasSchedule::default()).unwrap();
    let HaltReason::Return(data) = &out.halt else { panic!() };
    let mut expected = [0u8; 32];
    expected[0] = 1;
    expected[1] = 2;
    assert_eq!(
        Word::from_big_endian(data),
        Word::from_big_endian(&expected) + Word::from(3)
    );
}

#[test]
fn truncated_push_reads_zero_padded() {
    // PUSH2 0x01 with the second immediate byte missing
    let out = run_code(&[0x61, 0x01], 100_000);
    assert_eq!(out.halt, HaltReason::Stop);
    assert_eq!(out.execution_cost(), 3);
}

#[test]
fn huge_memory_offset_is_out_of_gas() {
    // PUSH32 0xff.., MLOAD
    let mut code = vec![0x7f];
    code.extend([0xff; 32]);
    code.push(0x51);
    let out = run_code(&code, 100_000);
    assert_eq!(out.halt, HaltReason::OutOfGas);
    assert_eq!(out.gas_used, 100_000);
}

#[test]
fn trace_call_leaves_state_alone() {
    let code = [0x60, 1, 0x60, 0, 0x55, 0x00];
    let state = setup(&code, &[]);
    let before = state.clone();
    let tx = Transaction::call(sender(), contract(), 100_000);
    let r = trace_call(&state, &block(), &tx, &GasSchedule::default()).unwrap();
    assert_eq!(r, TraceCallResult { z: 1, gas_used: 21000 + 6 + 22100 });
    assert_eq!(state, before);
}

#[test]
fn deterministic_outcomes() {
    let code = [0x60, 0, 0x60, 0, 0x55, 0x5a, 0x50, 0x00];
    let a = run(&mut setup(&code, &[(0, 9)]), 60_000);
    let b = run(&mut setup(&code, &[(0, 9)]), 60_000);
    assert_eq!(a, b);
}
