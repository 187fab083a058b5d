//! The checked-in replay ledgers must match their generators. Set
//! UPDATE_FIXTURES=1 to rewrite them.

mod common;

use common::*;
use refinebench::orchestrator::{read_ledger, write_ledger};
use refinebench::SessionLog;

fn check(name: &str, logs: Vec<SessionLog>) {
    let path = fixture_dir().join(name);
    if std::env::var_os("UPDATE_FIXTURES").is_some() {
        write_ledger(&path, &logs).unwrap();
    }
    let on_disk = read_ledger(&path).unwrap_or_else(|e| panic!("{name}: {e}; run with UPDATE_FIXTURES=1"));
    assert_eq!(on_disk, logs, "{name} differs from its generator");
    for l in &on_disk {
        l.check_invariants().unwrap();
    }
}

#[test]
fn icpc_fixture_is_current() {
    check(ICPC_LEDGER, icpc_logs());
}

#[test]
fn codeforces_fixture_is_current() {
    check(CODEFORCES_LEDGER, codeforces_logs());
}

#[test]
fn ablation_fixture_is_current() {
    check(ABLATION_LEDGER, ablation_logs());
}

#[test]
fn fixture_sizes() {
    assert_eq!(icpc_logs().len(), 167);
    assert_eq!(codeforces_logs().len(), 200);
}
