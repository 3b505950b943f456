//! Auditing a hash-chained ledger: verify it, tamper with one byte to
//! watch detection trigger, and query the failed receipts.
//!
//! ```sh
//! cargo run --example ledger_audit
//! ```

use std::path::Path;

use hzl::ledger::{parse_ledger, verify_bytes, EntryStatus, LedgerFilter};
use hzl::runtime::scenario::{load_scenario, run_scenario};

fn main() {
    // A run whose first offer gets vetoed by the country-cap policy.
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/veto.scn");
    let scenario = load_scenario(&path).unwrap();
    let run = run_scenario(&scenario, 0, None).unwrap();
    let bytes = run.world.ledger.to_bytes();

    let report = verify_bytes(&bytes);
    println!(
        "fresh ledger: ok={} entries={}",
        report.ok, report.entries_checked
    );

    let mut tampered = bytes.clone();
    let offset = bytes.len() / 3;
    tampered[offset] ^= 0x01;
    let report = verify_bytes(&tampered);
    println!(
        "after flipping byte {offset}: ok={} first_bad={:?} ({})",
        report.ok, report.first_bad, report.detail
    );

    let ledger = parse_ledger(&bytes).unwrap();
    let failed = ledger.query(&LedgerFilter {
        status: Some(EntryStatus::Failed),
        ..Default::default()
    });
    println!("failed receipts: {}", failed.len());
    for entry in failed {
        println!(
            "  #{} {} {} reason={}",
            entry.index, entry.actor, entry.message_type, entry.reason
        );
    }
}
