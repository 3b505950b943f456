//! Single-node test mode: run the buy/sell scenario to quiescence and
//! inspect the trace, ledger and final actor states.
//!
//! ```sh
//! cargo run --example single_node_run
//! ```

use std::path::Path;

use hzl::ledger::verify_chain;
use hzl::runtime::scenario::{load_scenario, run_scenario};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/revise.scn");
    let scenario = load_scenario(&path).expect("scenario loads");
    let run = run_scenario(&scenario, 7, None).expect("scenario runs");

    println!(
        "quiescent={} after {} steps; world digest {}",
        run.outcome.quiescent,
        run.outcome.steps,
        run.world.state_digest().hex()
    );

    println!("--- trace ---");
    for entry in &run.world.trace.entries {
        println!("{}", entry.to_line());
    }

    println!("--- actors ---");
    for actor in run.world.actors() {
        println!(
            "{}: state={} terminated={}",
            actor.address,
            actor.state_name(),
            actor.terminated
        );
    }

    let report = verify_chain(&run.world.ledger);
    println!(
        "--- ledger: {} entries, chain {} ---",
        run.world.ledger.len(),
        if report.ok { "intact" } else { "broken" }
    );
    for entry in run.world.ledger.entries().iter().rev().take(3).rev() {
        println!("{}", entry.to_line());
    }
}
