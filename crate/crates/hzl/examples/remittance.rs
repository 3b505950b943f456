//! Cross-border remittance: the minimal four-role node network (a
//! service provider and a ledger node on each side) commits a
//! fund-then-release payment chain in lockstep.
//!
//! ```sh
//! cargo run --example remittance
//! ```

use std::path::Path;

use hzl::replication::{parse_net_config, replicate, run_protocol, submit};
use hzl::runtime::scenario::{load_scenario, replication_inputs};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let net_text = std::fs::read_to_string(dir.join("remit.net")).unwrap();
    let sim = parse_net_config(&net_text, "remit.net").unwrap();
    println!(
        "topology: n={} f={} roles={:?}",
        sim.replica.n, sim.replica.f, sim.replica.roles
    );

    let scenario = load_scenario(&dir.join("remit.scn")).unwrap();
    let inputs = replication_inputs(&scenario, 0).unwrap();
    let mut rs = replicate(&inputs.base, sim.replica.clone()).unwrap();
    for env in &inputs.submissions {
        submit(&mut rs, env.clone());
    }

    let report = run_protocol(rs, sim.net.clone(), &sim.faults, inputs.budget);
    print!("{}", report.to_text());

    let ledgers: Vec<Vec<u8>> = report
        .replicas
        .iter()
        .map(|r| r.ledger.to_bytes())
        .collect();
    println!(
        "all {} node ledgers byte-identical: {}",
        ledgers.len(),
        ledgers.windows(2).all(|w| w[0] == w[1])
    );
}
