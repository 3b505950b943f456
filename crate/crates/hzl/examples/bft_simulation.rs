//! Lockstep BFT replication under injected faults: four replicas, one
//! of them lying about its execution digests.
//!
//! ```sh
//! cargo run --example bft_simulation
//! ```

use std::path::Path;

use hzl::replication::{
    replicate, run_protocol, submit, FaultBehavior, FaultProfile, NetConfig, ReplicaConfig,
};
use hzl::runtime::scenario::{load_scenario, replication_inputs};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/match.scn");
    let scenario = load_scenario(&path).expect("scenario loads");
    let inputs = replication_inputs(&scenario, 0).expect("base world builds");

    let mut rs = replicate(&inputs.base, ReplicaConfig::new(4, 1)).expect("n = 3f+1");
    for env in &inputs.submissions {
        let id = submit(&mut rs, env.clone());
        println!("submitted request {id}: {} -> {}", env.sender, env.to);
    }

    let faults = [FaultProfile {
        node: 2,
        behavior: FaultBehavior::CorruptDigest,
    }];
    let net = NetConfig {
        seed: 42,
        delay_min: 0,
        delay_max: 2,
        ..Default::default()
    };
    let report = run_protocol(rs, net, &faults, 600);

    print!("{}", report.to_text());
    println!(
        "honest replicas all suspect node 2: {}",
        report
            .replicas
            .iter()
            .filter(|r| report.honest.contains(&r.node))
            .all(|r| r.suspected.contains(&2))
    );
}
