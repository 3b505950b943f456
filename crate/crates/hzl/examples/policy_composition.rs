//! Behavior composition: the same base contract under different
//! policy fragments, without touching its source.
//!
//! ```sh
//! cargo run --example policy_composition
//! ```

use std::path::Path;
use std::sync::Arc;

use hzl::lang::{parse_source, SourceUnit};
use hzl::machine::{
    compile, compose_behaviors, parse_fragments, step, ActorAddress, Envelope, Record, Value,
};

fn offer(quantity: &str) -> Record {
    let mut p = Record::new();
    p.insert("product".into(), Value::Str("X".into()));
    p.insert("price".into(), Value::num("10"));
    p.insert("quantity".into(), Value::num(quantity));
    p.insert("buyer".into(), Value::Address(ActorAddress::new("A")));
    p.insert("seller".into(), Value::Address(ActorAddress::new("B")));
    p
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap();

    let def = parse_source(&SourceUnit::new(read("buysell.hzl"), "buysell.hzl")).unwrap();
    let base = Arc::new(compile(&def).unwrap());

    let cap = parse_fragments(&SourceUnit::new(read("countrycap.bhv"), "countrycap.bhv")).unwrap();
    let wholesale =
        parse_fragments(&SourceUnit::new(read("wholesale.bhv"), "wholesale.bhv")).unwrap();
    let retail = parse_fragments(&SourceUnit::new(read("retail.bhv"), "retail.bhv")).unwrap();

    let open = base.state_index("Open").unwrap();
    let store = base.initial_store();
    let env = |q: &str| {
        Envelope::new(
            ActorAddress::new("A"),
            ActorAddress::new("C"),
            "buyoffermsg",
            offer(q),
        )
    };

    for (name, fragments, quantity) in [
        ("no policy", Vec::new(), "101"),
        ("countrycap", cap.clone(), "101"),
        ("countrycap", cap, "100"),
        ("wholesale", wholesale, "60"),
        ("retail", retail, "60"),
    ] {
        let machine = compose_behaviors(&base, &fragments).unwrap();
        let result = step(&machine, open, &store, &env(quantity));
        println!(
            "{name:<11} quantity={quantity:<4} -> {}",
            result.status.code()
        );
    }
}
