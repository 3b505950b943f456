//! Protocol equivalence and conformance between contracts: renamings
//! do not matter, behavioral changes do, and failures come with a
//! distinguishing message path.
//!
//! ```sh
//! cargo run --example compare_contracts
//! ```

use std::path::Path;

use hzl::analyzer::{check_conformance, check_equivalence, extract_protocol};
use hzl::lang::{parse_source, SourceUnit};
use hzl::machine::compile;

fn signature(name: &str) -> hzl::analyzer::ProtocolSignature {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    let def = parse_source(&SourceUnit::new(text, name)).unwrap();
    extract_protocol(&compile(&def).unwrap())
}

fn main() {
    let fig6 = signature("buysell.hzl");
    println!("buysell protocol:");
    for ((state, label), targets) in &fig6.transitions {
        let names: Vec<&str> = targets
            .iter()
            .map(|t| fig6.state_names[*t].as_str())
            .collect();
        println!(
            "  {} --{label}--> {}",
            fig6.state_names[*state],
            names.join("|")
        );
    }

    for other in ["buysell-renamed.hzl", "buysell-mutant.hzl", "escrow.hzl"] {
        let verdict = check_equivalence(&fig6, &signature(other)).unwrap();
        print!("equivalence vs {other}: {}", verdict.equivalent);
        match verdict.witness {
            Some(w) => println!(
                " (witness: {})",
                w.iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>()
                    .join(" . ")
            ),
            None => println!(),
        }
    }

    for imp in ["buysell-extra.hzl", "buysell-extrasend.hzl"] {
        let verdict = check_conformance(&signature(imp), &fig6).unwrap();
        println!("{imp} conforms to buysell: {}", verdict.equivalent);
    }
}
