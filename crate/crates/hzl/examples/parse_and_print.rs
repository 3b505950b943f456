//! Tokenize, parse, validate and pretty-print a contract.
//!
//! ```sh
//! cargo run --example parse_and_print
//! ```

use std::path::Path;

use hzl::lang::{parse_source, pretty_print, tokenize, validate, SourceUnit};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/buysell.hzl");
    let text = std::fs::read_to_string(&path).expect("corpus file");
    let src = SourceUnit::new(text, path.display().to_string());

    let tokens = tokenize(&src).expect("lexes");
    println!("{} tokens, first at {}", tokens.len(), tokens[0].pos);

    let def = parse_source(&src).expect("parses");
    println!(
        "actor '{}': {} records, states {:?}",
        def.actor_name(),
        def.records.len(),
        def.states
            .iter()
            .map(|s| s.name.text.as_str())
            .collect::<Vec<_>>()
    );

    let diagnostics = validate(&def);
    println!("validation findings: {}", diagnostics.len());
    for d in &diagnostics {
        println!("  {d}");
    }

    let printed = pretty_print(&def);
    let reparsed = parse_source(&printed).expect("canonical form re-parses");
    assert_eq!(def, reparsed, "round trip is lossless");
    println!("--- canonical form ---\n{}", printed.text);
}
