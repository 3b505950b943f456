//! Static checking plus strict ontology mode: every record, field,
//! message type and state must carry a kind-correct term binding.
//!
//! ```sh
//! cargo run --example check_contract
//! ```

use std::path::Path;

use hzl::lang::{parse_source, SourceUnit};
use hzl::ontology::{annotate, check_strict, load_annotations, load_registry, AnnotationSet};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let text = std::fs::read_to_string(dir.join("buysell.hzl")).unwrap();
    let def = parse_source(&SourceUnit::new(text, "buysell.hzl")).unwrap();

    let registry = load_registry(
        &std::fs::read_to_string(dir.join("trade.terms")).unwrap(),
        "trade.terms",
    )
    .unwrap();
    println!("registry: {} terms", registry.len());
    for term in registry.terms().take(3) {
        println!("  {} | {} | {}", term.id, term.label, term.kind.as_str());
    }

    // Without annotations everything is unbound.
    let bare = annotate(&def, &AnnotationSet::default(), &registry).unwrap();
    println!(
        "without bindings: {} unbound names, {} strict findings",
        bare.unbound.len(),
        check_strict(&bare).len()
    );

    // With the full annotation set the contract is fully specified.
    let ann = load_annotations(
        &std::fs::read_to_string(dir.join("buysell.ann")).unwrap(),
        "buysell.ann",
    )
    .unwrap();
    let adef = annotate(&def, &ann, &registry).unwrap();
    let findings = check_strict(&adef);
    println!(
        "with corpus bindings: {} unbound, {} strict findings",
        adef.unbound.len(),
        findings.len()
    );
    let (name, (_, term)) = adef.bound.iter().next().unwrap();
    println!("example binding: {name} -> {}", term.id);
}
