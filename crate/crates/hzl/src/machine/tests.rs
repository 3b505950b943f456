use std::path::Path;

use crate::lang::{parse_source, validate, SourceUnit};

use super::*;

pub(crate) fn load_corpus(name: &str) -> CompiledMachine {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    let src = SourceUnit::new(text, path.display().to_string());
    let def = parse_source(&src).unwrap();
    assert!(
        validate(&def).is_empty(),
        "corpus {name} must validate cleanly"
    );
    compile(&def).unwrap()
}

fn buysell() -> CompiledMachine {
    load_corpus("buysell.hzl")
}

fn addr(s: &str) -> ActorAddress {
    ActorAddress::new(s)
}

fn offer_payload(product: &str, price: &str, quantity: &str) -> Record {
    let mut p = Record::new();
    p.insert("product".into(), Value::Str(product.into()));
    p.insert("price".into(), Value::num(price));
    p.insert("quantity".into(), Value::num(quantity));
    p.insert("buyer".into(), Value::Address(addr("A")));
    p.insert("seller".into(), Value::Address(addr("B")));
    p
}

fn open_state(m: &CompiledMachine) -> usize {
    m.state_index("Open").unwrap()
}

#[test]
fn buysell_compiles_to_three_states() {
    let m = buysell();
    assert_eq!(m.states, vec!["Initially", "Open", "Closed"]);
    assert_eq!(m.initial_state, 0);
    assert_eq!(m.records.len(), 3);
    let domain = m.handler_domain();
    let open = open_state(&m);
    assert_eq!(
        domain,
        vec![
            (open, "buyoffermsg".to_string()),
            (open, "selloffermsg".to_string())
        ]
    );
}

#[test]
fn minimal_machine_has_empty_handler_table() {
    let def = parse_source(&SourceUnit::new(
        "ACTOR { DATA { } MODEL { Initially { #Enter { 'do nothing' } } } }",
        "minimal.hzl",
    ))
    .unwrap();
    let m = compile(&def).unwrap();
    assert_eq!(m.states.len(), 1);
    assert!(m.handler_domain().is_empty());
}

#[test]
fn compilation_is_deterministic() {
    let a = buysell();
    let b = buysell();
    assert_eq!(a, b);
    assert_eq!(a.machine_digest(), b.machine_digest());
}

#[test]
fn bootstrap_rests_in_open() {
    let m = buysell();
    let result = bootstrap(&m, &addr("C"));
    assert!(result.status.is_completed());
    assert_eq!(result.next_state, open_state(&m));
    assert!(!result.terminated);
    assert!(result.outbox.is_empty());
}

#[test]
fn buy_offer_alone_self_holds() {
    let m = buysell();
    let open = open_state(&m);
    let store = m.initial_store();
    let env = Envelope::new(
        addr("A"),
        addr("C"),
        "buyoffermsg",
        offer_payload("X", "10", "5"),
    );
    let r = step(&m, open, &store, &env);
    assert!(r.status.is_completed(), "{:?}", r.status);
    assert_eq!(r.next_state, open);
    assert!(r.outbox.is_empty());
    assert!(!r.terminated);
    assert_eq!(
        m.get_field(&r.new_store, "buyoffer", "price"),
        Some(&Value::num("10"))
    );
    // Contract record stays untouched.
    assert_eq!(
        m.get_field(&r.new_store, "contract", "price"),
        Some(&Value::Unbound)
    );
}

#[test]
fn matching_pair_closes_and_notifies_both_parties() {
    let m = buysell();
    let open = open_state(&m);
    let store = m.initial_store();
    let buy = Envelope::new(
        addr("A"),
        addr("C"),
        "buyoffermsg",
        offer_payload("X", "10", "5"),
    );
    let r1 = step(&m, open, &store, &buy);
    let sell = Envelope::new(
        addr("B"),
        addr("C"),
        "selloffermsg",
        offer_payload("X", "10", "5"),
    );
    let r2 = step(&m, r1.next_state, &r1.new_store, &sell);

    assert!(r2.status.is_completed(), "{:?}", r2.status);
    assert_eq!(r2.next_state, m.state_index("Closed").unwrap());
    assert!(r2.terminated);
    assert_eq!(r2.outbox.len(), 2);

    let notice = &r2.outbox[0];
    assert_eq!(notice.to, addr("A"));
    assert_eq!(notice.message_type, "ContractNotice");
    assert_eq!(
        notice.payload["text"],
        Value::Str("Contract Notice: Buy 5 unit of X at 10 from B".into())
    );

    let advice = &r2.outbox[1];
    assert_eq!(advice.to, addr("B"));
    assert_eq!(advice.message_type, "ContractAdvice");
    assert_eq!(
        advice.payload["text"],
        Value::Str("Contract Advice: Sell 5 unit of X at 10 to A".into())
    );

    assert_eq!(
        m.get_field(&r2.new_store, "contract", "price"),
        Some(&Value::num("10"))
    );
}

#[test]
fn conflicting_offers_do_not_match() {
    let m = buysell();
    let open = open_state(&m);
    let store = m.initial_store();
    let buy = Envelope::new(
        addr("A"),
        addr("C"),
        "buyoffermsg",
        offer_payload("X", "10", "5"),
    );
    let r1 = step(&m, open, &store, &buy);
    let sell = Envelope::new(
        addr("B"),
        addr("C"),
        "selloffermsg",
        offer_payload("X", "11", "5"),
    );
    let r2 = step(&m, r1.next_state, &r1.new_store, &sell);
    assert!(r2.status.is_completed());
    assert_eq!(r2.next_state, open);
    assert!(r2.outbox.is_empty());
    assert!(!r2.terminated);
}

#[test]
fn revised_offer_overwrites_previous() {
    let m = buysell();
    let open = open_state(&m);
    let store = m.initial_store();
    let buy9 = Envelope::new(
        addr("A"),
        addr("C"),
        "buyoffermsg",
        offer_payload("X", "9", "5"),
    );
    let r1 = step(&m, open, &store, &buy9);
    let buy10 = Envelope::new(
        addr("A"),
        addr("C"),
        "buyoffermsg",
        offer_payload("X", "10", "5"),
    );
    let r2 = step(&m, r1.next_state, &r1.new_store, &buy10);
    assert_eq!(
        m.get_field(&r2.new_store, "buyoffer", "price"),
        Some(&Value::num("10"))
    );
    let sell = Envelope::new(
        addr("B"),
        addr("C"),
        "selloffermsg",
        offer_payload("X", "10", "5"),
    );
    let r3 = step(&m, r2.next_state, &r2.new_store, &sell);
    assert!(r3.terminated);
    assert_eq!(
        m.get_field(&r3.new_store, "contract", "price"),
        Some(&Value::num("10"))
    );
}

#[test]
fn rejected_when_no_handler() {
    let m = buysell();
    let store = m.initial_store();
    let env = Envelope::new(addr("A"), addr("C"), "nosuchmsg", Record::new());
    let open = open_state(&m);
    let r = step(&m, open, &store, &env);
    assert_eq!(r.status, StepStatus::Rejected(RejectReason::NoHandler));
    assert_eq!(r.next_state, open);
    assert_eq!(r.new_store, store);
    assert!(r.outbox.is_empty());
}

#[test]
fn protocol_surface_equals_handler_domain() {
    let m = buysell();
    let store = m.initial_store();
    let types = ["buyoffermsg", "selloffermsg", "bogus", "Enter"];
    let mut accepted = Vec::new();
    for state in 0..m.states.len() {
        for t in types {
            let env = Envelope::new(addr("A"), addr("C"), t, offer_payload("X", "1", "1"));
            let r = step(&m, state, &store, &env);
            if !matches!(r.status, StepStatus::Rejected(_)) {
                accepted.push((state, t.to_string()));
            }
        }
    }
    assert_eq!(accepted, m.handler_domain());
}

#[test]
fn unknown_payload_field_fails_atomically() {
    let m = buysell();
    let open = open_state(&m);
    let store = m.initial_store();
    let mut payload = offer_payload("X", "10", "5");
    payload.insert("color".into(), Value::Str("red".into()));
    let env = Envelope::new(addr("A"), addr("C"), "buyoffermsg", payload);
    let r = step(&m, open, &store, &env);
    assert_eq!(
        r.status,
        StepStatus::Failed(FailReason::UnknownField("color".into()))
    );
    assert_eq!(r.new_store, store);
    assert_eq!(r.next_state, open);
    assert!(r.outbox.is_empty());
    assert_eq!(
        m.actor_digest(r.next_state, &r.new_store, r.terminated),
        m.actor_digest(open, &store, false)
    );
}

#[test]
fn step_is_deterministic() {
    let m = buysell();
    let open = open_state(&m);
    let store = m.initial_store();
    let env = Envelope::new(
        addr("A"),
        addr("C"),
        "buyoffermsg",
        offer_payload("X", "10", "5"),
    );
    let r1 = step(&m, open, &store, &env);
    let r2 = step(&m, open, &store, &env);
    assert_eq!(r1, r2);
    assert_eq!(m.result_digest(&r1), m.result_digest(&r2));
    assert_eq!(
        m.actor_digest(r1.next_state, &r1.new_store, r1.terminated),
        m.actor_digest(r2.next_state, &r2.new_store, r2.terminated)
    );
}

#[test]
fn enter_chains_beyond_bound_fail() {
    let text = "ACTOR { DATA { } MODEL { \
        A { #Enter { 'x' }, #go { transitionTo { $B } } }, \
        B { #Enter { transitionTo { $C } } }, \
        C { #Enter { transitionTo { $B } } } } }";
    let def = parse_source(&SourceUnit::new(text, "loop.hzl")).unwrap();
    let m = compile(&def).unwrap();
    let store = m.initial_store();
    let env = Envelope::new(addr("A"), addr("C"), "go", Record::new());
    let r = step(&m, 0, &store, &env);
    assert_eq!(r.status, StepStatus::Failed(FailReason::TransitionLoop));
    assert_eq!(r.next_state, 0);
    assert_eq!(r.new_store, store);
    assert!(r.outbox.is_empty());
}

#[test]
fn bounded_enter_chain_succeeds() {
    // A -> B -> C -> D: two Enter-triggered hops, well inside the bound.
    let text = "ACTOR { DATA { } MODEL { \
        A { #go { transitionTo { $B } } }, \
        B { #Enter { transitionTo { $C } } }, \
        C { #Enter { transitionTo { $D } } }, \
        D { #Enter { 'rest' } } } }";
    let def = parse_source(&SourceUnit::new(text, "chain.hzl")).unwrap();
    let m = compile(&def).unwrap();
    let r = step(
        &m,
        0,
        &m.initial_store(),
        &Envelope::new(addr("A"), addr("C"), "go", Record::new()),
    );
    assert!(r.status.is_completed());
    assert_eq!(r.next_state, m.state_index("D").unwrap());
}

#[test]
fn send_to_non_address_value_fails() {
    let text = "ACTOR { DATA { r { to {\"not an address\"} } } MODEL { \
        S { #m { send { @r.to, compose >>> Note: hi <<< } } } } }";
    let def = parse_source(&SourceUnit::new(text, "badaddr.hzl")).unwrap();
    let m = compile(&def).unwrap();
    let r = step(
        &m,
        0,
        &m.initial_store(),
        &Envelope::new(addr("A"), addr("C"), "m", Record::new()),
    );
    assert!(
        matches!(r.status, StepStatus::Failed(FailReason::BadAddress(_))),
        "{:?}",
        r.status
    );
}

#[test]
fn render_buysell_buyer_template() {
    let m = buysell();
    let mut store = m.initial_store();
    for (field, value) in [
        ("product", Value::Str("X".into())),
        ("price", Value::num("10")),
        ("quantity", Value::num("5")),
        ("buyer", Value::Address(addr("A"))),
        ("seller", Value::Address(addr("S"))),
    ] {
        assert!(m.set_field(&mut store, "contract", field, value));
    }
    let template = buysell_buyer_template(&m);
    let text = m.render_template(&store, &template).unwrap();
    assert_eq!(text, "Contract Notice: Buy 5 unit of X at 10 from S");
    assert_eq!(template.message_type, "ContractNotice");
}

#[test]
fn render_unbound_field_fails() {
    let m = buysell();
    let store = m.initial_store();
    let template = buysell_buyer_template(&m);
    let err = m.render_template(&store, &template).unwrap_err();
    assert!(matches!(err, FailReason::UnboundFieldInTemplate(_)));
}

#[test]
fn render_without_field_refs_is_verbatim() {
    let m = buysell();
    let src = SourceUnit::new(
        "ACTOR { DATA { c { to {?} } } MODEL { S { #m { \
         send { @c.to, compose >>> plain words only <<< } } } } }",
        "t.hzl",
    );
    let def = parse_source(&src).unwrap();
    let other = compile(&def).unwrap();
    let template = extract_first_template(&other);
    assert_eq!(
        other
            .render_template(&other.initial_store(), &template)
            .unwrap(),
        "plain words only"
    );
    let _ = m;
}

/// Pull the buyer-notice template out of the compiled buy/sell machine.
fn buysell_buyer_template(m: &CompiledMachine) -> CompiledTemplate {
    let open = m.state_index("Open").unwrap();
    for op in &m.exit[open] {
        if let Op::Send { template, .. } = op {
            return template.clone();
        }
    }
    panic!("no send in Open exit program");
}

fn extract_first_template(m: &CompiledMachine) -> CompiledTemplate {
    for program in m.handlers.values() {
        for op in program {
            if let Op::Send { template, .. } = op {
                return template.clone();
            }
        }
    }
    panic!("no send found");
}

mod behavior_composition {
    use super::*;
    use crate::machine::behavior::parse_fragments;

    fn countrycap() -> Vec<BehaviorFragment> {
        parse_fragments(&SourceUnit::new(
            "BEHAVIOR countrycap {\n  guard Open:#buyoffermsg {\n    require { *THIS.quantity <= 100 }\n  }\n  guard Open:#selloffermsg {\n    require { *THIS.quantity <= 100 }\n  }\n}",
            "countrycap.bhv",
        ))
        .unwrap()
    }

    #[test]
    fn empty_fragment_list_is_identity() {
        let m = buysell();
        let composed = compose_behaviors(&m, &[]).unwrap();
        assert_eq!(m, composed);
    }

    #[test]
    fn cap_guard_vetoes_oversized_offers() {
        let m = compose_behaviors(&buysell(), &countrycap()).unwrap();
        let open = open_state(&m);
        let store = m.initial_store();
        let env = Envelope::new(
            addr("A"),
            addr("C"),
            "buyoffermsg",
            offer_payload("X", "10", "101"),
        );
        let r = step(&m, open, &store, &env);
        assert_eq!(
            r.status,
            StepStatus::Failed(FailReason::PolicyVeto("countrycap".into()))
        );
        assert_eq!(r.new_store, store);
        assert!(r.outbox.is_empty());

        // The same offer passes without the fragment.
        let base = buysell();
        let r2 = step(&base, open, &store, &env);
        assert!(r2.status.is_completed());

        // And a within-cap offer passes with it.
        let ok = Envelope::new(
            addr("A"),
            addr("C"),
            "buyoffermsg",
            offer_payload("X", "10", "100"),
        );
        let r3 = step(&m, open, &store, &ok);
        assert!(r3.status.is_completed());
    }

    #[test]
    fn composition_is_associative_over_concatenation() {
        let frags = countrycap();
        let more = parse_fragments(&SourceUnit::new(
            "BEHAVIOR pricefloor {\n  guard Open:#buyoffermsg {\n    require { *THIS.price >= 1 }\n  }\n}",
            "pricefloor.bhv",
        ))
        .unwrap();

        let all: Vec<BehaviorFragment> = frags.iter().chain(more.iter()).cloned().collect();
        let at_once = compose_behaviors(&buysell(), &all).unwrap();
        let stepwise =
            compose_behaviors(&compose_behaviors(&buysell(), &frags).unwrap(), &more).unwrap();
        assert_eq!(at_once, stepwise);
    }

    #[test]
    fn unresolved_state_pattern_is_an_error() {
        let frags = parse_fragments(&SourceUnit::new(
            "BEHAVIOR ghost { guard Nowhere:* { require { 1 = 1 } } }",
            "ghost.bhv",
        ))
        .unwrap();
        assert!(matches!(
            compose_behaviors(&buysell(), &frags),
            Err(ComposeError::UnresolvedPattern(_))
        ));
    }

    #[test]
    fn guard_on_missing_payload_field_vetoes() {
        let m = compose_behaviors(&buysell(), &countrycap()).unwrap();
        let open = open_state(&m);
        let mut payload = Record::new();
        payload.insert("product".into(), Value::Str("X".into()));
        let env = Envelope::new(addr("A"), addr("C"), "buyoffermsg", payload);
        let r = step(&m, open, &m.initial_store(), &env);
        assert!(matches!(
            r.status,
            StepStatus::Failed(FailReason::PolicyVeto(_))
        ));
    }

    #[test]
    fn before_and_after_effects_wrap_the_base_handler() {
        let m = buysell();
        let frags = parse_fragments(&SourceUnit::new(
            "BEHAVIOR stamp {\n  before Open:#buyoffermsg { map { *THIS, @selloffer } }\n}",
            "stamp.bhv",
        ))
        .unwrap();
        let composed = compose_behaviors(&m, &frags).unwrap();
        let env = Envelope::new(
            addr("A"),
            addr("C"),
            "buyoffermsg",
            offer_payload("X", "10", "5"),
        );
        let r = step(&composed, open_state(&m), &m.initial_store(), &env);
        // The before-effect mapped the payload into selloffer too, so
        // the very first buy offer already matches and closes.
        assert!(r.terminated, "{:?}", r.status);
    }
}
