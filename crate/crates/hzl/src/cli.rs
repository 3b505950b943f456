//! The `hzl` command-line surface.
//!
//! Subcommands and their exit codes (stable; 2 always means the
//! invocation itself failed — I/O, unparseable auxiliary files, bad
//! flags or configuration):
//!
//! | command | 0 | 1 |
//! |---|---|---|
//! | `check <files...> [--strict] [--terms F]` | no findings | diagnostics reported |
//! | `run <scn> [--seed N] [--max-ticks N] [--ledger F] [--trace F]` | quiescent | tick budget exceeded |
//! | `simulate <scn> <net> [--report F] [--max-ticks N] [--json]` | safe and live | liveness loss, divergence or breach |
//! | `compare <a> <b> [--mode equiv\|conform] [--strict] [--json]` | equivalent / conforms | not |
//! | `ledger verify <F> [--json]` | chain intact | tamper detected |
//! | `ledger query <F> [--actor A] [--status S] [--seq-from N] [--seq-to N] [--json]` | listing printed | — |
//!
//! All randomness is surfaced as explicit `--seed` flags (default 0),
//! so equal invocations produce byte-identical reports, traces and
//! ledgers. `--json` switches reports to a machine-readable form.
//!
//! In `check --strict` mode the contract's ontology sidecars are the
//! files next to it: `<stem>.ann` for bindings and `<stem>.terms` (or
//! `--terms`) for the registry; a missing sidecar simply means no
//! bindings, so every name reports unbound. `compare --strict` also
//! requires bound message types to carry equal terms, reading each
//! side's `<stem>.ann`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::analyzer::{check_conformance, check_equivalence, extract_protocol};
use crate::diag::Diagnostic;
use crate::lang::{parse_source, validate, LangError, SourceUnit};
use crate::ledger::{parse_ledger, verify_bytes, EntryStatus, LedgerFilter};
use crate::machine::compile;
use crate::ontology::{annotate, check_strict, load_annotations, load_registry, Registry};
use crate::replication::{parse_net_config, replicate, run_protocol, submit, Liveness};
use crate::runtime::scenario::{load_scenario, replication_inputs, run_scenario};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub report: String,
}

impl CommandOutcome {
    fn new(exit_code: i32, report: impl Into<String>) -> Self {
        CommandOutcome {
            exit_code,
            report: report.into(),
        }
    }

    fn usage(message: impl std::fmt::Display) -> Self {
        CommandOutcome::new(2, format!("error: {message}\n{USAGE}"))
    }

    fn fail(message: impl std::fmt::Display) -> Self {
        CommandOutcome::new(2, format!("error: {message}\n"))
    }
}

const USAGE: &str = "\
usage:
  hzl check <contract.hzl>... [--strict] [--terms <file.terms>]
  hzl run <scenario.scn> [--seed N] [--max-ticks N] [--ledger <out>] [--trace <out>]
  hzl simulate <scenario.scn> <topology.net> [--report <out>] [--max-ticks N] [--json]
  hzl compare <a.hzl> <b.hzl> [--mode equiv|conform] [--strict] [--json]
  hzl ledger verify <file.ledger> [--json]
  hzl ledger query <file.ledger> [--actor A] [--status S] [--seq-from N] [--seq-to N] [--json]
";

pub fn execute(args: &[String]) -> CommandOutcome {
    let Some(command) = args.first() else {
        return CommandOutcome::new(2, USAGE);
    };
    match command.as_str() {
        "check" => cmd_check(&args[1..]),
        "run" => cmd_run(&args[1..]),
        "simulate" => cmd_simulate(&args[1..]),
        "compare" => cmd_compare(&args[1..]),
        "ledger" => cmd_ledger(&args[1..]),
        "--help" | "help" | "-h" => CommandOutcome::new(0, USAGE),
        other => CommandOutcome::usage(format!("unknown command '{other}'")),
    }
}

/// Split positionals from `--flag [value]` pairs.
struct Flags {
    positional: Vec<String>,
    values: BTreeMap<String, String>,
    switches: Vec<String>,
}

fn parse_flags(
    args: &[String],
    value_flags: &[&str],
    switch_flags: &[&str],
) -> Result<Flags, String> {
    let mut flags = Flags {
        positional: Vec::new(),
        values: BTreeMap::new(),
        switches: Vec::new(),
    };
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        if let Some(name) = arg.strip_prefix("--") {
            if switch_flags.contains(&name) {
                flags.switches.push(name.to_string());
            } else if value_flags.contains(&name) {
                i += 1;
                let Some(value) = args.get(i) else {
                    return Err(format!("flag --{name} wants a value"));
                };
                flags.values.insert(name.to_string(), value.clone());
            } else {
                return Err(format!("unknown flag --{name}"));
            }
        } else {
            flags.positional.push(arg.clone());
        }
        i += 1;
    }
    Ok(flags)
}

fn parse_u64(flags: &Flags, name: &str, default: u64) -> Result<u64, String> {
    match flags.values.get(name) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| format!("--{name} wants an integer, got '{v}'")),
    }
}

// ---------------------------------------------------------------------------
// check

fn cmd_check(args: &[String]) -> CommandOutcome {
    let flags = match parse_flags(args, &["terms"], &["strict"]) {
        Ok(f) => f,
        Err(e) => return CommandOutcome::usage(e),
    };
    if flags.positional.is_empty() {
        return CommandOutcome::usage("check wants at least one contract file");
    }
    let strict = flags.switches.iter().any(|s| s == "strict");

    let mut report = String::new();
    let mut findings = 0usize;
    for path_text in &flags.positional {
        let path = Path::new(path_text);
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return CommandOutcome::fail(format!("{path_text}: {e}")),
        };
        let src = SourceUnit::new(text, path_text.clone());
        let mut diags: Vec<Diagnostic> = Vec::new();
        match parse_source(&src) {
            Err(LangError::Lex(e)) => diags.push(Diagnostic::new(
                path_text,
                e.pos,
                "lex-error",
                e.kind.to_string(),
            )),
            Err(LangError::Parse(e)) => diags.push(Diagnostic::new(
                path_text,
                e.pos(),
                "parse-error",
                e.to_string(),
            )),
            Ok(def) => {
                diags.extend(validate(&def));
                if strict && diags.is_empty() {
                    match strict_diagnostics(path, &def, flags.values.get("terms")) {
                        Ok(more) => diags.extend(more),
                        Err(e) => return CommandOutcome::fail(e),
                    }
                }
            }
        }
        if diags.is_empty() {
            report.push_str(&format!("{path_text}: ok\n"));
        } else {
            findings += diags.len();
            for d in &diags {
                report.push_str(&format!("{d}\n"));
            }
        }
    }
    CommandOutcome::new(if findings == 0 { 0 } else { 1 }, report)
}

fn strict_diagnostics(
    path: &Path,
    def: &crate::lang::ActorDefinition,
    terms_flag: Option<&String>,
) -> Result<Vec<Diagnostic>, String> {
    let registry = match terms_flag {
        Some(p) => load_registry(
            &std::fs::read_to_string(p).map_err(|e| format!("{p}: {e}"))?,
            p,
        )
        .map_err(|e| e.to_string())?,
        None => {
            let sibling = path.with_extension("terms");
            if sibling.exists() {
                load_registry(
                    &std::fs::read_to_string(&sibling)
                        .map_err(|e| format!("{}: {e}", sibling.display()))?,
                    &sibling.display().to_string(),
                )
                .map_err(|e| e.to_string())?
            } else {
                Registry::default()
            }
        }
    };
    let ann_path = path.with_extension("ann");
    let ann = if ann_path.exists() {
        load_annotations(
            &std::fs::read_to_string(&ann_path)
                .map_err(|e| format!("{}: {e}", ann_path.display()))?,
            &ann_path.display().to_string(),
        )
        .map_err(|e| e.to_string())?
    } else {
        Default::default()
    };
    let adef = annotate(def, &ann, &registry).map_err(|e| e.to_string())?;
    Ok(check_strict(&adef))
}

// ---------------------------------------------------------------------------
// run

fn cmd_run(args: &[String]) -> CommandOutcome {
    let flags = match parse_flags(args, &["seed", "max-ticks", "ledger", "trace"], &[]) {
        Ok(f) => f,
        Err(e) => return CommandOutcome::usage(e),
    };
    let [scenario_path] = flags.positional.as_slice() else {
        return CommandOutcome::usage("run wants exactly one scenario file");
    };
    let seed = match parse_u64(&flags, "seed", 0) {
        Ok(v) => v,
        Err(e) => return CommandOutcome::usage(e),
    };
    let max_ticks = match flags.values.get("max-ticks") {
        None => None,
        Some(v) => match v.parse::<u64>() {
            Ok(n) => Some(n),
            Err(_) => return CommandOutcome::usage("--max-ticks wants an integer"),
        },
    };

    let scn = match load_scenario(Path::new(scenario_path)) {
        Ok(s) => s,
        Err(e) => return CommandOutcome::fail(e),
    };
    let run = match run_scenario(&scn, seed, max_ticks) {
        Ok(r) => r,
        Err(e) => return CommandOutcome::fail(e),
    };

    if let Some(out) = flags.values.get("trace") {
        if let Err(e) = std::fs::write(out, run.world.trace.to_bytes()) {
            return CommandOutcome::fail(format!("{out}: {e}"));
        }
    }
    if let Some(out) = flags.values.get("ledger") {
        if let Err(e) = std::fs::write(out, run.world.ledger.to_bytes()) {
            return CommandOutcome::fail(format!("{out}: {e}"));
        }
    }

    let mut report = String::new();
    report.push_str(&format!(
        "scenario={} seed={} steps={} quiescent={} trace-entries={} ledger-entries={}\n",
        scenario_path,
        seed,
        run.outcome.steps,
        run.outcome.quiescent,
        run.world.trace.entries.len(),
        run.world.ledger.len()
    ));
    for actor in run.world.actors() {
        report.push_str(&format!(
            "actor={} state={} terminated={} digest={}\n",
            actor.address,
            actor.state_name(),
            actor.terminated,
            actor.digest().hex()
        ));
    }
    report.push_str(&format!(
        "world-digest={}\n",
        run.world.state_digest().hex()
    ));
    CommandOutcome::new(if run.outcome.quiescent { 0 } else { 1 }, report)
}

// ---------------------------------------------------------------------------
// simulate

fn cmd_simulate(args: &[String]) -> CommandOutcome {
    let flags = match parse_flags(args, &["report", "max-ticks", "seed"], &["json"]) {
        Ok(f) => f,
        Err(e) => return CommandOutcome::usage(e),
    };
    let [scenario_path, net_path] = flags.positional.as_slice() else {
        return CommandOutcome::usage("simulate wants a scenario file and a topology file");
    };
    let json = flags.switches.iter().any(|s| s == "json");

    let net_text = match std::fs::read_to_string(net_path) {
        Ok(t) => t,
        Err(e) => return CommandOutcome::fail(format!("{net_path}: {e}")),
    };
    let sim = match parse_net_config(&net_text, net_path) {
        Ok(c) => c,
        Err(e) => return CommandOutcome::fail(e),
    };
    if let Err(e) = sim.replica.validate() {
        return CommandOutcome::fail(e);
    }

    let scn = match load_scenario(Path::new(scenario_path)) {
        Ok(s) => s,
        Err(e) => return CommandOutcome::fail(e),
    };
    let world_seed = match parse_u64(&flags, "seed", 0) {
        Ok(v) => v,
        Err(e) => return CommandOutcome::usage(e),
    };
    let inputs = match replication_inputs(&scn, world_seed) {
        Ok(i) => i,
        Err(e) => return CommandOutcome::fail(e),
    };

    let mut rs = match replicate(&inputs.base, sim.replica.clone()) {
        Ok(rs) => rs,
        Err(e) => return CommandOutcome::fail(e),
    };
    for env in &inputs.submissions {
        submit(&mut rs, env.clone());
    }
    // Scenario RUN budgets are tuned for single-node steps; ordering a
    // request costs a few network round trips per phase on top.
    let budget = match flags.values.get("max-ticks") {
        None => inputs.budget.max(400),
        Some(v) => match v.parse() {
            Ok(n) => n,
            Err(_) => return CommandOutcome::usage("--max-ticks wants an integer"),
        },
    };
    let report = run_protocol(rs, sim.net.clone(), &sim.faults, budget);

    let ok = report.safety_ok
        && matches!(report.liveness, Liveness::Live)
        && !report.divergence_observed()
        && !report.assumption_breach;

    let text = if json {
        let replicas: Vec<serde_json::Value> = report
            .replicas
            .iter()
            .map(|r| {
                serde_json::json!({
                    "node": r.node,
                    "role": r.role,
                    "fault": r.fault,
                    "committed": r.committed,
                    "gapFree": r.gap_free,
                    "executedThrough": r.executed_through,
                    "divergence": r.divergence,
                    "suspected": r.suspected,
                    "discardedBadAuth": r.discarded_bad_auth,
                    "finalDigest": r.final_digest.hex(),
                    "ledgerEntries": r.ledger.len(),
                })
            })
            .collect();
        let doc = serde_json::json!({
            "n": report.n,
            "f": report.f,
            "quorum": report.quorum,
            "requests": report.total_requests,
            "safetyOk": report.safety_ok,
            "live": matches!(report.liveness, Liveness::Live),
            "assumptionBreach": report.assumption_breach,
            "ticksUsed": report.ticks_used,
            "replicas": replicas,
        });
        format!("{doc:#}\n")
    } else {
        report.to_text()
    };

    if let Some(out) = flags.values.get("report") {
        if let Err(e) = std::fs::write(out, &text) {
            return CommandOutcome::fail(format!("{out}: {e}"));
        }
    }
    CommandOutcome::new(if ok { 0 } else { 1 }, text)
}

// ---------------------------------------------------------------------------
// compare

fn cmd_compare(args: &[String]) -> CommandOutcome {
    let flags = match parse_flags(args, &["mode"], &["json", "strict"]) {
        Ok(f) => f,
        Err(e) => return CommandOutcome::usage(e),
    };
    let [path_a, path_b] = flags.positional.as_slice() else {
        return CommandOutcome::usage("compare wants exactly two contract files");
    };
    let mode = flags
        .values
        .get("mode")
        .map(String::as_str)
        .unwrap_or("equiv");
    if mode != "equiv" && mode != "conform" {
        return CommandOutcome::usage("--mode wants 'equiv' or 'conform'");
    }
    let json = flags.switches.iter().any(|s| s == "json");
    let strict = flags.switches.iter().any(|s| s == "strict");

    let load = |p: &String| -> Result<crate::analyzer::ProtocolSignature, String> {
        let text = std::fs::read_to_string(p).map_err(|e| format!("{p}: {e}"))?;
        let src = SourceUnit::new(text, p.clone());
        let def = parse_source(&src).map_err(|e| e.to_string())?;
        let diags = validate(&def);
        if !diags.is_empty() {
            return Err(format!("{p}: {}", diags[0]));
        }
        let machine = compile(&def).map_err(|e| format!("{p}: {e}"))?;
        let mut sig = extract_protocol(&machine);
        if strict {
            sig = sig.rebind(&message_bindings(Path::new(p), &def)?);
        }
        Ok(sig)
    };

    let sig_a = match load(path_a) {
        Ok(s) => s,
        Err(e) => return CommandOutcome::fail(e),
    };
    let sig_b = match load(path_b) {
        Ok(s) => s,
        Err(e) => return CommandOutcome::fail(e),
    };

    let verdict = match mode {
        "equiv" => check_equivalence(&sig_a, &sig_b),
        _ => check_conformance(&sig_a, &sig_b),
    };
    let verdict = match verdict {
        Ok(v) => v,
        Err(e) => return CommandOutcome::fail(e),
    };

    let witness_text: Option<Vec<String>> = verdict
        .witness
        .as_ref()
        .map(|w| w.iter().map(|l| l.to_string()).collect());
    let text = if json {
        let doc = serde_json::json!({
            "mode": mode,
            "a": path_a,
            "b": path_b,
            "verdict": verdict.equivalent,
            "witness": witness_text,
        });
        format!("{doc:#}\n")
    } else {
        let mut t = format!(
            "{mode} {path_a} {path_b}: {}\n",
            match (mode, verdict.equivalent) {
                ("equiv", true) => "equivalent",
                ("equiv", false) => "not equivalent",
                (_, true) => "conforms",
                (_, false) => "does not conform",
            }
        );
        if let Some(w) = &witness_text {
            t.push_str(&format!("witness: {}\n", w.join(" . ")));
        }
        t
    };
    CommandOutcome::new(if verdict.equivalent { 0 } else { 1 }, text)
}

/// Message-type term bindings from a contract's `.ann` sidecar.
fn message_bindings(
    path: &Path,
    def: &crate::lang::ActorDefinition,
) -> Result<BTreeMap<String, String>, String> {
    let ann_path: PathBuf = path.with_extension("ann");
    if !ann_path.exists() {
        return Ok(BTreeMap::new());
    }
    let ann = load_annotations(
        &std::fs::read_to_string(&ann_path).map_err(|e| format!("{}: {e}", ann_path.display()))?,
        &ann_path.display().to_string(),
    )
    .map_err(|e| e.to_string())?;
    let actor = def.actor_name();
    let prefix = format!("{actor}/#");
    Ok(ann
        .bindings
        .iter()
        .filter_map(|(name, term)| {
            name.strip_prefix(&prefix)
                .map(|msg| (msg.to_string(), term.clone()))
        })
        .collect())
}

// ---------------------------------------------------------------------------
// ledger

fn cmd_ledger(args: &[String]) -> CommandOutcome {
    let Some(sub) = args.first() else {
        return CommandOutcome::usage("ledger wants 'verify' or 'query'");
    };
    match sub.as_str() {
        "verify" => cmd_ledger_verify(&args[1..]),
        "query" => cmd_ledger_query(&args[1..]),
        other => CommandOutcome::usage(format!("unknown ledger subcommand '{other}'")),
    }
}

fn cmd_ledger_verify(args: &[String]) -> CommandOutcome {
    let flags = match parse_flags(args, &[], &["json"]) {
        Ok(f) => f,
        Err(e) => return CommandOutcome::usage(e),
    };
    let [path] = flags.positional.as_slice() else {
        return CommandOutcome::usage("ledger verify wants exactly one file");
    };
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => return CommandOutcome::fail(format!("{path}: {e}")),
    };
    let report = verify_bytes(&bytes);
    let text = if flags.switches.iter().any(|s| s == "json") {
        format!(
            "{:#}\n",
            serde_json::json!({
                "file": path,
                "ok": report.ok,
                "entriesChecked": report.entries_checked,
                "firstBad": report.first_bad,
                "detail": report.detail,
            })
        )
    } else if report.ok {
        format!("{path}: OK ({} entries)\n", report.entries_checked)
    } else {
        format!(
            "{path}: TAMPERED at index {} ({})\n",
            report.first_bad.unwrap_or(0),
            report.detail
        )
    };
    CommandOutcome::new(if report.ok { 0 } else { 1 }, text)
}

fn cmd_ledger_query(args: &[String]) -> CommandOutcome {
    let flags = match parse_flags(args, &["actor", "status", "seq-from", "seq-to"], &["json"]) {
        Ok(f) => f,
        Err(e) => return CommandOutcome::usage(e),
    };
    let [path] = flags.positional.as_slice() else {
        return CommandOutcome::usage("ledger query wants exactly one file");
    };
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => return CommandOutcome::fail(format!("{path}: {e}")),
    };
    let ledger = match parse_ledger(&bytes) {
        Ok(l) => l,
        Err(e) => return CommandOutcome::fail(e),
    };

    let mut filter = LedgerFilter::default();
    if let Some(actor) = flags.values.get("actor") {
        filter.actor = Some(crate::machine::ActorAddress::new(actor.clone()));
    }
    if let Some(status) = flags.values.get("status") {
        match EntryStatus::parse(status) {
            Some(s) => filter.status = Some(s),
            None => {
                return CommandOutcome::usage("--status wants ATTEMPTED, LIVE, COMPLETED or FAILED")
            }
        }
    }
    match parse_u64(&flags, "seq-from", 0) {
        Ok(v) if flags.values.contains_key("seq-from") => filter.seq_from = Some(v),
        Ok(_) => {}
        Err(e) => return CommandOutcome::usage(e),
    }
    match parse_u64(&flags, "seq-to", 0) {
        Ok(v) if flags.values.contains_key("seq-to") => filter.seq_to = Some(v),
        Ok(_) => {}
        Err(e) => return CommandOutcome::usage(e),
    }

    let hits = ledger.query(&filter);
    let text = if flags.switches.iter().any(|s| s == "json") {
        let rows: Vec<serde_json::Value> = hits
            .iter()
            .map(|e| {
                serde_json::json!({
                    "index": e.index,
                    "seq": e.seq,
                    "actor": e.actor.0,
                    "messageType": e.message_type,
                    "status": e.status.as_str(),
                    "reason": e.reason,
                })
            })
            .collect();
        format!(
            "{:#}\n",
            serde_json::json!({ "file": path, "matches": rows })
        )
    } else {
        let mut t = String::new();
        for e in &hits {
            t.push_str(&e.to_line());
            t.push('\n');
        }
        t.push_str(&format!(
            "{} of {} entries matched\n",
            hits.len(),
            ledger.len()
        ));
        t
    };
    CommandOutcome::new(0, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> CommandOutcome {
        execute(&args.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    }

    fn corpus(name: &str) -> String {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("corpus")
            .join(name)
            .display()
            .to_string()
    }

    #[test]
    fn check_clean_contract() {
        let out = run(&["check", &corpus("buysell.hzl")]);
        assert_eq!(out.exit_code, 0, "{}", out.report);
        assert!(out.report.contains("ok"));
    }

    #[test]
    fn check_strict_with_sidecars_passes() {
        // buysell.ann exists but buysell.terms does not; pass the
        // registry explicitly.
        let out = run(&[
            "check",
            &corpus("buysell.hzl"),
            "--strict",
            "--terms",
            &corpus("trade.terms"),
        ]);
        assert_eq!(out.exit_code, 0, "{}", out.report);
    }

    #[test]
    fn check_strict_without_annotations_reports_unbound() {
        let out = run(&["check", &corpus("party.hzl"), "--strict"]);
        assert_eq!(out.exit_code, 1);
        assert!(out.report.contains("unbound-name"));
    }

    #[test]
    fn check_missing_file_is_exit_2() {
        let out = run(&["check", "no/such/file.hzl"]);
        assert_eq!(out.exit_code, 2);
    }

    #[test]
    fn unknown_command_is_exit_2() {
        assert_eq!(run(&["frobnicate"]).exit_code, 2);
        assert_eq!(run(&[]).exit_code, 2);
    }

    #[test]
    fn compare_modes_and_exit_codes() {
        let fig = corpus("buysell.hzl");
        assert_eq!(
            run(&["compare", &fig, &corpus("buysell-renamed.hzl")]).exit_code,
            0
        );
        let mutant = run(&["compare", &fig, &corpus("buysell-mutant.hzl")]);
        assert_eq!(mutant.exit_code, 1);
        assert!(mutant.report.contains("witness"), "{}", mutant.report);
        assert_eq!(run(&["compare", &fig, "missing.hzl"]).exit_code, 2);
        assert_eq!(
            run(&[
                "compare",
                &corpus("buysell-extra.hzl"),
                &fig,
                "--mode",
                "conform"
            ])
            .exit_code,
            0
        );
        assert_eq!(
            run(&["compare", &fig, &fig, "--mode", "bogus"]).exit_code,
            2
        );
    }
}
