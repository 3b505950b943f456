//! Scenario files (`.scn`): ordered directives driving a world.
//!
//! ```text
//! SPAWN C "buysell.hzl" WITH "countrycap.bhv"
//! SEND A C buyoffermsg { product: "X", price: 10, quantity: 5, buyer: @A, seller: @B }
//! RUN 100
//! ```
//!
//! `SPAWN addr "contract.hzl" [WITH "frag.bhv" ...]` creates an actor
//! (paths resolve relative to the scenario file; fragments compose in
//! the order written). `SEND from to msgType { field: value, ... }`
//! routes an envelope; payload values are strings, numbers, `@name`
//! address literals or `?` for unbound. `RUN n` drives the scheduler
//! for at most n ticks. `//` comments and blank lines are ignored.
//!
//! For replicated execution the same file is read differently: SPAWNs
//! build the initial world, SENDs become the submitted envelopes in
//! order, and the last RUN bounds the protocol tick budget.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::diag::Diagnostic;
use crate::lang::parser::Parser;
use crate::lang::{tokenize, LangError, SourceUnit, TokenKind};
use crate::machine::{
    compile, compose_behaviors, parse_fragments, ActorAddress, BehaviorFragment, CompileError,
    CompiledMachine, ComposeError, Envelope, Record, Value,
};

use super::{RunOutcome, SpawnError, World};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Directive {
    Spawn {
        address: ActorAddress,
        contract: String,
        fragments: Vec<String>,
    },
    Send(Envelope),
    Run(u64),
}

#[derive(Debug, Clone, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error("{path}: contract has {} validation finding(s); first: {first}", .diagnostics.len())]
    Invalid {
        path: String,
        diagnostics: Vec<Diagnostic>,
        first: String,
    },
    #[error("{path}: {error}")]
    Compile { path: String, error: CompileError },
    #[error("{path}: {error}")]
    Compose { path: String, error: ComposeError },
    #[error(transparent)]
    Spawn(#[from] SpawnError),
}

#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub directives: Vec<Directive>,
    pub base_dir: PathBuf,
    pub origin: String,
}

pub fn parse_scenario(src: &SourceUnit) -> Result<Vec<Directive>, LangError> {
    let tokens = tokenize(src)?;
    let mut p = Parser::new(&tokens, &src.origin);
    let mut directives = Vec::new();
    while p.peek().is_some() {
        if p.at_ident("SPAWN") {
            p.bump();
            let address = ActorAddress::new(p.take_name("actor address")?.text);
            let contract = take_path(&mut p)?;
            let mut fragments = Vec::new();
            if p.at_ident("WITH") {
                p.bump();
                fragments.push(take_path(&mut p)?);
                while matches!(p.peek(), Some(TokenKind::Str(_))) {
                    fragments.push(take_path(&mut p)?);
                }
            }
            directives.push(Directive::Spawn {
                address,
                contract,
                fragments,
            });
        } else if p.at_ident("SEND") {
            p.bump();
            let sender = ActorAddress::new(p.take_name("sender address")?.text);
            let to = ActorAddress::new(p.take_name("destination address")?.text);
            let message_type = p.take_name("message type")?.text;
            let payload = parse_payload(&mut p)?;
            directives.push(Directive::Send(Envelope::new(
                sender,
                to,
                message_type,
                payload,
            )));
        } else if p.at_ident("RUN") {
            p.bump();
            let ticks = match p.peek() {
                Some(TokenKind::Num(n)) if n.chars().all(|c| c.is_ascii_digit()) => {
                    let v = n.parse::<u64>().map_err(|_| p.unexpected(&["tick count"]));
                    let v = v?;
                    p.bump();
                    v
                }
                _ => return Err(LangError::Parse(p.unexpected(&["tick count"]))),
            };
            directives.push(Directive::Run(ticks));
        } else {
            return Err(LangError::Parse(
                p.unexpected(&["'SPAWN'", "'SEND'", "'RUN'"]),
            ));
        }
    }
    Ok(directives)
}

fn take_path(p: &mut Parser<'_>) -> Result<String, crate::lang::ParseError> {
    match p.peek() {
        Some(TokenKind::Str(s)) => {
            let s = s.clone();
            p.bump();
            Ok(s)
        }
        _ => Err(p.unexpected(&["quoted file path"])),
    }
}

fn parse_payload(p: &mut Parser<'_>) -> Result<Record, crate::lang::ParseError> {
    p.expect_lbrace()?;
    let mut payload = Record::new();
    while !p.at(&TokenKind::RBrace) {
        let field = p.take_name("field name")?.text;
        if !p.at(&TokenKind::Colon) {
            return Err(p.unexpected(&["':'"]));
        }
        p.bump();
        let value = match p.peek() {
            Some(TokenKind::Str(s)) => {
                let v = Value::Str(s.clone());
                p.bump();
                v
            }
            Some(TokenKind::Num(n)) => {
                let v = Value::Num(n.parse().map_err(|_| p.unexpected(&["number"]))?);
                p.bump();
                v
            }
            Some(TokenKind::DataRef(root, None)) => {
                let v = Value::Address(ActorAddress::new(root.clone()));
                p.bump();
                v
            }
            Some(TokenKind::Wildcard) => {
                p.bump();
                Value::Unbound
            }
            _ => return Err(p.unexpected(&["string literal", "number", "address '@name'", "'?'"])),
        };
        payload.insert(field, value);
        p.eat_comma();
    }
    p.expect_rbrace()?;
    Ok(payload)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let src = SourceUnit::new(text, path.display().to_string());
    let directives = parse_scenario(&src)?;
    Ok(ScenarioFile {
        directives,
        base_dir: path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf(),
        origin: path.display().to_string(),
    })
}

/// Loads and compiles contracts and fragments, caching by path.
#[derive(Default)]
pub struct ContractLoader {
    machines: BTreeMap<PathBuf, Arc<CompiledMachine>>,
    fragments: BTreeMap<PathBuf, Vec<BehaviorFragment>>,
}

impl ContractLoader {
    pub fn new() -> Self {
        Self::default()
    }

    fn read(path: &Path) -> Result<String, ScenarioError> {
        std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn base_machine(&mut self, path: &Path) -> Result<Arc<CompiledMachine>, ScenarioError> {
        if let Some(m) = self.machines.get(path) {
            return Ok(Arc::clone(m));
        }
        let text = Self::read(path)?;
        let src = SourceUnit::new(text, path.display().to_string());
        let def = crate::lang::parse_source(&src)?;
        let diagnostics = crate::lang::validate(&def);
        if !diagnostics.is_empty() {
            return Err(ScenarioError::Invalid {
                path: path.display().to_string(),
                first: diagnostics[0].to_string(),
                diagnostics,
            });
        }
        let machine = compile(&def).map_err(|error| ScenarioError::Compile {
            path: path.display().to_string(),
            error,
        })?;
        let machine = Arc::new(machine);
        self.machines
            .insert(path.to_path_buf(), Arc::clone(&machine));
        Ok(machine)
    }

    pub fn fragments(&mut self, path: &Path) -> Result<Vec<BehaviorFragment>, ScenarioError> {
        if let Some(f) = self.fragments.get(path) {
            return Ok(f.clone());
        }
        let text = Self::read(path)?;
        let src = SourceUnit::new(text, path.display().to_string());
        let frags = parse_fragments(&src)?;
        self.fragments.insert(path.to_path_buf(), frags.clone());
        Ok(frags)
    }

    /// Resolve, compile and compose one SPAWN directive's machine.
    pub fn machine_for(
        &mut self,
        base_dir: &Path,
        contract: &str,
        fragment_paths: &[String],
    ) -> Result<Arc<CompiledMachine>, ScenarioError> {
        let contract_path = base_dir.join(contract);
        let base = self.base_machine(&contract_path)?;
        if fragment_paths.is_empty() {
            return Ok(base);
        }
        let mut all = Vec::new();
        for rel in fragment_paths {
            all.extend(self.fragments(&base_dir.join(rel))?);
        }
        let composed = compose_behaviors(&base, &all).map_err(|error| ScenarioError::Compose {
            path: contract_path.display().to_string(),
            error,
        })?;
        Ok(Arc::new(composed))
    }
}

#[derive(Debug)]
pub struct ScenarioRun {
    pub world: World,
    /// Outcome of the final RUN directive (quiescent trivially if none ran).
    pub outcome: RunOutcome,
}

/// Execute a scenario on a fresh single-node world.
pub fn run_scenario(
    scn: &ScenarioFile,
    seed: u64,
    max_ticks_override: Option<u64>,
) -> Result<ScenarioRun, ScenarioError> {
    let mut loader = ContractLoader::new();
    let mut world = World::new(seed);
    let mut outcome = RunOutcome {
        quiescent: true,
        steps: 0,
    };
    let mut total_steps = 0u64;
    for directive in &scn.directives {
        match directive {
            Directive::Spawn {
                address,
                contract,
                fragments,
            } => {
                let machine = loader.machine_for(&scn.base_dir, contract, fragments)?;
                world.spawn(machine, address.clone())?;
            }
            Directive::Send(env) => world.deliver(env.clone()),
            Directive::Run(ticks) => {
                let budget = max_ticks_override.unwrap_or(*ticks);
                let r = world.run_to_quiescence(budget);
                total_steps += r.steps;
                outcome = RunOutcome {
                    quiescent: r.quiescent,
                    steps: total_steps,
                };
            }
        }
    }
    if world.pending_messages() > 0 {
        outcome.quiescent = false;
    }
    Ok(ScenarioRun { world, outcome })
}

/// Inputs for replicated execution of the same scenario file.
#[derive(Debug)]
pub struct ReplicationInputs {
    pub base: World,
    pub submissions: Vec<Envelope>,
    pub budget: u64,
}

pub const DEFAULT_PROTOCOL_BUDGET: u64 = 10_000;

pub fn replication_inputs(
    scn: &ScenarioFile,
    seed: u64,
) -> Result<ReplicationInputs, ScenarioError> {
    let mut loader = ContractLoader::new();
    let mut base = World::new(seed);
    let mut submissions = Vec::new();
    let mut budget = DEFAULT_PROTOCOL_BUDGET;
    for directive in &scn.directives {
        match directive {
            Directive::Spawn {
                address,
                contract,
                fragments,
            } => {
                let machine = loader.machine_for(&scn.base_dir, contract, fragments)?;
                base.spawn(machine, address.clone())?;
            }
            Directive::Send(env) => submissions.push(env.clone()),
            Directive::Run(ticks) => budget = *ticks,
        }
    }
    Ok(ReplicationInputs {
        base,
        submissions,
        budget,
    })
}
