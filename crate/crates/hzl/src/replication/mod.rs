//! Byzantine-fault-tolerant lockstep replication.
//!
//! A world is cloned onto n = 3f+1 simulated nodes. Envelopes reach
//! the fixed primary (node 0), which assigns sequence numbers and
//! broadcasts pre-prepare; replicas broadcast prepare on a valid
//! pre-prepare, commit after 2f+1 matching prepares, and execute after
//! 2f+1 matching commits, strictly in sequence order. After executing
//! a sequence number every replica broadcasts an authenticated vote
//! carrying its post-execution state digest; a replica flags
//! divergence when a quorum of votes disagrees with its own digest,
//! and suspects any node whose vote differs from the quorum value.
//!
//! Every protocol message carries a per-node keyed authenticator tag;
//! messages whose tag does not verify are discarded and counted.
//! There is no view change: a failed primary costs liveness, never
//! safety, and the report says so. Checkpointing and state transfer
//! are likewise out of scope; runs are bounded by a tick budget.

pub mod config;
pub mod net;

pub use config::{
    parse_net_config, BadConfig, FaultBehavior, FaultProfile, NetConfig, NetParseError, Partition,
    ReplicaConfig, SimConfig,
};

use std::collections::{BTreeMap, BTreeSet};

use crate::digest::{keyed_tag, put_str, put_u64, sha256, Digest32};
use crate::ledger::Ledger;
use crate::machine::Envelope;
use crate::runtime::World;

use net::SimNet;

/// Budget for draining one committed envelope's cascade inside a
/// replica's world.
const WORLD_BUDGET: u64 = 100_000;

/// State digest of a world: the quantity integrity votes carry.
pub fn digest_state(world: &World) -> Digest32 {
    world.state_digest()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtoMsg {
    Request {
        req_id: u64,
        env: Envelope,
    },
    PrePrepare {
        seq: u64,
        digest: Digest32,
        env: Envelope,
    },
    Prepare {
        seq: u64,
        digest: Digest32,
    },
    Commit {
        seq: u64,
        digest: Digest32,
    },
    ExecVote {
        seq: u64,
        digest: Digest32,
    },
}

impl ProtoMsg {
    fn canonical_bytes(&self, from: usize) -> Vec<u8> {
        let mut buf = Vec::new();
        put_u64(&mut buf, from as u64);
        match self {
            ProtoMsg::Request { req_id, env } => {
                buf.push(0);
                put_u64(&mut buf, *req_id);
                buf.extend(env.canonical_bytes());
            }
            ProtoMsg::PrePrepare { seq, digest, env } => {
                buf.push(1);
                put_u64(&mut buf, *seq);
                buf.extend_from_slice(&digest.0);
                buf.extend(env.canonical_bytes());
            }
            ProtoMsg::Prepare { seq, digest } => {
                buf.push(2);
                put_u64(&mut buf, *seq);
                buf.extend_from_slice(&digest.0);
            }
            ProtoMsg::Commit { seq, digest } => {
                buf.push(3);
                put_u64(&mut buf, *seq);
                buf.extend_from_slice(&digest.0);
            }
            ProtoMsg::ExecVote { seq, digest } => {
                buf.push(4);
                put_u64(&mut buf, *seq);
                buf.extend_from_slice(&digest.0);
            }
        }
        buf
    }
}

#[derive(Debug, Clone)]
pub struct SignedMsg {
    pub from: usize,
    pub msg: ProtoMsg,
    pub auth: Digest32,
}

/// Per-node secret keys, derived from the network seed. The simulator
/// stands in for a key-distribution ceremony; what matters is that a
/// node can only produce valid tags under its own key.
fn node_key(node: usize, seed: u64) -> Digest32 {
    let mut buf = Vec::new();
    put_str(&mut buf, "hzl-node-key");
    put_u64(&mut buf, node as u64);
    put_u64(&mut buf, seed);
    sha256(&buf)
}

fn sign(msg: &ProtoMsg, from: usize, seed: u64, forge: bool) -> SignedMsg {
    let auth = if forge {
        sha256(b"forged")
    } else {
        keyed_tag(&node_key(from, seed), &msg.canonical_bytes(from))
    };
    SignedMsg {
        from,
        msg: msg.clone(),
        auth,
    }
}

fn verify(signed: &SignedMsg, seed: u64) -> bool {
    keyed_tag(
        &node_key(signed.from, seed),
        &signed.msg.canonical_bytes(signed.from),
    ) == signed.auth
}

fn flip_digest(d: Digest32) -> Digest32 {
    let mut out = d;
    out.0[0] ^= 0xff;
    out
}

/// The equivocating variant of an envelope: same routing, marked payload.
fn equivocation_variant(env: &Envelope) -> Envelope {
    let mut variant = env.clone();
    variant.payload.insert(
        "x_equivocation".to_string(),
        crate::machine::Value::Str("1".into()),
    );
    variant
}

#[derive(Debug, Clone)]
pub struct Replica {
    pub id: usize,
    pub world: World,
    pub fault: Option<FaultBehavior>,
    next_seq: u64,
    pre_prepares: BTreeMap<u64, (Digest32, Envelope)>,
    prepares: BTreeMap<u64, BTreeMap<Digest32, BTreeSet<usize>>>,
    commits: BTreeMap<u64, BTreeMap<Digest32, BTreeSet<usize>>>,
    commit_sent: BTreeSet<u64>,
    /// Commit certificates: seq -> (digest, voters). Execution requires one.
    certs: BTreeMap<u64, (Digest32, BTreeSet<usize>)>,
    executed_through: u64,
    exec_votes: BTreeMap<u64, BTreeMap<Digest32, BTreeSet<usize>>>,
    own_exec_digest: BTreeMap<u64, Digest32>,
    divergence: Option<u64>,
    suspected: BTreeSet<usize>,
    discarded_bad_auth: u64,
    equivocation_observed: bool,
}

impl Replica {
    fn new(id: usize, world: World, fault: Option<FaultBehavior>) -> Self {
        Replica {
            id,
            world,
            fault,
            next_seq: 1,
            pre_prepares: BTreeMap::new(),
            prepares: BTreeMap::new(),
            commits: BTreeMap::new(),
            commit_sent: BTreeSet::new(),
            certs: BTreeMap::new(),
            executed_through: 0,
            exec_votes: BTreeMap::new(),
            own_exec_digest: BTreeMap::new(),
            divergence: None,
            suspected: BTreeSet::new(),
            discarded_bad_auth: 0,
            equivocation_observed: false,
        }
    }

    fn is_primary(&self) -> bool {
        self.id == 0
    }

    /// Handle one delivered message; returns messages to broadcast.
    fn handle(&mut self, signed: SignedMsg, quorum: usize, seed: u64) -> Vec<ProtoMsg> {
        if !verify(&signed, seed) {
            self.discarded_bad_auth += 1;
            return Vec::new();
        }
        let from = signed.from;
        let mut out = Vec::new();
        match signed.msg {
            ProtoMsg::Request { env, .. } => {
                if self.is_primary() {
                    let seq = self.next_seq;
                    self.next_seq += 1;
                    out.push(ProtoMsg::PrePrepare {
                        seq,
                        digest: env.content_digest(),
                        env,
                    });
                }
            }
            ProtoMsg::PrePrepare { seq, digest, env } => {
                // Only the fixed primary may order.
                if from != 0 || digest != env.content_digest() {
                    return out;
                }
                match self.pre_prepares.get(&seq) {
                    Some((known, _)) if *known != digest => {
                        self.equivocation_observed = true;
                    }
                    Some(_) => {}
                    None => {
                        self.pre_prepares.insert(seq, (digest, env));
                        out.push(ProtoMsg::Prepare { seq, digest });
                    }
                }
            }
            ProtoMsg::Prepare { seq, digest } => {
                self.prepares
                    .entry(seq)
                    .or_default()
                    .entry(digest)
                    .or_default()
                    .insert(from);
                self.maybe_commit(seq, quorum, &mut out);
            }
            ProtoMsg::Commit { seq, digest } => {
                self.commits
                    .entry(seq)
                    .or_default()
                    .entry(digest)
                    .or_default()
                    .insert(from);
                self.maybe_certify(seq, quorum);
                self.execute_ready(quorum, &mut out);
            }
            ProtoMsg::ExecVote { seq, digest } => {
                self.exec_votes
                    .entry(seq)
                    .or_default()
                    .entry(digest)
                    .or_default()
                    .insert(from);
                self.review_votes(seq, quorum);
            }
        }
        out
    }

    fn maybe_commit(&mut self, seq: u64, quorum: usize, out: &mut Vec<ProtoMsg>) {
        if self.commit_sent.contains(&seq) {
            return;
        }
        let Some((digest, _)) = self.pre_prepares.get(&seq) else {
            return;
        };
        let count = self
            .prepares
            .get(&seq)
            .and_then(|m| m.get(digest))
            .map(|s| s.len())
            .unwrap_or(0);
        if count >= quorum {
            self.commit_sent.insert(seq);
            out.push(ProtoMsg::Commit {
                seq,
                digest: *digest,
            });
        }
    }

    fn maybe_certify(&mut self, seq: u64, quorum: usize) {
        if self.certs.contains_key(&seq) {
            return;
        }
        let Some((digest, _)) = self.pre_prepares.get(&seq) else {
            return;
        };
        let Some(voters) = self.commits.get(&seq).and_then(|m| m.get(digest)) else {
            return;
        };
        if voters.len() >= quorum {
            self.certs.insert(seq, (*digest, voters.clone()));
        }
    }

    /// Execute committed sequence numbers strictly in order; no
    /// execution ever happens without a commit certificate.
    fn execute_ready(&mut self, quorum: usize, out: &mut Vec<ProtoMsg>) {
        while let Some((_digest, _)) = self.certs.get(&(self.executed_through + 1)) {
            let seq = self.executed_through + 1;
            let (_, env) = self
                .pre_prepares
                .get(&seq)
                .expect("cert implies pre-prepare")
                .clone();
            let mut env = env;
            env.seq = Some(seq);
            self.world.current_seq = seq;
            self.world.deliver(env);
            self.world.run_to_quiescence(WORLD_BUDGET);
            let digest = self.world.state_digest();
            self.own_exec_digest.insert(seq, digest);
            self.executed_through = seq;
            out.push(ProtoMsg::ExecVote { seq, digest });
            self.review_votes(seq, quorum);
        }
    }

    /// Compare collected execution votes with our own digest: a quorum
    /// behind a different digest flags divergence; any vote off the
    /// quorum value marks its sender suspected.
    fn review_votes(&mut self, seq: u64, quorum: usize) {
        let Some(own) = self.own_exec_digest.get(&seq).copied() else {
            return;
        };
        let Some(votes) = self.exec_votes.get(&seq) else {
            return;
        };
        let quorum_digest = votes
            .iter()
            .find(|(_, voters)| voters.len() >= quorum)
            .map(|(d, _)| *d);
        if let Some(majority) = quorum_digest {
            if majority != own && self.divergence.is_none() {
                self.divergence = Some(seq);
            }
            for (digest, voters) in votes {
                if *digest != majority {
                    self.suspected.extend(voters.iter().copied());
                }
            }
        }
    }
}

#[derive(Debug)]
pub struct ReplicaSet {
    pub cfg: ReplicaConfig,
    pub replicas: Vec<Replica>,
    pending: Vec<(u64, Envelope)>,
    next_request: u64,
}

pub type RequestId = u64;

/// Clone a world onto n = 3f+1 replicas with identical initial digests.
pub fn replicate(world: &World, cfg: ReplicaConfig) -> Result<ReplicaSet, BadConfig> {
    cfg.validate()?;
    let replicas = (0..cfg.n)
        .map(|id| Replica::new(id, world.clone(), None))
        .collect::<Vec<_>>();
    debug_assert!(replicas
        .windows(2)
        .all(|w| w[0].world.state_digest() == w[1].world.state_digest()));
    Ok(ReplicaSet {
        cfg,
        replicas,
        pending: Vec::new(),
        next_request: 1,
    })
}

/// Queue an envelope for ordering; the simulated client sends it to
/// the primary when the protocol runs.
pub fn submit(rs: &mut ReplicaSet, env: Envelope) -> RequestId {
    let id = rs.next_request;
    rs.next_request += 1;
    rs.pending.push((id, env));
    id
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Liveness {
    Live,
    /// (node, executed_through) for each honest replica that fell short.
    Loss {
        stalled: Vec<(usize, u64)>,
    },
}

#[derive(Debug, Clone)]
pub struct ReplicaReport {
    pub node: usize,
    pub role: Option<String>,
    pub fault: Option<String>,
    /// Sequence numbers holding commit certificates, ascending.
    pub committed: Vec<u64>,
    pub gap_free: bool,
    pub executed_through: u64,
    pub exec_digests: Vec<(u64, Digest32)>,
    pub divergence: Option<u64>,
    pub suspected: Vec<usize>,
    pub discarded_bad_auth: u64,
    pub equivocation_observed: bool,
    pub final_digest: Digest32,
    pub ledger: Ledger,
}

#[derive(Debug, Clone)]
pub struct ReplicationReport {
    pub n: usize,
    pub f: usize,
    pub quorum: usize,
    pub total_requests: u64,
    pub honest: Vec<usize>,
    pub assumption_breach: bool,
    pub liveness: Liveness,
    pub safety_ok: bool,
    pub safety_detail: String,
    pub ticks_used: u64,
    pub dropped_messages: u64,
    pub replicas: Vec<ReplicaReport>,
}

impl ReplicationReport {
    pub fn divergence_observed(&self) -> bool {
        self.replicas
            .iter()
            .filter(|r| self.honest.contains(&r.node))
            .any(|r| r.divergence.is_some())
    }

    /// Structured text export: header lines then one line per
    /// (replica, seq).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "replication n={} f={} quorum={} requests={} ticks={} dropped={}\n",
            self.n,
            self.f,
            self.quorum,
            self.total_requests,
            self.ticks_used,
            self.dropped_messages
        ));
        out.push_str(&format!(
            "safety={} liveness={} breach={}\n",
            if self.safety_ok { "ok" } else { "violated" },
            match &self.liveness {
                Liveness::Live => "live".to_string(),
                Liveness::Loss { stalled } => format!("loss{stalled:?}"),
            },
            self.assumption_breach
        ));
        if !self.safety_ok {
            out.push_str(&format!("safety-detail={}\n", self.safety_detail));
        }
        for r in &self.replicas {
            out.push_str(&format!(
                "node={} role={} fault={} executed={} divergence={} suspected={:?} badauth={} ledger={} final={}\n",
                r.node,
                r.role.as_deref().unwrap_or("-"),
                r.fault.as_deref().unwrap_or("-"),
                r.executed_through,
                r.divergence.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                r.suspected,
                r.discarded_bad_auth,
                r.ledger.len(),
                r.final_digest.hex()
            ));
            for (seq, digest) in &r.exec_digests {
                out.push_str(&format!("vote|{}|{}|{}\n", r.node, seq, digest.hex()));
            }
        }
        out
    }
}

/// Drive the three-phase protocol over a simulated network until every
/// request is executed everywhere honest or the tick budget runs out.
pub fn run_protocol(
    mut rs: ReplicaSet,
    net_cfg: NetConfig,
    faults: &[FaultProfile],
    max_ticks: u64,
) -> ReplicationReport {
    let seed = net_cfg.seed;
    let quorum = rs.cfg.quorum();
    let n = rs.cfg.n;
    let client = n; // pseudo-node id for the submitting client

    for profile in faults {
        if profile.node < n {
            rs.replicas[profile.node].fault = Some(profile.behavior.clone());
        }
    }
    let honest: Vec<usize> = (0..n)
        .filter(|id| rs.replicas[*id].fault.is_none())
        .collect();
    let assumption_breach = faults.len() > rs.cfg.f;

    let mut net: SimNet<SignedMsg> = SimNet::new(net_cfg);
    let total_requests = rs.pending.len() as u64;

    // The client submits request i at tick i.
    let submissions: Vec<(u64, Envelope)> = rs.pending.drain(..).collect();

    let mut ticks_used = max_ticks;
    for tick in 0..max_ticks {
        net.now = tick;
        if let Some((req_id, env)) = submissions.get(tick as usize) {
            let msg = ProtoMsg::Request {
                req_id: *req_id,
                env: env.clone(),
            };
            let signed = sign(&msg, client, seed, false);
            net.send(client, 0, signed, 0);
        }

        let due = net.take_due(tick);
        for delivery in due {
            let outputs = rs.replicas[delivery.to].handle(delivery.msg, quorum, seed);
            for msg in outputs {
                broadcast(&mut net, &rs.replicas[delivery.to], &msg, n, seed);
            }
        }

        let all_done = tick as usize >= submissions.len()
            && honest
                .iter()
                .all(|&id| rs.replicas[id].executed_through >= total_requests)
            && net.in_flight() == 0;
        if all_done {
            ticks_used = tick + 1;
            break;
        }
    }

    let stalled: Vec<(usize, u64)> = honest
        .iter()
        .filter(|&&id| rs.replicas[id].executed_through < total_requests)
        .map(|&id| (id, rs.replicas[id].executed_through))
        .collect();
    let liveness = if stalled.is_empty() {
        Liveness::Live
    } else {
        Liveness::Loss { stalled }
    };

    let (safety_ok, safety_detail) = check_safety(&rs, &honest);

    let replicas = rs
        .replicas
        .iter()
        .map(|r| {
            let committed: Vec<u64> = r.certs.keys().copied().collect();
            let gap_free = committed
                .iter()
                .enumerate()
                .all(|(i, &s)| s == i as u64 + 1);
            ReplicaReport {
                node: r.id,
                role: rs.cfg.roles.get(&r.id).cloned(),
                fault: r.fault.as_ref().map(|f| f.name()),
                committed,
                gap_free,
                executed_through: r.executed_through,
                exec_digests: r.own_exec_digest.iter().map(|(s, d)| (*s, *d)).collect(),
                divergence: r.divergence,
                suspected: r.suspected.iter().copied().collect(),
                discarded_bad_auth: r.discarded_bad_auth,
                equivocation_observed: r.equivocation_observed,
                final_digest: r.world.state_digest(),
                ledger: r.world.ledger.clone(),
            }
        })
        .collect();

    ReplicationReport {
        n,
        f: rs.cfg.f,
        quorum,
        total_requests,
        honest,
        assumption_breach,
        liveness,
        safety_ok,
        safety_detail,
        ticks_used,
        dropped_messages: net.dropped,
        replicas,
    }
}

/// Within-bounds safety: honest replicas that executed the same
/// sequence number must agree on both the committed envelope digest
/// and the post-execution state digest.
fn check_safety(rs: &ReplicaSet, honest: &[usize]) -> (bool, String) {
    let mut max_seq = 0;
    for &id in honest {
        max_seq = max_seq.max(rs.replicas[id].executed_through);
    }
    for seq in 1..=max_seq {
        let mut exec: Option<(usize, Digest32)> = None;
        let mut committed: Option<(usize, Digest32)> = None;
        for &id in honest {
            let r = &rs.replicas[id];
            if let Some(d) = r.own_exec_digest.get(&seq) {
                match exec {
                    None => exec = Some((id, *d)),
                    Some((first, fd)) if fd != *d => {
                        return (
                            false,
                            format!("seq {seq}: node {first} and node {id} executed to different digests"),
                        );
                    }
                    _ => {}
                }
            }
            if let Some((d, _)) = r.certs.get(&seq) {
                match committed {
                    None => committed = Some((id, *d)),
                    Some((first, fd)) if fd != *d => {
                        return (
                            false,
                            format!("seq {seq}: node {first} and node {id} committed different envelopes"),
                        );
                    }
                    _ => {}
                }
            }
        }
    }
    (true, String::new())
}

/// Expand one broadcast into per-destination sends, applying the
/// sender's fault behavior.
fn broadcast(net: &mut SimNet<SignedMsg>, sender: &Replica, msg: &ProtoMsg, n: usize, seed: u64) {
    let from = sender.id;
    match &sender.fault {
        Some(FaultBehavior::Silent) => {}
        Some(FaultBehavior::Delay(extra)) => {
            for to in 0..n {
                net.send(from, to, sign(msg, from, seed, false), *extra);
            }
        }
        Some(FaultBehavior::ForgeAuth) => {
            for to in 0..n {
                net.send(from, to, sign(msg, from, seed, true), 0);
            }
        }
        Some(FaultBehavior::CorruptDigest) => {
            for to in 0..n {
                let lied = match msg {
                    ProtoMsg::ExecVote { seq, digest } => ProtoMsg::ExecVote {
                        seq: *seq,
                        digest: flip_digest(*digest),
                    },
                    other => other.clone(),
                };
                net.send(from, to, sign(&lied, from, seed, false), 0);
            }
        }
        Some(FaultBehavior::Equivocate) => {
            for to in 0..n {
                let variant = if to % 2 == 1 {
                    match msg {
                        ProtoMsg::PrePrepare { seq, env, .. } => {
                            let env2 = equivocation_variant(env);
                            ProtoMsg::PrePrepare {
                                seq: *seq,
                                digest: env2.content_digest(),
                                env: env2,
                            }
                        }
                        ProtoMsg::Prepare { seq, digest } => ProtoMsg::Prepare {
                            seq: *seq,
                            digest: flip_digest(*digest),
                        },
                        ProtoMsg::Commit { seq, digest } => ProtoMsg::Commit {
                            seq: *seq,
                            digest: flip_digest(*digest),
                        },
                        ProtoMsg::ExecVote { seq, digest } => ProtoMsg::ExecVote {
                            seq: *seq,
                            digest: flip_digest(*digest),
                        },
                        other => other.clone(),
                    }
                } else {
                    msg.clone()
                };
                net.send(from, to, sign(&variant, from, seed, false), 0);
            }
        }
        None => {
            for to in 0..n {
                net.send(from, to, sign(msg, from, seed, false), 0);
            }
        }
    }
}
