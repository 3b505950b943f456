//! Replication topology files (`.net`).
//!
//! Line-oriented key/value format; `//` comments and blank lines are
//! ignored:
//!
//! ```text
//! n 4
//! f 1
//! seed 42
//! role 0 sender-provider
//! fault 2 corrupt-digest        // silent | equivocate | corrupt-digest | forge-auth | delay <ticks>
//! drop 0.05                     // global per-link drop probability
//! droplink 1 3 0.5              // override for one directed link
//! delay 0 2                     // uniform extra delivery delay, in ticks
//! partition 10 20 | 0 1 | 2 3   // ticks [10,20): {0,1} cannot reach {2,3}
//! ```

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaConfig {
    pub n: usize,
    pub f: usize,
    pub roles: BTreeMap<usize, String>,
}

impl ReplicaConfig {
    pub fn new(n: usize, f: usize) -> Self {
        ReplicaConfig {
            n,
            f,
            roles: BTreeMap::new(),
        }
    }

    pub fn quorum(&self) -> usize {
        2 * self.f + 1
    }

    pub fn primary(&self) -> usize {
        0
    }

    /// Byzantine quorum arithmetic: n must equal 3f+1.
    pub fn validate(&self) -> Result<(), BadConfig> {
        if self.n != 3 * self.f + 1 {
            return Err(BadConfig {
                n: self.n,
                f: self.f,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
#[error("invalid replica configuration: n = {n} but 3f+1 = {}", 3 * f + 1)]
pub struct BadConfig {
    pub n: usize,
    pub f: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FaultBehavior {
    /// Sends nothing at all.
    Silent,
    /// Sends conflicting digests to different peers.
    Equivocate,
    /// Lies about its post-execution state digest.
    CorruptDigest,
    /// Delays every outgoing message by the given ticks.
    Delay(u64),
    /// Sends messages with invalid authenticators.
    ForgeAuth,
}

impl FaultBehavior {
    pub fn name(&self) -> String {
        match self {
            FaultBehavior::Silent => "silent".into(),
            FaultBehavior::Equivocate => "equivocate".into(),
            FaultBehavior::CorruptDigest => "corrupt-digest".into(),
            FaultBehavior::Delay(t) => format!("delay {t}"),
            FaultBehavior::ForgeAuth => "forge-auth".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultProfile {
    pub node: usize,
    pub behavior: FaultBehavior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Active for ticks in [from, to).
    pub from_tick: u64,
    pub to_tick: u64,
    pub groups: Vec<BTreeSet<usize>>,
}

impl Partition {
    /// True when the partition separates a from b at the given tick.
    pub fn blocks(&self, a: usize, b: usize, tick: u64) -> bool {
        if tick < self.from_tick || tick >= self.to_tick {
            return false;
        }
        let group_of = |x: usize| self.groups.iter().position(|g| g.contains(&x));
        match (group_of(a), group_of(b)) {
            (Some(ga), Some(gb)) => ga != gb,
            // Unlisted nodes form an implicit extra group.
            (None, None) => false,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub seed: u64,
    pub drop_rate: f64,
    pub link_drop: BTreeMap<(usize, usize), f64>,
    pub delay_min: u64,
    pub delay_max: u64,
    pub partitions: Vec<Partition>,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            seed: 0,
            drop_rate: 0.0,
            link_drop: BTreeMap::new(),
            delay_min: 0,
            delay_max: 0,
            partitions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub replica: ReplicaConfig,
    pub net: NetConfig,
    pub faults: Vec<FaultProfile>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{origin}:{line}: {what}")]
pub struct NetParseError {
    pub origin: String,
    pub line: u32,
    pub what: String,
}

pub fn parse_net_config(text: &str, origin: &str) -> Result<SimConfig, NetParseError> {
    let mut replica = ReplicaConfig::new(1, 0);
    let mut net = NetConfig::default();
    let mut faults = Vec::new();

    for (ix, raw) in text.lines().enumerate() {
        let line_no = ix as u32 + 1;
        let err = |what: String| NetParseError {
            origin: origin.to_string(),
            line: line_no,
            what,
        };
        let line = match raw.split_once("//") {
            Some((before, _)) => before.trim(),
            None => raw.trim(),
        };
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let key = words.next().expect("non-empty line");
        let rest: Vec<&str> = words.collect();
        match key {
            "n" => replica.n = parse_one(&rest, "n", &err)?,
            "f" => replica.f = parse_one(&rest, "f", &err)?,
            "seed" => net.seed = parse_one(&rest, "seed", &err)?,
            "drop" => net.drop_rate = parse_one(&rest, "drop", &err)?,
            "role" => {
                if rest.len() != 2 {
                    return Err(err("role wants: role <node> <label>".into()));
                }
                let node: usize = rest[0]
                    .parse()
                    .map_err(|_| err(format!("bad node '{}'", rest[0])))?;
                replica.roles.insert(node, rest[1].to_string());
            }
            "fault" => {
                if rest.len() < 2 {
                    return Err(err("fault wants: fault <node> <behavior>".into()));
                }
                let node: usize = rest[0]
                    .parse()
                    .map_err(|_| err(format!("bad node '{}'", rest[0])))?;
                let behavior = match rest[1] {
                    "silent" => FaultBehavior::Silent,
                    "equivocate" => FaultBehavior::Equivocate,
                    "corrupt-digest" => FaultBehavior::CorruptDigest,
                    "forge-auth" => FaultBehavior::ForgeAuth,
                    "delay" => {
                        let t: u64 = rest
                            .get(2)
                            .ok_or_else(|| err("delay fault wants a tick count".into()))?
                            .parse()
                            .map_err(|_| err("bad delay tick count".into()))?;
                        FaultBehavior::Delay(t)
                    }
                    other => return Err(err(format!("unknown fault behavior '{other}'"))),
                };
                faults.push(FaultProfile { node, behavior });
            }
            "droplink" => {
                if rest.len() != 3 {
                    return Err(err("droplink wants: droplink <from> <to> <rate>".into()));
                }
                let a: usize = rest[0].parse().map_err(|_| err("bad node".into()))?;
                let b: usize = rest[1].parse().map_err(|_| err("bad node".into()))?;
                let rate: f64 = rest[2].parse().map_err(|_| err("bad rate".into()))?;
                net.link_drop.insert((a, b), rate);
            }
            "delay" => {
                if rest.len() != 2 {
                    return Err(err("delay wants: delay <min> <max>".into()));
                }
                net.delay_min = rest[0].parse().map_err(|_| err("bad min".into()))?;
                net.delay_max = rest[1].parse().map_err(|_| err("bad max".into()))?;
                if net.delay_max < net.delay_min {
                    return Err(err("delay max below min".into()));
                }
            }
            "partition" => {
                let mut sections = line["partition".len()..].split('|');
                let window = sections.next().unwrap_or("").trim();
                let bounds: Vec<&str> = window.split_whitespace().collect();
                if bounds.len() != 2 {
                    return Err(err(
                        "partition wants: partition <from> <to> | ids | ids".into()
                    ));
                }
                let from_tick: u64 = bounds[0]
                    .parse()
                    .map_err(|_| err("bad partition start".into()))?;
                let to_tick: u64 = bounds[1]
                    .parse()
                    .map_err(|_| err("bad partition end".into()))?;
                let mut groups = Vec::new();
                for section in sections {
                    let mut group = BTreeSet::new();
                    for id in section.split_whitespace() {
                        group.insert(
                            id.parse::<usize>()
                                .map_err(|_| err("bad partition node".into()))?,
                        );
                    }
                    if !group.is_empty() {
                        groups.push(group);
                    }
                }
                if groups.len() < 2 {
                    return Err(err("partition wants at least two groups".into()));
                }
                net.partitions.push(Partition {
                    from_tick,
                    to_tick,
                    groups,
                });
            }
            other => return Err(err(format!("unknown directive '{other}'"))),
        }
    }

    Ok(SimConfig {
        replica,
        net,
        faults,
    })
}

fn parse_one<T: std::str::FromStr>(
    rest: &[&str],
    what: &str,
    err: &impl Fn(String) -> NetParseError,
) -> Result<T, NetParseError> {
    if rest.len() != 1 {
        return Err(err(format!("{what} wants exactly one value")));
    }
    rest[0]
        .parse()
        .map_err(|_| err(format!("bad {what} value '{}'", rest[0])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quorum_arithmetic() {
        for f in 0..4usize {
            for n in 1..14usize {
                let cfg = ReplicaConfig::new(n, f);
                assert_eq!(cfg.validate().is_ok(), n == 3 * f + 1, "n={n} f={f}");
                assert_eq!(cfg.quorum(), 2 * f + 1);
            }
        }
    }

    #[test]
    fn parses_full_config() {
        let text = "\
// remittance topology
n 4
f 1
seed 42
role 0 sender-provider
role 1 recipient-provider
role 2 sender-ledger
role 3 recipient-ledger
fault 2 delay 3
drop 0.25
droplink 1 3 0.5
delay 0 2
partition 10 20 | 0 1 | 2 3
";
        let cfg = parse_net_config(text, "remit.net").unwrap();
        assert_eq!(cfg.replica.n, 4);
        assert_eq!(cfg.replica.f, 1);
        assert_eq!(cfg.replica.roles[&3], "recipient-ledger");
        assert_eq!(cfg.net.seed, 42);
        assert_eq!(
            cfg.faults,
            vec![FaultProfile {
                node: 2,
                behavior: FaultBehavior::Delay(3)
            }]
        );
        assert_eq!(cfg.net.link_drop[&(1, 3)], 0.5);
        assert_eq!((cfg.net.delay_min, cfg.net.delay_max), (0, 2));
        assert_eq!(cfg.net.partitions.len(), 1);
        assert!(cfg.net.partitions[0].blocks(0, 2, 15));
        assert!(!cfg.net.partitions[0].blocks(0, 1, 15));
        assert!(!cfg.net.partitions[0].blocks(0, 2, 25));
    }

    #[test]
    fn rejects_unknown_directives() {
        assert!(parse_net_config("wibble 3", "<t>").is_err());
    }

    #[test]
    fn default_is_degenerate_single_node() {
        let cfg = parse_net_config("", "<t>").unwrap();
        assert_eq!(cfg.replica.n, 1);
        assert_eq!(cfg.replica.f, 0);
        assert!(cfg.replica.validate().is_ok());
    }
}
