use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::types::ReplicaId;

/// Behaviour of a faulty replica. Non-faulty replicas are never consulted.
///
/// | kind            | instructed to send | receives SEND          | receives PROOF |
/// |-----------------|--------------------|------------------------|----------------|
/// | `Silent`        | withholds          | ignores                | ignores        |
/// | `DropOutbound`  | withholds          | runs consensus, no reply | honest       |
/// | `DropInbound`   | sends              | ignores                | ignores        |
/// | `WorstCase`     | sends              | ignores                | ignores        |
/// | `Randomized`    | coin flip          | random of the above    | coin flip      |
///
/// Only `Randomized` also injects unsolicited messages (replays and forged
/// certificates) into the other cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    Silent,
    DropOutbound,
    DropInbound,
    WorstCase,
    Randomized(u64),
}

impl AdversaryKind {
    pub fn injects(self) -> bool {
        matches!(self, AdversaryKind::Randomized(_))
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryKind::Silent => f.write_str("silent"),
            AdversaryKind::DropOutbound => f.write_str("drop-outbound"),
            AdversaryKind::DropInbound => f.write_str("drop-inbound"),
            AdversaryKind::WorstCase => f.write_str("worst-case"),
            AdversaryKind::Randomized(seed) => write!(f, "randomized:{seed}"),
        }
    }
}

impl FromStr for AdversaryKind {
    type Err = String;

    /// Accepts `silent`, `drop-outbound`, `drop-inbound`, `worst-case`,
    /// `randomized` and `randomized:<seed>` (underscores work too).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase().replace('_', "-");
        let (head, seed) = match lower.split_once(':') {
            Some((h, seed)) => (h.to_string(), Some(seed.to_string())),
            None => (lower, None),
        };
        match (head.as_str(), seed) {
            ("silent", None) => Ok(AdversaryKind::Silent),
            ("drop-outbound", None) => Ok(AdversaryKind::DropOutbound),
            ("drop-inbound", None) => Ok(AdversaryKind::DropInbound),
            ("worst-case" | "worstcase", None) => Ok(AdversaryKind::WorstCase),
            ("randomized" | "random", None) => Ok(AdversaryKind::Randomized(0)),
            ("randomized" | "random", Some(seed)) => seed
                .parse()
                .map(AdversaryKind::Randomized)
                .map_err(|_| format!("bad adversary seed {seed:?}")),
            _ => Err(format!(
                "unknown adversary {s:?} (expected silent, drop-outbound, drop-inbound, worst-case or randomized[:seed])"
            )),
        }
    }
}

/// Cluster-wide default strategy with optional per-replica overrides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryStrategy {
    pub default: AdversaryKind,
    #[serde(default)]
    pub overrides: BTreeMap<ReplicaId, AdversaryKind>,
}

impl AdversaryStrategy {
    pub fn uniform(kind: AdversaryKind) -> Self {
        Self {
            default: kind,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_override(mut self, replica: ReplicaId, kind: AdversaryKind) -> Self {
        self.overrides.insert(replica, kind);
        self
    }

    pub fn kind_of(&self, replica: ReplicaId) -> AdversaryKind {
        self.overrides
            .get(&replica)
            .copied()
            .unwrap_or(self.default)
    }

    pub fn injects(&self) -> bool {
        self.default.injects() || self.overrides.values().any(|k| k.injects())
    }

    /// Seed material contributed by randomized strategies.
    pub(crate) fn seed_material(&self) -> u64 {
        let mut acc = 0u64;
        for kind in std::iter::once(&self.default).chain(self.overrides.values()) {
            if let AdversaryKind::Randomized(seed) = kind {
                acc = acc.rotate_left(17) ^ seed;
            }
        }
        acc
    }
}

impl Default for AdversaryStrategy {
    fn default() -> Self {
        Self::uniform(AdversaryKind::WorstCase)
    }
}

/// What a faulty replica does with an instruction to transmit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum OnInstruct {
    Transmit,
    Withhold,
}

/// What a faulty replica does with an incoming message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum OnReceive {
    Honest,
    Ignore,
    /// Process the message (consensus, decisions) but send nothing back.
    Mute,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ClusterId;

    #[test]
    fn parses_all_kinds() {
        assert_eq!("silent".parse(), Ok(AdversaryKind::Silent));
        assert_eq!("DROP_OUTBOUND".parse(), Ok(AdversaryKind::DropOutbound));
        assert_eq!("drop-inbound".parse(), Ok(AdversaryKind::DropInbound));
        assert_eq!("worst-case".parse(), Ok(AdversaryKind::WorstCase));
        assert_eq!("randomized:9".parse(), Ok(AdversaryKind::Randomized(9)));
        assert!("evil".parse::<AdversaryKind>().is_err());
        for kind in [
            AdversaryKind::Silent,
            AdversaryKind::Randomized(3),
            AdversaryKind::WorstCase,
        ] {
            assert_eq!(kind.to_string().parse(), Ok(kind));
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let r = ReplicaId::new(ClusterId(1), 2);
        let s = AdversaryStrategy::uniform(AdversaryKind::Silent)
            .with_override(r, AdversaryKind::Randomized(1));
        assert_eq!(s.kind_of(r), AdversaryKind::Randomized(1));
        assert_eq!(
            s.kind_of(ReplicaId::new(ClusterId(1), 0)),
            AdversaryKind::Silent
        );
        assert!(s.injects());
        assert!(!AdversaryStrategy::default().injects());
    }
}
