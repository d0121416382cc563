//! Event log of a simulation run and the safety audit that replays it.
//!
//! Each event exports as one JSON object per line:
//!
//! ```text
//! {"pulse":4,"kind":"transmit","message":"SEND","from":"r1.0","to":"r2.1","digest":123}
//! ```
//!
//! The schema is meant for debugging and may change.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::{Serialize, Serializer};

use crate::types::{ClusterConfig, ClusterId, DecisionKind, DecisionState, ReplicaId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MessageKind {
    #[serde(rename = "SEND")]
    Send,
    #[serde(rename = "PROOF")]
    Proof,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Transmit {
        message: MessageKind,
    },
    /// Network-made extra copy of a transmission.
    Duplicate {
        message: MessageKind,
    },
    Drop {
        message: MessageKind,
    },
    Deliver {
        message: MessageKind,
    },
    Reject {
        message: MessageKind,
        reason: String,
    },
    CertAccepted {
        cluster: ClusterId,
        honest_signer: bool,
    },
    Consensus {
        cluster: ClusterId,
    },
    Decide {
        decision: DecisionKind,
        peer: ClusterId,
    },
    StepLaunch {
        index: u64,
        deadline: u64,
    },
    StepExpired {
        index: u64,
    },
    Adversary {
        action: String,
    },
    Confirmed {
        cluster: ClusterId,
    },
    /// The simulator caught an inconsistency while running.
    Breach {
        what: String,
    },
}

fn ser_replica<S: Serializer>(r: &Option<ReplicaId>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&r.to_string()),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub pulse: u64,
    #[serde(flatten)]
    pub kind: EventKind,
    #[serde(
        serialize_with = "ser_replica",
        skip_serializing_if = "Option::is_none"
    )]
    pub from: Option<ReplicaId>,
    #[serde(
        serialize_with = "ser_replica",
        skip_serializing_if = "Option::is_none"
    )]
    pub to: Option<ReplicaId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digest: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TrialStats {
    pub cs_steps: u64,
    pub inter_cluster_msgs: u64,
    pub consensus_c1: u64,
    pub consensus_c2: u64,
    pub pulses: u64,
    pub confirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub clusters: [ClusterConfig; 2],
    pub events: Vec<TraceEvent>,
    pub decisions: BTreeMap<ReplicaId, DecisionState>,
    pub stats: TrialStats,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A non-faulty receiver decided receive before every non-faulty sender agreed.
    ReceiveWithoutAgree {
        replica: ReplicaId,
        pulse: u64,
    },
    /// A non-faulty sender confirmed before every non-faulty receiver received.
    ConfirmWithoutReceive {
        replica: ReplicaId,
        pulse: u64,
    },
    /// A decision slot was written twice.
    DecisionChanged {
        replica: ReplicaId,
        decision: DecisionKind,
    },
    /// A certificate was accepted for a payload its cluster never agreed on.
    UnsoundCertificate {
        cluster: ClusterId,
        digest: u64,
        pulse: u64,
    },
    /// A certificate without any non-faulty signer passed verification.
    ForgedCertificate {
        cluster: ClusterId,
        pulse: u64,
    },
    /// Some but not all non-faulty senders confirmed by the end of the run.
    PartialConfirm {
        cluster: ClusterId,
    },
    /// A faulty replica's decision was recorded as a protocol decision.
    FaultyDecision {
        replica: ReplicaId,
    },
    Breach {
        what: String,
        pulse: u64,
    },
}

impl Trace {
    /// Line-delimited JSON export.
    pub fn write_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        for event in &self.events {
            serde_json::to_writer(&mut out, event)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    fn cluster(&self, id: ClusterId) -> Option<&ClusterConfig> {
        self.clusters.iter().find(|c| c.id() == id)
    }

    /// Replays the events and checks every safety property. An empty result
    /// means the run was clean. `eventually_reliable` enables the uniform
    /// confirmation check, which only holds if the network let the run finish.
    pub fn audit(&self, eventually_reliable: bool) -> Vec<Violation> {
        let mut violations = Vec::new();
        // (replica, decision) -> (digest, peer)
        let mut decided: BTreeMap<(ReplicaId, DecisionKind), (Option<u64>, ClusterId)> =
            BTreeMap::new();
        let mut agreed_payloads: BTreeSet<(ClusterId, u64)> = BTreeSet::new();

        let all_hold = |decided: &BTreeMap<(ReplicaId, DecisionKind), (Option<u64>, ClusterId)>,
                        cluster: &ClusterConfig,
                        kind: DecisionKind,
                        digest: Option<u64>,
                        peer: ClusterId| {
            cluster
                .non_faulty()
                .all(|r| decided.get(&(r, kind)) == Some(&(digest, peer)))
        };

        for e in &self.events {
            match &e.kind {
                EventKind::Consensus { cluster } => {
                    if let Some(d) = e.digest {
                        agreed_payloads.insert((*cluster, d));
                    }
                }
                EventKind::CertAccepted {
                    cluster,
                    honest_signer,
                } => {
                    if !honest_signer {
                        violations.push(Violation::ForgedCertificate {
                            cluster: *cluster,
                            pulse: e.pulse,
                        });
                    }
                    let d = e.digest.unwrap_or_default();
                    if !agreed_payloads.contains(&(*cluster, d)) {
                        violations.push(Violation::UnsoundCertificate {
                            cluster: *cluster,
                            digest: d,
                            pulse: e.pulse,
                        });
                    }
                }
                EventKind::Decide { decision, peer } => {
                    let Some(replica) = e.to else { continue };
                    if self
                        .cluster(replica.cluster)
                        .is_some_and(|c| c.is_faulty(replica))
                    {
                        violations.push(Violation::FaultyDecision { replica });
                    }
                    if decided
                        .insert((replica, *decision), (e.digest, *peer))
                        .is_some()
                    {
                        violations.push(Violation::DecisionChanged {
                            replica,
                            decision: *decision,
                        });
                    }
                    let Some(peer_cluster) = self.cluster(*peer) else {
                        continue;
                    };
                    match decision {
                        DecisionKind::Receive => {
                            if !all_hold(
                                &decided,
                                peer_cluster,
                                DecisionKind::Agree,
                                e.digest,
                                replica.cluster,
                            ) {
                                violations.push(Violation::ReceiveWithoutAgree {
                                    replica,
                                    pulse: e.pulse,
                                });
                            }
                        }
                        DecisionKind::Confirm => {
                            if !all_hold(
                                &decided,
                                peer_cluster,
                                DecisionKind::Receive,
                                e.digest,
                                replica.cluster,
                            ) {
                                violations.push(Violation::ConfirmWithoutReceive {
                                    replica,
                                    pulse: e.pulse,
                                });
                            }
                        }
                        DecisionKind::Agree => {}
                    }
                }
                EventKind::Breach { what } => {
                    violations.push(Violation::Breach {
                        what: what.clone(),
                        pulse: e.pulse,
                    });
                }
                _ => {}
            }
        }

        if eventually_reliable {
            for cluster in &self.clusters {
                let confirmed = cluster
                    .non_faulty()
                    .filter(|r| self.decisions.get(r).is_some_and(|d| d.confirmed.is_some()))
                    .count() as u32;
                if confirmed != 0 && confirmed != cluster.nf() {
                    violations.push(Violation::PartialConfirm {
                        cluster: cluster.id(),
                    });
                }
            }
        }
        violations
    }

    pub fn events_of<'a>(
        &'a self,
        pred: impl Fn(&EventKind) -> bool + 'a,
    ) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| pred(&e.kind))
    }
}
