use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adversary::{AdversaryKind, AdversaryStrategy, OnInstruct, OnReceive};
use super::coin::{derive_seed, SharedCoin, ADVERSARY_STREAM, NETWORK_STREAM};
use super::network::{NetworkConfig, NetworkMode};
use super::trace::{EventKind, MessageKind, Trace, TraceEvent, TrialStats};
use crate::types::{
    certify, digest, send_payload, verify_certificate, Certificate, ClusterConfig, ClusterId,
    ConfigError, DecisionKind, DecisionState, LocalConsensus, ProofMessage, ProtocolMessage,
    ReplicaId, SendMessage, Value,
};

/// Per-pulse probability that a faulty replica under a randomized strategy
/// injects an unsolicited message.
const INJECTION_RATE: f64 = 0.1;
/// Replay pool size for injected messages.
const REPLAY_POOL: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub network: NetworkConfig,
    pub adversary: AdversaryStrategy,
    pub seed: u64,
    /// Hard stop for drivers that would otherwise wait forever.
    pub max_pulses: u64,
}

impl SimConfig {
    pub const DEFAULT_MAX_PULSES: u64 = 100_000;

    pub fn new(network: NetworkConfig, adversary: AdversaryStrategy, seed: u64) -> Self {
        Self {
            network,
            adversary,
            seed,
            max_pulses: Self::DEFAULT_MAX_PULSES,
        }
    }

    pub fn sync(adversary: AdversaryKind, seed: u64) -> Self {
        Self::new(
            NetworkConfig::sync(),
            AdversaryStrategy::uniform(adversary),
            seed,
        )
    }
}

#[derive(Debug, Clone)]
struct Envelope {
    from: ReplicaId,
    to: ReplicaId,
    msg: ProtocolMessage,
}

fn message_kind(msg: &ProtocolMessage) -> MessageKind {
    match msg {
        ProtocolMessage::Send(_) => MessageKind::Send,
        ProtocolMessage::Proof(_) => MessageKind::Proof,
    }
}

/// One run of two clusters exchanging messages in pulses.
///
/// A pulse has three phases: messages due this pulse are handled, replicas
/// act on instructions issued by the protocol driver, and faulty replicas may
/// inject messages. Anything transmitted in pulse `p` with network delay `d`
/// is handled in pulse `p + d + 1`, so a cs-step started in pulse `p` has its
/// SEND handled in `p + 1`, its PROOF handled in `p + 2`, and the initiating
/// cluster can observe the result at the start of `p + 3`.
#[derive(Debug, Clone)]
pub struct Simulation {
    clusters: [ClusterConfig; 2],
    consensus: [LocalConsensus; 2],
    decisions: BTreeMap<ReplicaId, DecisionState>,
    coins: [SharedCoin; 2],
    network: NetworkConfig,
    adversary: AdversaryStrategy,
    net_rng: ChaCha8Rng,
    adv_rng: ChaCha8Rng,
    pulse: u64,
    max_pulses: u64,
    in_flight: BTreeMap<u64, Vec<Envelope>>,
    instructions: Vec<Envelope>,
    replay_pool: VecDeque<ProtocolMessage>,
    events: Vec<TraceEvent>,
    inter_cluster_msgs: u64,
    cs_steps: u64,
    forged: u64,
}

impl Simulation {
    pub fn new(
        c1: ClusterConfig,
        c2: ClusterConfig,
        config: SimConfig,
    ) -> Result<Self, ConfigError> {
        if c1.id() == c2.id() {
            return Err(ConfigError::DuplicateCluster(c1.id()));
        }
        let network = config.network.normalized()?;
        let adv_seed = derive_seed(
            config.seed ^ config.adversary.seed_material(),
            ADVERSARY_STREAM,
        );
        Ok(Self {
            consensus: [LocalConsensus::new(c1.id()), LocalConsensus::new(c2.id())],
            decisions: c1
                .list()
                .into_iter()
                .chain(c2.list())
                .map(|r| (r, DecisionState::default()))
                .collect(),
            coins: [
                SharedCoin::new(config.seed, c1.id()),
                SharedCoin::new(config.seed, c2.id()),
            ],
            clusters: [c1, c2],
            network,
            adversary: config.adversary,
            net_rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, NETWORK_STREAM)),
            adv_rng: ChaCha8Rng::seed_from_u64(adv_seed),
            pulse: 0,
            max_pulses: config.max_pulses,
            in_flight: BTreeMap::new(),
            instructions: Vec::new(),
            replay_pool: VecDeque::new(),
            events: Vec::new(),
            inter_cluster_msgs: 0,
            cs_steps: 0,
            forged: 0,
        })
    }

    fn slot(&self, id: ClusterId) -> Result<usize, ConfigError> {
        self.clusters
            .iter()
            .position(|c| c.id() == id)
            .ok_or(ConfigError::UnknownCluster(id))
    }

    pub fn cluster(&self, id: ClusterId) -> Result<&ClusterConfig, ConfigError> {
        Ok(&self.clusters[self.slot(id)?])
    }

    pub fn clusters(&self) -> &[ClusterConfig; 2] {
        &self.clusters
    }

    pub fn network(&self) -> &NetworkConfig {
        &self.network
    }

    pub fn adversary(&self) -> &AdversaryStrategy {
        &self.adversary
    }

    pub fn pulse(&self) -> u64 {
        self.pulse
    }

    pub fn max_pulses(&self) -> u64 {
        self.max_pulses
    }

    pub fn coin(&mut self, id: ClusterId) -> Result<&mut SharedCoin, ConfigError> {
        let i = self.slot(id)?;
        Ok(&mut self.coins[i])
    }

    pub fn is_faulty(&self, r: ReplicaId) -> bool {
        self.clusters.iter().any(|c| c.is_faulty(r))
    }

    pub fn decisions(&self, r: ReplicaId) -> Option<&DecisionState> {
        self.decisions.get(&r)
    }

    pub fn consensus_steps(&self, id: ClusterId) -> Result<u64, ConfigError> {
        Ok(self.consensus[self.slot(id)?].steps())
    }

    pub fn inter_cluster_msgs(&self) -> u64 {
        self.inter_cluster_msgs
    }

    pub fn cs_steps(&self) -> u64 {
        self.cs_steps
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    /// Number of forged certificates faulty replicas tried to pass off.
    pub fn forged_attempts(&self) -> u64 {
        self.forged
    }

    fn log(
        &mut self,
        kind: EventKind,
        from: Option<ReplicaId>,
        to: Option<ReplicaId>,
        digest: Option<u64>,
    ) {
        self.events.push(TraceEvent {
            pulse: self.pulse,
            kind,
            from,
            to,
            digest,
        });
    }

    /// Records that the step with `index` missed its deadline.
    pub fn note_step_expired(&mut self, index: u64, r1: ReplicaId, r2: ReplicaId) {
        self.log(EventKind::StepExpired { index }, Some(r1), Some(r2), None);
    }

    /// Runs local consensus in cluster `slot` and installs `decision` at
    /// every non-faulty member when the payload is fresh.
    fn consensus_and_decide(
        &mut self,
        slot: usize,
        payload: &[u8],
        decision: DecisionKind,
        value: &Value,
        peer: ClusterId,
    ) -> Certificate {
        let cluster = self.clusters[slot].clone();
        let outcome = self.consensus[slot].local_consensus(&cluster, payload);
        if outcome.fresh {
            let d = digest(payload);
            self.log(
                EventKind::Consensus {
                    cluster: cluster.id(),
                },
                None,
                None,
                Some(d),
            );
            let vd = digest(&value.0);
            for r in cluster.non_faulty() {
                let state = self.decisions.entry(r).or_default();
                match state.decide(r, decision, value) {
                    Ok(true) => self.log(
                        EventKind::Decide { decision, peer },
                        None,
                        Some(r),
                        Some(vd),
                    ),
                    Ok(false) => {}
                    Err(conflict) => self.log(
                        EventKind::Breach {
                            what: conflict.to_string(),
                        },
                        None,
                        Some(r),
                        Some(vd),
                    ),
                }
            }
            if decision == DecisionKind::Confirm {
                self.log(
                    EventKind::Confirmed {
                        cluster: cluster.id(),
                    },
                    None,
                    None,
                    Some(vd),
                );
            }
        }
        outcome.certificate
    }

    /// `from`'s cluster reaches consensus on sending `value` to `target`; all
    /// of its non-faulty replicas decide agree. Returns the certified SEND.
    pub fn agree(
        &mut self,
        from: ClusterId,
        target: ClusterId,
        value: &Value,
    ) -> Result<SendMessage, ConfigError> {
        let slot = self.slot(from)?;
        self.slot(target)?;
        if from == target {
            let r = self.clusters[slot].replica(0);
            return Err(ConfigError::SameCluster { from: r, to: r });
        }
        let payload = send_payload(value, target);
        let cert = self.consensus_and_decide(slot, &payload, DecisionKind::Agree, value, target);
        Ok(SendMessage {
            value: value.clone(),
            target,
            cert,
        })
    }

    /// True once the source cluster of `m` has consensus on `<proof, m>`.
    pub fn has_confirmed(&self, m: &SendMessage) -> bool {
        self.slot(m.source())
            .map(|i| self.consensus[i].has_consensus(&m.proof_payload()))
            .unwrap_or(false)
    }

    /// Every non-faulty member of `cluster` decided agree on some value.
    pub fn all_agreed(&self, cluster: ClusterId, value: &Value) -> bool {
        self.cluster(cluster).is_ok_and(|c| {
            c.non_faulty()
                .all(|r| self.decisions.get(&r).and_then(|d| d.agreed.as_ref()) == Some(value))
        })
    }

    /// Starts a cs-step: `r1` is told to send `m` to `r2` in the action
    /// phase of the current pulse.
    pub fn instruct(
        &mut self,
        r1: ReplicaId,
        r2: ReplicaId,
        m: &SendMessage,
        index: u64,
        deadline: u64,
    ) -> Result<(), ConfigError> {
        if r1.cluster == r2.cluster {
            return Err(ConfigError::SameCluster { from: r1, to: r2 });
        }
        if !self.cluster(r1.cluster)?.contains(r1) {
            return Err(ConfigError::IndexOutOfRange {
                cluster: r1.cluster,
                index: r1.index,
                n: self.cluster(r1.cluster)?.n(),
            });
        }
        if !self.cluster(r2.cluster)?.contains(r2) {
            return Err(ConfigError::IndexOutOfRange {
                cluster: r2.cluster,
                index: r2.index,
                n: self.cluster(r2.cluster)?.n(),
            });
        }
        self.cs_steps += 1;
        self.log(
            EventKind::StepLaunch { index, deadline },
            Some(r1),
            Some(r2),
            Some(m.cert.digest()),
        );
        self.instructions.push(Envelope {
            from: r1,
            to: r2,
            msg: ProtocolMessage::Send(m.clone()),
        });
        Ok(())
    }

    /// Hands `msg` to the network. Counts as one inter-cluster message.
    pub fn send_inter_cluster(
        &mut self,
        from: ReplicaId,
        to: ReplicaId,
        msg: ProtocolMessage,
    ) -> Result<(), ConfigError> {
        if from.cluster == to.cluster {
            return Err(ConfigError::SameCluster { from, to });
        }
        self.inter_cluster_msgs += 1;
        let kind = message_kind(&msg);
        let d = msg.digest();
        self.log(
            EventKind::Transmit { message: kind },
            Some(from),
            Some(to),
            Some(d),
        );
        if self.replay_pool.len() == REPLAY_POOL {
            self.replay_pool.pop_front();
        }
        self.replay_pool.push_back(msg.clone());

        if self.network.mode == NetworkMode::Sync {
            self.enqueue(self.pulse + 1, Envelope { from, to, msg });
            return Ok(());
        }
        let drop_prob = self.network.drop_prob_at(self.pulse);
        if drop_prob > 0.0 && self.net_rng.random_bool(drop_prob) {
            self.log(
                EventKind::Drop { message: kind },
                Some(from),
                Some(to),
                Some(d),
            );
            return Ok(());
        }
        let delay = self.sample_delay();
        let copy = (self.network.dup_prob > 0.0 && self.net_rng.random_bool(self.network.dup_prob))
            .then(|| self.sample_delay());
        self.enqueue(
            self.pulse + delay + 1,
            Envelope {
                from,
                to,
                msg: msg.clone(),
            },
        );
        if let Some(extra) = copy {
            self.log(
                EventKind::Duplicate { message: kind },
                Some(from),
                Some(to),
                Some(d),
            );
            self.enqueue(self.pulse + extra + 1, Envelope { from, to, msg });
        }
        Ok(())
    }

    fn sample_delay(&mut self) -> u64 {
        let dist = self.network.delay;
        if dist.min == dist.max {
            dist.min
        } else {
            self.net_rng.random_range(dist.min..=dist.max)
        }
    }

    fn enqueue(&mut self, at: u64, env: Envelope) {
        self.in_flight.entry(at).or_default().push(env);
    }

    /// No messages in flight and no pending instructions.
    pub fn is_idle(&self) -> bool {
        self.in_flight.is_empty() && self.instructions.is_empty()
    }

    /// Jumps the clock to `pulse` when nothing can happen in between.
    /// Returns false (and does nothing) if the jump would skip activity.
    pub fn fast_forward(&mut self, pulse: u64) -> bool {
        if pulse <= self.pulse {
            return true;
        }
        if !self.is_idle() || self.adversary.injects() {
            return false;
        }
        self.pulse = pulse;
        true
    }

    /// Runs one pulse and returns the new pulse number.
    pub fn advance_pulse(&mut self) -> u64 {
        if let Some(due) = self.in_flight.remove(&self.pulse) {
            for env in due {
                self.handle(env);
            }
        }
        for env in std::mem::take(&mut self.instructions) {
            let act = if self.is_faulty(env.from) {
                self.on_instruct(env.from)
            } else {
                OnInstruct::Transmit
            };
            match act {
                OnInstruct::Transmit => {
                    self.send_inter_cluster(env.from, env.to, env.msg)
                        .expect("instructions are validated");
                }
                OnInstruct::Withhold => {
                    let d = env.msg.digest();
                    self.log(
                        EventKind::Adversary {
                            action: "withhold".into(),
                        },
                        Some(env.from),
                        Some(env.to),
                        Some(d),
                    );
                }
            }
        }
        if self.adversary.injects() {
            self.inject();
        }
        self.pulse += 1;
        self.pulse
    }

    fn on_instruct(&mut self, r: ReplicaId) -> OnInstruct {
        match self.adversary.kind_of(r) {
            AdversaryKind::Silent | AdversaryKind::DropOutbound => OnInstruct::Withhold,
            AdversaryKind::DropInbound | AdversaryKind::WorstCase => OnInstruct::Transmit,
            AdversaryKind::Randomized(_) => {
                if self.adv_rng.random_bool(0.5) {
                    OnInstruct::Transmit
                } else {
                    OnInstruct::Withhold
                }
            }
        }
    }

    fn on_receive(&mut self, r: ReplicaId, msg: &ProtocolMessage) -> OnReceive {
        let kind = self.adversary.kind_of(r);
        match (kind, msg) {
            (AdversaryKind::DropOutbound, ProtocolMessage::Send(_)) => OnReceive::Mute,
            (AdversaryKind::DropOutbound, ProtocolMessage::Proof(_)) => OnReceive::Honest,
            (AdversaryKind::Randomized(_), ProtocolMessage::Send(_)) => {
                [OnReceive::Honest, OnReceive::Ignore, OnReceive::Mute]
                    [self.adv_rng.random_range(0..3)]
            }
            (AdversaryKind::Randomized(_), ProtocolMessage::Proof(_)) => {
                if self.adv_rng.random_bool(0.5) {
                    OnReceive::Honest
                } else {
                    OnReceive::Ignore
                }
            }
            _ => OnReceive::Ignore,
        }
    }

    /// Verifies `cert` against its claimed cluster and logs acceptance.
    fn accept_cert(&mut self, cert: &Certificate, to: ReplicaId) -> bool {
        let Ok(cluster) = self.cluster(cert.cluster) else {
            return false;
        };
        if !verify_certificate(cluster, cert) {
            return false;
        }
        let honest_signer = cert.signers.iter().any(|s| !cluster.is_faulty(*s));
        self.log(
            EventKind::CertAccepted {
                cluster: cert.cluster,
                honest_signer,
            },
            None,
            Some(to),
            Some(cert.digest()),
        );
        true
    }

    fn reject(&mut self, env: &Envelope, reason: &str) {
        let kind = message_kind(&env.msg);
        self.log(
            EventKind::Reject {
                message: kind,
                reason: reason.to_string(),
            },
            Some(env.from),
            Some(env.to),
            Some(env.msg.digest()),
        );
    }

    fn handle(&mut self, env: Envelope) {
        let kind = message_kind(&env.msg);
        self.log(
            EventKind::Deliver { message: kind },
            Some(env.from),
            Some(env.to),
            Some(env.msg.digest()),
        );
        let mode = if self.is_faulty(env.to) {
            let mode = self.on_receive(env.to, &env.msg);
            if mode != OnReceive::Honest {
                let action = if mode == OnReceive::Ignore {
                    "ignore"
                } else {
                    "mute"
                };
                self.log(
                    EventKind::Adversary {
                        action: action.into(),
                    },
                    Some(env.from),
                    Some(env.to),
                    Some(env.msg.digest()),
                );
            }
            mode
        } else {
            OnReceive::Honest
        };
        if mode == OnReceive::Ignore {
            return;
        }
        match &env.msg {
            ProtocolMessage::Send(m) => self.handle_send(&env, m, mode == OnReceive::Honest),
            ProtocolMessage::Proof(p) => self.handle_proof(&env, p),
        }
    }

    fn handle_send(&mut self, env: &Envelope, m: &SendMessage, reply: bool) {
        let here = env.to.cluster;
        if m.target != here || m.source() == here || !m.is_well_formed() {
            return self.reject(env, "malformed send");
        }
        if !self.accept_cert(&m.cert, env.to) {
            return self.reject(env, "invalid certificate");
        }
        let slot = self.slot(here).expect("receiver cluster exists");
        let cert = self.consensus_and_decide(
            slot,
            &m.proof_payload(),
            DecisionKind::Receive,
            &m.value,
            m.source(),
        );
        if reply {
            let proof = ProofMessage {
                inner: m.clone(),
                cert,
            };
            self.send_inter_cluster(env.to, env.from, ProtocolMessage::Proof(proof))
                .expect("reply crosses clusters");
        }
    }

    fn handle_proof(&mut self, env: &Envelope, p: &ProofMessage) {
        let here = env.to.cluster;
        let m = &p.inner;
        let consistent = p.is_well_formed()
            && m.is_well_formed()
            && m.source() == here
            && p.cert.cluster == m.target
            && m.target != here;
        if !consistent {
            return self.reject(env, "malformed proof");
        }
        if !self.accept_cert(&m.cert, env.to) || !self.accept_cert(&p.cert, env.to) {
            return self.reject(env, "invalid certificate");
        }
        let slot = self.slot(here).expect("sender cluster exists");
        self.consensus_and_decide(
            slot,
            &m.proof_payload(),
            DecisionKind::Confirm,
            &m.value,
            m.target,
        );
    }

    /// Randomized faulty replicas replay old traffic or try forged
    /// certificates signed only by faulty members. Both are harmless: replays
    /// carry valid certificates for payloads already agreed on, and forgeries
    /// fail verification.
    fn inject(&mut self) {
        let faulty: Vec<ReplicaId> = self
            .clusters
            .iter()
            .flat_map(|c| c.faulty().iter().copied())
            .filter(|r| self.adversary.kind_of(*r).injects())
            .collect();
        for r in faulty {
            if !self.adv_rng.random_bool(INJECTION_RATE) {
                continue;
            }
            let (own, other) = if self.clusters[0].id() == r.cluster {
                (0, 1)
            } else {
                (1, 0)
            };
            let victim = self.clusters[other]
                .replica(self.adv_rng.random_range(0..self.clusters[other].n()));
            let replay = !self.replay_pool.is_empty() && self.adv_rng.random_bool(0.5);
            let msg = if replay {
                let i = self.adv_rng.random_range(0..self.replay_pool.len());
                self.log(
                    EventKind::Adversary {
                        action: "replay".into(),
                    },
                    Some(r),
                    Some(victim),
                    None,
                );
                self.replay_pool[i].clone()
            } else {
                self.forged += 1;
                let own_cluster = self.clusters[own].clone();
                let value = Value(format!("forged-{}", self.forged).into_bytes());
                let payload = send_payload(&value, victim.cluster);
                let cert = certify(&own_cluster, &payload, own_cluster.faulty().iter().copied())
                    .expect("faulty members belong to their cluster");
                let send = SendMessage {
                    value,
                    target: victim.cluster,
                    cert,
                };
                self.log(
                    EventKind::Adversary {
                        action: "forge".into(),
                    },
                    Some(r),
                    Some(victim),
                    Some(send.cert.digest()),
                );
                ProtocolMessage::Send(send)
            };
            self.send_inter_cluster(r, victim, msg)
                .expect("victim is in the other cluster");
        }
    }

    pub fn stats(&self) -> TrialStats {
        TrialStats {
            cs_steps: self.cs_steps,
            inter_cluster_msgs: self.inter_cluster_msgs,
            consensus_c1: self.consensus[0].steps(),
            consensus_c2: self.consensus[1].steps(),
            pulses: self.pulse,
            confirmed: false,
        }
    }

    /// Finishes the run. `confirmed` is the protocol's own verdict.
    pub fn into_trace(self, confirmed: bool) -> Trace {
        let mut stats = self.stats();
        stats.confirmed = confirmed;
        Trace {
            clusters: self.clusters,
            events: self.events,
            decisions: self.decisions,
            stats,
        }
    }

    pub fn trace(&self, confirmed: bool) -> Trace {
        self.clone().into_trace(confirmed)
    }
}
