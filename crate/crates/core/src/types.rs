//! Replicas, clusters, certificates, wire messages and per-replica decisions.
//!
//! Certificates are modelled as signer sets rather than cryptographic objects.
//! A certificate is valid for a cluster when at least `f + 1` distinct members
//! of that cluster signed it, which guarantees at least one non-faulty signer.
//! Non-faulty replicas only ever sign payloads on which their cluster reached
//! local consensus (see [`LocalConsensus`]), so validity implies agreement.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cluster {cluster} must satisfy n > 2f (n = {n}, f = {f})")]
    TooManyFaulty { cluster: ClusterId, n: u32, f: u32 },
    #[error("cluster {0} has no replicas")]
    EmptyCluster(ClusterId),
    #[error("replica index {index} out of range for cluster {cluster} with n = {n}")]
    IndexOutOfRange {
        cluster: ClusterId,
        index: u32,
        n: u32,
    },
    #[error("signer {signer} is not a member of cluster {cluster}")]
    SignerOutsideCluster {
        signer: ReplicaId,
        cluster: ClusterId,
    },
    #[error("inter-cluster send from {from} to {to} stays inside one cluster")]
    SameCluster { from: ReplicaId, to: ReplicaId },
    #[error("unknown cluster {0}")]
    UnknownCluster(ClusterId),
    #[error("clusters must be disjoint, {0} appears twice")]
    DuplicateCluster(ClusterId),
    #[error("invalid network configuration: {0}")]
    Network(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClusterId(pub u32);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

/// A replica, ordered by `(cluster, index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReplicaId {
    pub cluster: ClusterId,
    pub index: u32,
}

impl ReplicaId {
    pub fn new(cluster: ClusterId, index: u32) -> Self {
        Self { cluster, index }
    }
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}.{}", self.cluster.0, self.index)
    }
}

/// A cluster of `n` replicas with its designated faulty subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterConfig {
    id: ClusterId,
    n: u32,
    faulty: BTreeSet<ReplicaId>,
}

impl ClusterConfig {
    /// Builds a cluster whose faulty replicas are given by index.
    pub fn new(
        id: ClusterId,
        n: u32,
        faulty: impl IntoIterator<Item = u32>,
    ) -> Result<Self, ConfigError> {
        if n == 0 {
            return Err(ConfigError::EmptyCluster(id));
        }
        let mut set = BTreeSet::new();
        for index in faulty {
            if index >= n {
                return Err(ConfigError::IndexOutOfRange {
                    cluster: id,
                    index,
                    n,
                });
            }
            set.insert(ReplicaId::new(id, index));
        }
        let f = set.len() as u32;
        if n <= 2 * f {
            return Err(ConfigError::TooManyFaulty { cluster: id, n, f });
        }
        Ok(Self { id, n, faulty: set })
    }

    /// Cluster whose first `f` replicas (in list order) are faulty.
    pub fn with_leading_faulty(id: ClusterId, n: u32, f: u32) -> Result<Self, ConfigError> {
        Self::new(id, n, 0..f.min(n))
    }

    pub fn id(&self) -> ClusterId {
        self.id
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn f(&self) -> u32 {
        self.faulty.len() as u32
    }

    pub fn nf(&self) -> u32 {
        self.n - self.f()
    }

    pub fn replica(&self, index: u32) -> ReplicaId {
        debug_assert!(index < self.n);
        ReplicaId::new(self.id, index)
    }

    pub fn contains(&self, r: ReplicaId) -> bool {
        r.cluster == self.id && r.index < self.n
    }

    pub fn is_faulty(&self, r: ReplicaId) -> bool {
        self.faulty.contains(&r)
    }

    pub fn faulty(&self) -> &BTreeSet<ReplicaId> {
        &self.faulty
    }

    /// `List(C)`: every replica in its predetermined order.
    pub fn list(&self) -> Vec<ReplicaId> {
        (0..self.n).map(|i| self.replica(i)).collect()
    }

    pub fn non_faulty(&self) -> impl Iterator<Item = ReplicaId> + '_ {
        (0..self.n)
            .map(|i| self.replica(i))
            .filter(|r| !self.is_faulty(*r))
    }
}

/// Opaque value; the protocols never look inside.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Value(pub Vec<u8>);

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value(s.as_bytes().to_vec())
    }
}

impl From<Vec<u8>> for Value {
    fn from(bytes: Vec<u8>) -> Self {
        Value(bytes)
    }
}

/// 64-bit prefix of the SHA-256 of `bytes`, used to identify payloads in traces.
pub fn digest(bytes: &[u8]) -> u64 {
    let hash = Sha256::digest(bytes);
    let mut prefix = [0u8; 8];
    prefix.copy_from_slice(&hash[..8]);
    u64::from_be_bytes(prefix)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub payload: Vec<u8>,
    pub cluster: ClusterId,
    pub signers: BTreeSet<ReplicaId>,
}

impl Certificate {
    pub fn digest(&self) -> u64 {
        digest(&self.payload)
    }
}

/// Assembles a certificate. Validity is decided by [`verify_certificate`].
pub fn certify(
    cluster: &ClusterConfig,
    payload: &[u8],
    signers: impl IntoIterator<Item = ReplicaId>,
) -> Result<Certificate, ConfigError> {
    let mut set = BTreeSet::new();
    for signer in signers {
        if !cluster.contains(signer) {
            return Err(ConfigError::SignerOutsideCluster {
                signer,
                cluster: cluster.id(),
            });
        }
        set.insert(signer);
    }
    Ok(Certificate {
        payload: payload.to_vec(),
        cluster: cluster.id(),
        signers: set,
    })
}

pub fn verify_certificate(cluster: &ClusterConfig, cert: &Certificate) -> bool {
    cert.cluster == cluster.id()
        && cert.signers.iter().all(|s| cluster.contains(*s))
        && cert.signers.len() as u32 > cluster.f()
}

/// Canonical payload of `<send, v, target>`.
pub fn send_payload(value: &Value, target: ClusterId) -> Vec<u8> {
    let mut out = Vec::with_capacity(value.0.len() + 16);
    out.extend_from_slice(b"send");
    out.extend_from_slice(&target.0.to_be_bytes());
    out.extend_from_slice(&(value.0.len() as u64).to_be_bytes());
    out.extend_from_slice(&value.0);
    out
}

/// `<send, v, C2>_{C1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SendMessage {
    pub value: Value,
    pub target: ClusterId,
    pub cert: Certificate,
}

impl SendMessage {
    pub fn source(&self) -> ClusterId {
        self.cert.cluster
    }

    /// Byte encoding of the complete message, certificate included.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = send_payload(&self.value, self.target);
        out.extend_from_slice(&self.cert.cluster.0.to_be_bytes());
        out.extend_from_slice(&(self.cert.signers.len() as u32).to_be_bytes());
        for s in &self.cert.signers {
            out.extend_from_slice(&s.cluster.0.to_be_bytes());
            out.extend_from_slice(&s.index.to_be_bytes());
        }
        out
    }

    pub fn is_well_formed(&self) -> bool {
        self.cert.payload == send_payload(&self.value, self.target)
    }

    /// Payload the receiving cluster certifies as proof of receipt.
    pub fn proof_payload(&self) -> Vec<u8> {
        let mut out = b"proof".to_vec();
        out.extend_from_slice(&self.encode());
        out
    }
}

/// `<proof, m>_{C2}` for a complete SEND message `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofMessage {
    pub inner: SendMessage,
    pub cert: Certificate,
}

impl ProofMessage {
    pub fn is_well_formed(&self) -> bool {
        self.cert.payload == self.inner.proof_payload()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolMessage {
    Send(SendMessage),
    Proof(ProofMessage),
}

impl ProtocolMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ProtocolMessage::Send(_) => "SEND",
            ProtocolMessage::Proof(_) => "PROOF",
        }
    }

    pub fn cert(&self) -> &Certificate {
        match self {
            ProtocolMessage::Send(m) => &m.cert,
            ProtocolMessage::Proof(m) => &m.cert,
        }
    }

    pub fn value(&self) -> &Value {
        match self {
            ProtocolMessage::Send(m) => &m.value,
            ProtocolMessage::Proof(m) => &m.inner.value,
        }
    }

    pub fn digest(&self) -> u64 {
        self.cert().digest()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DecisionKind {
    Agree,
    Receive,
    Confirm,
}

impl DecisionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionKind::Agree => "agree",
            DecisionKind::Receive => "receive",
            DecisionKind::Confirm => "confirm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("replica {replica} already decided {kind:?} on a different value")]
pub struct DecisionConflict {
    pub replica: ReplicaId,
    pub kind: DecisionKind,
}

/// Set-once decision slots of one replica.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionState {
    pub agreed: Option<Value>,
    pub received: Option<Value>,
    pub confirmed: Option<Value>,
}

impl DecisionState {
    pub fn get(&self, kind: DecisionKind) -> Option<&Value> {
        match kind {
            DecisionKind::Agree => self.agreed.as_ref(),
            DecisionKind::Receive => self.received.as_ref(),
            DecisionKind::Confirm => self.confirmed.as_ref(),
        }
    }

    /// Returns `Ok(true)` if the slot was empty and is now set.
    pub fn decide(
        &mut self,
        replica: ReplicaId,
        kind: DecisionKind,
        value: &Value,
    ) -> Result<bool, DecisionConflict> {
        let slot = match kind {
            DecisionKind::Agree => &mut self.agreed,
            DecisionKind::Receive => &mut self.received,
            DecisionKind::Confirm => &mut self.confirmed,
        };
        match slot {
            None => {
                *slot = Some(value.clone());
                Ok(true)
            }
            Some(existing) if existing == value => Ok(false),
            Some(_) => Err(DecisionConflict { replica, kind }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConsensusOutcome {
    pub certificate: Certificate,
    /// False when the cluster already had consensus on the payload.
    pub fresh: bool,
}

/// Atomic local consensus of one cluster.
///
/// Each fresh payload costs one consensus step and yields a certificate
/// signed by every non-faulty member. Re-proposing a payload the cluster
/// already agreed on is free and returns the existing certificate.
#[derive(Debug, Clone)]
pub struct LocalConsensus {
    cluster: ClusterId,
    decided: BTreeMap<Vec<u8>, Certificate>,
    steps: u64,
}

impl LocalConsensus {
    pub fn new(cluster: ClusterId) -> Self {
        Self {
            cluster,
            decided: BTreeMap::new(),
            steps: 0,
        }
    }

    pub fn local_consensus(&mut self, cluster: &ClusterConfig, payload: &[u8]) -> ConsensusOutcome {
        debug_assert_eq!(cluster.id(), self.cluster);
        if let Some(cert) = self.decided.get(payload) {
            return ConsensusOutcome {
                certificate: cert.clone(),
                fresh: false,
            };
        }
        let cert = Certificate {
            payload: payload.to_vec(),
            cluster: cluster.id(),
            signers: cluster.non_faulty().collect(),
        };
        self.decided.insert(payload.to_vec(), cert.clone());
        self.steps += 1;
        ConsensusOutcome {
            certificate: cert,
            fresh: true,
        }
    }

    pub fn has_consensus(&self, payload: &[u8]) -> bool {
        self.decided.contains_key(payload)
    }

    pub fn certificate(&self, payload: &[u8]) -> Option<&Certificate> {
        self.decided.get(payload)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}
