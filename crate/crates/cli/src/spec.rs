use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use clap::Args;
use clustersend_core::protocols::{AsyncParams, ProtocolKind};
use clustersend_core::simnet::{
    AdversaryKind, AdversaryStrategy, DelayDist, NetworkConfig, NetworkMode, SimConfig,
};
use clustersend_core::{ClusterConfig, ClusterId};
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

/// Run parameters as they arrive from flags or a TOML file. Every field is
/// optional so a file can be layered under the command line.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecArgs {
    /// pcs, ppcs, plcs-min or plcs-max.
    #[arg(long)]
    #[serde(default, deserialize_with = "parsed")]
    pub protocol: Option<ProtocolKind>,
    #[arg(long)]
    pub n1: Option<u32>,
    #[arg(long)]
    pub f1: Option<u32>,
    #[arg(long)]
    pub n2: Option<u32>,
    #[arg(long)]
    pub f2: Option<u32>,
    /// Size of both clusters, unless --n1 or --n2 say otherwise.
    #[arg(long)]
    pub n: Option<u32>,
    /// Faulty replicas in both clusters, unless --f1 or --f2 say otherwise.
    #[arg(long)]
    pub f: Option<u32>,
    /// sync or async.
    #[arg(long)]
    #[serde(default, deserialize_with = "parsed")]
    pub network: Option<NetworkMode>,
    #[arg(long)]
    pub drop: Option<f64>,
    #[arg(long)]
    pub dup: Option<f64>,
    #[arg(long)]
    pub delay_max: Option<u64>,
    /// Drop everything during the first this many pulses.
    #[arg(long)]
    pub outage: Option<u64>,
    /// silent, drop-outbound, drop-inbound, worst-case or randomized[:seed].
    #[arg(long)]
    #[serde(default, deserialize_with = "parsed")]
    pub adversary: Option<AdversaryKind>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub delta: Option<u64>,
    #[arg(long)]
    pub parallel_rounds: Option<u32>,
    #[arg(long)]
    pub max_iters: Option<u64>,
    #[arg(long)]
    pub max_pulses: Option<u64>,
}

fn parsed<'de, D, T>(d: D) -> Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: Display,
{
    Option::<String>::deserialize(d)?
        .map(|s| s.parse().map_err(serde::de::Error::custom))
        .transpose()
}

impl SpecArgs {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fields set in `top` win over fields set in `self`.
    pub fn overlay(self, top: SpecArgs) -> SpecArgs {
        SpecArgs {
            protocol: top.protocol.or(self.protocol),
            n1: top.n1.or(self.n1),
            f1: top.f1.or(self.f1),
            n2: top.n2.or(self.n2),
            f2: top.f2.or(self.f2),
            n: top.n.or(self.n),
            f: top.f.or(self.f),
            network: top.network.or(self.network),
            drop: top.drop.or(self.drop),
            dup: top.dup.or(self.dup),
            delay_max: top.delay_max.or(self.delay_max),
            outage: top.outage.or(self.outage),
            adversary: top.adversary.or(self.adversary),
            trials: top.trials.or(self.trials),
            seed: top.seed.or(self.seed),
            delta: top.delta.or(self.delta),
            parallel_rounds: top.parallel_rounds.or(self.parallel_rounds),
            max_iters: top.max_iters.or(self.max_iters),
            max_pulses: top.max_pulses.or(self.max_pulses),
        }
    }

    /// Fills defaults and validates. Cluster sizes are the only required input.
    pub fn resolve(&self) -> Result<RunSpec, CliError> {
        let missing = |what: &str| CliError::Usage(format!("missing --{what} (or --n)"));
        let n1 = self.n1.or(self.n).ok_or_else(|| missing("n1"))?;
        let n2 = self.n2.or(self.n).ok_or_else(|| missing("n2"))?;
        let f1 = self.f1.or(self.f).unwrap_or(0);
        let f2 = self.f2.or(self.f).unwrap_or(0);
        let mode = self.network.unwrap_or(NetworkMode::Sync);
        let default_delay = DelayDist::default();
        let delay = DelayDist {
            min: 0,
            max: self.delay_max.unwrap_or(default_delay.max),
        };
        let mut network = match mode {
            NetworkMode::Sync => NetworkConfig::sync(),
            NetworkMode::Async => NetworkConfig::asynchronous(
                self.drop.unwrap_or(0.0),
                self.dup.unwrap_or(0.0),
                delay,
            ),
        };
        if let Some(pulses) = self.outage {
            network = network.with_outage(pulses);
        }
        let defaults = AsyncParams::for_max_delay(network.delay.max);
        let spec = RunSpec {
            protocol: self.protocol.unwrap_or(ProtocolKind::Pcs),
            n1,
            f1,
            n2,
            f2,
            network,
            adversary: AdversaryStrategy::uniform(
                self.adversary.unwrap_or(AdversaryKind::WorstCase),
            ),
            trials: self.trials.unwrap_or(1),
            seed: self.seed.unwrap_or(0),
            params: AsyncParams {
                delta: self.delta.unwrap_or(defaults.delta),
                parallel_rounds: self.parallel_rounds.unwrap_or(defaults.parallel_rounds),
            },
            max_iters: self.max_iters,
            max_pulses: self.max_pulses.unwrap_or(SimConfig::DEFAULT_MAX_PULSES),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A fully resolved simulation campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub protocol: ProtocolKind,
    pub n1: u32,
    pub f1: u32,
    pub n2: u32,
    pub f2: u32,
    pub network: NetworkConfig,
    pub adversary: AdversaryStrategy,
    pub trials: u64,
    pub seed: u64,
    pub params: AsyncParams,
    pub max_iters: Option<u64>,
    pub max_pulses: u64,
}

impl RunSpec {
    /// One synchronous trial against the worst-case adversary.
    pub fn new(protocol: ProtocolKind, n1: u32, f1: u32, n2: u32, f2: u32) -> Self {
        Self {
            protocol,
            n1,
            f1,
            n2,
            f2,
            network: NetworkConfig::sync(),
            adversary: AdversaryStrategy::uniform(AdversaryKind::WorstCase),
            trials: 1,
            seed: 0,
            params: AsyncParams::for_max_delay(0),
            max_iters: None,
            max_pulses: SimConfig::DEFAULT_MAX_PULSES,
        }
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_adversary(mut self, kind: AdversaryKind) -> Self {
        self.adversary = AdversaryStrategy::uniform(kind);
        self
    }

    /// Switches to `network`, re-deriving the async defaults from its delay.
    pub fn with_network(mut self, network: NetworkConfig) -> Self {
        self.params = AsyncParams::for_max_delay(network.delay.max);
        self.network = network;
        self
    }

    /// Hard errors: the global `n > 2f` model constraint and malformed knobs.
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: &dyn Display| CliError::Usage(e.to_string());
        ClusterConfig::with_leading_faulty(ClusterId(1), self.n1, self.f1)
            .map_err(|e| usage(&e))?;
        ClusterConfig::with_leading_faulty(ClusterId(2), self.n2, self.f2)
            .map_err(|e| usage(&e))?;
        self.network.clone().normalized().map_err(|e| usage(&e))?;
        if self.trials == 0 {
            return Err(CliError::Usage("trials must be positive".into()));
        }
        if self.params.delta == 0 || self.params.parallel_rounds == 0 {
            return Err(CliError::Usage(
                "delta and parallel-rounds must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Soft problems: a Plcs variant outside its robustness row still runs,
    /// so its failure behaviour can be observed, but the user is told.
    pub fn warnings(&self) -> Vec<String> {
        let (n1, f1, n2, f2) = (self.n1, self.f1, self.n2, self.f2);
        match self.protocol {
            ProtocolKind::PlcsMin if n1.min(n2) <= f1 + f2 => vec![format!(
                "plcs-min is only robust when min(n1, n2) > f1 + f2 (here {} <= {})",
                n1.min(n2),
                f1 + f2
            )],
            ProtocolKind::PlcsMax if n1 <= 3 * f1 || n2 <= 3 * f2 => vec![format!(
                "plcs-max is only robust when n1 > 3 f1 and n2 > 3 f2 (here n1 = {n1}, f1 = {f1}, n2 = {n2}, f2 = {f2})"
            )],
            _ => Vec::new(),
        }
    }

    pub fn trial_seed(&self, trial: u64) -> u64 {
        self.seed.wrapping_add(trial)
    }

    pub fn sim_config(&self, trial: u64) -> SimConfig {
        SimConfig {
            network: self.network.clone(),
            adversary: self.adversary.clone(),
            seed: self.trial_seed(trial),
            max_pulses: self.max_pulses,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clustersend_core::ReplicaId;

    #[test]
    fn flags_override_file() {
        let file = SpecArgs::from_toml(
            "protocol = \"ppcs\"\nn = 7\nf = 2\nseed = 9\nadversary = \"randomized:3\"\n",
        )
        .unwrap();
        let flags = SpecArgs {
            seed: Some(1),
            n2: Some(5),
            ..Default::default()
        };
        let spec = file.overlay(flags).resolve().unwrap();
        assert_eq!(spec.protocol, ProtocolKind::Ppcs);
        assert_eq!((spec.n1, spec.f1, spec.n2, spec.f2), (7, 2, 5, 2));
        assert_eq!(spec.seed, 1);
        assert_eq!(
            spec.adversary.kind_of(ReplicaId::new(ClusterId(1), 0)),
            AdversaryKind::Randomized(3)
        );
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        assert!(matches!(
            SpecArgs::from_toml("colour = 1"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            SpecArgs::from_toml("protocol = \"gossip\""),
            Err(CliError::Usage(_))
        ));
        let too_faulty = SpecArgs {
            n: Some(4),
            f: Some(2),
            ..Default::default()
        };
        assert!(matches!(too_faulty.resolve(), Err(CliError::Usage(_))));
        let bad_drop = SpecArgs {
            n: Some(4),
            network: Some(NetworkMode::Async),
            drop: Some(1.5),
            ..Default::default()
        };
        assert!(matches!(bad_drop.resolve(), Err(CliError::Usage(_))));
    }

    #[test]
    fn plcs_rows_warn_but_resolve() {
        let spec = RunSpec::new(ProtocolKind::PlcsMax, 5, 2, 5, 2);
        assert!(spec.validate().is_ok());
        assert_eq!(spec.warnings().len(), 1);
        assert!(RunSpec::new(ProtocolKind::PlcsMax, 7, 2, 7, 2)
            .warnings()
            .is_empty());
        assert!(RunSpec::new(ProtocolKind::PlcsMin, 5, 2, 5, 2)
            .warnings()
            .is_empty());
        assert_eq!(
            RunSpec::new(ProtocolKind::PlcsMin, 3, 1, 5, 2)
                .warnings()
                .len(),
            1
        );
    }

    #[test]
    fn async_defaults_follow_delay() {
        let spec = SpecArgs {
            n: Some(4),
            f: Some(1),
            network: Some(NetworkMode::Async),
            delay_max: Some(8),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(spec.params.delta, 19);
        assert_eq!(spec.network.delay, DelayDist { min: 0, max: 8 });
    }
}
