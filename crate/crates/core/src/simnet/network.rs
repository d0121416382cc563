use serde::{Deserialize, Serialize};

use crate::types::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkMode {
    /// Everything sent in a pulse is received in that pulse.
    Sync,
    /// Messages may be delayed, duplicated or dropped.
    Async,
}

impl std::str::FromStr for NetworkMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sync" => Ok(NetworkMode::Sync),
            "async" => Ok(NetworkMode::Async),
            _ => Err(format!(
                "unknown network mode {s:?} (expected sync or async)"
            )),
        }
    }
}

impl std::fmt::Display for NetworkMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NetworkMode::Sync => "sync",
            NetworkMode::Async => "async",
        })
    }
}

/// Extra pulses a message spends in flight, drawn uniformly from `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayDist {
    pub min: u64,
    pub max: u64,
}

impl DelayDist {
    pub const fn fixed(pulses: u64) -> Self {
        Self {
            min: pulses,
            max: pulses,
        }
    }
}

impl Default for DelayDist {
    fn default() -> Self {
        Self { min: 0, max: 4 }
    }
}

/// Drop probability override for pulses in `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityPhase {
    pub start: u64,
    pub end: u64,
    pub drop_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub mode: NetworkMode,
    pub drop_prob: f64,
    pub dup_prob: f64,
    pub delay: DelayDist,
    #[serde(default)]
    pub reliability_schedule: Vec<ReliabilityPhase>,
}

impl NetworkConfig {
    pub fn sync() -> Self {
        Self {
            mode: NetworkMode::Sync,
            drop_prob: 0.0,
            dup_prob: 0.0,
            delay: DelayDist::fixed(0),
            reliability_schedule: Vec::new(),
        }
    }

    pub fn asynchronous(drop_prob: f64, dup_prob: f64, delay: DelayDist) -> Self {
        Self {
            mode: NetworkMode::Async,
            drop_prob,
            dup_prob,
            delay,
            reliability_schedule: Vec::new(),
        }
    }

    /// Unreliable (everything dropped) for the first `pulses` pulses.
    pub fn with_outage(mut self, pulses: u64) -> Self {
        self.reliability_schedule.push(ReliabilityPhase {
            start: 0,
            end: pulses,
            drop_prob: 1.0,
        });
        self
    }

    /// Checks ranges and, in SYNC mode, resets every unreliability knob to zero.
    pub fn normalized(mut self) -> Result<Self, ConfigError> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(ConfigError::Network(format!(
                    "{name} = {p} is not a probability"
                )))
            }
        };
        prob("drop_prob", self.drop_prob)?;
        prob("dup_prob", self.dup_prob)?;
        if self.delay.min > self.delay.max {
            return Err(ConfigError::Network(format!(
                "delay range [{}, {}] is empty",
                self.delay.min, self.delay.max
            )));
        }
        for phase in &self.reliability_schedule {
            prob("phase drop_prob", phase.drop_prob)?;
            if phase.start > phase.end {
                return Err(ConfigError::Network(format!(
                    "phase [{}, {}) is reversed",
                    phase.start, phase.end
                )));
            }
        }
        if self.mode == NetworkMode::Sync {
            self.drop_prob = 0.0;
            self.dup_prob = 0.0;
            self.delay = DelayDist::fixed(0);
            self.reliability_schedule.clear();
        }
        Ok(self)
    }

    /// Drop probability in force at `pulse`; the first matching phase wins.
    pub fn drop_prob_at(&self, pulse: u64) -> f64 {
        if self.mode == NetworkMode::Sync {
            return 0.0;
        }
        self.reliability_schedule
            .iter()
            .find(|p| p.start <= pulse && pulse < p.end)
            .map_or(self.drop_prob, |p| p.drop_prob)
    }

    /// First pulse from which the schedule no longer overrides the base rate.
    pub fn schedule_end(&self) -> u64 {
        self.reliability_schedule
            .iter()
            .map(|p| p.end)
            .max()
            .unwrap_or(0)
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::sync()
    }
}
