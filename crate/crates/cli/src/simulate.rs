use std::io::Write;

use clustersend_core::protocols::{run_protocol, ProtocolError};
use clustersend_core::simnet::{
    derive_seed, NetworkMode, Simulation, Trace, TrialStats, Violation,
};
use clustersend_core::{ClusterConfig, ClusterId, Value};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::spec::RunSpec;
use crate::stats::Summary;
use crate::CliError;

pub const CSV_HEADER: &str = "protocol,n1,f1,n2,f2,network,trial,steps,inter_cluster_msgs,consensus_c1,consensus_c2,pulses,confirmed";

/// Stream for the faulty placement, disjoint from the simulator's streams.
const PLACEMENT_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialRow {
    pub protocol: String,
    pub n1: u32,
    pub f1: u32,
    pub n2: u32,
    pub f2: u32,
    pub network: String,
    pub trial: u64,
    pub steps: u64,
    pub inter_cluster_msgs: u64,
    pub consensus_c1: u64,
    pub consensus_c2: u64,
    pub pulses: u64,
    pub confirmed: bool,
}

#[derive(Debug, Clone)]
pub struct TrialFailure {
    pub trial: u64,
    pub problems: Vec<String>,
    pub trace: Trace,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub row: TrialRow,
    pub failure: Option<TrialFailure>,
    /// Non-fatal remark, such as a Plcs run refused by its robustness check.
    pub note: Option<String>,
    /// The full trace, if it was requested.
    pub trace: Option<Trace>,
}

/// Faulty replicas of a trial: `f` indices drawn uniformly per cluster.
pub fn placement(spec: &RunSpec, trial: u64) -> Result<(ClusterConfig, ClusterConfig), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.trial_seed(trial), PLACEMENT_STREAM));
    let mut pick = |id: u32, n: u32, f: u32| {
        let faulty = sample(&mut rng, n as usize, f.min(n) as usize)
            .into_iter()
            .map(|i| i as u32);
        ClusterConfig::new(ClusterId(id), n, faulty).map_err(|e| CliError::Usage(e.to_string()))
    };
    Ok((pick(1, spec.n1, spec.f1)?, pick(2, spec.n2, spec.f2)?))
}

/// Runs trial `trial` of `spec` and checks its trace. The trace itself is
/// only kept when a check fails.
pub fn run_trial(spec: &RunSpec, trial: u64) -> Result<TrialOutcome, CliError> {
    run_trial_with(spec, trial, false)
}

/// Like [`run_trial`], but always keeps the trace.
pub fn run_trial_traced(spec: &RunSpec, trial: u64) -> Result<TrialOutcome, CliError> {
    run_trial_with(spec, trial, true)
}

fn run_trial_with(spec: &RunSpec, trial: u64, keep_trace: bool) -> Result<TrialOutcome, CliError> {
    let (c1, c2) = placement(spec, trial)?;
    let mut sim = Simulation::new(c1, c2, spec.sim_config(trial))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let value = Value::from(format!("value-{}", spec.trial_seed(trial)).into_bytes());
    let result = run_protocol(
        spec.protocol,
        &mut sim,
        ClusterId(1),
        ClusterId(2),
        &value,
        spec.max_iters,
        spec.params,
    );
    let mut problems = Vec::new();
    let mut note = None;
    let stats = match result {
        Ok(stats) => stats,
        Err(ProtocolError::Robustness { n, faulty }) => {
            note = Some(format!(
                "trial {trial}: {} not run, n = {n} <= f(S1) + f(S2) = {faulty}",
                spec.protocol
            ));
            TrialStats::default()
        }
        Err(ProtocolError::Invariant(what)) => {
            problems.push(what);
            sim.stats()
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    if note.is_none() {
        problems.extend(check(spec, &stats));
    }
    let row = TrialRow {
        protocol: spec.protocol.to_string(),
        n1: spec.n1,
        f1: spec.f1,
        n2: spec.n2,
        f2: spec.f2,
        network: spec.network.mode.to_string(),
        trial,
        steps: stats.cs_steps,
        inter_cluster_msgs: stats.inter_cluster_msgs,
        consensus_c1: stats.consensus_c1,
        consensus_c2: stats.consensus_c2,
        pulses: stats.pulses,
        confirmed: stats.confirmed,
    };
    let trace = sim.into_trace(stats.confirmed);
    problems.extend(trace.audit(true).iter().map(describe));
    let failure = (!problems.is_empty()).then(|| TrialFailure {
        trial,
        problems,
        trace: trace.clone(),
    });
    let trace = keep_trace.then_some(trace);
    Ok(TrialOutcome {
        row,
        failure,
        note,
        trace,
    })
}

/// Checks on the counters that the trace audit does not see.
fn check(spec: &RunSpec, stats: &TrialStats) -> Vec<String> {
    let mut problems = Vec::new();
    if stats.consensus_c1 > 2 || stats.consensus_c2 > 1 {
        problems.push(format!(
            "consensus economy: C1 ran {} and C2 ran {} consensus steps",
            stats.consensus_c1, stats.consensus_c2
        ));
    }
    if spec.network.mode == NetworkMode::Sync && !spec.adversary.injects() {
        if stats.inter_cluster_msgs > 2 * stats.cs_steps {
            problems.push(format!(
                "{} messages for {} cs-steps",
                stats.inter_cluster_msgs, stats.cs_steps
            ));
        }
        if spec.protocol != clustersend_core::protocols::ProtocolKind::Pcs && !stats.confirmed {
            problems.push(format!(
                "{} did not confirm on a synchronous network",
                spec.protocol
            ));
        }
    }
    problems
}

fn describe(v: &Violation) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Default)]
pub struct SimulationReport {
    pub rows: Vec<TrialRow>,
    pub failures: Vec<TrialFailure>,
    pub notes: Vec<String>,
}

impl SimulationReport {
    pub fn steps(&self) -> Summary {
        Summary::of(self.rows.iter().filter(|r| r.steps > 0).map(|r| r.steps))
    }

    pub fn confirmed(&self) -> usize {
        self.rows.iter().filter(|r| r.confirmed).count()
    }
}

/// Builds a worker pool; `None` or `Some(0)` lets rayon pick.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

/// Runs every trial of `spec`. Trials run in parallel and are merged back in
/// index order, so the result does not depend on scheduling.
pub fn simulate(spec: &RunSpec, threads: Option<usize>) -> Result<SimulationReport, CliError> {
    spec.validate()?;
    let pool = thread_pool(threads)?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, t))
            .collect::<Result<_, _>>()
    })?;
    let mut report = SimulationReport::default();
    for outcome in outcomes {
        report.rows.push(outcome.row);
        report.failures.extend(outcome.failure);
        report.notes.extend(outcome.note);
    }
    Ok(report)
}

/// Writes the header and one line per row. The header is written even when
/// there are no rows.
pub fn write_csv(rows: &[TrialRow], out: impl Write) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clustersend_core::protocols::ProtocolKind;

    #[test]
    fn header_matches_row_fields() {
        let mut buf = Vec::new();
        let spec = RunSpec::new(ProtocolKind::Pcs, 3, 1, 3, 1);
        let row = run_trial(&spec, 0).unwrap().row;
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some(CSV_HEADER));
    }

    #[test]
    fn placements_vary_with_the_trial() {
        let spec = RunSpec::new(ProtocolKind::Pcs, 7, 3, 7, 3);
        let distinct: std::collections::BTreeSet<_> = (0..20)
            .map(|t| placement(&spec, t).unwrap().0.faulty().clone())
            .collect();
        assert!(distinct.len() > 1);
        for t in 0..20 {
            assert_eq!(placement(&spec, t).unwrap().0.f(), 3);
        }
    }
}
