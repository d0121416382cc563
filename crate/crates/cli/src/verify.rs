//! Pass/fail suites behind `clustersend verify`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use clustersend_core::analysis::{
    factorial, fc_closed, fc_product, feasible_k, format_exact, pt_bruteforce, pt_equal_half,
    pt_exact, FcMemo, BRUTE_FORCE_MAX_N,
};
use clustersend_core::protocols::{
    ppcs, ppcs_worst_case, run_sync, ListPairs, PairSource, ProtocolError, ProtocolKind,
};
use clustersend_core::simnet::{
    derive_seed, AdversaryKind, DelayDist, NetworkConfig, SimConfig, Simulation,
};
use clustersend_core::{ClusterConfig, ClusterId, Rational, Value};
use num_bigint::BigUint;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::robustness::{self, Condition, Expectations, Row};
use crate::simulate::{run_trial, run_trial_traced, simulate, thread_pool, write_csv};
use crate::spec::RunSpec;
use crate::stats::SweepResultRow;

const C1: ClusterId = ClusterId(1);
const C2: ClusterId = ClusterId(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Fc,
    Pt,
    ClosedForm,
    PpcsExhaustive,
    PlcsBound,
    SfMax,
    Safety,
    Determinism,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Fc,
        Suite::Pt,
        Suite::ClosedForm,
        Suite::PpcsExhaustive,
        Suite::PlcsBound,
        Suite::SfMax,
        Suite::Safety,
        Suite::Determinism,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Fc => "fc",
            Suite::Pt => "pt",
            Suite::ClosedForm => "closed-form",
            Suite::PpcsExhaustive => "ppcs-exhaustive",
            Suite::PlcsBound => "plcs-bound",
            Suite::SfMax => "sfmax",
            Suite::Safety => "safety",
            Suite::Determinism => "determinism",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Suite::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown suite {s:?} (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checked: u64,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            checked: 0,
            failures: Vec::new(),
            notes: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(what());
        }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} ({} checks, {:.2?})",
            self.suite,
            if self.passed() { "PASS" } else { "FAIL" },
            self.checked,
            self.elapsed
        )?;
        for note in &self.notes {
            writeln!(f, "  {note}")?;
        }
        for failure in self.failures.iter().take(20) {
            writeln!(f, "  failed: {failure}")?;
        }
        if self.failures.len() > 20 {
            writeln!(f, "  ... {} more failures", self.failures.len() - 20)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Overrides each suite's default size limit.
    pub max_n: Option<u32>,
    pub traces: u64,
    pub trials: u64,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            max_n: None,
            traces: 10_000,
            trials: 10_000,
            seed: 0,
            threads: None,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> SuiteReport {
    let start = Instant::now();
    let mut report = match suite {
        Suite::Fc => fc(opts.max_n.unwrap_or(8)),
        Suite::Pt => pt(opts.max_n.unwrap_or(BRUTE_FORCE_MAX_N)),
        Suite::ClosedForm => closed_form(opts.max_n.unwrap_or(12)),
        Suite::PpcsExhaustive => ppcs_exhaustive(opts.max_n.unwrap_or(5), 3, opts.seed),
        Suite::PlcsBound => plcs_bound(opts.max_n.unwrap_or(7), 20, opts.seed),
        Suite::SfMax => sf_max(
            opts.max_n.unwrap_or(13),
            opts.trials,
            opts.seed,
            opts.threads,
        ),
        Suite::Safety => safety(opts.traces, opts.seed, opts.threads),
        Suite::Determinism => determinism(opts.seed),
    };
    report.elapsed = start.elapsed();
    report
}

pub fn verify(suites: &[Suite], opts: &VerifyOptions) -> Vec<SuiteReport> {
    suites.iter().map(|&s| run_suite(s, opts)).collect()
}

/// The three FC evaluations agree on every feasible point and each
/// distribution over `k` accounts for all `n!²` permutation pairs.
pub fn fc(max_n: u32) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Fc);
    let mut memo = FcMemo::new();
    for n in 0..=max_n {
        let total = factorial(n) * factorial(n);
        for m1 in 0..=n {
            for m2 in 0..=n {
                let mut sum = BigUint::ZERO;
                for k in feasible_k(n, m1, m2) {
                    let rec = memo.fc(n, m1, m2, k);
                    let closed = fc_closed(n, m1, m2, k);
                    let product = fc_product(n, m1, m2, k);
                    report.expect(
                        closed.as_ref() == Ok(&rec) && product.as_ref() == Ok(&rec),
                        || format!("FC({n},{m1},{m2},{k}): {rec} vs {closed:?} vs {product:?}"),
                    );
                    sum += rec;
                }
                report.expect(sum == total, || {
                    format!("sum over k of FC({n},{m1},{m2},k) = {sum}, expected {total}")
                });
            }
        }
    }
    report
}

/// `PT` from the FC distribution equals exhaustive enumeration.
pub fn pt(max_n: u32) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Pt);
    let max_n = max_n.min(BRUTE_FORCE_MAX_N);
    for n in 1..=max_n {
        for m1 in 0..n {
            for m2 in 0..n - m1 {
                let exact = pt_exact(n, m1, m2);
                let brute = pt_bruteforce(n, m1, m2);
                report.expect(exact.is_ok() && exact == brute, || {
                    format!("PT({n},{m1},{m2}): {exact:?} vs brute force {brute:?}")
                });
            }
        }
    }
    report
}

/// Closed form of `PT(2f+1, f, f)` plus two spot values by brute force.
pub fn closed_form(max_f: u32) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::ClosedForm);
    for f in 0..=max_f {
        let exact = pt_exact(2 * f + 1, f, f);
        let closed = pt_equal_half(f);
        report.expect(exact.as_ref() == Ok(&closed), || {
            format!(
                "f = {f}: PT = {exact:?}, closed form {}",
                format_exact(&closed)
            )
        });
    }
    for (n, f, p, q) in [(3, 1, 5, 2), (5, 2, 19, 6)] {
        let expected = Rational::new(p.into(), q.into());
        let exact = pt_exact(n, f, f);
        let brute = pt_bruteforce(n, f, f);
        report.expect(
            exact.as_ref() == Ok(&expected) && brute.as_ref() == Ok(&expected),
            || format!("PT({n},{f},{f}) = {exact:?} / {brute:?}, expected {p}/{q}"),
        );
    }
    report
}

/// Every placement of up to `(n - 1) / 2` faulty replicas among `n`.
pub fn placements(n: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for f in 0..=(n.saturating_sub(1)) / 2 {
        for mask in 0u32..(1 << n) {
            if mask.count_ones() == f {
                out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
            }
        }
    }
    out
}

const PPCS_ADVERSARIES: [AdversaryKind; 4] = [
    AdversaryKind::WorstCase,
    AdversaryKind::Silent,
    AdversaryKind::DropOutbound,
    AdversaryKind::DropInbound,
];

/// Ppcs against every placement with `n1, n2 <= max_n`: the adversarial
/// search reaches exactly `(f1+1)(f2+1)` steps, and `seeds` simulated runs
/// per placement confirm within that bound.
pub fn ppcs_exhaustive(max_n: u32, seeds: u64, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::PpcsExhaustive);
    let mut attained = 0u64;
    let mut placements_seen = 0u64;
    for n1 in 1..=max_n {
        for n2 in 1..=max_n {
            for p1 in placements(n1) {
                for p2 in placements(n2) {
                    let c1 =
                        ClusterConfig::new(C1, n1, p1.clone()).expect("n > 2f by construction");
                    let c2 =
                        ClusterConfig::new(C2, n2, p2.clone()).expect("n > 2f by construction");
                    placements_seen += 1;
                    let bound = u64::from(c1.f() + 1) * u64::from(c2.f() + 1);
                    match ppcs_worst_case(&c1, &c2) {
                        Ok(worst) => {
                            report.expect(worst.steps <= bound, || {
                                format!(
                                    "{n1}{p1:?}/{n2}{p2:?}: worst case {} > {bound}",
                                    worst.steps
                                )
                            });
                            attained += u64::from(worst.steps == bound);
                        }
                        Err(e) => report.expect(false, || format!("{n1}{p1:?}/{n2}{p2:?}: {e}")),
                    }
                    for s in 0..seeds {
                        let run_seed = derive_seed(seed, placements_seen * 1000 + s);
                        let kind = PPCS_ADVERSARIES[(s as usize) % PPCS_ADVERSARIES.len()];
                        let mut sim = Simulation::new(
                            c1.clone(),
                            c2.clone(),
                            SimConfig::sync(kind, run_seed),
                        )
                        .expect("distinct clusters");
                        let res = ppcs(&mut sim, C1, C2, &Value::from("v"), bound * 10);
                        report.expect(
                            matches!(res, Ok(st) if st.confirmed && st.cs_steps <= bound),
                            || format!("{n1}{p1:?}/{n2}{p2:?} {kind} seed {run_seed}: {res:?}"),
                        );
                    }
                }
            }
        }
    }
    report.expect(attained > 0, || "no placement attains the bound".into());
    report.notes.push(format!(
        "{placements_seen} placements, bound attained by {attained}"
    ));
    report
}

fn random_cluster(rng: &mut ChaCha8Rng, id: ClusterId, n: u32, f: u32) -> ClusterConfig {
    let faulty = sample(rng, n as usize, f as usize)
        .into_iter()
        .map(|i| i as u32);
    ClusterConfig::new(id, n, faulty).expect("n > 2f by construction")
}

/// Runs Plcs with the given list-pair function and returns the number of
/// steps together with `f(S1) + f(S2)`.
pub fn plcs_run(
    c1: ClusterConfig,
    c2: ClusterConfig,
    kind: ProtocolKind,
    adversary: AdversaryKind,
    seed: u64,
) -> Result<(u64, u32, bool), ProtocolError> {
    let sf = kind.list_pair_function().expect("a Plcs variant");
    let mut source = ListPairs::new(&c1, &c2, sf)?;
    let (s1, s2) = source.lists();
    let faulty = s1.iter().filter(|r| c1.is_faulty(**r)).count()
        + s2.iter().filter(|r| c2.is_faulty(**r)).count();
    let mut sim = Simulation::new(c1, c2, SimConfig::sync(adversary, seed))?;
    let stats = run_sync(
        &mut sim,
        C1,
        C2,
        &Value::from("v"),
        &mut source as &mut dyn PairSource,
        None,
    )?;
    Ok((stats.cs_steps, faulty as u32, stats.confirmed))
}

/// Worst-case Plcs: every synchronous run under its robustness row finishes
/// within `f(S1) + f(S2) + 1` steps; the expected-case bounds of the
/// robustness rows hold for adversarial placements under the strict conditions.
pub fn plcs_bound(max_n: u32, runs: u64, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::PlcsBound);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x91c5));
    for kind in [ProtocolKind::PlcsMin, ProtocolKind::PlcsMax] {
        for n1 in 1..=max_n {
            for n2 in 1..=max_n {
                for f1 in 0..=(n1 - 1) / 2 {
                    for f2 in 0..=(n2 - 1) / 2 {
                        let robust = match kind {
                            ProtocolKind::PlcsMin => n1.min(n2) > f1 + f2,
                            _ => n1 > 3 * f1 && n2 > 3 * f2,
                        };
                        if !robust {
                            continue;
                        }
                        for _ in 0..runs {
                            let c1 = random_cluster(&mut rng, C1, n1, f1);
                            let c2 = random_cluster(&mut rng, C2, n2, f2);
                            let adversary =
                                PPCS_ADVERSARIES[rng.random_range(0..PPCS_ADVERSARIES.len())];
                            let run_seed = rng.random();
                            let res = plcs_run(c1, c2, kind, adversary, run_seed);
                            report.expect(
                                matches!(res, Ok((steps, faulty, true)) if steps <= u64::from(faulty) + 1
                                    && steps <= u64::from(n1.max(n2))),
                                || format!("{kind} ({n1},{f1},{n2},{f2}) {adversary} seed {run_seed}: {res:?}"),
                            );
                        }
                    }
                }
            }
        }
    }
    let mut memo = Expectations::new();
    for row in Row::ALL {
        let probe = robustness::probe(row, Condition::Strict, 13, &mut memo);
        report.expect(probe.pt_within_bound(), || format!("{row}: {probe:?}"));
    }
    report
}

/// Shapes exercised by the sf_max Monte Carlo check: equal and unequal
/// clusters, including list lengths that are not a multiple of the smaller
/// cluster.
pub const SF_MAX_SHAPES: [(u32, u32, u32, u32); 5] = [
    (4, 1, 4, 1),
    (7, 2, 4, 1),
    (10, 3, 7, 2),
    (13, 4, 5, 1),
    (5, 1, 13, 4),
];

/// sf_max under `n > 3f`: adversarial placements keep the lists robust and
/// `PT` at most 3, and simulated means match the exact random-placement
/// expectation and stay at most 3.
pub fn sf_max(max_n: u32, trials: u64, seed: u64, threads: Option<usize>) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::SfMax);
    let mut memo = Expectations::new();
    let probe = robustness::probe(Row::ThirdEach, Condition::Strict, max_n, &mut memo);
    report.expect(probe.pt_within_bound(), || format!("{probe:?}"));
    if let Some((v, shape)) = &probe.worst_pt {
        report.notes.push(format!(
            "{} shapes, largest PT {} at {shape:?}",
            probe.shapes,
            format_exact(v)
        ));
    }
    if trials > 0 {
        for row in sf_max_monte_carlo(trials, seed, threads, &mut memo) {
            match row {
                Ok(row) => {
                    let ok = row.ok;
                    report.notes.push(format!(
                        "({},{},{},{}) mean {} vs exact {} (ci95 {})",
                        row.n1,
                        row.f1,
                        row.n2,
                        row.f2,
                        row.empirical_mean,
                        row.analytic_expected,
                        row.ci95
                    ));
                    report.expect(ok, || format!("{row:?}"));
                }
                Err(e) => report.expect(false, || e),
            }
        }
    }
    report
}

/// Monte Carlo rows for [`SF_MAX_SHAPES`]; `ok` also requires mean <= 3.
pub fn sf_max_monte_carlo(
    trials: u64,
    seed: u64,
    threads: Option<usize>,
    memo: &mut Expectations,
) -> Vec<Result<SweepResultRow, String>> {
    SF_MAX_SHAPES
        .iter()
        .map(|&shape| {
            let (n1, f1, n2, f2) = shape;
            let analytic = memo
                .random_placement(clustersend_core::protocols::ListPairFunction::SfMax, shape)
                .map_err(|e| e.to_string())?;
            let spec = RunSpec::new(ProtocolKind::PlcsMax, n1, f1, n2, f2)
                .with_trials(trials)
                .with_seed(seed.wrapping_add(u64::from(n1 * 100 + n2)));
            let report = simulate(&spec, threads).map_err(|e| e.to_string())?;
            if let Some(bad) = report.failures.first() {
                return Err(format!(
                    "{shape:?} trial {}: {}",
                    bad.trial,
                    bad.problems.join("; ")
                ));
            }
            let summary = report.steps();
            let mut row = SweepResultRow::new("plcs-max", shape, &analytic, &summary);
            row.ok &= summary.at_most(3.0) && summary.count == trials;
            Ok(row)
        })
        .collect()
}

/// Configuration of one fuzzed trace.
pub fn fuzz_spec(rng: &mut ChaCha8Rng) -> RunSpec {
    let kind = ProtocolKind::ALL[rng.random_range(0..4)];
    let n1 = rng.random_range(1..=7);
    let n2 = rng.random_range(1..=7);
    let f1 = rng.random_range(0..=(n1 - 1) / 2);
    let f2 = rng.random_range(0..=(n2 - 1) / 2);
    let adversary = match rng.random_range(0..5) {
        0 => AdversaryKind::Silent,
        1 => AdversaryKind::DropOutbound,
        2 => AdversaryKind::DropInbound,
        3 => AdversaryKind::WorstCase,
        _ => AdversaryKind::Randomized(rng.random()),
    };
    let mut spec = RunSpec::new(kind, n1, f1, n2, f2)
        .with_adversary(adversary)
        .with_seed(rng.random());
    if rng.random_bool(0.8) {
        let delay = DelayDist {
            min: 0,
            max: rng.random_range(0..=8),
        };
        let mut network = NetworkConfig::asynchronous(
            rng.random_range(0.0..=0.5),
            rng.random_range(0.0..=0.5),
            delay,
        );
        if rng.random_bool(0.2) {
            network = network.with_outage(rng.random_range(1..=60));
        }
        spec = spec.with_network(network);
    }
    spec.max_pulses = 20_000;
    spec
}

/// Randomised traces across protocols, adversaries and network settings;
/// each trace is audited for the safety properties.
pub fn safety(traces: u64, seed: u64, threads: Option<usize>) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Safety);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5afe));
    let specs: Vec<RunSpec> = (0..traces).map(|_| fuzz_spec(&mut rng)).collect();
    let pool = match thread_pool(threads) {
        Ok(p) => p,
        Err(e) => {
            report.expect(false, || e.to_string());
            return report;
        }
    };
    let outcomes: Vec<_> = pool.install(|| specs.par_iter().map(|s| run_trial(s, 0)).collect());
    let mut confirmed = 0u64;
    let mut refused = 0u64;
    for (spec, outcome) in specs.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                confirmed += u64::from(o.row.confirmed);
                refused += u64::from(o.note.is_some());
                report.expect(o.failure.is_none(), || {
                    let problems = o.failure.map(|f| f.problems.join("; ")).unwrap_or_default();
                    format!("{spec:?}: {problems}")
                });
            }
            Err(e) => report.expect(false, || format!("{spec:?}: {e}")),
        }
    }
    report.notes.push(format!(
        "{traces} traces, {confirmed} confirmed, {refused} Plcs runs refused as not robust"
    ));
    report
}

/// Specs used by the determinism check: one per protocol, across networks
/// and adversaries.
pub fn determinism_specs(seed: u64) -> Vec<RunSpec> {
    let lossy = NetworkConfig::asynchronous(0.3, 0.2, DelayDist { min: 0, max: 5 });
    vec![
        RunSpec::new(ProtocolKind::Pcs, 7, 3, 4, 1)
            .with_trials(50)
            .with_seed(seed),
        RunSpec::new(ProtocolKind::Ppcs, 5, 2, 5, 2)
            .with_trials(30)
            .with_seed(seed)
            .with_adversary(AdversaryKind::Randomized(seed ^ 7))
            .with_network(lossy.clone()),
        RunSpec::new(ProtocolKind::PlcsMin, 4, 1, 7, 2)
            .with_trials(30)
            .with_seed(seed)
            .with_network(lossy.with_outage(20)),
        RunSpec::new(ProtocolKind::PlcsMax, 10, 3, 4, 1)
            .with_trials(30)
            .with_seed(seed),
    ]
}

/// CSV bytes of a full run of `spec`.
pub fn csv_bytes(spec: &RunSpec, threads: Option<usize>) -> Result<Vec<u8>, String> {
    let report = simulate(spec, threads).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_csv(&report.rows, &mut buf).map_err(|e| e.to_string())?;
    Ok(buf)
}

/// Equal specs produce byte-identical CSV, independent of worker count,
/// and identical traces.
pub fn determinism(seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Determinism);
    for spec in determinism_specs(seed) {
        let first = csv_bytes(&spec, Some(1));
        let second = csv_bytes(&spec, Some(3));
        report.expect(first.is_ok() && first == second, || {
            format!("{} CSV differs between runs", spec.protocol)
        });
        let jsonl = |s: &RunSpec| {
            run_trial_traced(s, 1)
                .ok()
                .and_then(|o| o.trace)
                .map(|t| t.to_jsonl())
        };
        let a = jsonl(&spec);
        report.expect(a.is_some() && a == jsonl(&spec), || {
            format!("{} traces differ", spec.protocol)
        });
    }
    report
}
