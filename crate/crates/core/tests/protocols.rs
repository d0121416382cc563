use std::collections::BTreeMap;

use clustersend_core::protocols::{
    async_drive, cs_step, pair_source, pcs, plcs, ppcs, random_permutation_pair, run_sync, sf_max,
    AsyncParams, ListPairFunction, ProtocolError, ProtocolKind, PrunedPairs,
};
use clustersend_core::simnet::{
    AdversaryKind, AdversaryStrategy, DelayDist, EventKind, NetworkConfig, SharedCoin, SimConfig,
    Simulation,
};
use clustersend_core::{certify, send_payload, ClusterConfig, ClusterId, SendMessage, Value};

const C1: ClusterId = ClusterId(1);
const C2: ClusterId = ClusterId(2);

fn cluster(id: ClusterId, n: u32, faulty: &[u32]) -> ClusterConfig {
    ClusterConfig::new(id, n, faulty.iter().copied()).unwrap()
}

fn sync_sim(
    n1: u32,
    f1: &[u32],
    n2: u32,
    f2: &[u32],
    kind: AdversaryKind,
    seed: u64,
) -> Simulation {
    Simulation::new(
        cluster(C1, n1, f1),
        cluster(C2, n2, f2),
        SimConfig::sync(kind, seed),
    )
    .unwrap()
}

fn v() -> Value {
    Value::from("payload")
}

#[test]
fn honest_cs_step_exchanges_two_messages() {
    let mut s = sync_sim(4, &[3], 4, &[3], AdversaryKind::WorstCase, 0);
    let m = s.agree(C1, C2, &v()).unwrap();
    let r1 = s.cluster(C1).unwrap().replica(0);
    let r2 = s.cluster(C2).unwrap().replica(1);
    let out = cs_step(&mut s, r1, r2, &m).unwrap();
    assert!(out.success);
    assert_eq!(out.messages_sent, 2);
    assert_eq!(out.initiating_pair, (r1, r2));
    assert_eq!((s.stats().consensus_c1, s.stats().consensus_c2), (2, 1));
    for r in s.cluster(C2).unwrap().non_faulty().collect::<Vec<_>>() {
        assert_eq!(s.decisions(r).unwrap().received, Some(v()));
    }
    for r in s.cluster(C1).unwrap().non_faulty().collect::<Vec<_>>() {
        assert_eq!(s.decisions(r).unwrap().confirmed, Some(v()));
    }

    // a repeat costs messages but no further consensus
    let again = cs_step(&mut s, r1, r2, &m).unwrap();
    assert!(again.success);
    assert_eq!(again.messages_sent, 2);
    assert_eq!((s.stats().consensus_c1, s.stats().consensus_c2), (2, 1));
}

#[test]
fn silent_sender_sends_nothing() {
    let mut s = sync_sim(4, &[0], 4, &[], AdversaryKind::Silent, 0);
    let m = s.agree(C1, C2, &v()).unwrap();
    let r1 = s.cluster(C1).unwrap().replica(0);
    let r2 = s.cluster(C2).unwrap().replica(0);
    let before: Vec<_> = s
        .cluster(C2)
        .unwrap()
        .list()
        .iter()
        .map(|r| s.decisions(*r).cloned())
        .collect();
    let out = cs_step(&mut s, r1, r2, &m).unwrap();
    assert!(!out.success);
    assert_eq!(out.messages_sent, 0);
    let after: Vec<_> = s
        .cluster(C2)
        .unwrap()
        .list()
        .iter()
        .map(|r| s.decisions(*r).cloned())
        .collect();
    assert_eq!(before, after);
}

#[test]
fn cs_step_requires_agreement() {
    let mut s = sync_sim(4, &[], 4, &[], AdversaryKind::WorstCase, 0);
    let c1 = s.cluster(C1).unwrap().clone();
    let payload = send_payload(&v(), C2);
    let m = SendMessage {
        value: v(),
        target: C2,
        cert: certify(&c1, &payload, c1.list()).unwrap(),
    };
    let r2 = s.cluster(C2).unwrap().replica(0);
    let err = cs_step(&mut s, c1.replica(0), r2, &m).unwrap_err();
    assert_eq!(err, ProtocolError::MissingAgree(C1));
}

#[test]
fn fault_free_runs_take_one_step() {
    for kind in ProtocolKind::ALL {
        let mut s = sync_sim(3, &[], 5, &[], AdversaryKind::WorstCase, 11);
        let stats = match kind {
            ProtocolKind::Pcs => pcs(&mut s, C1, C2, &v(), 10).unwrap(),
            ProtocolKind::Ppcs => ppcs(&mut s, C1, C2, &v(), 10).unwrap(),
            ProtocolKind::PlcsMin => plcs(&mut s, C1, C2, &v(), ListPairFunction::SfMin).unwrap(),
            ProtocolKind::PlcsMax => plcs(&mut s, C1, C2, &v(), ListPairFunction::SfMax).unwrap(),
        };
        assert!(stats.confirmed, "{kind}");
        assert_eq!(stats.cs_steps, 1, "{kind}");
        assert_eq!((stats.consensus_c1, stats.consensus_c2), (2, 1), "{kind}");
        assert_eq!(stats.inter_cluster_msgs, 2, "{kind}");
        assert_eq!(stats.pulses, 3, "{kind}");
    }
}

#[test]
fn sync_protocols_refuse_async_networks() {
    let net = NetworkConfig::asynchronous(0.0, 0.0, DelayDist::default());
    let cfg = SimConfig::new(net, AdversaryStrategy::default(), 0);
    let mut s = Simulation::new(cluster(C1, 3, &[]), cluster(C2, 3, &[]), cfg).unwrap();
    assert!(matches!(
        pcs(&mut s, C1, C2, &v(), 5),
        Err(ProtocolError::RequiresSync(_))
    ));
}

#[test]
fn pcs_gives_up_after_max_iters() {
    // 3 of 3 pairs through a faulty sender fail; with max_iters = 1 some seed
    // picks one of them
    let unconfirmed = (0..50).any(|seed| {
        let mut s = sync_sim(3, &[0], 3, &[0], AdversaryKind::WorstCase, seed);
        let stats = pcs(&mut s, C1, C2, &v(), 1).unwrap();
        assert_eq!(stats.cs_steps, 1);
        !stats.confirmed
    });
    assert!(unconfirmed);
}

#[test]
fn ppcs_worst_case_three_replicas() {
    for seed in 0..2000 {
        let f1 = [(seed % 3) as u32];
        let f2 = [((seed / 3) % 3) as u32];
        let mut s = sync_sim(3, &f1, 3, &f2, AdversaryKind::WorstCase, seed);
        let stats = ppcs(&mut s, C1, C2, &v(), 100).unwrap();
        assert!(stats.confirmed);
        assert!(stats.cs_steps <= 4, "seed {seed}: {} steps", stats.cs_steps);
    }
}

#[test]
fn pruning_only_excludes_faulty_replicas() {
    let kinds = [
        AdversaryKind::WorstCase,
        AdversaryKind::Silent,
        AdversaryKind::DropOutbound,
        AdversaryKind::Randomized(3),
    ];
    for seed in 0..400u64 {
        let kind = kinds[(seed % 4) as usize];
        let n1 = 5 + (seed % 3) as u32;
        let c1 = cluster(C1, n1, &[1, 3]);
        let c2 = cluster(C2, 7, &[0, 2, 6]);
        let mut s = Simulation::new(c1.clone(), c2.clone(), SimConfig::sync(kind, seed)).unwrap();
        let mut source = PrunedPairs::new(&c1, &c2);
        let stats = run_sync(&mut s, C1, C2, &v(), &mut source, Some(1000)).unwrap();
        assert!(stats.confirmed);
        assert!(stats.cs_steps <= 3 * 4);
        assert!(source.state().excluded_1().iter().all(|r| c1.is_faulty(*r)));
        assert!(source.state().excluded_2().iter().all(|r| c2.is_faulty(*r)));
        for (r1, _) in source.state().tried() {
            if source.state().excluded_1().contains(r1) {
                assert!(source.state().fail_count_1(*r1) > c2.f());
            }
        }
    }
}

#[test]
fn plcs_worst_case_four_replicas() {
    for seed in 0..2000 {
        let f1 = [(seed % 4) as u32];
        let f2 = [((seed / 4) % 4) as u32];
        let mut s = sync_sim(4, &f1, 4, &f2, AdversaryKind::WorstCase, seed);
        let stats = plcs(&mut s, C1, C2, &v(), ListPairFunction::SfMin).unwrap();
        assert!(stats.confirmed);
        assert!(stats.cs_steps <= 3);
    }
}

#[test]
fn plcs_rejects_non_robust_lists_before_any_step() {
    let mut s = sync_sim(3, &[0], 5, &[0, 1], AdversaryKind::WorstCase, 0);
    let err = plcs(&mut s, C1, C2, &v(), ListPairFunction::SfMin).unwrap_err();
    assert!(matches!(err, ProtocolError::Robustness { n: 3, faulty: 3 }));
    assert_eq!(s.cs_steps(), 0);
}

#[test]
fn consensus_is_spent_at_most_three_times() {
    for kind in ProtocolKind::ALL {
        for seed in 0..200 {
            let mut s = sync_sim(
                7,
                &[0, 4],
                7,
                &[2, 5],
                AdversaryKind::Randomized(seed),
                seed,
            );
            let stats = match kind {
                ProtocolKind::Pcs => pcs(&mut s, C1, C2, &v(), 100).unwrap(),
                ProtocolKind::Ppcs => ppcs(&mut s, C1, C2, &v(), 100).unwrap(),
                ProtocolKind::PlcsMin => {
                    plcs(&mut s, C1, C2, &v(), ListPairFunction::SfMin).unwrap()
                }
                ProtocolKind::PlcsMax => {
                    plcs(&mut s, C1, C2, &v(), ListPairFunction::SfMax).unwrap()
                }
            };
            assert!(stats.consensus_c1 <= 2 && stats.consensus_c2 <= 1);
            assert!(s.into_trace(stats.confirmed).audit(true).is_empty());
        }
    }
}

/// Faulty entries of `repeat(n, List(C))` for a cluster of `len` replicas
/// whose faulty indices are `faulty`.
fn repeated_faults(n: u32, len: u32, faulty: &[u32]) -> u32 {
    (0..n).filter(|i| faulty.contains(&(i % len))).count() as u32
}

#[test]
fn sf_max_keeps_a_non_faulty_position_for_3f_clusters() {
    for n1 in 1..=13u32 {
        for n2 in 1..=13u32 {
            let n = n1.max(n2);
            for f1 in 0..=(n1 - 1) / 3 {
                for f2 in 0..=(n2 - 1) / 3 {
                    // only how many faulty indices fall in the wrapped prefix
                    // matters, so place j of them there and the rest after it
                    let placements = |len: u32, f: u32| -> Vec<Vec<u32>> {
                        let r = n % len;
                        let lo = f.saturating_sub(len - r);
                        (lo..=f.min(r))
                            .map(|j| (0..j).chain(r..r + (f - j)).collect())
                            .collect()
                    };
                    for p1 in placements(n1, f1) {
                        for p2 in placements(n2, f2) {
                            let c1 = cluster(C1, n1, &p1);
                            let c2 = cluster(C2, n2, &p2);
                            let (s1, s2) = sf_max(&c1, &c2);
                            let fs1 = s1.iter().filter(|r| c1.is_faulty(**r)).count() as u32;
                            let fs2 = s2.iter().filter(|r| c2.is_faulty(**r)).count() as u32;
                            assert_eq!(fs1, repeated_faults(n, n1, &p1));
                            assert_eq!(fs2, repeated_faults(n, n2, &p2));
                            let (big, small) = if n1 >= n2 { (fs1, fs2) } else { (fs2, fs1) };
                            assert!(n > 3 * big && n > 2 * small, "({n1},{f1}) ({n2},{f2})");
                            assert!(n > fs1 + fs2);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn permutations_are_uniform() {
    let list = cluster(C1, 4, &[]).list();
    let other = cluster(C2, 4, &[]).list();
    let mut coin = SharedCoin::new(2024, C1);
    let trials = 100_000u32;
    let mut freq: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
    for _ in 0..trials {
        let pair = random_permutation_pair(&list, &other, &mut coin, |_| false).unwrap();
        *freq
            .entry(pair.p1.iter().map(|r| r.index).collect())
            .or_default() += 1;
    }
    assert_eq!(freq.len(), 24);
    let p = 1.0 / 24.0;
    let sigma = (f64::from(trials) * p * (1.0 - p)).sqrt();
    for (perm, count) in freq {
        let dev = (f64::from(count) - f64::from(trials) * p).abs();
        assert!(dev <= 3.0 * sigma, "{perm:?}: {count}");
    }
}

#[test]
fn permutation_draws_are_reproducible() {
    let list = cluster(C1, 6, &[]).list();
    let draw = || {
        let mut coin = SharedCoin::new(99, C1);
        random_permutation_pair(&list, &list, &mut coin, |_| false).unwrap()
    };
    assert_eq!(draw(), draw());
}

fn async_sim(net: NetworkConfig, kind: AdversaryKind, seed: u64, f: &[u32]) -> Simulation {
    let mut cfg = SimConfig::new(net, AdversaryStrategy::uniform(kind), seed);
    cfg.max_pulses = 1_000_000;
    Simulation::new(cluster(C1, 4, f), cluster(C2, 4, f), cfg).unwrap()
}

#[test]
fn async_without_loss_behaves_like_sync() {
    let net = NetworkConfig::asynchronous(0.0, 0.0, DelayDist { min: 0, max: 4 });
    for seed in 0..50 {
        let mut s = async_sim(net.clone(), AdversaryKind::WorstCase, seed, &[]);
        let mut source = pair_source(ProtocolKind::Pcs, &s, C1, C2).unwrap();
        let params = AsyncParams {
            delta: 11,
            parallel_rounds: 1,
        };
        let stats = async_drive(&mut s, C1, C2, &v(), source.as_mut(), params).unwrap();
        assert!(stats.confirmed);
        assert_eq!(stats.cs_steps, 1);
        assert_eq!(stats.inter_cluster_msgs, 2);
    }
}

#[test]
fn four_parallel_rounds_cost_at_most_eight_messages() {
    let net = NetworkConfig::asynchronous(0.0, 0.0, DelayDist { min: 0, max: 4 });
    for seed in 0..50 {
        let mut s = async_sim(net.clone(), AdversaryKind::WorstCase, seed, &[]);
        let mut source = pair_source(ProtocolKind::Ppcs, &s, C1, C2).unwrap();
        let stats = async_drive(
            &mut s,
            C1,
            C2,
            &v(),
            source.as_mut(),
            AsyncParams::for_max_delay(4),
        )
        .unwrap();
        assert!(stats.confirmed);
        assert_eq!(stats.cs_steps, 4);
        assert!(stats.inter_cluster_msgs <= 8);
    }
}

#[test]
fn async_recovers_after_an_outage() {
    let net = NetworkConfig::asynchronous(0.1, 0.1, DelayDist { min: 0, max: 4 }).with_outage(50);
    for kind in ProtocolKind::ALL {
        for seed in 0..30 {
            let mut s = async_sim(net.clone(), AdversaryKind::WorstCase, seed, &[1]);
            let mut source = pair_source(kind, &s, C1, C2).unwrap();
            let stats = async_drive(
                &mut s,
                C1,
                C2,
                &v(),
                source.as_mut(),
                AsyncParams::for_max_delay(4),
            )
            .unwrap();
            assert!(stats.confirmed, "{kind} seed {seed}");
            let trace = s.into_trace(true);
            assert!(trace.audit(true).is_empty());
            // deadlines double
            let launches: Vec<(u64, u64)> = trace
                .events
                .iter()
                .filter_map(|e| match e.kind {
                    EventKind::StepLaunch { index, deadline } => Some((index, deadline)),
                    _ => None,
                })
                .collect();
            for (index, deadline) in launches {
                assert_eq!(deadline, 11 << index);
            }
        }
    }
}
