use clustersend_core::protocols::{cs_step, STEP_PULSES};
use clustersend_core::simnet::{
    AdversaryKind, AdversaryStrategy, DelayDist, EventKind, MessageKind, NetworkConfig, SimConfig,
    Simulation,
};
use clustersend_core::{ClusterConfig, ClusterId, ProtocolMessage, Value};

const C1: ClusterId = ClusterId(1);
const C2: ClusterId = ClusterId(2);

fn clusters(f1: &[u32], f2: &[u32]) -> (ClusterConfig, ClusterConfig) {
    (
        ClusterConfig::new(C1, 4, f1.iter().copied()).unwrap(),
        ClusterConfig::new(C2, 4, f2.iter().copied()).unwrap(),
    )
}

fn sim(f1: &[u32], f2: &[u32], config: SimConfig) -> Simulation {
    let (a, b) = clusters(f1, f2);
    Simulation::new(a, b, config).unwrap()
}

fn count(sim: &Simulation, pred: impl Fn(&EventKind) -> bool) -> usize {
    sim.events().iter().filter(|e| pred(&e.kind)).count()
}

#[test]
fn empty_pulse_only_advances_the_clock() {
    let mut s = sim(&[], &[], SimConfig::sync(AdversaryKind::WorstCase, 1));
    assert_eq!(s.advance_pulse(), 1);
    assert_eq!(s.advance_pulse(), 2);
    assert!(s.events().is_empty());
}

#[test]
fn sync_send_is_handled_in_the_next_pulse() {
    let mut s = sim(&[], &[], SimConfig::sync(AdversaryKind::WorstCase, 1));
    let m = s.agree(C1, C2, &Value::from("v")).unwrap();
    let r1 = s.cluster(C1).unwrap().replica(0);
    let r2 = s.cluster(C2).unwrap().replica(3);
    s.send_inter_cluster(r1, r2, ProtocolMessage::Send(m.clone()))
        .unwrap();
    assert_eq!(s.inter_cluster_msgs(), 1);
    s.advance_pulse();
    assert_eq!(count(&s, |k| matches!(k, EventKind::Deliver { .. })), 0);
    s.advance_pulse();
    let delivered: Vec<_> = s
        .events()
        .iter()
        .filter(|e| {
            matches!(
                e.kind,
                EventKind::Deliver {
                    message: MessageKind::Send
                }
            )
        })
        .collect();
    assert_eq!(delivered.len(), 1);
    assert_eq!(delivered[0].pulse, 1);
    // the receiver replied with a proof
    assert_eq!(s.inter_cluster_msgs(), 2);
    assert!(s.decisions(r2).unwrap().received.is_some());
}

#[test]
fn same_cluster_send_is_rejected() {
    let mut s = sim(&[], &[], SimConfig::sync(AdversaryKind::WorstCase, 1));
    let m = s.agree(C1, C2, &Value::from("v")).unwrap();
    let a = s.cluster(C1).unwrap().replica(0);
    let b = s.cluster(C1).unwrap().replica(1);
    assert!(s
        .send_inter_cluster(a, b, ProtocolMessage::Send(m))
        .is_err());
}

#[test]
fn certain_drop_delivers_nothing_but_counts_the_message() {
    let net = NetworkConfig::asynchronous(1.0, 0.0, DelayDist::default());
    let mut s = sim(
        &[],
        &[],
        SimConfig::new(net, AdversaryStrategy::default(), 3),
    );
    let m = s.agree(C1, C2, &Value::from("v")).unwrap();
    let r1 = s.cluster(C1).unwrap().replica(0);
    let r2 = s.cluster(C2).unwrap().replica(0);
    s.send_inter_cluster(r1, r2, ProtocolMessage::Send(m))
        .unwrap();
    for _ in 0..20 {
        s.advance_pulse();
    }
    assert_eq!(s.inter_cluster_msgs(), 1);
    assert_eq!(count(&s, |k| matches!(k, EventKind::Deliver { .. })), 0);
    assert_eq!(count(&s, |k| matches!(k, EventKind::Drop { .. })), 1);
}

fn run_one_step(net: NetworkConfig, seed: u64) -> Simulation {
    let mut s = sim(
        &[],
        &[],
        SimConfig::new(net, AdversaryStrategy::default(), seed),
    );
    let m = s.agree(C1, C2, &Value::from("v")).unwrap();
    let r1 = s.cluster(C1).unwrap().replica(1);
    let r2 = s.cluster(C2).unwrap().replica(2);
    s.instruct(r1, r2, &m, 0, 100).unwrap();
    for _ in 0..40 {
        s.advance_pulse();
    }
    s
}

#[test]
fn duplication_does_not_change_the_outcome() {
    let plain = run_one_step(
        NetworkConfig::asynchronous(0.0, 0.0, DelayDist::fixed(1)),
        9,
    );
    let duped = run_one_step(
        NetworkConfig::asynchronous(0.0, 1.0, DelayDist::fixed(1)),
        9,
    );
    assert_eq!(
        count(&duped, |k| matches!(k, EventKind::Duplicate { .. })),
        3
    );
    assert_eq!(plain.stats().consensus_c1, duped.stats().consensus_c1);
    assert_eq!(plain.stats().consensus_c2, duped.stats().consensus_c2);
    for r in plain.clusters().iter().flat_map(|c| c.list()) {
        assert_eq!(plain.decisions(r), duped.decisions(r));
    }
    // every duplicate SEND is answered, duplicates are never counted
    assert_eq!(plain.inter_cluster_msgs(), 2);
    assert!(duped.inter_cluster_msgs() >= 2);
    assert!(duped.trace(true).audit(true).is_empty());
}

#[test]
fn sync_never_delays_drops_or_duplicates() {
    let mut net = NetworkConfig::asynchronous(0.9, 0.9, DelayDist { min: 2, max: 7 });
    net.mode = clustersend_core::simnet::NetworkMode::Sync;
    let s = run_one_step(net, 4);
    assert_eq!(
        count(&s, |k| matches!(
            k,
            EventKind::Drop { .. } | EventKind::Duplicate { .. }
        )),
        0
    );
    for e in s
        .events()
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Transmit { .. }))
    {
        let handled = s
            .events()
            .iter()
            .find(|d| {
                matches!(d.kind, EventKind::Deliver { .. })
                    && d.from == e.from
                    && d.to == e.to
                    && d.pulse > e.pulse
            })
            .expect("every transmission is delivered");
        assert_eq!(handled.pulse, e.pulse + 1);
    }
}

#[test]
fn worst_case_receiver_sends_no_proof() {
    let mut s = sim(&[], &[0], SimConfig::sync(AdversaryKind::WorstCase, 1));
    let m = s.agree(C1, C2, &Value::from("v")).unwrap();
    let r1 = s.cluster(C1).unwrap().replica(0);
    let r2 = s.cluster(C2).unwrap().replica(0);
    let out = cs_step(&mut s, r1, r2, &m).unwrap();
    assert!(!out.success);
    assert_eq!(out.messages_sent, 1);
    assert_eq!(
        count(&s, |k| matches!(
            k,
            EventKind::Transmit {
                message: MessageKind::Proof
            }
        )),
        0
    );
    assert_eq!(s.pulse(), STEP_PULSES);
}

#[test]
fn identical_seeds_give_identical_traces() {
    let net = NetworkConfig::asynchronous(0.3, 0.3, DelayDist { min: 0, max: 5 });
    let cfg = SimConfig::new(
        net,
        AdversaryStrategy::uniform(AdversaryKind::Randomized(5)),
        42,
    );
    let run = || {
        let mut s = sim(&[1], &[2], cfg.clone());
        let m = s.agree(C1, C2, &Value::from("v")).unwrap();
        for i in 0..4 {
            let r1 = s.cluster(C1).unwrap().replica(i);
            let r2 = s.cluster(C2).unwrap().replica(3 - i);
            s.instruct(r1, r2, &m, u64::from(i), 50).unwrap();
            for _ in 0..5 {
                s.advance_pulse();
            }
        }
        s.into_trace(false)
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    assert_eq!(a.to_jsonl(), b.to_jsonl());
    assert!(!a.events.is_empty());
}

#[test]
fn forged_certificates_are_rejected() {
    let cfg = SimConfig::sync(AdversaryKind::Randomized(1), 8);
    let mut s = sim(&[0], &[1], cfg);
    s.agree(C1, C2, &Value::from("v")).unwrap();
    for _ in 0..400 {
        s.advance_pulse();
    }
    assert!(s.forged_attempts() > 0);
    assert!(count(&s, |k| matches!(k, EventKind::Reject { .. })) as u64 >= s.forged_attempts());
    // nothing was received: forgeries never pass and there was no real step
    for r in s.cluster(C2).unwrap().list() {
        assert_eq!(s.decisions(r).unwrap().received, None);
    }
    assert!(s.trace(false).audit(true).is_empty());
}

#[test]
fn trace_exports_one_json_object_per_event() {
    let mut s = sim(&[], &[], SimConfig::sync(AdversaryKind::WorstCase, 1));
    let m = s.agree(C1, C2, &Value::from("v")).unwrap();
    let r1 = s.cluster(C1).unwrap().replica(0);
    let r2 = s.cluster(C2).unwrap().replica(0);
    cs_step(&mut s, r1, r2, &m).unwrap();
    let trace = s.into_trace(true);
    let text = trace.to_jsonl();
    assert_eq!(text.lines().count(), trace.events.len());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("pulse").is_some() && v.get("kind").is_some());
    }
    assert!(text.contains(r#""kind":"transmit","message":"SEND","from":"r1.0","to":"r2.0""#));
}
