use std::sync::{Arc, Mutex};
use std::time::Instant;

use clustersend_core::protocols::{ppcs_with_chooser, ppcs_worst_case};
use clustersend_core::simnet::{AdversaryKind, SimConfig, Simulation};
use clustersend_core::{ClusterConfig, ClusterId, Value};
use itertools::Itertools;

const C1: ClusterId = ClusterId(1);
const C2: ClusterId = ClusterId(2);

fn placements(n: u32) -> Vec<Vec<u32>> {
    (0..=(n - 1) / 2)
        .flat_map(|f| (0..n).combinations(f as usize))
        .collect()
}

#[test]
fn worst_case_bound_is_tight_for_every_placement() {
    let start = Instant::now();
    for n1 in 1..=5 {
        for n2 in 1..=5 {
            for p1 in placements(n1) {
                for p2 in placements(n2) {
                    let c1 = ClusterConfig::new(C1, n1, p1.clone()).unwrap();
                    let c2 = ClusterConfig::new(C2, n2, p2.clone()).unwrap();
                    let bound = u64::from(c1.f() + 1) * u64::from(c2.f() + 1);
                    let worst = ppcs_worst_case(&c1, &c2).unwrap();
                    assert_eq!(worst.steps, bound, "{n1} {p1:?} / {n2} {p2:?}");
                }
            }
        }
    }
    assert!(
        start.elapsed().as_secs() < 120,
        "took {:?}",
        start.elapsed()
    );
}

#[test]
fn worst_path_replays_in_the_simulator() {
    let c1 = ClusterConfig::new(C1, 5, [1, 4]).unwrap();
    let c2 = ClusterConfig::new(C2, 5, [0, 2]).unwrap();
    let worst = ppcs_worst_case(&c1, &c2).unwrap();
    assert_eq!(worst.steps, 9);
    let script = Arc::new(Mutex::new(worst.choices.clone().into_iter()));
    let chooser =
        Box::new(move |_: &[_]| script.lock().unwrap().next().expect("script long enough"));
    let mut sim = Simulation::new(c1, c2, SimConfig::sync(AdversaryKind::WorstCase, 0)).unwrap();
    let (stats, _) = ppcs_with_chooser(&mut sim, C1, C2, &Value::from("v"), 100, chooser).unwrap();
    assert!(stats.confirmed);
    assert_eq!(stats.cs_steps, 9);
}
