#[path = "support/oracle.rs"]
mod support;

use proptest::prelude::*;
use support::*;
use uam_ecosim::engine::{self, VehicleState};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn event_log_matches_brute_force(c in case()) {
        if let Some(diff) = compare(&c) {
            let (sc, requests) = build(&c);
            let out = engine::run_with_requests(&sc, requests.clone(), true).unwrap();
            assert_same(&Oracle::new(&sc, &requests).run(), &engine_log(out.events.as_ref().unwrap()));
            panic!("{diff}");
        }
    }
}

#[test]
fn single_request_hand_trace() {
    let c = Case {
        fleet: 1,
        capacities: [1, 1, 1],
        arrival_sep: [1.5; 3],
        departure_sep: [1.5; 3],
        takeoff: 3.0,
        landing: 3.0,
        turnaround: 10.0,
        rebalance: false,
        space_lookahead: 2,
        demand_lookahead: 1,
        requests: vec![(0.0, 0, 1)],
    };
    let (sc, requests) = build(&c);
    let out = engine::run_with_requests(&sc, requests, true).unwrap();
    let log = engine_log(out.events.as_ref().unwrap());
    let cruise = haversine(0, 1) / 140.0 * 60.0;
    let times: Vec<f64> = log.iter().map(|l| l.0).collect();
    let want = [0.0, 0.0, 3.0, 3.0 + cruise, 3.0 + cruise, 6.0 + cruise, 16.0 + cruise];
    assert_eq!(times.len(), want.len());
    for (t, w) in times.iter().zip(want) {
        assert!((t - w).abs() < 1e-9, "{t} vs {w}");
    }
    assert_eq!(log.last().unwrap().3, VehicleState::Idle);
    assert_eq!(out.ledger.requests[0].t_takeoff, Some(0.0));
    assert_same(&Oracle::new(&sc, &out.requests).run(), &log);
}
