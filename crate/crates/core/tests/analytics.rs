use arace::analytics::{cross_validate, AnalyticsError, ComparisonReport, EnvelopeAnalysis, EnvelopeParams, ModelParams};
use arace::netsim;
use arace::scenario::{PropagationMode, SimScenario};
use num_rational::Ratio;

fn base(mode: PropagationMode) -> SimScenario {
    let mut sc = SimScenario::from_toml(
        r#"
seed = 3
mode = "ar-ace"
[topology]
nodes = 10
degree = 4
[timing]
tick_interval = 0.25
run_ticks = 40
[workload]
objects = 60
submitters = 4
submit_per_tick = 3
invalid_fraction = 0.2
[adversary]
forged = 10
replays = 10
"#,
    )
    .unwrap();
    sc.mode = mode;
    sc
}

#[test]
fn every_mode_matches_its_model() {
    for mode in PropagationMode::ALL {
        let sc = base(mode);
        let r = netsim::run(&sc).unwrap().report;
        let d = cross_validate(&r, &ModelParams::from_scenario(&sc)).unwrap();
        assert!(d.is_empty(), "{mode}: {d:?}");
    }
}

#[test]
fn wrong_tick_interval_is_reported() {
    let sc = base(PropagationMode::RecursiveTick);
    let r = netsim::run(&sc).unwrap().report;
    let mut p = ModelParams::from_scenario(&sc);
    p.tick_seconds = Ratio::new(1, 2);
    let d = cross_validate(&r, &p).unwrap();
    assert_eq!(d.len(), 3 * 10);
    assert!(d.iter().all(|x| x.quantity.ends_with("proof-rate")));
}

#[test]
fn wrong_mode_or_topology_is_an_error() {
    let sc = base(PropagationMode::ArAce);
    let r = netsim::run(&sc).unwrap().report;
    let mut p = ModelParams::from_scenario(&sc);
    p.mode = PropagationMode::RecursiveTick;
    assert!(matches!(cross_validate(&r, &p), Err(AnalyticsError::Mismatch(_))));
    let mut p = ModelParams::from_scenario(&sc);
    p.nodes = 11;
    assert!(cross_validate(&r, &p).is_err());
}

#[test]
fn wrong_attestation_size_is_reported() {
    let sc = base(PropagationMode::ArAce);
    let r = netsim::run(&sc).unwrap().report;
    let mut p = ModelParams::from_scenario(&sc);
    p.attest_overhead += 1;
    let d = cross_validate(&r, &p).unwrap();
    assert!(!d.is_empty());
    assert!(d.iter().all(|x| x.quantity == "attestation-bytes"));
}

#[test]
fn comparison_table_lists_each_mode() {
    let runs: Vec<_> = PropagationMode::ALL
        .iter()
        .map(|&m| {
            let sc = base(m);
            let r = netsim::run(&sc).unwrap().report;
            (sc, r)
        })
        .collect();
    let env = EnvelopeAnalysis::new(EnvelopeParams::new(50_000, 1200, 1, 100, 1).unwrap());
    let c = ComparisonReport::build(&runs, Some(env)).unwrap();
    assert_eq!(c.discrepancy_count(), 0);
    let ar = c.rows.iter().find(|r| r.mode == PropagationMode::ArAce).unwrap();
    assert_eq!(ar.relay_link_proof_bytes, 0);
    let table = c.render_table();
    assert_eq!(table.lines().count(), 1 + 3 + 2);
    for m in PropagationMode::ALL {
        assert!(table.contains(&m.to_string()));
    }
    assert!(table.contains("threshold 41.67"));
}
