//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use arace::admission::AdmissionFault;
use arace::analytics::{breakeven_threshold, cpu_ratio, cross_validate, proof_carrying_total, EnvelopeParams, ModelParams};
use arace::attestation::on_path_overhead;
use arace::crypto::ProfileKind;
use arace::games::{self, GameConfig, TrialCounts};
use arace::netsim::{self, Endpoint};
use arace::scenario::{PropagationMode, SimScenario};
use arace_cli::{bundled, load_scenario, simulate_report};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PROOF: u64 = 131_072;
const SEED: u64 = 2024;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arace"))
}

fn bundled_scenarios() -> Vec<SimScenario> {
    bundled::names().map(|n| load_scenario(n, None).unwrap()).collect()
}

fn recursive_bandwidth() -> Outcome {
    let start = Instant::now();
    let sc = load_scenario("recursive-d8", None).unwrap();
    ensure(
        sc.topology.nodes == 9
            && sc.topology.degree == 8
            && sc.timing.tick_seconds() == Ratio::new(1, 2)
            && sc.timing.window_seconds() == Ratio::from_integer(60)
            && sc.proof_size == PROOF,
        || "recursive-d8 is not K=9, d=8, T=0.5 s, 60 s, 131072 B".into(),
    )?;
    let r = netsim::run(&sc).unwrap().report;
    for rate in &r.proof_rates {
        ensure(rate.outbound.0 == Ratio::from_integer(2_097_152), || {
            format!("relay {} outbound {} B/s", rate.relay, rate.outbound.0)
        })?;
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(10), || format!("took {took:?}"))?;
    Ok(format!(
        "per-node outbound proof rate 2097152 B/s on all {} relays ({:.2} s)",
        r.proof_rates.len(),
        took.as_secs_f64()
    ))
}

fn proof_off_path() -> Outcome {
    let mut names = Vec::new();
    for sc in bundled_scenarios().into_iter().filter(|s| s.mode == PropagationMode::ArAce) {
        let r = netsim::run(&sc).unwrap().report;
        let bytes = r.ledger.relay_link_proof_bytes();
        ensure(bytes == 0, || format!("{}: {bytes} relay-link proof bytes", sc.name))?;
        names.push(sc.name);
    }
    ensure(!names.is_empty(), || "no bundled AR-ACE scenario".into())?;
    Ok(format!("relay-link proof bytes 0 in {}", names.join(", ")))
}

fn proof_carrying_growth() -> Outcome {
    let base = load_scenario("proof-carrying-line2", None).unwrap();
    ensure(base.topology.nodes == 2 && base.topology.degree == 1, || "not a 2-node line".into())?;
    let mut seen = Vec::new();
    for n in [10u64, 100, 1000] {
        let mut sc = base.clone();
        sc.workload.objects = n;
        let r = netsim::run(&sc).unwrap().report;
        let got = r.ledger.relay_link_proof_bytes();
        let want = proof_carrying_total(n, PROOF);
        ensure(got as u128 == want && want == (n * PROOF) as u128, || {
            format!("n={n}: {got} link proof bytes, expected {want}")
        })?;
        seen.push(format!("{n}->{got}"));
    }
    Ok(format!("link proof bytes = n * 131072 ({})", seen.join(", ")))
}

fn attestation_overhead() -> Outcome {
    let mut parts = Vec::new();
    for (kind, sig) in [(ProfileKind::HybridPerformance, 64u64), (ProfileKind::FullPqc, 2420)] {
        let text = format!(
            "{}\n[profile]\nkind = \"{}\"\n",
            bundled::get("proof-carrying-line2")
                .unwrap()
                .replace("mode = \"proof-carrying\"", "mode = \"ar-ace\""),
            match kind {
                ProfileKind::HybridPerformance => "hybrid-performance",
                ProfileKind::FullPqc => "full-pqc",
            }
        );
        let sc = SimScenario::from_toml(&text).unwrap();
        ensure(sc.workload.objects == 1000, || "workload is not 1000 objects".into())?;
        let r = netsim::run(&sc).unwrap().report;
        let link = r.ledger.link(Endpoint::Submitter(0), Endpoint::Relay(0));
        let per = on_path_overhead(&sc.profile);
        ensure(link.envelopes == 1000, || format!("{} envelopes delivered", link.envelopes))?;
        ensure(link.bytes.attestation == 1000 * per, || {
            format!("{kind:?}: {} attestation bytes, expected {}", link.bytes.attestation, 1000 * per)
        })?;
        ensure(link.signature_bytes == 1000 * sig, || {
            format!("{kind:?}: {} signature bytes, expected {}", link.signature_bytes, 1000 * sig)
        })?;
        parts.push(format!("{} B/envelope ({sig} B signature)", per));
    }
    Ok(format!("1000 envelopes on submitter->relay: {}", parts.join(" and ")))
}

fn compute_envelope() -> Outcome {
    let out = bin()
        .args(["envelope", "--objects", "50000", "--ticks", "1200", "--light", "1", "--heavy", "100", "--relays", "1"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    ensure(out.status.success(), || format!("envelope exited {}", out.status))?;
    ensure(text.contains("threshold      41.67"), || format!("unexpected output: {text}"))?;
    ensure(breakeven_threshold(50_000, 1200).unwrap().display() == "41.67", || "library display".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut counterexamples = 0;
    for _ in 0..10_000 {
        let p = EnvelopeParams::new(
            rng.gen_range(1..1_000_000),
            rng.gen_range(1..1_000_000),
            rng.gen_range(1..10_000),
            rng.gen_range(1..10_000),
            rng.gen_range(1..1_000),
        )
        .unwrap();
        let lhs = cpu_ratio(&p) < Ratio::from_integer(1);
        let rhs = Ratio::new(p.heavy as u128, p.light as u128) > breakeven_threshold(p.objects, p.ticks).unwrap().0;
        if lhs != rhs {
            counterexamples += 1;
        }
    }
    ensure(counterexamples == 0, || format!("{counterexamples} counterexamples"))?;
    Ok("threshold 41.67; iff-property holds on 10^4 draws, 0 counterexamples".into())
}

fn security_games() -> Outcome {
    let start = Instant::now();
    let counts = TrialCounts::default();
    ensure(
        counts.forge >= 100_000
            && counts.replay >= 10_000
            && counts.admit >= 10_000
            && counts.net_mutation >= 10_000
            && counts.state_runs >= 100,
        || "trial counts below the required minimum".into(),
    )?;
    let cfg = GameConfig::default();
    let outcomes = games::run_all(&counts, SEED, &cfg);
    for g in &outcomes {
        ensure(g.passed(), || format!("{}: {} successes, e.g. {:?}", g.game, g.successes, g.witnesses.first()))?;
    }
    let took = start.elapsed();

    // Each detector must fire on its deliberately broken counterpart.
    let broken = |f| GameConfig {
        fault: Some(f),
        ..GameConfig::default()
    };
    let controls = [
        ("forge", games::run_forge_game(50, SEED, 4, &broken(AdmissionFault::SkipSignature))),
        ("replay", games::run_replay_game(50, SEED, &broken(AdmissionFault::SkipNonce))),
        ("admit", games::run_admit_game(50, SEED, &broken(AdmissionFault::SkipEligibility))),
        ("net-mutation", games::run_net_mutation_game(50, SEED, &broken(AdmissionFault::SkipSignature))),
        (
            "state-conformance",
            games::run_state_conformance_campaign(2, SEED, &broken(AdmissionFault::SkipEpochReset)),
        ),
    ];
    for (name, c) in &controls {
        ensure(c.successes > 0, || format!("{name} detector missed its negative control"))?;
    }
    ensure(took < Duration::from_secs(300), || format!("campaigns took {took:?}"))?;
    let summary: Vec<String> = outcomes.iter().map(|g| format!("{} {}/{}", g.game, g.successes, g.trials)).collect();
    Ok(format!(
        "{}; all {} negative controls flagged ({:.1} s)",
        summary.join(", "),
        controls.len(),
        took.as_secs_f64()
    ))
}

fn inclusion_safety() -> Outcome {
    let g = games::run_inclusion_safety_campaign(50, SEED, &GameConfig::default());
    ensure(g.trials == 50, || "wrong run count".into())?;
    ensure(g.passed(), || format!("{} runs finalized invalid objects", g.successes))?;
    let pooled = g.counters.get("invalid-pool-entries").copied().unwrap_or(0);
    ensure(pooled > 0, || "no invalid objects reached relay pools".into())?;
    Ok(format!(
        "0 invalid objects in {} accepted blocks over 50 runs; {pooled} invalid pool entries",
        g.counters.get("blocks-accepted").copied().unwrap_or(0)
    ))
}

fn determinism() -> Outcome {
    let mut checked = 0;
    for name in bundled::names() {
        let golden = bundled::golden(name).unwrap();
        for run in 1..=3 {
            let out = bin().args(["simulate", "--config", name]).output().unwrap();
            ensure(out.status.success(), || format!("{name}: exit {}", out.status))?;
            ensure(out.stdout == golden.as_bytes(), || format!("{name}: run {run} differs from golden"))?;
            checked += 1;
        }
        let sc = load_scenario(name, None).unwrap();
        let lib = simulate_report(&sc).unwrap().0.to_json();
        ensure(lib == golden, || format!("{name}: library report differs from golden"))?;
    }
    Ok(format!("{checked} runs byte-identical to the golden reports"))
}

fn model_agreement() -> Outcome {
    let mut names = Vec::new();
    for sc in bundled_scenarios() {
        let r = netsim::run(&sc).unwrap().report;
        let d = cross_validate(&r, &ModelParams::from_scenario(&sc)).map_err(|e| e.to_string())?;
        ensure(d.is_empty(), || format!("{}: {:?}", sc.name, d))?;
        names.push(sc.name);
    }
    Ok(format!("no discrepancies in {}", names.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("recursive-tick bandwidth", recursive_bandwidth),
        ("proof-off-path", proof_off_path),
        ("proof-carrying growth", proof_carrying_growth),
        ("attestation overhead", attestation_overhead),
        ("compute envelope", compute_envelope),
        ("security games", security_games),
        ("inclusion safety", inclusion_safety),
        ("determinism", determinism),
        ("analytic/simulated agreement", model_agreement),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
