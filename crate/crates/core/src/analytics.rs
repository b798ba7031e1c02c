//! Closed-form bandwidth and compute models, and their cross-check against
//! simulator measurements.
//!
//! Everything is computed in exact integer or rational arithmetic; the
//! two-decimal strings exist for display only.

use std::fmt::{self, Write as _};

use num_rational::Ratio;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::attestation::on_path_overhead;
use crate::netsim::{Endpoint, Rate, SimReport};
use crate::scenario::{PropagationMode, SimScenario};

pub type Q = Ratio<u128>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyticsError {
    #[error("{0} must be strictly positive")]
    NonPositive(&'static str),
    #[error("report does not match the model parameters: {0}")]
    Mismatch(String),
}

/// Round half up to `places` decimals.
pub fn decimal(q: &Q, places: u32) -> String {
    let scale = 10u128.pow(places);
    let units = (q * Ratio::from_integer(scale) + Ratio::new(1, 2)).floor().to_integer();
    if places == 0 {
        return units.to_string();
    }
    format!("{}.{:0w$}", units / scale, units % scale, w = places as usize)
}

pub fn two_decimals(q: &Q) -> String {
    decimal(q, 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RecursiveBandwidth {
    pub outbound: Rate,
    pub inbound: Rate,
    pub combined: Rate,
}

/// Per-node tick-proof rate when each relay sends one proof to each of its
/// `d` peers every `t_seconds`. Inbound equals outbound on a regular graph.
pub fn recursive_proof_bw(proof_size: u64, d: u64, t_seconds: Q) -> Result<RecursiveBandwidth, AnalyticsError> {
    if d == 0 {
        return Err(AnalyticsError::NonPositive("degree"));
    }
    if t_seconds == Ratio::from_integer(0) {
        return Err(AnalyticsError::NonPositive("tick interval"));
    }
    let out = Ratio::from_integer(proof_size as u128 * d as u128) / t_seconds;
    Ok(RecursiveBandwidth {
        outbound: Rate(out),
        inbound: Rate(out),
        combined: Rate(out * Ratio::from_integer(2)),
    })
}

/// Proof bytes on one link that carried `n` proof-carrying envelopes.
pub fn proof_carrying_total(n: u64, proof_size: u64) -> u128 {
    n as u128 * proof_size as u128
}

pub fn attestation_overhead(n: u64, attest_size: u64) -> u128 {
    n as u128 * attest_size as u128
}

/// Inputs of the relay compute envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EnvelopeParams {
    /// Objects observed in the window.
    pub objects: u64,
    /// Relay ticks in the window.
    pub ticks: u64,
    pub relays: u64,
    /// Cost units per heavy per-tick proof verification.
    pub heavy: u64,
    /// Cost units per light per-object attestation check.
    pub light: u64,
}

impl EnvelopeParams {
    pub fn new(objects: u64, ticks: u64, light: u64, heavy: u64, relays: u64) -> Result<Self, AnalyticsError> {
        for (name, v) in [
            ("objects", objects),
            ("ticks", ticks),
            ("light cost", light),
            ("heavy cost", heavy),
            ("relays", relays),
        ] {
            if v == 0 {
                return Err(AnalyticsError::NonPositive(name));
            }
        }
        Ok(Self {
            objects,
            ticks,
            relays,
            heavy,
            light,
        })
    }
}

/// AR-ACE relay CPU over recursive-on-path relay CPU for the whole network.
/// The relay count multiplies both sides and cancels.
pub fn cpu_ratio(p: &EnvelopeParams) -> Q {
    let k = p.relays as u128;
    let arace = k * p.objects as u128 * p.light as u128;
    let recursive = k * p.ticks as u128 * p.heavy as u128;
    Ratio::new(arace, recursive)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Threshold(pub Q);

impl Threshold {
    pub fn display(&self) -> String {
        two_decimals(&self.0)
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ExactView::new(&self.0).serialize(s)
    }
}

/// `c_h / c_l` above which AR-ACE relays spend less verification CPU.
pub fn breakeven_threshold(objects: u64, ticks: u64) -> Result<Threshold, AnalyticsError> {
    if ticks == 0 {
        return Err(AnalyticsError::NonPositive("ticks"));
    }
    Ok(Threshold(Ratio::new(objects as u128, ticks as u128)))
}

#[derive(Serialize)]
struct ExactView {
    exact: String,
    display: String,
}

impl ExactView {
    fn new(q: &Q) -> Self {
        Self {
            exact: q.to_string(),
            display: two_decimals(q),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvelopeAnalysis {
    pub params: EnvelopeParams,
    pub ratio: Q,
    pub threshold: Threshold,
    pub arace_lower: bool,
}

impl EnvelopeAnalysis {
    pub fn new(params: EnvelopeParams) -> Self {
        let threshold = breakeven_threshold(params.objects, params.ticks).expect("params validated");
        let ratio = cpu_ratio(&params);
        Self {
            params,
            ratio,
            threshold,
            arace_lower: ratio < Ratio::from_integer(1),
        }
    }

    pub fn verdict(&self) -> String {
        format!("AR-ACE lower iff c_h/c_l > {}", self.threshold.display())
    }

    pub fn cost_ratio(&self) -> Q {
        Ratio::new(self.params.heavy as u128, self.params.light as u128)
    }
}

impl Serialize for EnvelopeAnalysis {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            params: &'a EnvelopeParams,
            ratio: ExactView,
            threshold: ExactView,
            cost_ratio: ExactView,
            arace_lower: bool,
            verdict: String,
        }
        View {
            params: &self.params,
            ratio: ExactView::new(&self.ratio),
            threshold: ExactView::new(&self.threshold.0),
            cost_ratio: ExactView::new(&self.cost_ratio()),
            arace_lower: self.arace_lower,
            verdict: self.verdict(),
        }
        .serialize(s)
    }
}

impl fmt::Display for EnvelopeAnalysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        writeln!(
            f,
            "N = {}, N_ticks = {}, c_l = {}, c_h = {}, K = {}",
            p.objects, p.ticks, p.light, p.heavy, p.relays
        )?;
        writeln!(f, "cpu ratio      {} ({})", decimal(&self.ratio, 4), self.ratio)?;
        writeln!(f, "threshold      {} ({})", self.threshold.display(), self.threshold.0)?;
        writeln!(
            f,
            "c_h/c_l        {} -> AR-ACE {}",
            two_decimals(&self.cost_ratio()),
            if self.arace_lower { "lower" } else { "not lower" }
        )?;
        write!(f, "verdict        {}", self.verdict())
    }
}

/// Model inputs extracted from a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub mode: PropagationMode,
    pub nodes: usize,
    pub degree: u64,
    pub proof_size: u64,
    pub tick_seconds: Q,
    pub run_ticks: u64,
    pub attest_overhead: u64,
    pub always_send: bool,
}

impl ModelParams {
    pub fn from_scenario(sc: &SimScenario) -> Self {
        Self {
            mode: sc.mode,
            nodes: sc.topology.nodes,
            degree: sc.topology.degree as u64,
            proof_size: sc.proof_size,
            tick_seconds: sc.timing.tick_seconds(),
            run_ticks: sc.timing.run_ticks,
            attest_overhead: on_path_overhead(&sc.profile),
            always_send: sc.tick_proof_always,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub quantity: String,
    pub subject: String,
    pub expected: String,
    pub measured: String,
}

/// Compare a simulation report against the closed forms. An empty list
/// means every checked quantity matched exactly.
pub fn cross_validate(report: &SimReport, params: &ModelParams) -> Result<Vec<Discrepancy>, AnalyticsError> {
    if report.mode != params.mode {
        return Err(AnalyticsError::Mismatch(format!(
            "mode {} vs {}",
            report.mode, params.mode
        )));
    }
    if report.topology.nodes != params.nodes || report.topology.degree as u64 != params.degree {
        return Err(AnalyticsError::Mismatch(format!(
            "topology {}x{} vs {}x{}",
            report.topology.nodes, report.topology.degree, params.nodes, params.degree
        )));
    }
    let mut out = Vec::new();
    let mut check = |quantity: &str, subject: String, expected: String, measured: String| {
        if expected != measured {
            out.push(Discrepancy {
                quantity: quantity.into(),
                subject,
                expected,
                measured,
            });
        }
    };
    let ledger = &report.ledger;

    for ((from, to), link) in &ledger.links {
        let subject = format!("{from}->{to}");
        check(
            "attestation-bytes",
            subject.clone(),
            attestation_overhead(link.envelopes, params.attest_overhead).to_string(),
            link.bytes.attestation.to_string(),
        );
        let expected_proof = match params.mode {
            PropagationMode::ProofCarrying => proof_carrying_total(link.envelopes, params.proof_size),
            PropagationMode::RecursiveTick => link.tick_proofs as u128 * params.proof_size as u128,
            PropagationMode::ArAce => 0,
        };
        check(
            "link-proof-bytes",
            subject,
            expected_proof.to_string(),
            link.bytes.proof.to_string(),
        );
    }

    check(
        "builder-proof-bytes",
        "builders".into(),
        (ledger.blocks_published as u128 * params.proof_size as u128).to_string(),
        ledger.builder_proof_bytes.to_string(),
    );

    let sig_checks = report.admission.signature_checks;
    let (light, heavy) = match params.mode {
        PropagationMode::ArAce => (sig_checks, 0),
        PropagationMode::ProofCarrying => (0, sig_checks),
        PropagationMode::RecursiveTick => (
            0,
            if params.always_send {
                params.nodes as u64 * params.degree * params.run_ticks
            } else {
                ledger.links.values().map(|l| l.tick_proofs).sum()
            },
        ),
    };
    check("light-checks", "network".into(), light.to_string(), ledger.light_checks().to_string());
    check("heavy-checks", "network".into(), heavy.to_string(), ledger.heavy_checks().to_string());

    if params.mode == PropagationMode::RecursiveTick && params.always_send {
        let model = recursive_proof_bw(params.proof_size, params.degree, params.tick_seconds)?;
        for r in &report.proof_rates {
            let subject = Endpoint::Relay(r.relay).to_string();
            check("outbound-proof-rate", subject.clone(), model.outbound.0.to_string(), r.outbound.0.to_string());
            check("inbound-proof-rate", subject.clone(), model.inbound.0.to_string(), r.inbound.0.to_string());
            check("combined-proof-rate", subject, model.combined.0.to_string(), r.combined.0.to_string());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeRow {
    pub mode: PropagationMode,
    pub relay_link_proof_bytes: u64,
    pub object_bytes: u64,
    pub attestation_bytes: u64,
    pub max_outbound_proof_rate: Rate,
    pub light_checks: u64,
    pub heavy_checks: u64,
    pub builder_proof_bytes: u64,
    pub discrepancies: Vec<Discrepancy>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ModeRow>,
    /// Closed-form per-node recursive rate for the scenario's graph.
    pub recursive_model: RecursiveBandwidth,
    pub envelope: Option<EnvelopeAnalysis>,
}

impl ComparisonReport {
    pub fn build(
        runs: &[(SimScenario, SimReport)],
        envelope: Option<EnvelopeAnalysis>,
    ) -> Result<Self, AnalyticsError> {
        let first = runs
            .first()
            .ok_or_else(|| AnalyticsError::Mismatch("no runs".into()))?;
        let recursive_model = recursive_proof_bw(
            first.0.proof_size,
            first.0.topology.degree as u64,
            first.0.timing.tick_seconds(),
        )?;
        let mut rows = Vec::new();
        for (sc, r) in runs {
            let discrepancies = cross_validate(r, &ModelParams::from_scenario(sc))?;
            let out = r.ledger.total_outbound();
            rows.push(ModeRow {
                mode: r.mode,
                relay_link_proof_bytes: r.ledger.relay_link_proof_bytes(),
                object_bytes: out.object,
                attestation_bytes: out.attestation,
                max_outbound_proof_rate: r
                    .proof_rates
                    .iter()
                    .map(|p| p.outbound)
                    .max()
                    .unwrap_or(Rate(Ratio::from_integer(0))),
                light_checks: r.ledger.light_checks(),
                heavy_checks: r.ledger.heavy_checks(),
                builder_proof_bytes: r.ledger.builder_proof_bytes,
                discrepancies,
            });
        }
        Ok(Self {
            rows,
            recursive_model,
            envelope,
        })
    }

    pub fn discrepancy_count(&self) -> usize {
        self.rows.iter().map(|r| r.discrepancies.len()).sum()
    }

    /// Aligned text table, one row per mode.
    pub fn render_table(&self) -> String {
        let header = [
            "mode",
            "relay proof B",
            "object B",
            "attest B",
            "max out proof B/s",
            "light",
            "heavy",
            "builder proof B",
            "discrepancies",
        ];
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.mode.to_string(),
                    r.relay_link_proof_bytes.to_string(),
                    r.object_bytes.to_string(),
                    r.attestation_bytes.to_string(),
                    two_decimals(&r.max_outbound_proof_rate.0),
                    r.light_checks.to_string(),
                    r.heavy_checks.to_string(),
                    r.builder_proof_bytes.to_string(),
                    r.discrepancies.len().to_string(),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| cells.iter().map(|c| c[i].len()).chain([header[i].len()]).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        let mut row = |vals: Vec<&str>| {
            let line: Vec<String> = vals
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (v, w))| if i == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                .collect();
            let _ = writeln!(s, "{}", line.join("  ").trim_end());
        };
        row(header.to_vec());
        for c in &cells {
            row(c.iter().map(String::as_str).collect());
        }
        let m = &self.recursive_model;
        let _ = writeln!(
            s,
            "recursive model per node: outbound {} B/s, inbound {} B/s, combined {} B/s",
            two_decimals(&m.outbound.0),
            two_decimals(&m.inbound.0),
            two_decimals(&m.combined.0)
        );
        if let Some(e) = &self.envelope {
            let _ = writeln!(
                s,
                "compute envelope: ratio {}, threshold {}, {}",
                decimal(&e.ratio, 4),
                e.threshold.display(),
                e.verdict()
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: u128, d: u128) -> Q {
        Ratio::new(n, d)
    }

    #[test]
    fn recursive_bandwidth_examples() {
        let bw = recursive_proof_bw(131_072, 8, q(1, 2)).unwrap();
        assert_eq!(bw.outbound.0, Ratio::from_integer(2_097_152));
        assert_eq!(bw.combined.0, Ratio::from_integer(4_194_304));
        let unit = recursive_proof_bw(131_072, 1, q(1, 1)).unwrap();
        assert_eq!(unit.outbound.0, Ratio::from_integer(131_072));
        assert_eq!(recursive_proof_bw(1, 0, q(1, 1)), Err(AnalyticsError::NonPositive("degree")));
        assert!(recursive_proof_bw(1, 1, q(0, 1)).is_err());
    }

    #[test]
    fn linear_totals() {
        assert_eq!(proof_carrying_total(1000, 131_072), 131_072_000);
        assert_eq!(proof_carrying_total(0, 131_072), 0);
        assert_eq!(attestation_overhead(1000, 64), 64_000);
        assert_eq!(attestation_overhead(1000, 2420), 2_420_000);
    }

    #[test]
    fn envelope_examples() {
        let p = EnvelopeParams::new(50_000, 1200, 1, 100, 1).unwrap();
        assert_eq!(cpu_ratio(&p), q(5, 12));
        assert_eq!(two_decimals(&cpu_ratio(&p)), "0.42");
        let t = breakeven_threshold(50_000, 1200).unwrap();
        assert_eq!(t.0, q(125, 3));
        assert_eq!(t.display(), "41.67");
        let a = EnvelopeAnalysis::new(p);
        assert!(a.arace_lower);
        assert_eq!(a.verdict(), "AR-ACE lower iff c_h/c_l > 41.67");

        let sym = EnvelopeParams::new(1200, 1200, 1, 1, 1).unwrap();
        assert_eq!(cpu_ratio(&sym), Ratio::from_integer(1));
        assert_eq!(breakeven_threshold(1200, 1200).unwrap().display(), "1.00");
        assert!(!EnvelopeAnalysis::new(sym).arace_lower);

        let k10 = EnvelopeParams { relays: 10, ..p };
        let k100 = EnvelopeParams { relays: 100, ..p };
        assert_eq!(cpu_ratio(&k10), cpu_ratio(&p));
        assert_eq!(cpu_ratio(&k100), cpu_ratio(&p));

        assert!(EnvelopeParams::new(0, 1, 1, 1, 1).is_err());
        assert!(breakeven_threshold(1, 0).is_err());
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(two_decimals(&q(1, 200)), "0.01");
        assert_eq!(two_decimals(&q(1, 201)), "0.00");
        assert_eq!(two_decimals(&q(2_097_152, 1)), "2097152.00");
        assert_eq!(two_decimals(&q(199_999, 2000)), "100.00");
        assert_eq!(decimal(&q(5, 12), 4), "0.4167");
        assert_eq!(decimal(&q(5, 2), 0), "3");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn ratio_below_one_iff_cost_ratio_above_threshold(
            n in 1u64..1_000_000,
            ticks in 1u64..1_000_000,
            light in 1u64..10_000,
            heavy in 1u64..10_000,
            k in 1u64..1000,
        ) {
            let p = EnvelopeParams::new(n, ticks, light, heavy, k).unwrap();
            let t = breakeven_threshold(n, ticks).unwrap();
            let lhs = cpu_ratio(&p) < Ratio::from_integer(1);
            let rhs = Ratio::new(heavy as u128, light as u128) > t.0;
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(cpu_ratio(&p), cpu_ratio(&EnvelopeParams { relays: 1, ..p }));
        }
    }
}
