//! Top-level run report written by every command.

use serde::Serialize;

use crate::analytics::{
    cross_validate, recursive_proof_bw, ComparisonReport, Discrepancy, EnvelopeAnalysis, EnvelopeParams,
    ModelParams, RecursiveBandwidth,
};
use crate::games::GameOutcome;
use crate::netsim::SimReport;
use crate::scenario::{PropagationMode, SimScenario};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AnalyticsBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recursive_model: Option<RecursiveBandwidth>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeAnalysis>,
    pub discrepancies: Vec<Discrepancy>,
}

impl AnalyticsBlock {
    /// Closed forms for a simulated scenario plus the model cross-check.
    pub fn for_simulation(sc: &SimScenario, report: &SimReport) -> Self {
        let recursive_model = (sc.mode == PropagationMode::RecursiveTick)
            .then(|| recursive_proof_bw(sc.proof_size, sc.topology.degree as u64, sc.timing.tick_seconds()).ok())
            .flatten();
        Self {
            recursive_model,
            envelope: envelope_from_scenario(sc),
            discrepancies: cross_validate(report, &ModelParams::from_scenario(sc))
                .expect("report was produced from this scenario"),
        }
    }
}

/// Compute-envelope analysis from a scenario's `[envelope]` section.
pub fn envelope_from_scenario(sc: &SimScenario) -> Option<EnvelopeAnalysis> {
    let e = sc.envelope.as_ref()?;
    EnvelopeParams::new(e.objects, e.ticks, e.light, e.heavy, e.relays)
        .ok()
        .map(EnvelopeAnalysis::new)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<SimScenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub games: Vec<GameOutcome>,
    pub analytics: AnalyticsBlock,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.into(),
            scenario: None,
            simulation: None,
            comparison: None,
            games: Vec::new(),
            analytics: AnalyticsBlock::default(),
        }
    }

    /// Pretty JSON with a trailing newline. Byte-stable for equal inputs.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
