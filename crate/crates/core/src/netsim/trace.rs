//! Append-only run trace, serialized as one JSON object per line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::{AdmitDecision, Epoch, MetaOutcome, Tick};
use crate::crypto::Digest32;
use crate::roles::ConsensusVerdict;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceRecord {
    Header {
        schema_version: u32,
        scenario: String,
        seed: u64,
        relays: usize,
        quota_limit: u32,
        nonce_retention_epochs: u64,
        epoch_ticks: u64,
    },
    Decision {
        tick: Tick,
        epoch: Epoch,
        relay: usize,
        /// Attester key fingerprint.
        pk: String,
        nonce: String,
        obj_hash: Digest32,
        decision: AdmitDecision,
        /// Quota counter for `pk` after the decision.
        quota_used: u32,
    },
    Rollover {
        tick: Tick,
        relay: usize,
        epoch: Epoch,
    },
    Meta {
        tick: Tick,
        relay: usize,
        outcome: MetaOutcome,
    },
    Block {
        tick: Tick,
        relay: usize,
        height: u64,
        included: usize,
        verdict: ConsensusVerdict,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

pub fn to_jsonl(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TraceError {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
