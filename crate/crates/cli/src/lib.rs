//! Command implementations behind the `arace` binary.

pub mod bundled;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use arace::admission::AdmissionFault;
use arace::analytics::{AnalyticsError, ComparisonReport, EnvelopeAnalysis, EnvelopeParams};
use arace::games::{self, GameConfig, GameOutcome, TrialCounts};
use arace::netsim::{self, trace, SimOutput};
use arace::report::{envelope_from_scenario, AnalyticsBlock, RunReport};
use arace::scenario::{ConfigError, PropagationMode, SimScenario};
use rayon::prelude::*;
use serde::de::IntoDeserializer;
use serde::Deserialize;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("no scenario file or bundled scenario named '{0}'")]
    UnknownScenario(String),
    #[error("{0}")]
    Analytics(#[from] AnalyticsError),
    #[error("simulation failed: {0}")]
    Sim(#[from] netsim::SimError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Validation(_)) | CliError::Analytics(AnalyticsError::NonPositive(_)) => 3,
            CliError::Config(ConfigError::Parse(_)) | CliError::UnknownScenario(_) | CliError::Read { .. } => 2,
            _ => 4,
        }
    }
}

pub fn parse_fault(s: &str) -> Result<AdmissionFault, String> {
    AdmissionFault::deserialize(s.into_deserializer()).map_err(|e: serde::de::value::Error| e.to_string())
}

/// Load a scenario from a file path, falling back to a bundled name.
pub fn load_scenario(spec: &str, seed: Option<u64>) -> Result<SimScenario, CliError> {
    let path = Path::new(spec);
    let text = if path.is_file() {
        fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.into(),
            source,
        })?
    } else {
        bundled::get(spec)
            .ok_or_else(|| CliError::UnknownScenario(spec.into()))?
            .to_string()
    };
    let mut sc = SimScenario::from_toml(&text)?;
    if sc.name.is_empty() {
        sc.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    if let Some(seed) = seed {
        sc.seed = seed;
        sc.validate()?;
    }
    Ok(sc)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let err = |source| CliError::Write {
        path: dir.join(name),
        source,
    };
    fs::create_dir_all(dir).map_err(err)?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(err)?;
    Ok(path)
}

fn csv_text<R: serde::Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

#[derive(serde::Serialize)]
struct LedgerRow {
    node: String,
    category: &'static str,
    direction: &'static str,
    bytes: u64,
}

/// Report for one simulated scenario.
pub fn simulate_report(sc: &SimScenario) -> Result<(RunReport, SimOutput), CliError> {
    let out = netsim::run(sc)?;
    let mut report = RunReport::new("simulate");
    report.analytics = AnalyticsBlock::for_simulation(sc, &out.report);
    report.scenario = Some(sc.clone());
    report.simulation = Some(out.report.clone());
    Ok((report, out))
}

fn render(report: &RunReport, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => Ok(report.to_json()),
        Format::Csv => {
            if let Some(sim) = &report.simulation {
                csv_text(sim.ledger.flat_rows().into_iter().map(|(node, category, direction, bytes)| LedgerRow {
                    node,
                    category,
                    direction,
                    bytes,
                }))
            } else if let Some(c) = &report.comparison {
                csv_text(c.rows.iter().map(|r| ModeCsv {
                    mode: r.mode.to_string(),
                    relay_link_proof_bytes: r.relay_link_proof_bytes,
                    object_bytes: r.object_bytes,
                    attestation_bytes: r.attestation_bytes,
                    max_outbound_proof_rate: r.max_outbound_proof_rate.0.to_string(),
                    light_checks: r.light_checks,
                    heavy_checks: r.heavy_checks,
                    builder_proof_bytes: r.builder_proof_bytes,
                    discrepancies: r.discrepancies.len(),
                }))
            } else if !report.games.is_empty() {
                csv_text(report.games.iter().map(|g| GameCsv {
                    game: g.game.to_string(),
                    trials: g.trials,
                    attempts: g.attempts,
                    successes: g.successes,
                }))
            } else if let Some(e) = &report.analytics.envelope {
                csv_text([EnvelopeCsv::from(e)])
            } else {
                Ok(String::new())
            }
        }
    }
}

#[derive(serde::Serialize)]
struct ModeCsv {
    mode: String,
    relay_link_proof_bytes: u64,
    object_bytes: u64,
    attestation_bytes: u64,
    max_outbound_proof_rate: String,
    light_checks: u64,
    heavy_checks: u64,
    builder_proof_bytes: u64,
    discrepancies: usize,
}

#[derive(serde::Serialize)]
struct GameCsv {
    game: String,
    trials: u64,
    attempts: u64,
    successes: u64,
}

#[derive(serde::Serialize)]
struct EnvelopeCsv {
    objects: u64,
    ticks: u64,
    light: u64,
    heavy: u64,
    relays: u64,
    ratio: String,
    threshold: String,
    threshold_display: String,
    arace_lower: bool,
}

impl From<&EnvelopeAnalysis> for EnvelopeCsv {
    fn from(e: &EnvelopeAnalysis) -> Self {
        Self {
            objects: e.params.objects,
            ticks: e.params.ticks,
            light: e.params.light,
            heavy: e.params.heavy,
            relays: e.params.relays,
            ratio: e.ratio.to_string(),
            threshold: e.threshold.0.to_string(),
            threshold_display: e.threshold.display(),
            arace_lower: e.arace_lower,
        }
    }
}

fn report_name(format: Format) -> &'static str {
    match format {
        Format::Json => "report.json",
        Format::Csv => "report.csv",
    }
}

/// Where output goes and in which format.
#[derive(Clone, Debug, Default)]
pub struct Output {
    pub format: Format,
    pub out: Option<PathBuf>,
}

/// Text for stdout plus the files written.
#[derive(Debug, Default)]
pub struct CommandResult {
    pub stdout: String,
    pub files: Vec<PathBuf>,
    /// Campaigns with at least one success or violation.
    pub failed_campaigns: usize,
}

impl CommandResult {
    fn text(stdout: String) -> Self {
        Self {
            stdout,
            ..Self::default()
        }
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed_campaigns > 0)
    }
}

impl fmt::Display for CommandResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.stdout)?;
        for p in &self.files {
            writeln!(f, "wrote {}", p.display())?;
        }
        Ok(())
    }
}

pub fn cmd_simulate(sc: &SimScenario, output: &Output) -> Result<CommandResult, CliError> {
    let (report, out) = simulate_report(sc)?;
    let text = render(&report, output.format)?;
    let mut res = CommandResult::default();
    match &output.out {
        Some(dir) => {
            res.files.push(write_file(dir, report_name(output.format), &text)?);
            res.files.push(write_file(dir, "trace.jsonl", &trace::to_jsonl(&out.trace))?);
            let sim = &out.report;
            res.stdout = format!(
                "{} ({}): {} accepted, {} dropped, {} blocks, relay-link proof bytes {}, discrepancies {}\n",
                sim.scenario,
                sim.mode,
                sim.admission.accepted,
                sim.admission.decisions() - sim.admission.accepted,
                sim.blocks.produced,
                sim.ledger.relay_link_proof_bytes(),
                report.analytics.discrepancies.len()
            );
        }
        None => res.stdout = text,
    }
    Ok(res)
}

/// Run every propagation mode on the scenario's workload and seed.
pub fn comparison(sc: &SimScenario) -> Result<ComparisonReport, CliError> {
    let runs: Vec<_> = PropagationMode::ALL
        .par_iter()
        .map(|&mode| {
            let s = SimScenario { mode, ..sc.clone() };
            netsim::run(&s).map(|o| (s, o.report))
        })
        .collect::<Result<_, _>>()?;
    let envelope = envelope_from_scenario(sc).or_else(|| {
        EnvelopeParams::new(
            sc.workload.objects,
            sc.timing.run_ticks,
            sc.costs.light,
            sc.costs.heavy,
            sc.topology.nodes as u64,
        )
        .ok()
        .map(EnvelopeAnalysis::new)
    });
    Ok(ComparisonReport::build(&runs, envelope)?)
}

pub fn cmd_compare(sc: &SimScenario, output: &Output) -> Result<CommandResult, CliError> {
    let c = comparison(sc)?;
    let mut report = RunReport::new("compare");
    report.scenario = Some(sc.clone());
    report.analytics.recursive_model = Some(c.recursive_model);
    report.analytics.envelope = c.envelope.clone();
    report.analytics.discrepancies = c.rows.iter().flat_map(|r| r.discrepancies.clone()).collect();
    report.comparison = Some(c);
    let mut res = CommandResult::text(report.comparison.as_ref().expect("set above").render_table());
    if let Some(dir) = &output.out {
        res.files.push(write_file(dir, report_name(output.format), &render(&report, output.format)?)?);
    } else if output.format == Format::Csv {
        res.stdout = render(&report, Format::Csv)?;
    }
    Ok(res)
}

pub fn games_summary(outcomes: &[GameOutcome]) -> String {
    let mut s = format!("{:<18} {:>8} {:>9} {:>9}  result\n", "campaign", "trials", "attempts", "successes");
    for g in outcomes {
        s.push_str(&format!(
            "{:<18} {:>8} {:>9} {:>9}  {}\n",
            g.game.to_string(),
            g.trials,
            g.attempts,
            g.successes,
            if g.passed() { "pass" } else { "FAIL" }
        ));
        for w in &g.witnesses {
            s.push_str(&format!("  witness trial {}: {}\n", w.trial, w.detail));
        }
        for f in &g.unsigned_fields {
            s.push_str(&format!("  unsigned: {f}\n"));
        }
    }
    s
}

pub fn cmd_games(
    sc: Option<&SimScenario>,
    seed: u64,
    counts: &TrialCounts,
    fault: Option<AdmissionFault>,
    output: &Output,
) -> Result<CommandResult, CliError> {
    let mut cfg = GameConfig {
        fault,
        ..GameConfig::default()
    };
    if let Some(sc) = sc {
        cfg.profile = sc.profile;
    }
    let outcomes = games::run_all(counts, seed, &cfg);
    let mut report = RunReport::new("games");
    report.scenario = sc.cloned();
    report.games = outcomes;
    let mut res = CommandResult::text(games_summary(&report.games));
    if let Some(dir) = &output.out {
        res.files.push(write_file(dir, report_name(output.format), &render(&report, output.format)?)?);
        for g in &report.games {
            for w in &g.witnesses {
                let name = format!("witness-{}-{}.toml", g.game, w.trial);
                res.files.push(write_file(&dir.join("witnesses"), &name, &w.to_toml())?);
            }
        }
    } else if output.format == Format::Csv {
        res.stdout = render(&report, Format::Csv)?;
    }
    res.failed_campaigns = report.games.iter().filter(|g| !g.passed()).count();
    Ok(res)
}

pub fn cmd_envelope(params: Result<EnvelopeParams, AnalyticsError>, output: &Output) -> Result<CommandResult, CliError> {
    let analysis = EnvelopeAnalysis::new(params?);
    let mut report = RunReport::new("envelope");
    report.analytics.envelope = Some(analysis.clone());
    let mut res = CommandResult::text(format!("{analysis}\n"));
    if let Some(dir) = &output.out {
        res.files.push(write_file(dir, report_name(output.format), &render(&report, output.format)?)?);
    } else if output.format == Format::Csv {
        res.stdout = render(&report, Format::Csv)?;
    }
    Ok(res)
}
