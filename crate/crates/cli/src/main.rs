use std::path::PathBuf;
use std::process::ExitCode;

use arace::admission::AdmissionFault;
use arace::analytics::EnvelopeParams;
use arace::games::TrialCounts;
use arace_cli::{bundled, load_scenario, parse_fault, CliError, CommandResult, Format, Output};
use clap::{Args, Parser, Subcommand};

/// Proof-off-path mempool simulator, security campaigns and compute-envelope
/// analysis.
#[derive(Parser)]
#[command(name = "arace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    config: String,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Directory for report files. Without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<&OutputArgs> for Output {
    fn from(a: &OutputArgs) -> Self {
        Output {
            format: a.format,
            out: a.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and emit its report and trace.
    Simulate(Common),
    /// Run the scenario's workload under all three propagation modes.
    Compare(Common),
    /// Run the security campaigns; exits 1 if any reports a success.
    Games {
        /// Scenario whose signature profile the games use.
        #[arg(long)]
        config: Option<String>,
        /// Campaign seed; defaults to the scenario seed, else 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Trials for each of the forge, replay, admit and net-mutation games.
        #[arg(long)]
        trials: Option<u64>,
        /// Simulated runs for the state-conformance campaign.
        #[arg(long)]
        state_runs: Option<u64>,
        /// Simulated runs for the inclusion-safety campaign.
        #[arg(long)]
        inclusion_runs: Option<u64>,
        /// Install a deliberate admission defect (detector self-test).
        #[arg(long, hide = true, value_parser = parse_fault)]
        fault: Option<AdmissionFault>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate the relay compute envelope.
    Envelope {
        /// Scenario with an [envelope] section; explicit flags override it.
        #[arg(long)]
        config: Option<String>,
        /// Objects observed in the window (N).
        #[arg(long)]
        objects: Option<u64>,
        /// Relay ticks in the window (N_ticks).
        #[arg(long)]
        ticks: Option<u64>,
        /// Light per-object check cost (c_l).
        #[arg(long)]
        light: Option<u64>,
        /// Heavy per-tick check cost (c_h).
        #[arg(long)]
        heavy: Option<u64>,
        /// Relay count (K).
        #[arg(long)]
        relays: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// List the bundled scenarios.
    Scenarios,
}

fn run(cli: Cli) -> Result<CommandResult, CliError> {
    match cli.command {
        Command::Simulate(c) => {
            let sc = load_scenario(&c.config, c.seed)?;
            arace_cli::cmd_simulate(&sc, &(&c.output).into())
        }
        Command::Compare(c) => {
            let sc = load_scenario(&c.config, c.seed)?;
            arace_cli::cmd_compare(&sc, &(&c.output).into())
        }
        Command::Games {
            config,
            seed,
            trials,
            state_runs,
            inclusion_runs,
            fault,
            output,
        } => {
            let sc = config.map(|c| load_scenario(&c, seed)).transpose()?;
            let seed = seed.or(sc.as_ref().map(|s| s.seed)).unwrap_or(0);
            let mut counts = trials.map(TrialCounts::uniform).unwrap_or_default();
            counts.state_runs = state_runs.unwrap_or(counts.state_runs);
            counts.inclusion_runs = inclusion_runs.unwrap_or(counts.inclusion_runs);
            arace_cli::cmd_games(sc.as_ref(), seed, &counts, fault, &(&output).into())
        }
        Command::Envelope {
            config,
            objects,
            ticks,
            light,
            heavy,
            relays,
            output,
        } => {
            let section = config
                .map(|c| load_scenario(&c, None))
                .transpose()?
                .and_then(|sc| sc.envelope);
            let pick = |flag: Option<u64>, from: fn(&arace::scenario::EnvelopeSection) -> u64, default| {
                flag.or(section.as_ref().map(from)).unwrap_or(default)
            };
            let params = EnvelopeParams::new(
                pick(objects, |e| e.objects, 0),
                pick(ticks, |e| e.ticks, 0),
                pick(light, |e| e.light, 1),
                pick(heavy, |e| e.heavy, 1),
                pick(relays, |e| e.relays, 1),
            );
            arace_cli::cmd_envelope(params, &(&output).into())
        }
        Command::Scenarios => Ok(CommandResult {
            stdout: bundled::names().map(|n| format!("{n}\n")).collect(),
            ..Default::default()
        }),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(res) => {
            print!("{res}");
            ExitCode::from(res.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
