use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use drivegen::controller::{ProcessConfig, RuntimeConfig};
use drivegen::ledger::{compute_stats, load_ledger, metric_table_csv, replay_section, save_ledger, RunLedger};
use drivegen::llm::connect;
use drivegen::oracle::OracleConfig;
use drivegen::orchestrator::{evaluate_candidate, run_pipeline_on, PipelineConfig};
use drivegen::scenario::{
    build_test_case, parse_scenario, serialize_scenario, Mode, ScenarioSpec, ACC_CASES, CAEM_CASES,
};
use drivegen::sim::{read_events_jsonl, read_trace_csv, DEFAULT_DT};

#[derive(Parser)]
#[command(name = "drivegen", version, about = "Generate, simulate and safety-check driving controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the generation loop and write a ledger.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a controller file against the catalog.
    Evaluate {
        #[arg(long)]
        code: PathBuf,
        #[arg(long, value_enum, default_value = "caem")]
        mode: ModeArg,
        /// Comma-separated test case ids; defaults to the whole catalog for the mode.
        #[arg(long, value_delimiter = ',')]
        tc: Vec<String>,
        /// Run the controller in a child process, e.g. `python3 shim.py`.
        #[arg(long)]
        runtime_cmd: Option<String>,
        /// Extension for the temporary source file handed to `--runtime-cmd`.
        #[arg(long, default_value = "")]
        source_suffix: String,
        #[arg(long)]
        json: bool,
    },
    /// Print the test report of a stored candidate.
    Report {
        #[arg(long)]
        ledger: PathBuf,
        /// Defaults to the final baseline.
        #[arg(long)]
        candidate: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Success rates and improvement figures of a stored run.
    Stats {
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        json: bool,
    },
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Re-run the safety checks on a stored trace.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Scenario file; looked up next to the ledger or in the catalog when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: ReplayFormat,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Print a catalog scenario in the scenario file format.
    Export {
        #[arg(long)]
        tc: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List catalog scenario ids.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Caem,
    Acc,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Caem => Mode::Caem,
            ModeArg::Acc => Mode::Acc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReplayFormat {
    Text,
    Csv,
}

/// How a command that ran to completion turned out.
enum Verdict {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<Verdict> {
    match command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::Evaluate { code, mode, tc, runtime_cmd, source_suffix, json } => {
            let runtime = match runtime_cmd {
                Some(cmd) => {
                    let command: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
                    if command.is_empty() {
                        bail!("--runtime-cmd is empty");
                    }
                    RuntimeConfig::Process(ProcessConfig {
                        command,
                        source_suffix,
                        handshake_timeout: drivegen::controller::HANDSHAKE_TIMEOUT,
                        tick_timeout: drivegen::controller::TICK_TIMEOUT,
                    })
                }
                None => RuntimeConfig::Builtin,
            };
            cmd_evaluate(&code, mode.into(), &tc, &runtime, json)
        }
        Command::Report { ledger, candidate, json } => {
            let ledger = load_ledger(&ledger)?;
            let id = match candidate {
                Some(id) => id,
                None => ledger.summary.baseline.clone().ok_or_else(|| anyhow!("the run has no baseline"))?,
            };
            let candidate = ledger.candidate(&id)?;
            print!("{}", if json { candidate.report.to_json() } else { candidate.report.to_text() });
            Ok(if candidate.is_gold() { Verdict::Pass } else { Verdict::Fail })
        }
        Command::Stats { ledger, json } => {
            let ledger = load_ledger(&ledger)?;
            let stats = compute_stats(&ledger.candidates)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                print!("{}", stats.to_text());
            }
            Ok(Verdict::Pass)
        }
        Command::Scenario(ScenarioCommand::Export { tc, out }) => {
            let spec: ScenarioSpec<f64> = build_test_case(&tc)?;
            let text = serialize_scenario(&spec);
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| path.display().to_string())?,
                None => print!("{text}"),
            }
            Ok(Verdict::Pass)
        }
        Command::Scenario(ScenarioCommand::List) => {
            for id in CAEM_CASES.iter().chain(ACC_CASES.iter()) {
                println!("{id}");
            }
            Ok(Verdict::Pass)
        }
        Command::Replay { trace, scenario, format } => cmd_replay(&trace, scenario.as_deref(), format),
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config: PipelineConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    // relative paths in the config are taken from the config file's directory
    let base = path.parent().unwrap_or(Path::new("."));
    if let Some(p) = &config.model.mock_playlist {
        config.model.mock_playlist = Some(resolve(base, p));
    }
    for file in [&mut config.context_file, &mut config.task_file].into_iter().flatten() {
        *file = resolve(base, file);
    }
    config.validate()?;
    Ok(config)
}

fn cmd_run(config_path: &Path, out: &Path) -> Result<Verdict> {
    let config = load_config(config_path)?;
    let specs = config.scenarios()?;
    let gateway = connect(&config.model)?;
    let run = run_pipeline_on(&config, &specs, gateway.as_ref())?;
    let ledger = RunLedger::from_run(config, specs, run);
    save_ledger(&ledger, out)?;
    let summary = &ledger.summary;
    println!(
        "{} candidates over {} initiations; baseline {} passes {} of {} test cases.",
        summary.candidates,
        summary.initiations,
        summary.baseline.as_deref().unwrap_or("none"),
        summary.baseline_passed,
        summary.total
    );
    if !summary.flagged_regressions.is_empty() {
        println!("Not executable after correction: {}.", summary.flagged_regressions.join(", "));
    }
    Ok(if summary.gold { Verdict::Pass } else { Verdict::Fail })
}

fn cmd_evaluate(code: &Path, mode: Mode, tc: &[String], runtime: &RuntimeConfig, json: bool) -> Result<Verdict> {
    let source = std::fs::read_to_string(code).with_context(|| format!("reading {}", code.display()))?;
    let ids: Vec<String> = if tc.is_empty() {
        let ids: &[&str] = if mode == Mode::Caem { &CAEM_CASES } else { &ACC_CASES };
        ids.iter().map(|s| s.to_string()).collect()
    } else {
        tc.to_vec()
    };
    let specs = ids.iter().map(|id| build_test_case(id)).collect::<Result<Vec<ScenarioSpec<f64>>, _>>()?;
    if let Some(spec) = specs.iter().find(|s| s.mode != mode) {
        bail!("{} is a {} scenario, not {}", spec.id, spec.mode.as_str(), mode.as_str());
    }
    let eval = evaluate_candidate(Some(&source), &specs, runtime, DEFAULT_DT, &OracleConfig::default(), true);
    let report = eval.report("evaluate");
    print!("{}", if json { report.to_json() } else { report.to_text() });
    let all = report.is_executable() && report.summary.passed_count == report.summary.total;
    Ok(if all { Verdict::Pass } else { Verdict::Fail })
}

/// `traces/TC1.csv` inside a ledger pairs with `scenarios/TC1.scn` two levels up.
fn find_scenario(trace: &Path, tc_id: &str) -> Result<ScenarioSpec<f64>> {
    let ledger_copy = trace
        .parent()
        .and_then(Path::parent)
        .and_then(Path::parent)
        .and_then(Path::parent)
        .map(|root| root.join("scenarios").join(format!("{tc_id}.scn")));
    match ledger_copy.filter(|p| p.is_file()) {
        Some(path) => Ok(parse_scenario(&std::fs::read_to_string(&path)?)?),
        None => Ok(build_test_case(tc_id)?),
    }
}

fn cmd_replay(trace_path: &Path, scenario: Option<&Path>, format: ReplayFormat) -> Result<Verdict> {
    let tc_id = trace_path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_suffix(".csv"))
        .ok_or_else(|| anyhow!("trace file must be named <TC>.csv"))?;
    let spec = match scenario {
        Some(path) => parse_scenario(&std::fs::read_to_string(path).with_context(|| path.display().to_string())?)?,
        None => find_scenario(trace_path, tc_id)?,
    };
    let events_path = trace_path.with_file_name(format!("{tc_id}.events.jsonl"));
    let events_text = std::fs::read_to_string(&events_path).unwrap_or_default();
    let events = read_events_jsonl(&events_text).with_context(|| events_path.display().to_string())?;
    let csv = std::fs::read_to_string(trace_path).with_context(|| trace_path.display().to_string())?;
    let trace = read_trace_csv(&csv, events, &spec).with_context(|| trace_path.display().to_string())?;
    let section = replay_section(&trace, &spec, &OracleConfig::default())?;
    match format {
        ReplayFormat::Text => print!("{}", section.to_text()),
        ReplayFormat::Csv => print!("{}", metric_table_csv(&trace)),
    }
    let passed = section.verdict.ends_with("passed: all acceptance criteria satisfied.");
    Ok(if passed { Verdict::Pass } else { Verdict::Fail })
}
