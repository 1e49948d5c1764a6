use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{error::ErrorKind, CommandFactory, Parser, Subcommand, ValueEnum};

use indoorsim::analytics::{report_csv, ReportKind};
use indoorsim::catalog::actions_json;
use indoorsim::evaluation::{score, GoalSpec};
use indoorsim::events::EventLog;
use indoorsim::mind::policy::DEFAULT_TEMPERATURE;
use indoorsim::mind::Playbook;
use indoorsim::runner::{run, Mode, PolicyKind, SessionConfig};
use indoorsim::scenario::{self, Severity};
use indoorsim::world::{Snapshot, WorldState};

#[derive(Parser)]
#[command(name = "indoorsim", version, about = "Text-based multi-agent indoor world simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Task,
    Simulation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Generation,
    Recorded,
    Scripted,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Run a session and write its outputs.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Goal file; required in task mode, rejected in simulation mode.
        #[arg(long)]
        goals: Option<PathBuf>,
        /// Defaults to task when goals are given, simulation otherwise.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_enum, default_value = "scripted")]
        policy: PolicyArg,
        #[arg(long, default_value = "http://127.0.0.1:8000/v1/chat/completions")]
        model_endpoint: String,
        #[arg(long, default_value = "default")]
        model: String,
        #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
        temperature: f64,
        /// Recorded-response file for `--policy recorded`.
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Per-agent command lists for `--policy scripted`.
        #[arg(long)]
        playbook: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration_min: Option<u64>,
        /// Drop the task-prioritization reminder from prompts.
        #[arg(long)]
        no_tp: bool,
        /// Drop known objects and task progress from the memory digest.
        #[arg(long)]
        no_st: bool,
        #[arg(long, default_value_t = 8)]
        max_in_flight: usize,
        /// Also write prompts.jsonl.
        #[arg(long)]
        capture_prompts: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lint a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Score a world snapshot against a goal file.
    Score {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        goals: PathBuf,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Compute an analytics report over an event log.
    Report {
        #[arg(long)]
        log: PathBuf,
        /// occupancy, activity, wellbeing, suboptimal or resource.
        #[arg(long)]
        kind: ReportKind,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the action catalog, object types and roles as JSON.
    Actions,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn usage_error(msg: &str) -> ! {
    Cli::command().error(ErrorKind::ArgumentConflict, msg).exit()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run {
            scenario: scenario_path,
            goals,
            mode,
            policy,
            model_endpoint,
            model,
            temperature,
            fixture,
            playbook,
            seed,
            duration_min,
            no_tp,
            no_st,
            max_in_flight,
            capture_prompts,
            out,
        } => {
            let mode = match (mode, &goals) {
                (Some(ModeArg::Simulation), Some(_)) => usage_error("--goals cannot be used with --mode simulation"),
                (Some(ModeArg::Task), None) => usage_error("--mode task requires --goals"),
                (Some(ModeArg::Task), Some(_)) | (None, Some(_)) => Mode::Task,
                (Some(ModeArg::Simulation), None) | (None, None) => Mode::Simulation,
            };
            if fixture.is_some() && policy != PolicyArg::Recorded {
                usage_error("--fixture is only used with --policy recorded");
            }
            if playbook.is_some() && policy != PolicyArg::Scripted {
                usage_error("--playbook is only used with --policy scripted");
            }
            let policy = match policy {
                PolicyArg::Generation => PolicyKind::Generation { endpoint: model_endpoint, model, temperature },
                PolicyArg::Recorded => {
                    let Some(path) = fixture else { usage_error("--policy recorded requires --fixture") };
                    PolicyKind::Recorded { path, model, temperature }
                }
                PolicyArg::Scripted => PolicyKind::Scripted {
                    playbook: playbook
                        .map(|p| read(&p).and_then(|t| Playbook::parse(&t).map_err(anyhow::Error::msg)))
                        .transpose()
                        .context("loading playbook")?,
                },
                PolicyArg::Random => PolicyKind::Random,
            };
            let scenario_cfg = scenario::load_file(&scenario_path)?;
            let goals = goals.map(|g| GoalSpec::load_file(&g)).transpose()?;
            let mut cfg = SessionConfig::new(mode, policy);
            cfg.seed = seed;
            cfg.duration_min = duration_min;
            cfg.options.no_tp = no_tp;
            cfg.options.no_st = no_st;
            cfg.max_in_flight = max_in_flight;
            cfg.capture_prompts = capture_prompts;
            let output = run(&cfg, &scenario_cfg, goals.as_ref())?;
            output.write_outputs(&out, &scenario_cfg)?;
            let h = &output.log.header;
            eprintln!(
                "{} session: {} of {} minutes{}{}",
                h.mode,
                h.end_tick,
                h.duration_min,
                if h.early_exit { ", all goals met" } else { "" },
                h.abort_reason.as_deref().map(|r| format!(", aborted: {r}")).unwrap_or_default()
            );
            if let Some(s) = &output.score {
                print!("{}", s.to_table());
            }
            Ok(if h.complete { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Validate { scenario: path } => {
            let cfg = scenario::parse(&read(&path)?)?;
            let diags = scenario::validate(&cfg);
            for d in &diags {
                println!("{d}");
            }
            let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
            if errors > 0 {
                bail!("{errors} error(s) in {}", path.display());
            }
            println!("ok: {} ({} warning(s))", path.display(), diags.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Score { snapshot, goals, json } => {
            let snap: Snapshot = serde_json::from_str(&read(&snapshot)?).context("parsing snapshot")?;
            let world = WorldState::from_snapshot(&snap)?;
            let goals = GoalSpec::load_file(&goals)?;
            let report = score(&world, &goals);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_table());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { log, kind, out } => {
            let log = EventLog::parse(&read(&log)?).map_err(anyhow::Error::msg).context("parsing event log")?;
            let (csv, diags) = report_csv(&log, kind);
            for d in diags {
                eprintln!("warning: {d}");
            }
            match out {
                Some(p) => std::fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Actions => {
            println!("{}", serde_json::to_string_pretty(&actions_json())?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
