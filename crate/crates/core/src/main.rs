use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pointselect::harness::server::{serve, PaceMode, ServeOptions};
use pointselect::harness::{replay, run_session, Condition, EventLog, HarnessError, SessionConfig};
use pointselect::metrics::build_report;
use pointselect::vehicle::SpeedPolicy;
use pointselect::world::{validate_scene, CourseParams, Scenario, SceneParams};

#[derive(Parser)]
#[command(name = "pointselect", version, about = "Point & Select driving simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum CondArg {
    C1,
    C2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a headless session with the synthetic driver and pointer.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = ["30", "50", "70"])]
        speed: Option<String>,
        #[arg(long, value_enum)]
        condition: Option<CondArg>,
        #[arg(long)]
        noise_deg: Option<f64>,
        /// Let the synthetic driver mistake a nearby candidate for the target.
        #[arg(long)]
        misjudge: bool,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-simulate a log and compare it record by record.
    Replay {
        log: PathBuf,
        /// Exit with status 1 unless the log verifies.
        #[arg(long)]
        verify: bool,
    },
    /// Compute the metrics report of a log.
    Report {
        log: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate and validate a scenario document.
    GenScenario {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        length: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve live sessions over WebSocket.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        /// Advance only on client tick messages.
        #[arg(long)]
        lockstep: bool,
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
}

enum Failure {
    Verification(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<SessionConfig, Failure> {
    match path {
        None => Ok(SessionConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
            Ok(SessionConfig::from_json(&text)?)
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn execute(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run { config, seed, speed, condition, noise_deg, misjudge, duration, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(s) = speed {
                cfg.speed = SpeedPolicy::new(s.parse().expect("validated by clap"));
            }
            if let Some(c) = condition {
                cfg.condition = match c {
                    CondArg::C1 => Condition::DrivingOnly,
                    CondArg::C2 => Condition::DrivingWithInput,
                };
            }
            if let Some(n) = noise_deg {
                cfg.pointer.noise_deg = n;
            }
            if misjudge {
                cfg.pointer.misjudge = true;
            }
            if let Some(d) = duration {
                cfg.duration_s = d;
            }
            let log = match run_session(&cfg) {
                Ok(log) => log,
                Err(HarnessError::Aborted { tick, reason, partial }) => {
                    partial.write_to(&out)?;
                    return Err(Failure::Runtime(format!("aborted at tick {tick}: {reason} (partial log written)")));
                }
                Err(e) => return Err(e.into()),
            };
            log.write_to(&out)?;
            println!("{} records, hash {}", log.records.len(), log.hash_hex());
            Ok(())
        }
        Cmd::Replay { log, verify } => {
            let parsed = match EventLog::read_from(&log) {
                Ok(l) => l,
                Err(e @ HarnessError::Parse { .. }) if verify => return Err(Failure::Verification(e.to_string())),
                Err(e) => return Err(e.into()),
            };
            let verdict = replay(&parsed)?;
            println!("{}", serde_json::to_string(&verdict).expect("verdict serializes"));
            if verify && !verdict.is_verified() {
                return Err(Failure::Verification("log does not replay".into()));
            }
            Ok(())
        }
        Cmd::Report { log, format, out } => {
            let parsed = EventLog::read_from(&log)?;
            let report = build_report(&parsed).map_err(|e| Failure::Runtime(e.to_string()))?;
            let text = match format {
                Format::Json => report.to_json() + "\n",
                Format::Table => report.to_table(),
            };
            match out {
                Some(p) => write(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Cmd::GenScenario { seed, length, out } => {
            let mut course = CourseParams::default();
            if let Some(l) = length {
                course.total_length_m = l;
            }
            let scene = SceneParams::default();
            let scenario =
                Scenario::generate(seed, course, scene.clone()).map_err(|e| Failure::Runtime(e.to_string()))?;
            let violations = validate_scene(&scenario.scene, &scene);
            if !violations.is_empty() {
                return Err(Failure::Verification(format!("{} constraint violations", violations.len())));
            }
            write(&out, &scenario.to_json())?;
            println!("{} buildings over {:.1} m", scenario.scene.buildings.len(), scenario.scene.course.total_length_m);
            Ok(())
        }
        Cmd::Serve { config, port, lockstep, log_dir } => {
            let cfg = load_config(config.as_deref())?;
            let mode = if lockstep { PaceMode::Lockstep } else { PaceMode::Realtime };
            serve(cfg, port, ServeOptions { mode, log_dir, ..Default::default() })?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
