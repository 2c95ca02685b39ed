use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use glide_core::drive::Pose;
use glide_core::pressure::{read_replay, write_replay};
use glide_core::scenario::{compare, run_trial_traced, TaskKind, TrialRecord};
use glide_core::technique::{Locomotion, TechniqueKind};
use glide_core::Settings;
use glide_service::{Server, ServiceConfig};
use serde_json::json;

/// Exit status for a trial that hit its timeout.
const EXIT_TIMEOUT: u8 = 2;

#[derive(Parser)]
#[command(name = "glide", version, about = "Seated foot-pressure locomotion: scripted trials, replay and a live service")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scripted trial and print its record as a JSON line.
    Run(RunArgs),
    /// Run both techniques on matched seeds; one JSON line per trial, summary on stderr.
    Compare(CompareArgs),
    /// Feed a recorded CSV stream through a technique and print the pose after every frame.
    Replay(ReplayArgs),
    /// Serve live sessions over TCP and WebSocket.
    Serve(ServeArgs),
}

#[derive(Args)]
struct Common {
    /// `key = value` settings file, e.g. `chain.tau_s = 0.1`.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        match &self.config {
            Some(path) => Settings::load(path).with_context(|| format!("reading {}", path.display())),
            None => Ok(Settings::default()),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    task: TaskKind,
    #[arg(long)]
    technique: TechniqueKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frame rate of the synthetic pressure stream.
    #[arg(long, default_value_t = 100.0)]
    rate: f64,
    /// Write the record here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also save the generated pressure stream as a replay CSV.
    #[arg(long)]
    frames: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    task: TaskKind,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100.0)]
    rate: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    technique: TechniqueKind,
    /// Calibrate on the first N seconds of the file (defaults to the configured window).
    #[arg(long)]
    calibrate: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7400")]
    ingest: SocketAddr,
    #[arg(long, default_value = "127.0.0.1:7401")]
    telemetry: SocketAddr,
    /// HTTP listener for the WebSocket endpoints.
    #[arg(long, default_value = "127.0.0.1:7402")]
    http: SocketAddr,
    #[arg(long, default_value = "gip")]
    technique: TechniqueKind,
    #[arg(long, default_value_t = glide_service::DEFAULT_TELEMETRY_RATE_HZ)]
    telemetry_rate: f64,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors share the config-error status; help and version are not errors
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.cmd {
        Cmd::Run(a) => run(a),
        Cmd::Compare(a) => run_compare(a),
        Cmd::Replay(a) => replay(a).map(|()| true),
        Cmd::Serve(a) => serve(a).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_TIMEOUT),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Returns whether the trial completed.
fn run(a: RunArgs) -> Result<bool> {
    let settings = a.common.settings()?;
    let sc = a.task.build(a.seed, settings.drive.track_w)?;
    let (result, trace) = run_trial_traced(&sc, a.technique, &settings, a.rate, a.seed)?;
    if let Some(path) = &a.frames {
        let mut w = create(path)?;
        write_replay(&mut w, &trace.frames)?;
        w.flush()?;
    }
    let completed = result.completed;
    let line = serde_json::to_string(&TrialRecord { scenario: a.task, technique: a.technique, result })?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{line}")?;
            w.flush()?;
        }
        None => println!("{line}"),
    }
    Ok(completed)
}

fn run_compare(a: CompareArgs) -> Result<bool> {
    let settings = a.common.settings()?;
    let techniques = [TechniqueKind::Gip, TechniqueKind::Wip];
    let cmp = compare(a.task, &techniques, a.reps, a.seed, &settings, a.rate)?;
    let mut out = io::stdout().lock();
    for t in &cmp.trials {
        writeln!(out, "{}", serde_json::to_string(t)?)?;
    }
    for row in &cmp.rows {
        eprintln!(
            "{:<6} {:<4} completed {}/{}  time {:.1} ± {:.1} s  path {:.1} m  xte mean {:.2} m  max {:.2} m",
            row.scenario,
            row.technique,
            row.completed,
            row.trials,
            row.completion_s.mean,
            row.completion_s.sd,
            row.path_len_m.mean,
            row.mean_xte_m.mean,
            row.max_xte_m.mean,
        );
    }
    Ok(cmp.trials.iter().all(|t| t.result.completed))
}

fn replay(a: ReplayArgs) -> Result<()> {
    let settings = a.common.settings()?;
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let frames = read_replay(BufReader::new(file)).with_context(|| format!("reading {}", a.input.display()))?;
    let mut loco = Locomotion::new(a.technique, settings, Pose::default());
    loco.request_calibration(a.calibrate.unwrap_or(settings.chain.calib_window_s));

    let mut out = BufWriter::new(io::stdout().lock());
    for f in &frames {
        let tick = loco.push(f)?;
        if let Some(Err(e)) = tick.calibration {
            bail!("calibration at t_us={} failed: {e}", tick.t_us);
        }
        let line = json!({
            "t_us": tick.t_us,
            "pose": tick.pose,
            "twist": tick.twist,
            "u_L": tick.command.left(),
            "u_R": tick.command.right(),
            "calibrated": tick.calibrated,
        });
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    let cfg = ServiceConfig {
        ingest_addr: a.ingest,
        telemetry_addr: a.telemetry,
        http_addr: a.http,
        technique: a.technique,
        settings: a.common.settings()?,
        telemetry_rate_hz: a.telemetry_rate,
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let server = Server::bind(cfg).await?;
        eprintln!(
            "ingest {}  telemetry {}  http {}",
            server.ingest_addr(),
            server.telemetry_addr(),
            server.http_addr()
        );
        server
            .run_until(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
