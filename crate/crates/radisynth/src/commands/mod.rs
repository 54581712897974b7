//! Subcommand implementations. Each records its outputs in the workspace
//! under the run that invoked it.

mod features;
mod imaging;
pub(crate) mod pixel;
mod specimen;
mod zprofile;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use clap::Parser;
use radisynth_core::rng::substream;
use serde::{Deserialize, Serialize};

use crate::cli::{Cli, Command};
use crate::config::{expand_config, RunConfig, RUN_FILE};
use crate::error::{Error, Result};
use crate::imageio::read_json;
use crate::workspace::{Kind, Mode, Workspace};

pub use specimen::{parse_layers, parse_material};

/// State shared by the stages of one command.
pub struct Ctx<'a> {
    pub ws: &'a mut Workspace,
    /// Id of the run entry every output hangs from.
    pub run: String,
    pub seed: u64,
}

impl Ctx<'_> {
    /// Seed of the labeled random stream `label`.
    pub fn stream(&self, label: &str) -> u64 {
        substream(self.seed, label)
    }
}

/// Checks that a comma-separated flag got exactly `N` values.
pub(crate) fn values<const N: usize, T: Copy>(v: &[T], flag: &str) -> Result<[T; N]> {
    v.try_into()
        .map_err(|_| Error::Validation(format!("--{flag} takes {N} comma-separated values, got {}", v.len())))
}

fn dispatch(ctx: &mut Ctx, cmd: &Command) -> Result<()> {
    let out = match cmd {
        Command::GenPlate(a) => specimen::gen_plate(ctx, a)?,
        Command::GenFml(a) => specimen::gen_fml(ctx, a)?,
        Command::Simulate(a) => imaging::simulate(ctx, a)?,
        Command::Recon(a) => imaging::recon(ctx, a)?,
        Command::ExtractSegments(a) => pixel::extract_segments(ctx, a)?,
        Command::TrainCnn(a) => pixel::train_cnn(ctx, a)?,
        Command::Classify(a) => pixel::classify(ctx, a)?,
        Command::Cluster(a) => features::cluster(ctx, a)?,
        Command::Fit(a) => features::fit(ctx, a)?,
        Command::Eval(a) => features::eval(ctx, a)?,
        Command::Report(a) => features::report(ctx, a)?,
        Command::Zslice(a) => zprofile::zslice(ctx, a)?,
        Command::TrainAe(a) => zprofile::train_ae_cmd(ctx, a)?,
        Command::Anomaly(a) => zprofile::anomaly(ctx, a)?,
        Command::SynthVolume(a) => zprofile::synth_volume(ctx, a)?,
        Command::TrainZcnn(a) => zprofile::train_zcnn_cmd(ctx, a)?,
        Command::Experiment71(a) => crate::experiment::run(ctx, a)?.report_id,
        Command::Verify(_) | Command::Replay(_) => {
            return Err(Error::Validation(format!("{} is not a recorded command", cmd.name())))
        }
    };
    log::info!("{} output: {out}", cmd.name());
    Ok(())
}

/// Records `cmd` as a run entry, executes it and returns the run id.
pub fn run_recorded(ws: &mut Workspace, seed: u64, cmd: &Command) -> Result<String> {
    let rc = RunConfig::new(seed, cmd.clone());
    let mut s = ws.stage(Kind::Run)?;
    s.write_json(RUN_FILE, &rc)?;
    s.meta(serde_json::json!({ "command": cmd.name() }));
    let run = ws.commit(s)?;
    log::info!("run {run}: {}", cmd.name());
    let mut ctx = Ctx { ws, run: run.clone(), seed };
    dispatch(&mut ctx, cmd)?;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub run: String,
    /// Outputs recorded for the run but not reproduced.
    pub missing: Vec<String>,
    /// Outputs reproduced that the run never recorded.
    pub unexpected: Vec<String>,
    pub matched: usize,
}

impl ReplayOutcome {
    pub fn is_identical(&self) -> bool {
        self.missing.is_empty() && self.unexpected.is_empty()
    }
}

/// Re-executes a recorded run without writing artifacts and compares the
/// content-derived ids of its outputs with the recorded ones.
pub fn replay(ws: &mut Workspace, run_id: &str) -> Result<ReplayOutcome> {
    let entry = ws.expect(run_id, Kind::Run)?.clone();
    let rc: RunConfig = read_json(&ws.artifact_dir(&entry.id).join(RUN_FILE))?;
    if rc.version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "run {} was recorded by version {}, replaying with {}",
            entry.id,
            rc.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let expected: BTreeSet<String> = ws.outputs_of(&entry.id).into_iter().map(|e| e.id.clone()).collect();
    let previous = ws.mode();
    ws.set_mode(Mode::DryRun);
    ws.take_produced();
    let result = {
        let mut ctx = Ctx {
            ws,
            run: entry.id.clone(),
            seed: rc.seed,
        };
        dispatch(&mut ctx, &rc.invocation)
    };
    let produced: BTreeSet<String> = ws.take_produced().into_iter().collect();
    ws.set_mode(previous);
    result?;
    Ok(ReplayOutcome {
        run: entry.id,
        missing: expected.difference(&produced).cloned().collect(),
        unexpected: produced.difference(&expected).cloned().collect(),
        matched: expected.intersection(&produced).count(),
    })
}

fn verify_workspace(root: &Path) -> Result<()> {
    let ws = Workspace::open_read_only(root)?;
    let report = ws.verify();
    for p in &report.problems {
        log::error!("{p}");
    }
    if report.is_ok() {
        log::info!("{} entries verified", report.entries);
        Ok(())
    } else {
        Err(Error::Integrity(format!("{} problem(s) found", report.problems.len())))
    }
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Verify(_) => verify_workspace(&cli.workspace),
        Command::Replay(a) => {
            let mut ws = Workspace::open(&cli.workspace)?;
            let out = replay(&mut ws, &a.run)?;
            for id in &out.missing {
                log::error!("not reproduced: {id}");
            }
            for id in &out.unexpected {
                log::error!("unexpected output: {id}");
            }
            if out.is_identical() {
                log::info!("run {} reproduced: {} output(s) identical", out.run, out.matched);
                Ok(())
            } else {
                Err(Error::Integrity(format!("run {} did not reproduce", out.run)))
            }
        }
        cmd => {
            let mut ws = Workspace::open(&cli.workspace)?;
            run_recorded(&mut ws, cli.seed, cmd).map(drop)
        }
    }
}

/// Full command-line entry point: config expansion, parsing, thread pool
/// setup and execution. Returns the process exit code (0 success, 1
/// invalid input, 2 runtime failure).
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::Validation("--threads must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Error::Validation(format!("cannot start {n} threads: {e}"))),
        },
        None => execute(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
