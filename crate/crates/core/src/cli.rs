//! Command implementations behind the `jobprov` binary.
//!
//! Each `cmd_*` function returns data rather than printing, so tests and the
//! Python bindings can drive them directly. [`run_cli`] adds argument
//! parsing, rendering and exit codes.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::algorithms::Catalogue;
use crate::app::{run_job, JobEnvironment, JobReport, PhaseError, OUTPUT_FILE_KEY};
use crate::container::{self, ContainerError};
use crate::options::{parse_options, text_to_value, OptionValue, ParseError};
use crate::provenance::{checksum_text, MetadataDictionary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{path}`: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("`{path}` line {}, column {}: {}", .source.line, .source.column, .source.kind)]
    Parse { path: PathBuf, source: ParseError },
    #[error("`{path}`: {source}")]
    Container { path: PathBuf, source: ContainerError },
    #[error("no provenance recorded in `{0}`")]
    MissingInfo(PathBuf),
    #[error("output path `{0}` is not valid UTF-8")]
    NonUtf8Path(PathBuf),
    #[error(transparent)]
    Job(#[from] PhaseError),
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
}

impl CliError {
    /// 2 for verification failures (lineage, checksums, replay), else 1.
    pub fn exit_code(&self) -> i32 {
        let verification = match self {
            CliError::Job(e) => e.error.is_verification_failure(),
            CliError::ReplayMismatch(_) => true,
            CliError::Container { source, .. } => matches!(source, ContainerError::ChecksumMismatch(_)),
            _ => false,
        };
        if verification {
            EXIT_VERIFICATION
        } else {
            EXIT_ERROR
        }
    }

    /// Report of the failed job, when it got far enough to have one.
    pub fn report(&self) -> Option<&JobReport> {
        match self {
            CliError::Job(e) => e.report.as_deref(),
            _ => None,
        }
    }
}

fn container_err(path: &Path) -> impl FnOnce(ContainerError) -> CliError + '_ {
    move |source| match source {
        ContainerError::MissingInfo => CliError::MissingInfo(path.to_owned()),
        source => CliError::Container { path: path.to_owned(), source },
    }
}

fn resolve(env: &JobEnvironment, path: &Path) -> PathBuf {
    env.working_dir.join(path)
}

/// Reads and parses an options file, then runs it.
pub fn cmd_run(config_path: &Path, env: &JobEnvironment) -> Result<JobReport, CliError> {
    let path = resolve(env, config_path);
    let text = fs::read_to_string(&path).map_err(|source| CliError::Read { path: path.clone(), source })?;
    let config = parse_options(&text).map_err(|source| CliError::Parse { path, source })?;
    let job = run_job(&config, &Catalogue::demo(), env.clone())?;
    Ok(job.report().clone())
}

pub fn load_info(container_path: &Path, env: &JobEnvironment) -> Result<MetadataDictionary, CliError> {
    let path = resolve(env, container_path);
    container::extract_info(&path).map_err(container_err(&path))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum ViewFormat {
    #[default]
    Table,
    Tsv,
}

/// Renders the `info` dictionary. `table` shows `key | value` rows with
/// text values unquoted; `tsv` keeps canonical value text.
pub fn cmd_view(container_path: &Path, format: ViewFormat, env: &JobEnvironment) -> Result<String, CliError> {
    let info = load_info(container_path, env)?;
    Ok(render_view(&info, format))
}

pub fn render_view(info: &MetadataDictionary, format: ViewFormat) -> String {
    let mut out = String::new();
    for (key, value) in info {
        match format {
            ViewFormat::Table => {
                let shown = match text_to_value(value) {
                    Ok(OptionValue::Text(s)) => s,
                    _ => value.clone(),
                };
                out.push_str(&format!("{key} | {shown}\n"));
            }
            ViewFormat::Tsv => out.push_str(&format!("{key}\t{value}\n")),
        }
    }
    out
}

/// Writes the flat options export of a container's `info` block.
pub fn cmd_export(container_path: &Path, out_path: &Path, env: &JobEnvironment) -> Result<(), CliError> {
    let info = load_info(container_path, env)?;
    let out = resolve(env, out_path);
    fs::write(&out, info.to_canonical()).map_err(|source| CliError::Write { path: out, source })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub report: JobReport,
    pub original_checksum: u32,
    pub replay_checksum: u32,
}

/// Re-runs the job recorded in `container_path`, writing to `out_path`, and
/// checks that the new `events` block and `info` dictionary match the
/// original (`ApplicationMgr.OutputFile` excepted).
pub fn cmd_replay(container_path: &Path, out_path: &Path, env: &JobEnvironment) -> Result<ReplayOutcome, CliError> {
    let source = resolve(env, container_path);
    let info = load_info(container_path, env)?;
    let original_checksum = container::events_checksum(&source).map_err(container_err(&source))?;

    let out_text = out_path.to_str().ok_or_else(|| CliError::NonUtf8Path(out_path.to_owned()))?;
    let mut config = info.to_options();
    config.set(OUTPUT_FILE_KEY, out_text);

    let job = run_job(&config, &Catalogue::demo(), env.clone())?;
    let report = job.report().clone();
    let replay_checksum =
        report.payload_checksum.ok_or_else(|| CliError::ReplayMismatch("replay wrote no events block".into()))?;
    if replay_checksum != original_checksum {
        return Err(CliError::ReplayMismatch(format!(
            "events checksum {} differs from original {}",
            checksum_text(replay_checksum),
            checksum_text(original_checksum)
        )));
    }
    let replayed = job.metadata().ok_or_else(|| CliError::ReplayMismatch("replay recorded no provenance".into()))?;
    let delta = diff(&info.without(OUTPUT_FILE_KEY), &replayed.without(OUTPUT_FILE_KEY));
    if !delta.is_empty() {
        return Err(CliError::ReplayMismatch(format!("info dictionaries differ:\n{delta}")));
    }
    Ok(ReplayOutcome { report, original_checksum, replay_checksum })
}

/// Key-level comparison of two dictionaries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiffReport {
    pub only_left: Vec<(String, String)>,
    pub only_right: Vec<(String, String)>,
    /// `(key, left value, right value)`
    pub changed: Vec<(String, String, String)>,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.only_left.is_empty() && self.only_right.is_empty() && self.changed.is_empty()
    }
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return writeln!(f, "no differences");
        }
        for (key, left, right) in &self.changed {
            writeln!(f, "~ {key}: {left} -> {right}")?;
        }
        for (key, value) in &self.only_left {
            writeln!(f, "< {key} = {value}")?;
        }
        for (key, value) in &self.only_right {
            writeln!(f, "> {key} = {value}")?;
        }
        Ok(())
    }
}

pub fn diff(left: &MetadataDictionary, right: &MetadataDictionary) -> DiffReport {
    let mut report = DiffReport::default();
    for (key, l) in left {
        match right.get(key) {
            None => report.only_left.push((key.clone(), l.clone())),
            Some(r) if r != l => report.changed.push((key.clone(), l.clone(), r.to_owned())),
            Some(_) => {}
        }
    }
    for (key, r) in right {
        if !left.contains_key(key) {
            report.only_right.push((key.clone(), r.clone()));
        }
    }
    report
}

pub fn cmd_diff(a: &Path, b: &Path, env: &JobEnvironment) -> Result<DiffReport, CliError> {
    Ok(diff(&load_info(a, env)?, &load_info(b, env)?))
}

#[derive(Debug, Parser)]
#[command(name = "jobprov", version, about = "Run jobs and inspect the provenance embedded in their outputs")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a job from an options file
    Run { config: PathBuf },
    /// Print the provenance recorded in a container
    View {
        container: PathBuf,
        #[arg(long, value_enum, default_value_t = ViewFormat::Table)]
        format: ViewFormat,
    },
    /// Write a container's provenance as a flat options file
    Export { container: PathBuf, out: PathBuf },
    /// Re-run the job recorded in a container and verify the result
    Replay { container: PathBuf, out: PathBuf },
    /// Compare the provenance of two containers
    Diff { a: PathBuf, b: PathBuf },
}

/// Entry point shared by the binary and tests. Data goes to `out`,
/// diagnostics to `err`; returns the process exit code.
pub fn run_cli<I, T>(args: I, env: &JobEnvironment, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match dispatch(args.command, env, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let Some(report) = e.report() {
                let _ = write!(err, "{report}");
            }
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, env: &JobEnvironment, out: &mut dyn Write) -> Result<i32, CliError> {
    let stdout_err = |source| CliError::Write { path: PathBuf::from("<stdout>"), source };
    match command {
        Command::Run { config } => {
            let report = cmd_run(&config, env)?;
            write!(out, "{report}").map_err(stdout_err)?;
        }
        Command::View { container, format } => {
            out.write_all(cmd_view(&container, format, env)?.as_bytes()).map_err(stdout_err)?;
        }
        Command::Export { container, out: target } => cmd_export(&container, &target, env)?,
        Command::Replay { container, out: target } => {
            let outcome = cmd_replay(&container, &target, env)?;
            write!(out, "{}", outcome.report).map_err(stdout_err)?;
            writeln!(out, "replay verified: events crc32c {}", checksum_text(outcome.replay_checksum))
                .map_err(stdout_err)?;
        }
        Command::Diff { a, b } => {
            let report = cmd_diff(&a, &b, env)?;
            write!(out, "{report}").map_err(stdout_err)?;
            if !report.is_empty() {
                return Ok(EXIT_VERIFICATION);
            }
        }
    }
    Ok(EXIT_OK)
}
