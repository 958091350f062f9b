//! Application manager: builds a job from its options and drives the
//! initialize / execute / finalize phases.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::algorithms::{Algorithm, Catalogue, Decision};
use crate::component::{ComponentDescriptor, ComponentKind};
use crate::container::{self, EVENTS_BLOCK, INFO_BLOCK};
use crate::error::JobError;
use crate::event::{EventRecord, EventsEncoder};
use crate::options::{OptionValue, OptionsSet, ScalarKind, ValueKind};
use crate::provenance::{self, ConfigurationView, InputLineage, MetaDataSvc, MetadataDictionary};
use crate::services::{
    apply_options, AppliedLog, LogSink, PropertyTarget, ServiceRegistry, CONTAINER_WRITER_SVC, INFO, STANDARD_SERVICES,
    WARNING,
};

pub const APP_MGR: &str = "ApplicationMgr";
pub const TOP_ALG_KEY: &str = "ApplicationMgr.TopAlg";
pub const SERVICES_KEY: &str = "ApplicationMgr.Services";
pub const OUTPUT_FILE_KEY: &str = "ApplicationMgr.OutputFile";
pub const DEFAULT_OUTPUT_FILE: &str = "output.pdc";

const TEXT_LIST: ValueKind = ValueKind::List(ScalarKind::Text);

pub fn application_manager() -> ComponentDescriptor {
    ComponentDescriptor::new(APP_MGR, ComponentKind::Service)
        .with_property("TopAlg", TEXT_LIST, OptionValue::List(Vec::new()))
        .with_property("Services", TEXT_LIST, OptionValue::List(Vec::new()))
        .with_property("AppName", ValueKind::TEXT, "")
        .with_property("AppVersion", ValueKind::TEXT, "")
        .with_property("OutputFile", ValueKind::TEXT, DEFAULT_OUTPUT_FILE)
}

/// Process-level context a job runs in. Relative paths in the options
/// (output file, inputs) resolve against `working_dir`.
#[derive(Debug, Clone, Default)]
pub struct JobEnvironment {
    pub working_dir: PathBuf,
    pub log: LogSink,
}

impl JobEnvironment {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        JobEnvironment { working_dir: dir.into(), log: LogSink::Stderr }
    }

    pub fn with_log(mut self, log: LogSink) -> Self {
        self.log = log;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Initialize,
    Execute,
    Finalize,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Initialize => "initialize",
            Phase::Execute => "execute",
            Phase::Finalize => "finalize",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhaseStatus {
    Pending,
    Succeeded,
    Failed(String),
    Skipped,
}

impl fmt::Display for PhaseStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseStatus::Pending => f.write_str("pending"),
            PhaseStatus::Succeeded => f.write_str("succeeded"),
            PhaseStatus::Failed(msg) => write!(f, "failed: {msg}"),
            PhaseStatus::Skipped => f.write_str("skipped"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobReport {
    pub initialize: PhaseStatus,
    pub execute: PhaseStatus,
    pub finalize: PhaseStatus,
    pub events_seen: u64,
    pub events_written: u64,
    pub output_path: Option<PathBuf>,
    /// CRC32C of the `events` block.
    pub payload_checksum: Option<u32>,
    /// CRC32C of every block written, in file order.
    pub blocks: Vec<(String, u32)>,
}

impl Default for JobReport {
    fn default() -> Self {
        JobReport {
            initialize: PhaseStatus::Pending,
            execute: PhaseStatus::Pending,
            finalize: PhaseStatus::Pending,
            events_seen: 0,
            events_written: 0,
            output_path: None,
            payload_checksum: None,
            blocks: Vec::new(),
        }
    }
}

impl JobReport {
    pub fn status(&self, phase: Phase) -> &PhaseStatus {
        match phase {
            Phase::Initialize => &self.initialize,
            Phase::Execute => &self.execute,
            Phase::Finalize => &self.finalize,
        }
    }

    fn status_mut(&mut self, phase: Phase) -> &mut PhaseStatus {
        match phase {
            Phase::Initialize => &mut self.initialize,
            Phase::Execute => &mut self.execute,
            Phase::Finalize => &mut self.finalize,
        }
    }

    pub fn succeeded(&self) -> bool {
        [&self.initialize, &self.execute, &self.finalize].iter().all(|s| **s == PhaseStatus::Succeeded)
    }
}

impl fmt::Display for JobReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "initialize      {}", self.initialize)?;
        writeln!(f, "execute         {}", self.execute)?;
        writeln!(f, "finalize        {}", self.finalize)?;
        writeln!(f, "events seen     {}", self.events_seen)?;
        writeln!(f, "events written  {}", self.events_written)?;
        if let Some(path) = &self.output_path {
            writeln!(f, "output          {}", path.display())?;
        }
        for (name, crc) in &self.blocks {
            writeln!(f, "block {name:<10} crc32c {}", provenance::checksum_text(*crc))?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
#[error("{phase} failed: {error}")]
pub struct PhaseError {
    pub phase: Phase,
    #[source]
    pub error: JobError,
    /// Present when the job got far enough to produce one.
    pub report: Option<Box<JobReport>>,
}

pub struct Job {
    config: OptionsSet,
    app: ComponentDescriptor,
    algorithms: Vec<Box<dyn Algorithm>>,
    services: ServiceRegistry,
    metadata: Option<MetaDataSvc>,
    applied: AppliedLog,
    lineage: Vec<InputLineage>,
    events: Option<Vec<u8>>,
    report: JobReport,
}

impl fmt::Debug for Job {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Job")
            .field("algorithms", &self.algorithm_names())
            .field("report", &self.report)
            .finish_non_exhaustive()
    }
}

fn text_list(config: &OptionsSet, key: &str) -> Result<Vec<String>, JobError> {
    match config.get(key) {
        None => Ok(Vec::new()),
        Some(v) => v
            .as_text_list()
            .map(|l| l.into_iter().map(str::to_owned).collect())
            .ok_or_else(|| JobError::KindMismatch { key: key.to_owned(), expected: TEXT_LIST, found: v.to_string() }),
    }
}

fn check_reserved(name: &str) -> Result<(), JobError> {
    if name == APP_MGR || name == provenance::RESERVED_NAMESPACE {
        return Err(JobError::ReservedName(name.to_owned()));
    }
    Ok(())
}

/// Instantiates the components named by `ApplicationMgr.TopAlg` and
/// `ApplicationMgr.Services`. Properties stay at their defaults until
/// [`Job::initialize`].
pub fn build_job(config: &OptionsSet, catalogue: &Catalogue, env: JobEnvironment) -> Result<Job, JobError> {
    let top = text_list(config, TOP_ALG_KEY)?;
    let declared_services = text_list(config, SERVICES_KEY)?;

    let mut names: HashSet<&str> = STANDARD_SERVICES.into_iter().collect();
    let mut algorithms = Vec::with_capacity(top.len());
    for (i, name) in top.iter().enumerate() {
        check_reserved(name)?;
        if !names.insert(name) {
            return Err(JobError::DuplicateComponent(name.clone()));
        }
        let alg = catalogue.create_algorithm(name).ok_or_else(|| JobError::UnknownComponent(name.clone()))?;
        if alg.is_source() && i > 0 {
            return Err(JobError::MisplacedSource(name.clone()));
        }
        algorithms.push(alg);
    }

    let mut listed_standard = HashSet::new();
    let mut extra = Vec::new();
    for name in &declared_services {
        check_reserved(name)?;
        if STANDARD_SERVICES.contains(&name.as_str()) {
            // always present; listing them is allowed
            if !listed_standard.insert(name) {
                return Err(JobError::DuplicateComponent(name.clone()));
            }
            continue;
        }
        if !names.insert(name) {
            return Err(JobError::DuplicateComponent(name.clone()));
        }
        extra.push(catalogue.create_service(name).ok_or_else(|| JobError::UnknownComponent(name.clone()))?);
    }

    let services = ServiceRegistry::new(extra, catalogue.tools(), env.log, env.working_dir);
    Ok(Job {
        config: config.clone(),
        app: application_manager(),
        algorithms,
        services,
        metadata: provenance::is_enabled(config).then(MetaDataSvc::new),
        applied: AppliedLog::new(),
        lineage: Vec::new(),
        events: None,
        report: JobReport::default(),
    })
}

/// Builds and runs a job to completion.
pub fn run_job(config: &OptionsSet, catalogue: &Catalogue, env: JobEnvironment) -> Result<Job, PhaseError> {
    let mut job = build_job(config, catalogue, env).map_err(|error| PhaseError {
        phase: Phase::Initialize,
        error,
        report: None,
    })?;
    job.run()?;
    Ok(job)
}

impl PropertyTarget for Job {
    fn component_mut(&mut self, name: &str) -> Option<&mut ComponentDescriptor> {
        if name == APP_MGR {
            return Some(&mut self.app);
        }
        if let Some(alg) = self.algorithms.iter_mut().find(|a| a.descriptor().name() == name) {
            return Some(alg.descriptor_mut());
        }
        self.services.service_mut(name)
    }

    fn registry_mut(&mut self) -> &mut ServiceRegistry {
        &mut self.services
    }
}

impl Job {
    /// Runs all three phases. Finalize runs even when execute fails; after
    /// a failed initialize it only tears the services down.
    pub fn run(&mut self) -> Result<(), PhaseError> {
        if let Err(error) = self.initialize() {
            let _ = self.finalize();
            return Err(self.phase_error(Phase::Initialize, error));
        }
        let executed = self.execute();
        let finalized = self.finalize();
        match (executed, finalized) {
            (Err(error), _) => Err(self.phase_error(Phase::Execute, error)),
            (Ok(()), Err(error)) => Err(self.phase_error(Phase::Finalize, error)),
            (Ok(()), Ok(())) => Ok(()),
        }
    }

    fn phase_error(&self, phase: Phase, error: JobError) -> PhaseError {
        PhaseError { phase, error, report: Some(Box::new(self.report.clone())) }
    }

    fn record(&mut self, phase: Phase, result: Result<(), JobError>) -> Result<(), JobError> {
        *self.report.status_mut(phase) = match &result {
            Ok(()) => PhaseStatus::Succeeded,
            Err(e) => PhaseStatus::Failed(e.to_string()),
        };
        if let Err(e) = &result {
            self.services.log(crate::services::ERROR, APP_MGR, &format!("{phase} failed: {e}"));
        }
        result
    }

    /// Applies the job options, checks recorded lineage, starts services and
    /// initializes algorithms.
    pub fn initialize(&mut self) -> Result<(), JobError> {
        if self.report.initialize != PhaseStatus::Pending {
            return Err(JobError::InvalidPhase("initialize has already run"));
        }
        let result = self.initialize_inner();
        self.record(Phase::Initialize, result)
    }

    fn initialize_inner(&mut self) -> Result<(), JobError> {
        let config = self.config.clone();
        self.applied = apply_options(self, &config)?;

        if let Some(svc) = self.services.service(provenance::SERVICE_NAME) {
            if !svc.boolean("Enabled") {
                return Err(JobError::InvalidValue {
                    key: format!("{}.Enabled", provenance::SERVICE_NAME),
                    reason: "remove MetaDataSvc from ApplicationMgr.Services to disable it".into(),
                });
            }
        }

        let recorded = provenance::recorded_lineage(&config)?;
        provenance::verify_lineage(&recorded, self.services.working_dir())?;

        self.services.start_all();
        let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.services.log(INFO, APP_MGR, &format!("job started at unix time {started}"));

        for alg in &mut self.algorithms {
            alg.initialize(&mut self.services)?;
        }

        self.lineage = self
            .algorithms
            .iter()
            .filter_map(|a| a.input())
            .enumerate()
            .map(|(ordinal, (path, checksum))| InputLineage { ordinal, path: path.to_owned(), checksum })
            .collect();
        if !recorded.is_empty() && recorded != self.lineage {
            return Err(JobError::LineageMismatch(
                "recorded inputs differ from the inputs this configuration reads".into(),
            ));
        }
        Ok(())
    }

    /// Event loop: the source yields events, the rest of the chain runs in
    /// order until an algorithm vetoes. Surviving events are buffered for
    /// the `events` block.
    pub fn execute(&mut self) -> Result<(), JobError> {
        if self.report.initialize != PhaseStatus::Succeeded {
            return Err(JobError::InvalidPhase("execute requires a successful initialize"));
        }
        if self.report.execute != PhaseStatus::Pending {
            return Err(JobError::InvalidPhase("execute has already run"));
        }
        let result = self.event_loop();
        self.record(Phase::Execute, result)
    }

    fn event_loop(&mut self) -> Result<(), JobError> {
        let Some((first, rest)) = self.algorithms.split_first_mut().filter(|(f, _)| f.is_source()) else {
            self.services.log(WARNING, APP_MGR, "no event source configured; no events processed");
            self.events = Some(EventsEncoder::new(&[]).finish());
            return Ok(());
        };
        let source_name = first.descriptor().name().to_owned();
        let source = first.source().expect("source algorithm");
        let fields = source.field_names().to_vec();
        let mut encoder = EventsEncoder::new(&fields);

        let mut result = Ok(());
        let mut index = 0u64;
        loop {
            let values = match source.next_event() {
                Ok(Some(values)) => values,
                Ok(None) => break,
                Err(message) => {
                    result = Err(JobError::AlgorithmFailure { algorithm: source_name, event: index, message });
                    break;
                }
            };
            let mut event = EventRecord::from_values(index, &fields, &values);
            self.report.events_seen += 1;

            let mut kept = true;
            for alg in rest.iter_mut() {
                match alg.execute(&mut event, &mut self.services) {
                    Ok(Decision::Pass) => {}
                    Ok(Decision::Veto) => {
                        kept = false;
                        break;
                    }
                    Err(message) => {
                        result = Err(JobError::AlgorithmFailure {
                            algorithm: alg.descriptor().name().to_owned(),
                            event: index,
                            message,
                        });
                        break;
                    }
                }
            }
            if result.is_err() {
                break;
            }
            if kept {
                if let Err(field) = encoder.push(&event) {
                    result = Err(JobError::AlgorithmFailure {
                        algorithm: CONTAINER_WRITER_SVC.to_owned(),
                        event: index,
                        message: format!("event lost field `{field}`"),
                    });
                    break;
                }
                self.report.events_written += 1;
            }
            index += 1;
        }
        self.events = Some(encoder.finish());
        result
    }

    /// Collects provenance (when enabled), writes the output container and
    /// stops services. Runs once per job.
    pub fn finalize(&mut self) -> Result<(), JobError> {
        if self.report.initialize == PhaseStatus::Pending {
            return Err(JobError::InvalidPhase("finalize requires initialize to have been attempted"));
        }
        if self.report.finalize != PhaseStatus::Pending {
            return Err(JobError::InvalidPhase("finalize has already run"));
        }
        if self.report.execute == PhaseStatus::Pending {
            self.report.execute = PhaseStatus::Skipped;
        }
        if self.report.initialize != PhaseStatus::Succeeded {
            self.services.stop_all();
            self.report.finalize = PhaseStatus::Skipped;
            return Ok(());
        }
        let result = self.finalize_inner();
        self.services.stop_all();
        self.record(Phase::Finalize, result)
    }

    fn finalize_inner(&mut self) -> Result<(), JobError> {
        let mut failure = None;
        let events = self.events.take().unwrap_or_else(|| {
            let fields = match self.algorithms.first_mut().and_then(|a| a.source()) {
                Some(src) => src.field_names().to_vec(),
                None => Vec::new(),
            };
            EventsEncoder::new(&fields).finish()
        });
        let mut blocks: Vec<(String, Vec<u8>)> = vec![(EVENTS_BLOCK.to_owned(), events)];
        for alg in &mut self.algorithms {
            match alg.finalize(&mut self.services) {
                Ok(extra) => blocks.extend(extra),
                Err(message) => {
                    failure.get_or_insert(JobError::AlgorithmFailure {
                        algorithm: alg.descriptor().name().to_owned(),
                        event: self.report.events_seen,
                        message,
                    });
                }
            }
        }

        if let Some(meta) = self.metadata.as_mut() {
            let components = std::iter::once(&self.app)
                .chain(self.algorithms.iter().map(|a| a.descriptor()))
                .chain(self.services.services().iter())
                .chain(self.services.tools())
                .collect();
            meta.start(&ConfigurationView { components, lineage: &self.lineage })?;
            blocks.push((INFO_BLOCK.to_owned(), meta.get_metadata()?.to_canonical().into_bytes()));
        }

        let path = self.services.resolve(self.app.text("OutputFile"));
        let refs: Vec<(&str, &[u8])> = blocks.iter().map(|(n, p)| (n.as_str(), p.as_slice())).collect();
        let sums = container::write_container(&path, &refs).map_err(JobError::WriteFailure)?;
        self.services.log(
            INFO,
            CONTAINER_WRITER_SVC,
            &format!("wrote {} events to {}", self.report.events_written, path.display()),
        );
        self.report.payload_checksum = sums.iter().find(|(n, _)| n == EVENTS_BLOCK).map(|(_, c)| *c);
        self.report.blocks = sums;
        self.report.output_path = Some(path);

        failure.map_or(Ok(()), Err)
    }

    pub fn report(&self) -> &JobReport {
        &self.report
    }

    pub fn config(&self) -> &OptionsSet {
        &self.config
    }

    /// Assignments applied during initialize.
    pub fn applied_log(&self) -> &AppliedLog {
        &self.applied
    }

    pub fn lineage(&self) -> &[InputLineage] {
        &self.lineage
    }

    pub fn services(&self) -> &ServiceRegistry {
        &self.services
    }

    pub fn services_mut(&mut self) -> &mut ServiceRegistry {
        &mut self.services
    }

    pub fn algorithm_names(&self) -> Vec<&str> {
        self.algorithms.iter().map(|a| a.descriptor().name()).collect()
    }

    /// Every instantiated component, application manager first.
    pub fn components(&self) -> Vec<&ComponentDescriptor> {
        std::iter::once(&self.app)
            .chain(self.algorithms.iter().map(|a| a.descriptor()))
            .chain(self.services.services().iter())
            .chain(self.services.tools())
            .collect()
    }

    pub fn component(&self, name: &str) -> Option<&ComponentDescriptor> {
        self.components().into_iter().find(|c| c.name() == name)
    }

    pub fn metadata_service(&self) -> Option<&MetaDataSvc> {
        self.metadata.as_ref()
    }

    /// The captured dictionary, once finalize has collected it.
    pub fn metadata(&self) -> Option<&MetadataDictionary> {
        self.metadata.as_ref().and_then(|m| m.get_metadata().ok())
    }
}
