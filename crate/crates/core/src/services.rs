//! The standard service set: messages, job options, tools, event data and
//! persistency, plus whatever optional services a job declares.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::component::{ComponentDescriptor, ComponentKind};
use crate::error::JobError;
use crate::options::{OptionKey, OptionValue, OptionsSet, ValueKind};
use crate::provenance;

pub const MESSAGE_SVC: &str = "MessageSvc";
pub const JOB_OPTIONS_SVC: &str = "JobOptionsSvc";
pub const TOOL_SVC: &str = "ToolSvc";
pub const EVENT_DATA_SVC: &str = "EventDataSvc";
pub const CONTAINER_WRITER_SVC: &str = "ContainerWriterSvc";

/// Services present in every job, in start order.
pub const STANDARD_SERVICES: [&str; 5] = [MESSAGE_SVC, JOB_OPTIONS_SVC, TOOL_SVC, EVENT_DATA_SVC, CONTAINER_WRITER_SVC];

pub const DEBUG: i64 = 0;
pub const VERBOSE: i64 = 1;
pub const INFO: i64 = 2;
pub const WARNING: i64 = 3;
pub const ERROR: i64 = 4;

pub const DEFAULT_OUTPUT_LEVEL: i64 = WARNING;

fn level_name(level: i64) -> &'static str {
    match level {
        i64::MIN..=DEBUG => "DEBUG",
        VERBOSE => "VERBOSE",
        INFO => "INFO",
        WARNING => "WARNING",
        _ => "ERROR",
    }
}

pub(crate) fn standard_service(name: &str) -> Option<ComponentDescriptor> {
    let d = ComponentDescriptor::new(name, ComponentKind::Service);
    match name {
        MESSAGE_SVC => Some(d.with_property("OutputLevel", ValueKind::INTEGER, DEFAULT_OUTPUT_LEVEL)),
        JOB_OPTIONS_SVC | TOOL_SVC | EVENT_DATA_SVC | CONTAINER_WRITER_SVC => Some(d),
        _ => None,
    }
}

/// Where `MessageSvc` output goes.
#[derive(Debug, Clone, Default)]
pub enum LogSink {
    #[default]
    Stderr,
    Memory(Arc<Mutex<Vec<u8>>>),
    Discard,
}

impl LogSink {
    pub fn memory() -> (LogSink, Arc<Mutex<Vec<u8>>>) {
        let buf = Arc::new(Mutex::new(Vec::new()));
        (LogSink::Memory(buf.clone()), buf)
    }

    fn write_line(&self, line: &str) {
        match self {
            LogSink::Stderr => {
                let _ = writeln!(io::stderr().lock(), "{line}");
            }
            LogSink::Memory(buf) => {
                let mut buf = buf.lock().unwrap_or_else(|e| e.into_inner());
                buf.extend_from_slice(line.as_bytes());
                buf.push(b'\n');
            }
            LogSink::Discard => {}
        }
    }
}

/// Shared handle to a tool instance. One instance exists per tool name.
pub type ToolHandle = Arc<ComponentDescriptor>;

pub type ToolFactory = fn() -> ComponentDescriptor;

pub fn demo_tool() -> ComponentDescriptor {
    ComponentDescriptor::new("DemoTool", ComponentKind::Tool).with_property("Gain", ValueKind::FLOAT, 1.0)
}

pub struct ServiceRegistry {
    services: Vec<ComponentDescriptor>,
    tool_catalogue: Vec<(String, ToolFactory)>,
    tools: Vec<ToolHandle>,
    sink: LogSink,
    working_dir: PathBuf,
    started: Vec<String>,
    trace: Vec<String>,
}

impl ServiceRegistry {
    /// Standard services followed by `extra` in declaration order.
    pub fn new(
        extra: Vec<ComponentDescriptor>,
        tool_catalogue: Vec<(String, ToolFactory)>,
        sink: LogSink,
        working_dir: PathBuf,
    ) -> Self {
        let mut services: Vec<ComponentDescriptor> =
            STANDARD_SERVICES.iter().filter_map(|n| standard_service(n)).collect();
        services.extend(extra);
        ServiceRegistry {
            services,
            tool_catalogue,
            tools: Vec::new(),
            sink,
            working_dir,
            started: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn services(&self) -> &[ComponentDescriptor] {
        &self.services
    }

    pub fn service(&self, name: &str) -> Option<&ComponentDescriptor> {
        self.services.iter().find(|s| s.name() == name)
    }

    pub fn service_mut(&mut self, name: &str) -> Option<&mut ComponentDescriptor> {
        self.services.iter_mut().find(|s| s.name() == name)
    }

    pub fn tools(&self) -> impl Iterator<Item = &ComponentDescriptor> {
        self.tools.iter().map(|t| t.as_ref())
    }

    pub fn working_dir(&self) -> &Path {
        &self.working_dir
    }

    /// Resolves a configured path against the job's working directory.
    pub fn resolve(&self, path: &str) -> PathBuf {
        self.working_dir.join(path)
    }

    pub fn output_level(&self) -> i64 {
        self.service(MESSAGE_SVC).map_or(DEFAULT_OUTPUT_LEVEL, |s| s.integer("OutputLevel"))
    }

    /// Emits `message` iff `level` is at or above `MessageSvc.OutputLevel`.
    pub fn log(&self, level: i64, component: &str, message: &str) {
        if level >= self.output_level() {
            self.sink.write_line(&format!("{component:<20} {:<7} {message}", level_name(level)));
        }
    }

    fn tool_factory(&self, name: &str) -> Option<ToolFactory> {
        self.tool_catalogue.iter().find(|(n, _)| n == name).map(|(_, f)| *f)
    }

    fn tool_index(&mut self, name: &str) -> Option<usize> {
        if let Some(i) = self.tools.iter().position(|t| t.name() == name) {
            return Some(i);
        }
        let factory = self.tool_factory(name)?;
        self.tools.push(Arc::new(factory()));
        self.trace.push(format!("create {name}"));
        Some(self.tools.len() - 1)
    }

    /// Returns the single shared instance of a tool, creating it on first use.
    pub fn retrieve_tool(&mut self, name: &str) -> Result<ToolHandle, JobError> {
        let idx = self.tool_index(name).ok_or_else(|| JobError::UnknownTool(name.to_owned()))?;
        Ok(self.tools[idx].clone())
    }

    /// Tool descriptor for option application. Only valid before any handle
    /// has been given out.
    fn configure_tool(&mut self, name: &str) -> Option<&mut ComponentDescriptor> {
        let idx = self.tool_index(name)?;
        Some(Arc::make_mut(&mut self.tools[idx]))
    }

    pub(crate) fn start_all(&mut self) {
        for s in &self.services {
            self.trace.push(format!("start {}", s.name()));
            self.started.push(s.name().to_owned());
        }
    }

    pub(crate) fn stop_all(&mut self) {
        while let Some(name) = self.started.pop() {
            self.trace.push(format!("stop {name}"));
        }
    }

    /// Lifecycle events in the order they happened (`start X`, `stop X`, `create T`).
    pub fn trace(&self) -> &[String] {
        &self.trace
    }
}

/// Anything that can look up components by name for option application.
pub trait PropertyTarget {
    fn component_mut(&mut self, name: &str) -> Option<&mut ComponentDescriptor>;

    fn registry_mut(&mut self) -> &mut ServiceRegistry;
}

/// Applied `(key, value)` pairs, in application order.
pub type AppliedLog = Vec<(OptionKey, OptionValue)>;

/// Applies every assignment in `config` to the matching component property.
///
/// Keys under the reserved `Provenance` namespace are recorded lineage, not
/// properties, and are skipped. Catalogued tools that receive assignments
/// are instantiated here.
pub fn apply_options(target: &mut dyn PropertyTarget, config: &OptionsSet) -> Result<AppliedLog, JobError> {
    let mut log = AppliedLog::new();
    for (key, value) in config {
        if key.component() == provenance::RESERVED_NAMESPACE {
            continue;
        }
        let component = match target.component_mut(key.component()) {
            Some(c) => c,
            None => target
                .registry_mut()
                .configure_tool(key.component())
                .ok_or_else(|| JobError::UnknownComponent(key.component().to_owned()))?,
        };
        let prop = component.property_mut(key.property()).ok_or_else(|| JobError::UnknownProperty(key.to_string()))?;
        let expected = prop.kind();
        prop.apply(value.clone()).map_err(|v| JobError::KindMismatch {
            key: key.to_string(),
            expected,
            found: v.to_string(),
        })?;
        log.push((key.clone(), value.clone()));
    }
    Ok(log)
}
