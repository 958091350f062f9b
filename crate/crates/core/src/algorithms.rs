//! Algorithm interface and the demo component catalogue.

use std::fmt;

use crate::component::{ComponentDescriptor, ComponentKind};
use crate::container::{self, EVENTS_BLOCK};
use crate::error::JobError;
use crate::event::{decode_events, EventRecord, EventTable};
use crate::options::{OptionValue, ValueKind};
use crate::provenance;
use crate::rng::SplitMix64;
use crate::services::{demo_tool, ServiceRegistry, ToolFactory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Pass,
    /// Drop the event; downstream algorithms do not see it.
    Veto,
}

/// Produces events. Implemented by the first algorithm of a chain.
pub trait EventSource {
    fn field_names(&self) -> &[String];

    fn next_event(&mut self) -> Result<Option<Vec<f64>>, String>;
}

pub trait Algorithm: Send {
    fn descriptor(&self) -> &ComponentDescriptor;

    fn descriptor_mut(&mut self) -> &mut ComponentDescriptor;

    fn is_source(&self) -> bool {
        false
    }

    fn source(&mut self) -> Option<&mut dyn EventSource> {
        None
    }

    /// Runs after job options have been applied to the descriptor.
    fn initialize(&mut self, _services: &mut ServiceRegistry) -> Result<(), JobError> {
        Ok(())
    }

    fn execute(&mut self, event: &mut EventRecord, services: &mut ServiceRegistry) -> Result<Decision, String>;

    /// Extra payload blocks for the output container.
    fn finalize(&mut self, _services: &mut ServiceRegistry) -> Result<Vec<(String, Vec<u8>)>, String> {
        Ok(Vec::new())
    }

    /// Input container read by this algorithm, as configured, with the
    /// CRC32C of its `events` block. Available after initialize.
    fn input(&self) -> Option<(&str, u32)> {
        None
    }
}

pub type AlgorithmFactory = Box<dyn Fn() -> Box<dyn Algorithm> + Send + Sync>;
pub type ServiceFactory = fn() -> ComponentDescriptor;

/// Components a job may name in its configuration.
pub struct Catalogue {
    algorithms: Vec<(String, AlgorithmFactory)>,
    services: Vec<(String, ServiceFactory)>,
    tools: Vec<(String, ToolFactory)>,
}

impl fmt::Debug for Catalogue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Catalogue")
            .field("algorithms", &self.algorithm_names().collect::<Vec<_>>())
            .field("services", &self.services.iter().map(|(n, _)| n).collect::<Vec<_>>())
            .field("tools", &self.tools.iter().map(|(n, _)| n).collect::<Vec<_>>())
            .finish()
    }
}

impl Default for Catalogue {
    fn default() -> Self {
        Self::demo()
    }
}

impl Catalogue {
    pub fn empty() -> Self {
        Catalogue { algorithms: Vec::new(), services: Vec::new(), tools: Vec::new() }
    }

    /// `RandomEventSource`, `ThresholdFilter`, `Accumulator`, `FileEventSource`,
    /// the `MetaDataSvc` service and the `DemoTool` tool.
    pub fn demo() -> Self {
        let mut c = Self::empty();
        c.register_algorithm("RandomEventSource", || Box::new(RandomEventSource::new()));
        c.register_algorithm("ThresholdFilter", || Box::new(ThresholdFilter::new()));
        c.register_algorithm("Accumulator", || Box::new(Accumulator::new()));
        c.register_algorithm("FileEventSource", || Box::new(FileEventSource::new()));
        c.register_service(provenance::SERVICE_NAME, provenance::metadata_service);
        c.register_tool("DemoTool", demo_tool);
        c
    }

    pub fn register_algorithm<F>(&mut self, name: &str, factory: F) -> &mut Self
    where
        F: Fn() -> Box<dyn Algorithm> + Send + Sync + 'static,
    {
        self.algorithms.retain(|(n, _)| n != name);
        self.algorithms.push((name.to_owned(), Box::new(factory)));
        self
    }

    pub fn register_service(&mut self, name: &str, factory: ServiceFactory) -> &mut Self {
        self.services.retain(|(n, _)| n != name);
        self.services.push((name.to_owned(), factory));
        self
    }

    pub fn register_tool(&mut self, name: &str, factory: ToolFactory) -> &mut Self {
        self.tools.retain(|(n, _)| n != name);
        self.tools.push((name.to_owned(), factory));
        self
    }

    pub fn create_algorithm(&self, name: &str) -> Option<Box<dyn Algorithm>> {
        self.algorithms.iter().find(|(n, _)| n == name).map(|(_, f)| f())
    }

    pub fn create_service(&self, name: &str) -> Option<ComponentDescriptor> {
        self.services.iter().find(|(n, _)| n == name).map(|(_, f)| f())
    }

    pub fn tools(&self) -> Vec<(String, ToolFactory)> {
        self.tools.clone()
    }

    pub fn algorithm_names(&self) -> impl Iterator<Item = &str> {
        self.algorithms.iter().map(|(n, _)| n.as_str())
    }
}

fn algorithm(name: &str) -> ComponentDescriptor {
    ComponentDescriptor::new(name, ComponentKind::Algorithm)
}

fn invalid(desc: &ComponentDescriptor, property: &str, reason: impl Into<String>) -> JobError {
    JobError::InvalidValue { key: format!("{}.{property}", desc.name()), reason: reason.into() }
}

/// Uniform [0, 1) fields `f0..f{k-1}` drawn from SplitMix64, one draw per
/// field per event in row-major order.
pub struct RandomEventSource {
    desc: ComponentDescriptor,
    fields: Vec<String>,
    rng: SplitMix64,
    remaining: u64,
}

impl RandomEventSource {
    pub fn new() -> Self {
        RandomEventSource {
            desc: algorithm("RandomEventSource")
                .with_property("Seed", ValueKind::INTEGER, 0)
                .with_property("NumEvents", ValueKind::INTEGER, 10)
                .with_property("FieldCount", ValueKind::INTEGER, 1),
            fields: Vec::new(),
            rng: SplitMix64::new(0),
            remaining: 0,
        }
    }
}

impl Default for RandomEventSource {
    fn default() -> Self {
        Self::new()
    }
}

impl EventSource for RandomEventSource {
    fn field_names(&self) -> &[String] {
        &self.fields
    }

    fn next_event(&mut self) -> Result<Option<Vec<f64>>, String> {
        if self.remaining == 0 {
            return Ok(None);
        }
        self.remaining -= 1;
        Ok(Some(self.fields.iter().map(|_| self.rng.next_f64()).collect()))
    }
}

impl Algorithm for RandomEventSource {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.desc
    }

    fn descriptor_mut(&mut self) -> &mut ComponentDescriptor {
        &mut self.desc
    }

    fn is_source(&self) -> bool {
        true
    }

    fn source(&mut self) -> Option<&mut dyn EventSource> {
        Some(self)
    }

    fn initialize(&mut self, _services: &mut ServiceRegistry) -> Result<(), JobError> {
        let num = self.desc.integer("NumEvents");
        if num < 0 {
            return Err(invalid(&self.desc, "NumEvents", "must not be negative"));
        }
        let k = self.desc.integer("FieldCount");
        if !(1..=u16::MAX as i64).contains(&k) {
            return Err(invalid(&self.desc, "FieldCount", "must be between 1 and 65535"));
        }
        self.fields = (0..k).map(|i| format!("f{i}")).collect();
        // negative seeds use their two's-complement bits
        self.rng = SplitMix64::new(self.desc.integer("Seed") as u64);
        self.remaining = num as u64;
        Ok(())
    }

    fn execute(&mut self, _event: &mut EventRecord, _services: &mut ServiceRegistry) -> Result<Decision, String> {
        Ok(Decision::Pass)
    }
}

/// Vetoes events whose `Field` is below `Min`.
pub struct ThresholdFilter {
    desc: ComponentDescriptor,
    field: String,
    min: f64,
}

impl ThresholdFilter {
    pub fn new() -> Self {
        ThresholdFilter {
            desc: algorithm("ThresholdFilter").with_property("Field", ValueKind::TEXT, "f0").with_property(
                "Min",
                ValueKind::FLOAT,
                0.0,
            ),
            field: String::new(),
            min: 0.0,
        }
    }
}

impl Default for ThresholdFilter {
    fn default() -> Self {
        Self::new()
    }
}

impl Algorithm for ThresholdFilter {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.desc
    }

    fn descriptor_mut(&mut self) -> &mut ComponentDescriptor {
        &mut self.desc
    }

    fn initialize(&mut self, _services: &mut ServiceRegistry) -> Result<(), JobError> {
        self.field = self.desc.text("Field").to_owned();
        self.min = self.desc.float("Min");
        Ok(())
    }

    fn execute(&mut self, event: &mut EventRecord, _services: &mut ServiceRegistry) -> Result<Decision, String> {
        let value = event.get(&self.field).ok_or_else(|| format!("event has no field `{}`", self.field))?;
        Ok(if value < self.min { Decision::Veto } else { Decision::Pass })
    }
}

/// Sums `Field` over the events that reach it and writes a `summary` block:
/// `u64` event count then `f64` sum, little-endian.
pub struct Accumulator {
    desc: ComponentDescriptor,
    field: String,
    count: u64,
    sum: f64,
}

pub const SUMMARY_BLOCK: &str = "summary";

impl Accumulator {
    pub fn new() -> Self {
        Accumulator {
            desc: algorithm("Accumulator").with_property("Field", ValueKind::TEXT, "f0"),
            field: String::new(),
            count: 0,
            sum: 0.0,
        }
    }
}

impl Default for Accumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl Algorithm for Accumulator {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.desc
    }

    fn descriptor_mut(&mut self) -> &mut ComponentDescriptor {
        &mut self.desc
    }

    fn initialize(&mut self, _services: &mut ServiceRegistry) -> Result<(), JobError> {
        self.field = self.desc.text("Field").to_owned();
        Ok(())
    }

    fn execute(&mut self, event: &mut EventRecord, _services: &mut ServiceRegistry) -> Result<Decision, String> {
        let value = event.get(&self.field).ok_or_else(|| format!("event has no field `{}`", self.field))?;
        self.count += 1;
        self.sum += value;
        Ok(Decision::Pass)
    }

    fn finalize(&mut self, _services: &mut ServiceRegistry) -> Result<Vec<(String, Vec<u8>)>, String> {
        let mut payload = Vec::with_capacity(16);
        payload.extend_from_slice(&self.count.to_le_bytes());
        payload.extend_from_slice(&self.sum.to_le_bytes());
        Ok(vec![(SUMMARY_BLOCK.to_owned(), payload)])
    }
}

/// Replays the `events` block of an existing container.
pub struct FileEventSource {
    desc: ComponentDescriptor,
    table: EventTable,
    next: usize,
    checksum: Option<u32>,
}

impl FileEventSource {
    pub fn new() -> Self {
        FileEventSource {
            desc: algorithm("FileEventSource").with_property("Input", ValueKind::TEXT, OptionValue::text("")),
            table: EventTable { fields: Vec::new(), rows: Vec::new() },
            next: 0,
            checksum: None,
        }
    }
}

impl Default for FileEventSource {
    fn default() -> Self {
        Self::new()
    }
}

impl EventSource for FileEventSource {
    fn field_names(&self) -> &[String] {
        &self.table.fields
    }

    fn next_event(&mut self) -> Result<Option<Vec<f64>>, String> {
        let row = self.table.rows.get(self.next).cloned();
        self.next += 1;
        Ok(row)
    }
}

impl Algorithm for FileEventSource {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.desc
    }

    fn descriptor_mut(&mut self) -> &mut ComponentDescriptor {
        &mut self.desc
    }

    fn is_source(&self) -> bool {
        true
    }

    fn source(&mut self) -> Option<&mut dyn EventSource> {
        Some(self)
    }

    fn initialize(&mut self, services: &mut ServiceRegistry) -> Result<(), JobError> {
        let input = self.desc.text("Input");
        if input.is_empty() {
            return Err(invalid(&self.desc, "Input", "no input container configured"));
        }
        let path = services.resolve(input);
        let payload = container::read_block(&path, EVENTS_BLOCK)
            .map_err(|source| JobError::Input { path: path.clone(), source })?;
        self.table = decode_events(&payload).map_err(|e| invalid(&self.desc, "Input", e.to_string()))?;
        self.checksum = Some(crc32c::crc32c(&payload));
        Ok(())
    }

    fn execute(&mut self, _event: &mut EventRecord, _services: &mut ServiceRegistry) -> Result<Decision, String> {
        Ok(Decision::Pass)
    }

    fn input(&self) -> Option<(&str, u32)> {
        self.checksum.map(|c| (self.desc.text("Input"), c))
    }
}
