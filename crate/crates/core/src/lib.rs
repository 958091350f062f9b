//! A small event-processing framework that records provenance.
//!
//! Jobs are configured with options documents, run a chain of algorithms
//! over generated or stored events, and write a container file. When the
//! `MetaDataSvc` service is listed in `ApplicationMgr.Services`, finalize
//! snapshots every component's resolved configuration into the container's
//! `info` block, so the output alone is enough to inspect, diff and replay
//! the job that produced it.

pub mod algorithms;
pub mod app;
pub mod cli;
pub mod component;
pub mod container;
pub mod error;
pub mod event;
pub mod options;
pub mod provenance;
pub mod rng;
pub mod services;

pub use algorithms::{Algorithm, Catalogue, Decision, EventSource};
pub use app::{build_job, run_job, Job, JobEnvironment, JobReport, Phase, PhaseError, PhaseStatus};
pub use component::{ComponentDescriptor, ComponentKind, PropertySpec};
pub use container::ContainerError;
pub use error::JobError;
pub use options::{emit_canonical, merge, parse_options, OptionKey, OptionValue, OptionsSet};
pub use provenance::{InputLineage, MetadataDictionary};
