//! The metadata service: snapshots a job's fully resolved configuration and
//! input lineage at finalize time.
//!
//! The snapshot is a flat, sorted `key -> canonical value text` dictionary.
//! Rendered with [`MetadataDictionary::to_canonical`] it is a valid options
//! document, so it can be fed straight back into a job.

use std::collections::btree_map;
use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::component::{ComponentDescriptor, ComponentKind};
use crate::container;
use crate::error::JobError;
use crate::options::{
    emit_canonical, parse_options, text_to_value, OptionKey, OptionValue, OptionsSet, ParseError, ValueKind,
};

pub const SERVICE_NAME: &str = "MetaDataSvc";
/// Key namespace holding recorded input lineage.
pub const RESERVED_NAMESPACE: &str = "Provenance";

pub fn metadata_service() -> ComponentDescriptor {
    ComponentDescriptor::new(SERVICE_NAME, ComponentKind::Service).with_property("Enabled", ValueKind::BOOLEAN, true)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProvenanceError {
    #[error("metadata has not been collected")]
    NotCollected,
    #[error("cannot render `{0}`")]
    UnrenderableValue(String),
}

/// `true` iff `ApplicationMgr.Services` lists the metadata service.
pub fn is_enabled(config: &OptionsSet) -> bool {
    config
        .get("ApplicationMgr.Services")
        .and_then(OptionValue::as_text_list)
        .is_some_and(|services| services.contains(&SERVICE_NAME))
}

/// Sorted snapshot of `Component.Property` keys to canonical value text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetadataDictionary {
    entries: BTreeMap<String, String>,
}

impl MetadataDictionary {
    pub fn from_options(set: &OptionsSet) -> Self {
        let entries = set.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        MetadataDictionary { entries }
    }

    /// Parses a canonical options document.
    pub fn from_canonical(text: &str) -> Result<Self, ParseError> {
        Ok(Self::from_options(&parse_options(text)?))
    }

    /// Typed view of the dictionary, usable as a job configuration.
    pub fn to_options(&self) -> OptionsSet {
        let mut set = OptionsSet::new();
        for (k, v) in &self.entries {
            // both sides were produced by the options codec
            let key = OptionKey::parse(k).expect("dictionary key");
            let value = text_to_value(v).expect("dictionary value");
            set.insert(key, value).expect("dictionary value");
        }
        set
    }

    pub fn to_canonical(&self) -> String {
        emit_canonical(&self.to_options())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, String, String> {
        self.entries.iter()
    }

    /// Copy without `key`.
    pub fn without(&self, key: &str) -> Self {
        let mut out = self.clone();
        out.entries.remove(key);
        out
    }
}

impl<'a> IntoIterator for &'a MetadataDictionary {
    type Item = (&'a String, &'a String);
    type IntoIter = btree_map::Iter<'a, String, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// One input container a job read from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputLineage {
    pub ordinal: usize,
    /// As configured, not resolved.
    pub path: String,
    /// CRC32C of the input's `events` block.
    pub checksum: u32,
}

pub fn checksum_text(crc: u32) -> String {
    format!("{crc:08x}")
}

fn parse_checksum(key: &OptionKey, value: &OptionValue) -> Result<u32, JobError> {
    let text = value.as_text().ok_or_else(|| JobError::KindMismatch {
        key: key.to_string(),
        expected: ValueKind::TEXT,
        found: value.to_string(),
    })?;
    if text.len() != 8 || !text.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return Err(JobError::InvalidValue { key: key.to_string(), reason: "expected 8 lowercase hex digits".into() });
    }
    Ok(u32::from_str_radix(text, 16).expect("validated hex"))
}

/// Lineage recorded under `Provenance.Inputs.<n>.{Path,Checksum}` in a
/// configuration (present when the configuration came from a dictionary).
pub fn recorded_lineage(config: &OptionsSet) -> Result<Vec<InputLineage>, JobError> {
    let mut slots: BTreeMap<usize, (Option<String>, Option<u32>)> = BTreeMap::new();
    for (key, value) in config.for_component(RESERVED_NAMESPACE) {
        let parts: Vec<&str> = key.property().split('.').collect();
        let (ordinal, field) = match parts.as_slice() {
            ["Inputs", n, field @ ("Path" | "Checksum")] => (*n, *field),
            _ => return Err(JobError::UnknownProperty(key.to_string())),
        };
        let ordinal: usize = match ordinal.parse() {
            Ok(n) if ordinal == "0" || !ordinal.starts_with('0') => n,
            _ => {
                return Err(JobError::InvalidValue {
                    key: key.to_string(),
                    reason: "input ordinal must be a plain decimal index".into(),
                })
            }
        };
        let slot = slots.entry(ordinal).or_default();
        if field == "Path" {
            let path = value.as_text().ok_or_else(|| JobError::KindMismatch {
                key: key.to_string(),
                expected: ValueKind::TEXT,
                found: value.to_string(),
            })?;
            slot.0 = Some(path.to_owned());
        } else {
            slot.1 = Some(parse_checksum(key, value)?);
        }
    }

    let mut out = Vec::with_capacity(slots.len());
    for (expected, (ordinal, slot)) in slots.into_iter().enumerate() {
        match slot {
            (Some(path), Some(checksum)) if ordinal == expected => out.push(InputLineage { ordinal, path, checksum }),
            _ => {
                return Err(JobError::LineageMismatch(format!(
                    "recorded input {ordinal} is incomplete or out of sequence"
                )))
            }
        }
    }
    Ok(out)
}

/// Checks that every recorded input still exists and still has the recorded
/// `events` checksum.
pub fn verify_lineage(recorded: &[InputLineage], working_dir: &Path) -> Result<(), JobError> {
    for input in recorded {
        let resolved = working_dir.join(&input.path);
        if !resolved.exists() {
            return Err(JobError::LineageMissing(input.path.clone()));
        }
        let actual = container::events_checksum(&resolved)
            .map_err(|e| JobError::LineageMismatch(format!("`{}`: {e}", input.path)))?;
        if actual != input.checksum {
            return Err(JobError::LineageMismatch(format!(
                "`{}`: recorded events checksum {}, found {}",
                input.path,
                checksum_text(input.checksum),
                checksum_text(actual)
            )));
        }
    }
    Ok(())
}

/// Read-only view of a job's configurable state.
pub struct ConfigurationView<'a> {
    pub components: Vec<&'a ComponentDescriptor>,
    pub lineage: &'a [InputLineage],
}

/// Traverses every component and records each declared property's resolved
/// value, plus input lineage.
pub fn collect_data(view: &ConfigurationView<'_>) -> Result<MetadataDictionary, ProvenanceError> {
    let mut set = OptionsSet::new();
    let mut put = |key: String, value: OptionValue| -> Result<(), ProvenanceError> {
        let parsed = OptionKey::parse(&key).map_err(|_| ProvenanceError::UnrenderableValue(key.clone()))?;
        set.insert(parsed, value).map_err(|_| ProvenanceError::UnrenderableValue(key))?;
        Ok(())
    };

    for component in &view.components {
        for prop in component.properties() {
            put(format!("{}.{}", component.name(), prop.name()), prop.value().clone())?;
        }
    }
    for input in view.lineage {
        let prefix = format!("{RESERVED_NAMESPACE}.Inputs.{}", input.ordinal);
        put(format!("{prefix}.Path"), OptionValue::text(&input.path))?;
        put(format!("{prefix}.Checksum"), OptionValue::text(checksum_text(input.checksum)))?;
    }
    put(format!("{SERVICE_NAME}.Enabled"), OptionValue::Boolean(true))?;
    Ok(MetadataDictionary::from_options(&set))
}

/// Service state: collects once, then hands out the same snapshot.
#[derive(Debug, Default)]
pub struct MetaDataSvc {
    snapshot: Option<MetadataDictionary>,
    collections: usize,
}

impl MetaDataSvc {
    pub fn new() -> Self {
        Self::default()
    }

    /// Collects the snapshot. Later calls leave it untouched.
    pub fn start(&mut self, view: &ConfigurationView<'_>) -> Result<(), ProvenanceError> {
        if self.snapshot.is_some() {
            return Ok(());
        }
        self.snapshot = Some(collect_data(view)?);
        self.collections += 1;
        Ok(())
    }

    pub fn get_metadata(&self) -> Result<&MetadataDictionary, ProvenanceError> {
        self.snapshot.as_ref().ok_or(ProvenanceError::NotCollected)
    }

    /// How many times data was actually collected (0 or 1).
    pub fn collections(&self) -> usize {
        self.collections
    }
}
