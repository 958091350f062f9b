//! Configurable components and their declared properties.

use std::fmt;

use crate::options::{OptionValue, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentKind {
    Algorithm,
    Service,
    Tool,
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentKind::Algorithm => "algorithm",
            ComponentKind::Service => "service",
            ComponentKind::Tool => "tool",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertySpec {
    name: String,
    kind: ValueKind,
    default: OptionValue,
    applied: OptionValue,
}

impl PropertySpec {
    /// Panics if `default` does not have the declared kind.
    pub fn new(name: &str, kind: ValueKind, default: OptionValue) -> Self {
        assert!(default.conforms_to(kind) && default.validate().is_ok(), "default for `{name}` is not a valid {kind}");
        PropertySpec { name: name.to_owned(), kind, applied: default.clone(), default }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn default_value(&self) -> &OptionValue {
        &self.default
    }

    /// The resolved value: the applied assignment, or the default.
    pub fn value(&self) -> &OptionValue {
        &self.applied
    }

    /// Sets the applied value; fails when the kind does not match.
    pub fn apply(&mut self, value: OptionValue) -> Result<(), OptionValue> {
        if !value.conforms_to(self.kind) || value.validate().is_err() {
            return Err(value);
        }
        self.applied = value;
        Ok(())
    }
}

/// A named algorithm, service or tool with its declared properties.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDescriptor {
    name: String,
    kind: ComponentKind,
    properties: Vec<PropertySpec>,
}

impl ComponentDescriptor {
    pub fn new(name: &str, kind: ComponentKind) -> Self {
        ComponentDescriptor { name: name.to_owned(), kind, properties: Vec::new() }
    }

    /// Builder-style property declaration.
    pub fn with_property(mut self, name: &str, kind: ValueKind, default: impl Into<OptionValue>) -> Self {
        assert!(self.property(name).is_none(), "property `{name}` declared twice");
        self.properties.push(PropertySpec::new(name, kind, default.into()));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ComponentKind {
        self.kind
    }

    pub fn properties(&self) -> &[PropertySpec] {
        &self.properties
    }

    pub fn property(&self, name: &str) -> Option<&PropertySpec> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn property_mut(&mut self, name: &str) -> Option<&mut PropertySpec> {
        self.properties.iter_mut().find(|p| p.name == name)
    }

    /// Resolved value of a declared property. Panics on undeclared names,
    /// which are programming errors in component code.
    pub fn value(&self, name: &str) -> &OptionValue {
        match self.property(name) {
            Some(p) => p.value(),
            None => panic!("`{}` has no property `{name}`", self.name),
        }
    }

    pub fn integer(&self, name: &str) -> i64 {
        self.value(name).as_integer().expect("integer property")
    }

    pub fn float(&self, name: &str) -> f64 {
        self.value(name).as_float().expect("float property")
    }

    pub fn boolean(&self, name: &str) -> bool {
        self.value(name).as_bool().expect("boolean property")
    }

    pub fn text(&self, name: &str) -> &str {
        self.value(name).as_text().expect("text property")
    }
}
