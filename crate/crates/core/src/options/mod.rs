//! Job options: typed values, component-qualified keys and the keyed
//! collection a job is configured from.
//!
//! Options documents are line-oriented assignments:
//!
//! ```text
//! # comment
//! ApplicationMgr.TopAlg = ["RandomEventSource", "ThresholdFilter"]
//! ThresholdFilter.Min = 0.5
//! ```
//!
//! [`parse_options`] reads them, [`emit_canonical`] writes the one canonical
//! form (sorted keys, single space around `=`, LF endings). The canonical form
//! is also what the metadata service stores inside output containers.

mod emit;
mod parse;

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::collections::btree_map;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use thiserror::Error;

pub use emit::{emit_canonical, value_to_text};
pub use parse::{parse_options, text_to_value, ParseError, ParseErrorKind};

/// Kind of a non-list value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    Integer,
    Float,
    Boolean,
    Text,
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalarKind::Integer => "integer",
            ScalarKind::Float => "float",
            ScalarKind::Boolean => "boolean",
            ScalarKind::Text => "text",
        })
    }
}

/// Declared kind of a property value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueKind {
    Scalar(ScalarKind),
    List(ScalarKind),
}

impl ValueKind {
    pub const INTEGER: ValueKind = ValueKind::Scalar(ScalarKind::Integer);
    pub const FLOAT: ValueKind = ValueKind::Scalar(ScalarKind::Float);
    pub const BOOLEAN: ValueKind = ValueKind::Scalar(ScalarKind::Boolean);
    pub const TEXT: ValueKind = ValueKind::Scalar(ScalarKind::Text);
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueKind::Scalar(k) => k.fmt(f),
            ValueKind::List(k) => write!(f, "list of {k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("float value is not finite")]
    NonFiniteFloat,
    #[error("list mixes {expected} and {found} values")]
    HeterogeneousList { expected: ScalarKind, found: ScalarKind },
    #[error("lists cannot be nested")]
    NestedList,
}

/// A single configuration value.
///
/// Equality on floats is bitwise, so `0.0` and `-0.0` are different values
/// (they also render differently).
#[derive(Debug, Clone)]
pub enum OptionValue {
    Integer(i64),
    Float(f64),
    Boolean(bool),
    Text(String),
    List(Vec<OptionValue>),
}

impl OptionValue {
    pub fn text(s: impl Into<String>) -> Self {
        OptionValue::Text(s.into())
    }

    pub fn text_list<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        OptionValue::List(items.into_iter().map(|s| OptionValue::Text(s.into())).collect())
    }

    /// Scalar kind of a non-list value, `None` for lists.
    pub fn scalar_kind(&self) -> Option<ScalarKind> {
        match self {
            OptionValue::Integer(_) => Some(ScalarKind::Integer),
            OptionValue::Float(_) => Some(ScalarKind::Float),
            OptionValue::Boolean(_) => Some(ScalarKind::Boolean),
            OptionValue::Text(_) => Some(ScalarKind::Text),
            OptionValue::List(_) => None,
        }
    }

    /// Whether this value may be assigned to a property of `kind`.
    /// Empty lists match every list kind.
    pub fn conforms_to(&self, kind: ValueKind) -> bool {
        match (self, kind) {
            (OptionValue::List(items), ValueKind::List(k)) => items.iter().all(|v| v.scalar_kind() == Some(k)),
            (OptionValue::List(_), ValueKind::Scalar(_)) => false,
            (v, ValueKind::Scalar(k)) => v.scalar_kind() == Some(k),
            (_, ValueKind::List(_)) => false,
        }
    }

    /// Checks the value-domain invariants: finite floats, flat homogeneous lists.
    pub fn validate(&self) -> Result<(), ValueError> {
        match self {
            OptionValue::Float(f) if !f.is_finite() => Err(ValueError::NonFiniteFloat),
            OptionValue::List(items) => {
                let mut expected = None;
                for item in items {
                    let found = item.scalar_kind().ok_or(ValueError::NestedList)?;
                    item.validate()?;
                    match expected {
                        None => expected = Some(found),
                        Some(e) if e != found => return Err(ValueError::HeterogeneousList { expected: e, found }),
                        Some(_) => {}
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            OptionValue::Integer(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f64> {
        match self {
            OptionValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            OptionValue::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            OptionValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[OptionValue]> {
        match self {
            OptionValue::List(items) => Some(items),
            _ => None,
        }
    }

    /// The elements of a list of text, `None` for anything else.
    pub fn as_text_list(&self) -> Option<Vec<&str>> {
        self.as_list()?.iter().map(OptionValue::as_text).collect()
    }
}

impl PartialEq for OptionValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (OptionValue::Integer(a), OptionValue::Integer(b)) => a == b,
            (OptionValue::Float(a), OptionValue::Float(b)) => a.to_bits() == b.to_bits(),
            (OptionValue::Boolean(a), OptionValue::Boolean(b)) => a == b,
            (OptionValue::Text(a), OptionValue::Text(b)) => a == b,
            (OptionValue::List(a), OptionValue::List(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for OptionValue {}

impl fmt::Display for OptionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match value_to_text(self) {
            Ok(s) => f.write_str(&s),
            Err(e) => write!(f, "<invalid: {e}>"),
        }
    }
}

impl From<i64> for OptionValue {
    fn from(v: i64) -> Self {
        OptionValue::Integer(v)
    }
}

impl From<i32> for OptionValue {
    fn from(v: i32) -> Self {
        OptionValue::Integer(v.into())
    }
}

impl From<f64> for OptionValue {
    fn from(v: f64) -> Self {
        OptionValue::Float(v)
    }
}

impl From<bool> for OptionValue {
    fn from(v: bool) -> Self {
        OptionValue::Boolean(v)
    }
}

impl From<&str> for OptionValue {
    fn from(v: &str) -> Self {
        OptionValue::Text(v.to_owned())
    }
}

impl From<String> for OptionValue {
    fn from(v: String) -> Self {
        OptionValue::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed key `{key}`: {reason}")]
pub struct KeyError {
    pub key: String,
    pub reason: &'static str,
}

/// `Component.Property[.Sub...]`.
///
/// The first segment is an identifier naming the component. Later segments
/// are identifiers or decimal indices (`Provenance.Inputs.0.Path`).
#[derive(Debug, Clone)]
pub struct OptionKey {
    full: String,
    dot: usize,
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_index(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

impl OptionKey {
    pub fn parse(key: &str) -> Result<Self, KeyError> {
        let err = |reason| KeyError { key: key.to_owned(), reason };
        let dot = key.find('.').ok_or_else(|| err("expected `Component.Property`"))?;
        if !is_ident(&key[..dot]) {
            return Err(err("component name is not an identifier"));
        }
        for segment in key[dot + 1..].split('.') {
            if segment.is_empty() {
                return Err(err("empty segment"));
            }
            if !is_ident(segment) && !is_index(segment) {
                return Err(err("segment is neither an identifier nor an index"));
            }
        }
        Ok(OptionKey { full: key.to_owned(), dot })
    }

    pub fn new(component: &str, property: &str) -> Result<Self, KeyError> {
        Self::parse(&format!("{component}.{property}"))
    }

    pub fn component(&self) -> &str {
        &self.full[..self.dot]
    }

    pub fn property(&self) -> &str {
        &self.full[self.dot + 1..]
    }

    pub fn as_str(&self) -> &str {
        &self.full
    }
}

impl PartialEq for OptionKey {
    fn eq(&self, other: &Self) -> bool {
        self.full == other.full
    }
}

impl Eq for OptionKey {}

// must agree with `str` hashing for the `Borrow<str>` impl
impl Hash for OptionKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.full.hash(state);
    }
}

impl PartialOrd for OptionKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OptionKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.full.as_bytes().cmp(other.full.as_bytes())
    }
}

impl Borrow<str> for OptionKey {
    fn borrow(&self) -> &str {
        &self.full
    }
}

impl fmt::Display for OptionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.full)
    }
}

impl FromStr for OptionKey {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OptionKey::parse(s)
    }
}

/// Ordered collection of option assignments with unique keys.
///
/// Iteration is lexicographic by the key's bytes. Every stored value has
/// passed [`OptionValue::validate`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OptionsSet {
    entries: BTreeMap<OptionKey, OptionValue>,
}

impl OptionsSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or overwrites an assignment, returning the previous value.
    pub fn insert(&mut self, key: OptionKey, value: OptionValue) -> Result<Option<OptionValue>, ValueError> {
        value.validate()?;
        Ok(self.entries.insert(key, value))
    }

    /// Convenience for literal keys; panics on malformed keys or invalid values.
    pub fn set(&mut self, key: &str, value: impl Into<OptionValue>) -> &mut Self {
        let key = OptionKey::parse(key).expect("malformed option key");
        self.insert(key, value.into()).expect("invalid option value");
        self
    }

    pub fn get(&self, key: &str) -> Option<&OptionValue> {
        self.entries.get(key)
    }

    pub fn remove(&mut self, key: &str) -> Option<OptionValue> {
        self.entries.remove(key)
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

    pub fn iter(&self) -> btree_map::Iter<'_, OptionKey, OptionValue> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &OptionKey> {
        self.entries.keys()
    }

    /// Assignments whose component segment is `component`.
    pub fn for_component<'a>(
        &'a self,
        component: &'a str,
    ) -> impl Iterator<Item = (&'a OptionKey, &'a OptionValue)> + 'a {
        self.entries.iter().filter(move |(k, _)| k.component() == component)
    }
}

impl<'a> IntoIterator for &'a OptionsSet {
    type Item = (&'a OptionKey, &'a OptionValue);
    type IntoIter = btree_map::Iter<'a, OptionKey, OptionValue>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// Union of both sets; `overlay` wins where keys collide.
pub fn merge(base: &OptionsSet, overlay: &OptionsSet) -> OptionsSet {
    let mut out = base.clone();
    for (k, v) in overlay {
        out.entries.insert(k.clone(), v.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_segments() {
        let k = OptionKey::parse("ThresholdFilter.Min").unwrap();
        assert_eq!(k.component(), "ThresholdFilter");
        assert_eq!(k.property(), "Min");

        let k = OptionKey::parse("Provenance.Inputs.0.Path").unwrap();
        assert_eq!(k.component(), "Provenance");
        assert_eq!(k.property(), "Inputs.0.Path");
    }

    #[test]
    fn malformed_keys() {
        for bad in ["A", "", ".X", "A.", "A..B", "1A.X", "A.X-Y", "A. X", "0.X", "A.b c"] {
            assert!(OptionKey::parse(bad).is_err(), "{bad:?} accepted");
        }
    }

    #[test]
    fn key_order_is_bytewise() {
        let mut keys: Vec<OptionKey> =
            ["a.x", "B.y", "A_B.x", "A.x", "AB.x"].iter().map(|k| OptionKey::parse(k).unwrap()).collect();
        keys.sort();
        let sorted: Vec<&str> = keys.iter().map(|k| k.as_str()).collect();
        assert_eq!(sorted, ["A.x", "AB.x", "A_B.x", "B.y", "a.x"]);
    }

    #[test]
    fn list_validation() {
        let ok = OptionValue::List(vec![1.into(), 2.into()]);
        assert!(ok.validate().is_ok());
        assert!(OptionValue::List(vec![]).validate().is_ok());

        let mixed = OptionValue::List(vec![1.into(), 2.5.into()]);
        assert_eq!(
            mixed.validate(),
            Err(ValueError::HeterogeneousList { expected: ScalarKind::Integer, found: ScalarKind::Float })
        );

        let nested = OptionValue::List(vec![OptionValue::List(vec![])]);
        assert_eq!(nested.validate(), Err(ValueError::NestedList));
        assert_eq!(OptionValue::Float(f64::NAN).validate(), Err(ValueError::NonFiniteFloat));
    }

    #[test]
    fn insert_rejects_invalid_values() {
        let mut set = OptionsSet::new();
        let key = OptionKey::parse("A.F").unwrap();
        assert!(set.insert(key.clone(), OptionValue::Float(f64::INFINITY)).is_err());
        assert!(set.is_empty());
    }

    #[test]
    fn empty_list_conforms_to_any_list_kind() {
        let empty = OptionValue::List(vec![]);
        assert!(empty.conforms_to(ValueKind::List(ScalarKind::Text)));
        assert!(empty.conforms_to(ValueKind::List(ScalarKind::Float)));
        assert!(!empty.conforms_to(ValueKind::TEXT));
        assert!(!OptionValue::Integer(1).conforms_to(ValueKind::FLOAT));
    }

    #[test]
    fn float_equality_is_bitwise() {
        assert_ne!(OptionValue::Float(0.0), OptionValue::Float(-0.0));
        assert_eq!(OptionValue::Float(0.5), OptionValue::Float(0.5));
    }

    #[test]
    fn merge_examples() {
        let mut s = OptionsSet::new();
        s.set("A.X", 1).set("C.Z", "z");
        let empty = OptionsSet::new();
        assert_eq!(merge(&empty, &s), s);
        assert_eq!(merge(&s, &empty), s);

        let mut base = OptionsSet::new();
        base.set("A.X", 1);
        let mut overlay = OptionsSet::new();
        overlay.set("A.X", 2).set("B.Y", true);
        let mut expected = OptionsSet::new();
        expected.set("A.X", 2).set("B.Y", true);
        assert_eq!(merge(&base, &overlay), expected);
    }

    #[test]
    fn equality_ignores_insertion_order() {
        let mut a = OptionsSet::new();
        a.set("B.Y", true).set("A.X", 1);
        let mut b = OptionsSet::new();
        b.set("A.X", 1).set("B.Y", true);
        assert_eq!(a, b);
    }
}
