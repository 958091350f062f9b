//! Event records and the `events` payload encoding.
//!
//! Payload: `u32` field count, each field name as `u16` length + UTF-8 bytes,
//! then every event's values as little-endian `f64` in field order.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub index: u64,
    fields: Vec<(String, f64)>,
}

impl EventRecord {
    pub fn new(index: u64) -> Self {
        EventRecord { index, fields: Vec::new() }
    }

    pub fn from_values(index: u64, names: &[String], values: &[f64]) -> Self {
        let fields = names.iter().cloned().zip(values.iter().copied()).collect();
        EventRecord { index, fields }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Sets a field, adding it if absent.
    pub fn set(&mut self, name: &str, value: f64) {
        match self.fields.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => self.fields.push((name.to_owned(), value)),
        }
    }

    pub fn fields(&self) -> &[(String, f64)] {
        &self.fields
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventsDecodeError {
    #[error("events payload is truncated")]
    Truncated,
    #[error("field name is not UTF-8")]
    BadFieldName,
    #[error("event data is not a whole number of records")]
    RaggedRecords,
}

/// Builds an `events` payload one record at a time.
#[derive(Debug, Clone)]
pub struct EventsEncoder {
    fields: Vec<String>,
    buf: Vec<u8>,
    count: u64,
}

impl EventsEncoder {
    pub fn new(fields: &[String]) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(&(fields.len() as u32).to_le_bytes());
        for name in fields {
            buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
        }
        EventsEncoder { fields: fields.to_vec(), buf, count: 0 }
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    /// Appends the record's values for the schema fields. Missing fields
    /// are reported by name.
    pub fn push(&mut self, event: &EventRecord) -> Result<(), String> {
        for name in &self.fields {
            let v = event.get(name).ok_or_else(|| name.clone())?;
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Decoded `events` payload.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTable {
    pub fields: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn decode_events(bytes: &[u8]) -> Result<EventTable, EventsDecodeError> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], EventsDecodeError> {
        let out = bytes.get(pos..pos + n).ok_or(EventsDecodeError::Truncated)?;
        pos += n;
        Ok(out)
    };
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let mut fields = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(len)?).map_err(|_| EventsDecodeError::BadFieldName)?;
        fields.push(name.to_owned());
    }
    let data = &bytes[pos..];
    let stride = 8 * fields.len();
    let rows = if stride == 0 {
        if !data.is_empty() {
            return Err(EventsDecodeError::RaggedRecords);
        }
        Vec::new()
    } else {
        if !data.len().is_multiple_of(stride) {
            return Err(EventsDecodeError::RaggedRecords);
        }
        data.chunks_exact(stride)
            .map(|rec| rec.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
            .collect()
    };
    Ok(EventTable { fields, rows })
}
