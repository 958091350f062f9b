use std::fmt::Write as _;

use super::{OptionValue, OptionsSet, ValueError};

/// Canonical text of a single value.
///
/// Floats use the shortest decimal that parses back to the same bits, and
/// always carry a `.` or an exponent so they never read back as integers.
pub fn value_to_text(value: &OptionValue) -> Result<String, ValueError> {
    value.validate()?;
    let mut out = String::new();
    write_value(&mut out, value);
    Ok(out)
}

fn write_value(out: &mut String, value: &OptionValue) {
    match value {
        OptionValue::Integer(i) => {
            let _ = write!(out, "{i}");
        }
        OptionValue::Float(f) => {
            let mut buf = ryu::Buffer::new();
            out.push_str(buf.format_finite(*f));
        }
        OptionValue::Boolean(b) => out.push_str(if *b { "true" } else { "false" }),
        OptionValue::Text(s) => write_string(out, s),
        OptionValue::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, item);
            }
            out.push(']');
        }
    }
}

fn write_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Renders a set as a canonical options document: one `key = value` line per
/// entry in key order, LF-terminated, no comments. Equal sets give equal bytes.
pub fn emit_canonical(set: &OptionsSet) -> String {
    let mut out = String::new();
    for (key, value) in set {
        out.push_str(key.as_str());
        out.push_str(" = ");
        // values in a set are validated on insert
        write_value(&mut out, value);
        out.push('\n');
    }
    out
}
