//! Deterministic text serialization helpers shared by the CSV and JSON
//! emitters.
//!
//! Every floating-point value leaving the crate goes through [`fmt_g17`]:
//! scientific notation with 17 significant digits, which is enough for the
//! decimal representation to round-trip bitwise to the original `f64`.
//! Centralizing this makes command outputs reproducible byte for byte.

/// Format a float with 17 significant digits (1 leading + 16 fractional).
///
/// Infinities render as `inf`/`-inf` (used by the critical-curve CSV format)
/// and NaN as `NaN`; both are produced only where the surrounding format
/// documents them.
pub fn fmt_g17(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x)
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        "NaN".to_string()
    }
}

/// JSON string literal with the escapes required by RFC 8259.
pub(crate) fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Incremental writer for a JSON object with full control over number
/// formatting (17 significant digits via [`fmt_g17`]).
///
/// `serde_json` would re-format floats with shortest-round-trip notation;
/// the fixed-width form here keeps outputs stable and self-describing, so
/// the handful of flat documents the crate emits are assembled manually.
pub(crate) struct JsonObject {
    fields: Vec<(String, String)>,
}

impl JsonObject {
    pub fn new() -> Self {
        JsonObject { fields: Vec::new() }
    }

    pub fn num(mut self, key: &str, value: f64) -> Self {
        // JSON has no literal for non-finite numbers; emit them as strings
        // so the document stays parseable.
        let rendered = if value.is_finite() {
            fmt_g17(value)
        } else {
            json_string(&fmt_g17(value))
        };
        self.fields.push((key.to_string(), rendered));
        self
    }

    pub fn int(mut self, key: &str, value: i64) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn uint(mut self, key: &str, value: u64) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn bool(mut self, key: &str, value: bool) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn str(mut self, key: &str, value: &str) -> Self {
        self.fields.push((key.to_string(), json_string(value)));
        self
    }

    /// Insert a pre-rendered JSON value (object, array, null, ...).
    pub fn raw(mut self, key: &str, value: impl Into<String>) -> Self {
        self.fields.push((key.to_string(), value.into()));
        self
    }

    pub fn render(&self) -> String {
        let body: Vec<String> = self
            .fields
            .iter()
            .map(|(k, v)| format!("{}: {}", json_string(k), v))
            .collect();
        format!("{{{}}}", body.join(", "))
    }
}

/// Render a JSON array from pre-rendered element strings.
pub(crate) fn json_array<I: IntoIterator<Item = String>>(items: I) -> String {
    let body: Vec<String> = items.into_iter().collect();
    format!("[{}]", body.join(", "))
}

/// Render `[lo, hi]` or `null` for an optional interval.
pub(crate) fn json_interval(iv: Option<(f64, f64)>) -> String {
    match iv {
        Some((lo, hi)) => format!("[{}, {}]", fmt_g17(lo), fmt_g17(hi)),
        None => "null".to_string(),
    }
}
