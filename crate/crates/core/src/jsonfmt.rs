//! Deterministic number and string formatting for the data files: floats at
//! 17 significant digits (round-trippable), keys emitted in sorted order by
//! the callers, no timestamps anywhere.

/// 17 significant digits, `1.2339999999999999e-2` style. Valid JSON and CSV.
pub fn f64_repr(x: f64) -> String {
    if x.is_nan() {
        return "null".into();
    }
    format!("{x:.16e}")
}

/// Minimal JSON string escaping for the report values we emit.
pub fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}
