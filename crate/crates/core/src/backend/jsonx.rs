//! Extraction of structured JSON from model output.
//!
//! Prompts demand strict JSON, but real outputs often wrap it in prose or
//! code fences. `first_json_value` scans for the first balanced top-level
//! JSON object or array and returns that slice.

/// Find the first balanced top-level JSON object or array in `text`.
pub fn first_json_value(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let start = bytes.iter().position(|&b| b == b'{' || b == b'[')?;
    let open = bytes[start];
    let close = if open == b'{' { b'}' } else { b']' };

    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            _ if b == open => depth += 1,
            _ if b == close => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Parse the first balanced JSON value in `text` into `T`.
pub fn parse_first<T: serde::de::DeserializeOwned>(text: &str) -> Option<T> {
    let slice = first_json_value(text)?;
    serde_json::from_str(slice).ok()
}
