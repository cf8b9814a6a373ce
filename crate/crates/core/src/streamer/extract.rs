use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no structured output found")]
    NoStructuredOutput,
    #[error("unparsable block: {0}")]
    UnparsableBlock(String),
}

/// Pull the answer object out of a model's final text.
///
/// The last fenced block wins; without fences the last balanced top-level
/// `{...}` group is used. Inside fences single-quoted strings and trailing
/// commas are tolerated. `"total number of records"` is renamed to
/// `total_records`.
pub fn extract_structured(final_text: &str) -> Result<Map<String, Value>, ExtractError> {
    let parsed = match last_fenced_block(final_text) {
        Some(block) => {
            let block = unwrap_doubled_braces(block.trim());
            if block.is_empty() {
                return Err(ExtractError::UnparsableBlock("empty fenced block".into()));
            }
            parse_object(&normalize_lenient(block))?
        }
        None => parse_object(last_brace_group(final_text)?)?,
    };
    Ok(parsed
        .into_iter()
        .map(|(k, v)| {
            let key = k.trim();
            if key.eq_ignore_ascii_case("total number of records") {
                ("total_records".to_string(), v)
            } else {
                (key.to_string(), v)
            }
        })
        .collect())
}

fn parse_object(text: &str) -> Result<Map<String, Value>, ExtractError> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(other) => Err(ExtractError::UnparsableBlock(format!(
            "expected an object, found {}",
            kind_of(&other)
        ))),
        Err(e) => Err(ExtractError::UnparsableBlock(e.to_string())),
    }
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Contents of the last ``` fenced block. An unterminated final fence runs
/// to the end of the text.
fn last_fenced_block(text: &str) -> Option<&str> {
    let mut last = None;
    let mut open: Option<usize> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        if !line.trim_start().starts_with("```") {
            continue;
        }
        match open {
            None => open = Some(offset),
            Some(body) => {
                last = Some(&text[body..start]);
                open = None;
            }
        }
    }
    if let Some(body) = open {
        last = Some(&text[body.min(text.len())..]);
    }
    last
}

/// `{{ ... }}` as written in a template with escaped braces.
fn unwrap_doubled_braces(block: &str) -> &str {
    if block.starts_with("{{") && block.ends_with("}}") && block.len() >= 4 {
        block[1..block.len() - 1].trim()
    } else {
        block
    }
}

fn last_brace_group(text: &str) -> Result<&str, ExtractError> {
    let mut depth = 0usize;
    let mut start = None;
    let mut last = None;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if in_string {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' if depth > 0 => in_string = true,
            '{' => {
                if depth == 0 {
                    start = Some(i);
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    last = start.map(|s| &text[s..=i]);
                }
            }
            _ => {}
        }
    }
    match last {
        Some(group) => Ok(group),
        None if text.contains('{') => Err(ExtractError::UnparsableBlock("unbalanced braces".into())),
        None => Err(ExtractError::NoStructuredOutput),
    }
}

/// Rewrite single-quoted strings as JSON strings and drop trailing commas.
fn normalize_lenient(block: &str) -> String {
    let chars: Vec<char> = block.chars().collect();
    let mut out = String::with_capacity(block.len());
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '"' => {
                out.push('"');
                i += 1;
                while i < chars.len() {
                    let c = chars[i];
                    out.push(c);
                    i += 1;
                    if c == '\\' && i < chars.len() {
                        out.push(chars[i]);
                        i += 1;
                    } else if c == '"' {
                        break;
                    }
                }
            }
            '\'' => {
                out.push('"');
                i += 1;
                while i < chars.len() && chars[i] != '\'' {
                    match chars[i] {
                        '\\' if chars.get(i + 1) == Some(&'\'') => {
                            out.push('\'');
                            i += 1;
                        }
                        '"' => out.push_str("\\\""),
                        c => out.push(c),
                    }
                    i += 1;
                }
                out.push('"');
                i += 1;
            }
            ',' => {
                let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
                if !matches!(next, Some('}') | Some(']')) {
                    out.push(',');
                }
                i += 1;
            }
            c => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn obj(v: Value) -> Map<String, Value> {
        let Value::Object(m) = v else { panic!() };
        m
    }

    #[test]
    fn recurrence_answer() {
        let text = "## Concluding Remarks\nRecurred.\n\n## Answer\n```json\n{\"recurrence\": \"yes\"}\n```\n";
        assert_eq!(extract_structured(text).unwrap(), obj(json!({"recurrence": "yes"})));
    }

    #[test]
    fn single_quoted_orn_answer() {
        let text = "```\n{\n    'stage': '2', \n    'total number of records': '37'\n}\n```";
        assert_eq!(
            extract_structured(text).unwrap(),
            obj(json!({"stage": "2", "total_records": "37"}))
        );
    }

    #[test]
    fn prose_only() {
        assert_eq!(extract_structured("The patient is fine."), Err(ExtractError::NoStructuredOutput));
        assert_eq!(extract_structured(""), Err(ExtractError::NoStructuredOutput));
    }

    #[test]
    fn last_block_wins() {
        let text = "Example:\n```\n{\"recurrence\": \"no\"}\n```\nFinal:\n```json\n{\"recurrence\": \"yes\"}\n```";
        assert_eq!(extract_structured(text).unwrap()["recurrence"], "yes");
    }

    #[test]
    fn unfenced_falls_back_to_last_brace_group() {
        let text = "first {\"a\": 1} then {\"b\": \"}\"} done";
        assert_eq!(extract_structured(text).unwrap(), obj(json!({"b": "}"})));
        // single quotes are strict outside fences
        assert!(matches!(
            extract_structured("{'stage': '1'}"),
            Err(ExtractError::UnparsableBlock(_))
        ));
        assert!(matches!(extract_structured("oops {\"a\": "), Err(ExtractError::UnparsableBlock(_))));
    }

    #[test]
    fn doubled_braces_and_trailing_commas() {
        let text = "```json\n{{\n    \"recurrence\": \"no\"\n}}\n```";
        assert_eq!(extract_structured(text).unwrap()["recurrence"], "no");
        let text = "```\n{\"courses\": [{\"id\": \"1A\"},], }\n```";
        assert_eq!(extract_structured(text).unwrap(), obj(json!({"courses": [{"id": "1A"}]})));
    }

    #[test]
    fn unterminated_fence_and_non_object() {
        assert_eq!(extract_structured("```json\n{\"x\": 1}\n").unwrap()["x"], 1);
        assert!(matches!(extract_structured("```\n[1, 2]\n```"), Err(ExtractError::UnparsableBlock(_))));
        assert!(matches!(extract_structured("```\n```"), Err(ExtractError::UnparsableBlock(_))));
    }

    #[test]
    fn quotes_inside_values() {
        let text = "```\n{'note': 'said \"hi\"', \"b\": \"it's\"}\n```";
        assert_eq!(extract_structured(text).unwrap(), obj(json!({"note": "said \"hi\"", "b": "it's"})));
    }
}
