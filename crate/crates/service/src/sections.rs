use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub body: String,
}

/// Markdown `#` sections of a final answer; text before the first heading is dropped.
pub fn split_sections(text: &str) -> Vec<Section> {
    let mut out: Vec<Section> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with('#') {
            let heading = trimmed.trim_start_matches('#').trim();
            if !heading.is_empty() {
                out.push(Section {
                    heading: heading.to_string(),
                    body: String::new(),
                });
                continue;
            }
        }
        if let Some(s) = out.last_mut() {
            s.body.push_str(line);
            s.body.push('\n');
        }
    }
    for s in &mut out {
        s.body = s.body.trim().to_string();
    }
    out
}

/// Body of the "Concluding Remarks" section, without any trailing code fence.
pub fn concluding_remarks(text: &str) -> Option<String> {
    let s = split_sections(text)
        .into_iter()
        .find(|s| s.heading.to_ascii_lowercase().contains("concluding remarks"))?;
    let body = match s.body.find("```") {
        Some(i) => s.body[..i].trim().to_string(),
        None => s.body,
    };
    Some(body)
}
