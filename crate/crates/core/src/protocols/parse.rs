use std::sync::OnceLock;

use regex::Regex;

use crate::dataset::Choice;
use crate::text::{contains_bounded, normalize};

fn phrase_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?i)the\s+best\s+answer\s+is\s*:?\s*["'“”‘’`]*\(([A-Za-z])\)?"#)
            .expect("static regex")
    })
}

fn standalone_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(([A-Za-z])\)").expect("static regex"))
}

/// Extracts the chosen option label from a subject response.
///
/// Cascade: the canonical "The best answer is" phrase (with straight, curly,
/// or backtick quotes tolerated), then any standalone "(X)" marker, then a
/// unique normalized match against a full choice text. Returns `None` when
/// nothing identifies exactly one choice.
pub fn parse_answer(text: &str, choices: &[Choice]) -> Option<char> {
    let valid = |c: char| {
        let upper = c.to_ascii_uppercase();
        choices.iter().any(|choice| choice.label == upper).then_some(upper)
    };

    for cap in phrase_re().captures_iter(text) {
        if let Some(label) = valid(cap[1].chars().next().unwrap()) {
            return Some(label);
        }
    }
    for cap in standalone_re().captures_iter(text) {
        if let Some(label) = valid(cap[1].chars().next().unwrap()) {
            return Some(label);
        }
    }

    let normalized = normalize(text);
    if normalized.is_empty() {
        return None;
    }
    if let Some(choice) = choices.iter().find(|c| normalize(&c.text) == normalized) {
        return Some(choice.label);
    }
    let contained: Vec<char> = choices
        .iter()
        .filter(|c| {
            let t = normalize(&c.text);
            !t.is_empty() && contains_bounded(&normalized, &t)
        })
        .map(|c| c.label)
        .collect();
    match contained.as_slice() {
        [only] => Some(*only),
        _ => None,
    }
}

/// Pulls the consolidated memory out of an Answer/Memory response: everything
/// after the first line starting with "Memory:", trimmed, with one echoed
/// placeholder bracket layer removed. Empty string when the marker is absent.
pub fn consolidate_memory(response: &str) -> String {
    let mut offset = 0;
    for line in response.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("Memory:") {
            let rest_start = offset + (line.len() - trimmed.len()) + (trimmed.len() - rest.len());
            let memory = response[rest_start..].trim();
            return strip_bracket_wrap(memory).to_string();
        }
        offset += line.len();
    }
    String::new()
}

/// Removes a single enclosing `[...]` pair when it wraps the whole string.
pub(crate) fn strip_bracket_wrap(s: &str) -> &str {
    let inner = match s.strip_prefix('[').and_then(|rest| rest.strip_suffix(']')) {
        Some(inner) => inner,
        None => return s,
    };
    // The leading bracket must pair with the final one, not close earlier.
    let mut depth = 1u32;
    for c in inner.chars() {
        match c {
            '[' => depth += 1,
            ']' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return s;
                }
            }
            _ => {}
        }
    }
    inner.trim()
}
