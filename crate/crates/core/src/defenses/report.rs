//! Total, line-oriented parsing of the structured reports the defense
//! prompts mandate. Any input yields a report; absent fields come back as
//! empty strings and are logged, never errors.

use serde::Serialize;

use crate::dataset::Choice;
use crate::protocols::parse::{parse_answer, strip_bracket_wrap};

use super::wrap::DefenseKind;

/// A parsed defense report. `middle_fields` holds the two defense-specific
/// fields in their mandated order (Group Consensus + Conflict Assessment
/// for anchoring, Narrative Deconstruction + Source Credibility for
/// scrutiny).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DefenseReport {
    pub initial_answer: String,
    pub middle_fields: Vec<(String, String)>,
    pub final_rationale: String,
    pub final_answer_label: Option<char>,
}

impl DefenseReport {
    pub fn middle(&self, name: &str) -> Option<&str> {
        self.middle_fields
            .iter()
            .find(|(field, _)| field == name)
            .map(|(_, value)| value.as_str())
    }

    /// The 1-10 credibility score from a scrutiny report: the first digit
    /// run in the Source Credibility field that lands in range, so
    /// "3/10 - rehearsed" reads as 3.
    pub fn credibility(&self) -> Option<u8> {
        let value = self.middle("Source Credibility")?;
        let mut run = String::new();
        let mut chars = value.chars().peekable();
        while let Some(c) = chars.next() {
            if c.is_ascii_digit() {
                run.push(c);
                if chars.peek().is_none_or(|next| !next.is_ascii_digit()) {
                    if let Ok(score) = run.parse::<u8>() {
                        if (1..=10).contains(&score) {
                            return Some(score);
                        }
                    }
                    run.clear();
                }
            }
        }
        None
    }
}

/// Splits `text` into the named fields. A line whose trimmed form starts
/// with "{name}:" opens that field; following lines accumulate into it
/// until the next field line. Values are trimmed and lose one echoed
/// placeholder bracket layer. Every requested name is present in the
/// result, missing ones as empty strings; `found` reports which names
/// actually appeared.
pub(crate) fn extract_fields(
    text: &str,
    names: &[&'static str],
) -> (Vec<(String, String)>, Vec<&'static str>) {
    let mut captured: Vec<(usize, Vec<&str>)> = Vec::new();
    let mut current: Option<usize> = None;
    for line in text.lines() {
        let trimmed = line.trim();
        let opened = names.iter().position(|name| {
            trimmed
                .strip_prefix(name)
                .and_then(|rest| rest.strip_prefix(':'))
                .is_some()
        });
        match opened {
            Some(idx) => {
                let value = trimmed[names[idx].len() + 1..].trim();
                if captured.iter().any(|(i, _)| *i == idx) {
                    // A repeated field keeps its first occurrence.
                    current = None;
                } else {
                    captured.push((idx, vec![value]));
                    current = Some(captured.len() - 1);
                }
            }
            None => {
                if let Some(slot) = current {
                    captured[slot].1.push(line);
                }
            }
        }
    }
    let mut found = Vec::new();
    let mut fields = Vec::with_capacity(names.len());
    for (idx, name) in names.iter().enumerate() {
        let value = match captured.iter().find(|(i, _)| *i == idx) {
            Some((_, lines)) => {
                found.push(*name);
                strip_bracket_wrap(lines.join("\n").trim()).trim().to_string()
            }
            None => String::new(),
        };
        fields.push((name.to_string(), value));
    }
    (fields, found)
}

/// Parses a defense report from raw model output. Total: malformed input
/// degrades to empty fields (logged) rather than failing.
pub fn parse_defense_report(text: &str, choices: &[Choice], defense: DefenseKind) -> DefenseReport {
    let names = defense.field_names();
    let (mut fields, found) = extract_fields(text, &names);
    if found.len() < names.len() {
        let missing: Vec<&str> =
            names.iter().filter(|n| !found.contains(n)).copied().collect();
        log::warn!("{defense} report missing field(s): {}", missing.join(", "));
    }
    let final_answer = fields.pop().expect("five fields requested").1;
    let final_rationale = fields.pop().expect("five fields requested").1;
    let initial_answer = fields.remove(0).1;
    let final_answer_label = if final_answer.is_empty() {
        None
    } else {
        parse_answer(&final_answer, choices)
    };
    DefenseReport { initial_answer, middle_fields: fields, final_rationale, final_answer_label }
}
