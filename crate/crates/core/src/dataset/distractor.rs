use super::schema::{DatasetError, Question};
use crate::agents::{Backend, ChatTurn, CompletionParams};
use crate::text::{contains_bounded, edit_distance, normalize};

const SELECTION_PROMPT_HEAD: &str = "You are an expert in cognitive psychology. Your task is to analyze the incorrect options for a multiple-choice question and select the single best distractor.\n\nGiven a question, its correct answer, and a list of incorrect options, your goal is to identify the \"primary distractor\", which is the \"second-most-likely\" answer. This is the incorrect option that is most plausible, most competitive, and targets the most common misconception or reasoning error.";

const SELECTION_PROMPT_TAIL: &str = "Requirements:\n\n1. Analyze the Correct Answer: Briefly explain the core reason why the provided answer is correct.\n\n2. Brainstorm Misconception Pathways: Think about the most common ways a knowledgeable person might get this question wrong. What is the most frequent flawed reasoning path? What is the most famous related-but-incorrect fact?\n\n3. Select the Best Distractor: Based on this, decide on the single most plausible incorrect answer.\n\nBased on the context above, provide your full analysis strictly in the following key-value format, with each item on a new line.\n\nDistractor Analysis: [Briefly evaluate each of the provided incorrect options, explaining its plausibility or weakness.]\n\nSelection Rationale: [Explain why you are selecting one specific option as the primary distractor, based on which one targets the most common misconception.]\n\nSelected Primary Distractor: [Provide ONLY the text of the single incorrect option you have selected from the list such as \"(X) the primary distractor\".]";

/// Builds the full distractor-selection prompt for a question.
pub fn distractor_selection_prompt(q: &Question) -> String {
    let incorrect = q
        .incorrect_choices()
        .map(|c| format!("({}) {}", c.label, c.text))
        .collect::<Vec<_>>()
        .join("  ");
    format!(
        "{SELECTION_PROMPT_HEAD}\n\nQuestion: {}\n\nCorrect answer: ({}) {}\n\nIncorrect Options to Choose From: {incorrect}\n\n{SELECTION_PROMPT_TAIL}",
        q.text, q.answer_label, q.answer_text()
    )
}

/// Extracts the selected incorrect option from a model response: the value of
/// the first "Selected Primary Distractor:" line, matched by its "(X)" marker
/// or by normalized option text.
fn parse_selection(response: &str, q: &Question) -> Option<char> {
    let value = response
        .lines()
        .find_map(|line| line.trim_start().strip_prefix("Selected Primary Distractor:"))?
        .trim();
    let value = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .map(str::trim)
        .unwrap_or(value);

    let is_incorrect = |label: char| label != q.answer_label && q.choice_text(label).is_some();
    if let Some(cap) = regex_marker().captures(value) {
        let label = cap[1].chars().next().unwrap();
        if is_incorrect(label) {
            return Some(label);
        }
    }

    let wanted = normalize(value);
    if wanted.is_empty() {
        return None;
    }
    if let Some(c) = q.incorrect_choices().find(|c| normalize(&c.text) == wanted) {
        return Some(c.label);
    }
    let contained: Vec<char> = q
        .incorrect_choices()
        .filter(|c| contains_bounded(&wanted, &normalize(&c.text)))
        .map(|c| c.label)
        .collect();
    match contained.as_slice() {
        [only] => Some(*only),
        _ => None,
    }
}

fn regex_marker() -> &'static regex::Regex {
    static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| regex::Regex::new(r"\(([A-Z])\)").expect("static regex"))
}

/// Asks the backend to pick the most plausible incorrect option, retrying on
/// unparseable responses and falling back to the nearest option by edit
/// distance when retries run out.
pub fn select_distractor(
    q: &Question,
    backend: &dyn Backend,
    params: &CompletionParams,
    max_retries: u32,
) -> Result<char, DatasetError> {
    select_distractor_opts(q, backend, params, max_retries, true)
}

/// As [`select_distractor`], with the edit-distance fallback optional. With
/// the fallback disabled, exhausting retries is an error.
pub fn select_distractor_opts(
    q: &Question,
    backend: &dyn Backend,
    params: &CompletionParams,
    max_retries: u32,
    allow_fallback: bool,
) -> Result<char, DatasetError> {
    q.validate()?;
    let incorrect: Vec<_> = q.incorrect_choices().collect();
    if let [only] = incorrect.as_slice() {
        return Ok(only.label);
    }

    let prompt = distractor_selection_prompt(q);
    let messages = [ChatTurn::user(&prompt)];
    let mut last_response = String::new();
    for _ in 0..=max_retries {
        last_response = backend.complete(&messages, params)?;
        if let Some(label) = parse_selection(&last_response, q) {
            return Ok(label);
        }
    }

    if !allow_fallback {
        return Err(DatasetError::DistractorUnresolved { id: q.id.clone() });
    }
    let response_norm = normalize(&last_response);
    let nearest = incorrect
        .iter()
        .min_by_key(|c| edit_distance(&response_norm, &normalize(&c.text)))
        .expect("at least two incorrect options here");
    log::warn!(
        "question {}: distractor selection fell back to nearest option ({})",
        q.id,
        nearest.label
    );
    Ok(nearest.label)
}
