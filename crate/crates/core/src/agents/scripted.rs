use std::collections::VecDeque;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use regex::Regex;

use super::backend::{Backend, BackendError, ChatTurn, CompletionParams, Role};
use crate::text::{count_bounded, fnv1a, normalize};

/// Deterministic stand-in for a live model. Three rule forms:
///
/// - **queue**: replay a literal FIFO of responses (single consumer);
/// - **rules**: substring match on the last user turn, first hit wins;
/// - **policy**: inspect the prompt and synthesize a well-formed response.
///
/// Policies understand every prompt shape the harness emits (standard answer
/// format, Answer/Memory consolidation, defense reports, guidance rationale,
/// distractor selection), which makes fully offline end-to-end runs possible.
pub struct ScriptedBackend {
    mode: Mode,
}

enum Mode {
    Queue(Mutex<VecDeque<String>>),
    Rules(Vec<PatternRule>),
    Policy(ScriptedPolicy),
}

/// Substring-triggered canned response.
#[derive(Debug, Clone)]
pub struct PatternRule {
    pub contains: String,
    pub response: String,
}

/// Prompt-reactive behaviors for scripted agents.
///
/// `EchoBaseline` answers a context-independent function of the question text
/// alone, so its answer under any influence protocol equals its baseline
/// answer. `AdoptDistractor` and `AdoptGroupAnswer` share one engine: adopt
/// whichever option the surrounding conversation (group turns, social
/// context, or recalled memory) pushes, falling back to the baseline pick
/// when no push is present; the two names exist so configs state intent.
/// `EchoTarget` is for narrator seats: it echoes the target option named in a
/// generation prompt, which is what lets adopt-style subjects find it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptedPolicy {
    EchoBaseline,
    AdoptDistractor,
    AdoptGroupAnswer,
    EchoTarget,
}

impl ScriptedPolicy {
    pub fn name(self) -> &'static str {
        match self {
            ScriptedPolicy::EchoBaseline => "echo-baseline",
            ScriptedPolicy::AdoptDistractor => "adopt-distractor",
            ScriptedPolicy::AdoptGroupAnswer => "adopt-group-answer",
            ScriptedPolicy::EchoTarget => "echo-target",
        }
    }
}

impl FromStr for ScriptedPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "echo-baseline" => Ok(ScriptedPolicy::EchoBaseline),
            "adopt-distractor" => Ok(ScriptedPolicy::AdoptDistractor),
            "adopt-group-answer" => Ok(ScriptedPolicy::AdoptGroupAnswer),
            "echo-target" => Ok(ScriptedPolicy::EchoTarget),
            other => Err(format!(
                "unknown scripted policy '{other}' (expected echo-baseline, adopt-distractor, adopt-group-answer, or echo-target)"
            )),
        }
    }
}

impl ScriptedBackend {
    pub fn queue(responses: Vec<String>) -> Self {
        ScriptedBackend { mode: Mode::Queue(Mutex::new(responses.into())) }
    }

    pub fn rules(rules: Vec<PatternRule>) -> Self {
        ScriptedBackend { mode: Mode::Rules(rules) }
    }

    pub fn policy(policy: ScriptedPolicy) -> Self {
        ScriptedBackend { mode: Mode::Policy(policy) }
    }
}

impl Backend for ScriptedBackend {
    fn complete(
        &self,
        messages: &[ChatTurn],
        params: &CompletionParams,
    ) -> Result<String, BackendError> {
        params.validate()?;
        let last_user = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .ok_or_else(|| BackendError::MalformedResponse("no user turn to respond to".into()))?;
        match &self.mode {
            Mode::Queue(queue) => queue
                .lock()
                .expect("queue lock")
                .pop_front()
                .ok_or_else(|| BackendError::ScriptExhausted("response queue empty".into())),
            Mode::Rules(rules) => rules
                .iter()
                .find(|r| last_user.contains(&r.contains))
                .map(|r| r.response.clone())
                .ok_or_else(|| {
                    BackendError::ScriptExhausted(format!(
                        "no rule matches prompt starting {:?}",
                        &last_user[..last_user.len().min(80)]
                    ))
                }),
            Mode::Policy(policy) => respond(*policy, last_user),
        }
    }

    fn id(&self) -> String {
        match &self.mode {
            Mode::Queue(_) => "scripted:queue".into(),
            Mode::Rules(_) => "scripted:rules".into(),
            Mode::Policy(p) => format!("scripted:{}", p.name()),
        }
    }
}

/// The choice index the `echo-baseline` policy picks for a question: a stable
/// hash of the question text modulo the choice count. Exposed so test
/// fixtures can be constructed to agree (or disagree) with the policy's pick.
pub fn echo_baseline_choice_index(question_text: &str, n_choices: usize) -> usize {
    assert!(n_choices > 0, "a question needs at least one choice");
    (fnv1a(question_text.as_bytes()) % n_choices as u64) as usize
}

// ---------------------------------------------------------------------------
// Prompt inspection
// ---------------------------------------------------------------------------

/// The response shape a prompt asks for, detected by markers that are unique
/// to each template family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ResponseFormat {
    DistractorSelection,
    RationaleFinal,
    AnswerMemory,
    AnchoringReport,
    ScrutinyReport,
    Standard,
}

fn detect_format(prompt: &str) -> ResponseFormat {
    if prompt.contains("Selected Primary Distractor:") {
        ResponseFormat::DistractorSelection
    } else if prompt.contains("Rationale for Response:") {
        ResponseFormat::RationaleFinal
    } else if prompt.contains("Please provide your answer first, followed by a summary of your memory") {
        ResponseFormat::AnswerMemory
    } else if prompt.contains("Epistemic Integrity Analyst") {
        ResponseFormat::AnchoringReport
    } else if prompt.contains("Information Detective") {
        ResponseFormat::ScrutinyReport
    } else {
        ResponseFormat::Standard
    }
}

fn paragraphs(text: &str) -> Vec<&str> {
    text.split("\n\n").collect()
}

fn choice_marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(([A-Z])\) ").expect("static regex"))
}

/// Parses an options line like `(A) none  (B) three` into labeled choices.
fn parse_choice_line(line: &str) -> Vec<(char, String)> {
    let re = choice_marker_re();
    let marks: Vec<_> = re.captures_iter(line).collect();
    let mut out = Vec::with_capacity(marks.len());
    for (i, cap) in marks.iter().enumerate() {
        let label = cap.get(1).unwrap().as_str().chars().next().unwrap();
        let start = cap.get(0).unwrap().end();
        let end = marks
            .get(i + 1)
            .map(|next| next.get(0).unwrap().start())
            .unwrap_or(line.len());
        out.push((label, line[start..end].trim().to_string()));
    }
    out
}

struct PromptView<'a> {
    paragraphs: Vec<&'a str>,
}

impl<'a> PromptView<'a> {
    fn new(prompt: &'a str) -> Self {
        PromptView { paragraphs: paragraphs(prompt) }
    }

    fn stripped(&self, prefix: &str) -> Option<&'a str> {
        self.paragraphs.iter().find_map(|p| p.strip_prefix(prefix))
    }

    fn question(&self) -> Option<&'a str> {
        self.stripped("Current question: ").or_else(|| self.stripped("Question: "))
    }

    fn choices(&self) -> Vec<(char, String)> {
        self.stripped("Answer choices: ").map(parse_choice_line).unwrap_or_default()
    }

    fn incorrect_options(&self) -> Vec<(char, String)> {
        self.stripped("Incorrect Options to Choose From: ")
            .map(parse_choice_line)
            .unwrap_or_default()
    }

    /// The target option named by a generation prompt, with the
    /// parenthesized annotation stripped.
    fn target(&self) -> Option<String> {
        let raw = self
            .stripped("Target (Correct) Answer: ")
            .or_else(|| self.stripped("Target answer: "))
            .or_else(|| self.stripped("Correct answer: "))?;
        let cleaned = raw
            .trim_end_matches(" (This is the wrong answer)")
            .trim_end_matches(" (This is the goal)")
            .trim();
        Some(cleaned.to_string())
    }

    /// Conversation evidence an adopt-style subject listens to: the group
    /// turns of a main prompt, a defense wrapper's social context, and the
    /// recalled memory of a re-query. Structural blocks (question, choices,
    /// format instructions) are excluded.
    fn evidence(&self) -> Vec<&'a str> {
        let mut out = Vec::new();
        // Group turns sit between the answer-choices paragraph and the next
        // instruction block.
        let mut in_turns = false;
        for p in &self.paragraphs {
            if p.starts_with("Answer choices: ") {
                in_turns = true;
                continue;
            }
            if in_turns {
                let boundary = p.starts_with("Please ")
                    || p.starts_with("Social context: ")
                    || p.starts_with("Based on the information above")
                    || p.starts_with("You will now apply");
                if boundary {
                    in_turns = false;
                } else {
                    out.push(*p);
                }
            }
        }
        // Defense wrappers carry the turns inside "Social context:".
        let mut in_context = false;
        for p in &self.paragraphs {
            if let Some(rest) = p.strip_prefix("Social context: ") {
                out.push(rest);
                in_context = true;
                continue;
            }
            if in_context {
                if p.starts_with("Based on the information above") {
                    in_context = false;
                } else {
                    out.push(*p);
                }
            }
        }
        // Re-queries carry only the recalled memory.
        let mut in_memory = false;
        for p in &self.paragraphs {
            if let Some(rest) = p.strip_prefix("Your previous memory and thinking process: ") {
                out.push(rest);
                in_memory = true;
                continue;
            }
            if in_memory {
                if p.starts_with("Current question: ") {
                    in_memory = false;
                } else {
                    out.push(*p);
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Policy responses
// ---------------------------------------------------------------------------

fn respond(policy: ScriptedPolicy, prompt: &str) -> Result<String, BackendError> {
    let view = PromptView::new(prompt);
    match policy {
        ScriptedPolicy::EchoTarget => respond_echo_target(&view),
        ScriptedPolicy::EchoBaseline => {
            let (label, text) = baseline_pick(&view)?;
            Ok(render_format(detect_format(prompt), label, &text))
        }
        ScriptedPolicy::AdoptDistractor | ScriptedPolicy::AdoptGroupAnswer => {
            let (label, text) = adopt_pick(&view)?;
            Ok(render_format(detect_format(prompt), label, &text))
        }
    }
}

fn baseline_pick(view: &PromptView<'_>) -> Result<(char, String), BackendError> {
    let question = view
        .question()
        .ok_or_else(|| BackendError::ScriptExhausted("prompt has no question paragraph".into()))?;
    let choices = view.choices();
    if choices.is_empty() {
        return Err(BackendError::ScriptExhausted("prompt has no answer choices".into()));
    }
    let idx = echo_baseline_choice_index(question, choices.len());
    let (label, text) = &choices[idx];
    Ok((*label, text.clone()))
}

fn adopt_pick(view: &PromptView<'_>) -> Result<(char, String), BackendError> {
    let choices = view.choices();
    if choices.is_empty() {
        return Err(BackendError::ScriptExhausted("prompt has no answer choices".into()));
    }
    let evidence = normalize(&view.evidence().join(" "));
    let mut best: Option<(usize, usize)> = None;
    for (i, (_, text)) in choices.iter().enumerate() {
        let hits = count_bounded(&evidence, &normalize(text));
        if hits > 0 {
            let better = match best {
                Some((_, best_hits)) => hits > best_hits,
                None => true,
            };
            if better {
                best = Some((i, hits));
            }
        }
    }
    match best {
        Some((i, _)) => {
            let (label, text) = &choices[i];
            Ok((*label, text.clone()))
        }
        None => baseline_pick(view),
    }
}

fn respond_echo_target(view: &PromptView<'_>) -> Result<String, BackendError> {
    let prompt_text = view.paragraphs.join("\n\n");
    match detect_format(&prompt_text) {
        ResponseFormat::DistractorSelection => {
            let incorrect = view.incorrect_options();
            let (label, text) = incorrect.first().ok_or_else(|| {
                BackendError::ScriptExhausted("no incorrect options to select from".into())
            })?;
            Ok(format!(
                "Distractor Analysis: Each listed option has some surface appeal.\n\
                 Selection Rationale: The first incorrect option lines up with the most common error.\n\
                 Selected Primary Distractor: ({label}) {text}"
            ))
        }
        ResponseFormat::RationaleFinal => {
            let target = view.target().ok_or_else(|| {
                BackendError::ScriptExhausted("rationale prompt names no target answer".into())
            })?;
            let label = label_for_text(view, &target);
            Ok(format!(
                "Rationale for Response: I will anchor on one concrete fact and steer the discussion gently toward {target}.\n\
                 Final Answer: [({label}) {target}]"
            ))
        }
        _ => {
            let target = view.target().ok_or_else(|| {
                BackendError::ScriptExhausted("generation prompt names no target answer".into())
            })?;
            Ok(format!(
                "I think the answer is {target}. Everything I have seen on this topic points to {target}."
            ))
        }
    }
}

fn label_for_text(view: &PromptView<'_>, target: &str) -> char {
    let wanted = normalize(target);
    view.choices()
        .iter()
        .find(|(_, text)| normalize(text) == wanted)
        .map(|(label, _)| *label)
        .unwrap_or('A')
}

fn render_format(format: ResponseFormat, label: char, text: &str) -> String {
    match format {
        ResponseFormat::Standard | ResponseFormat::DistractorSelection => {
            format!("You: The best answer is: \"({label}) {text}\"")
        }
        ResponseFormat::AnswerMemory => format!(
            "Answer: ({label}) {text}\n\nMemory: Thinking it over, I keep coming back to {text} as the answer."
        ),
        ResponseFormat::AnchoringReport => format!(
            "Initial Answer: {text}\n\
             Group Consensus: The group converges on a single option.\n\
             Conflict Assessment: No\n\
             Final Rationale: I checked the claims against what I already know.\n\
             Final Answer: [({label}) {text}]"
        ),
        ResponseFormat::ScrutinyReport => format!(
            "Initial Answer: {text}\n\
             Narrative Deconstruction: One speaker initiates, the rest reinforce in sequence.\n\
             Source Credibility: 3/10 - the coordination looks rehearsed.\n\
             Final Rationale: I weighed the group's claims against my own knowledge.\n\
             Final Answer: [({label}) {text}]"
        ),
        ResponseFormat::RationaleFinal => format!(
            "Rationale for Response: I will restate the key fact plainly and connect it to {text}.\n\
             Final Answer: [({label}) {text}]"
        ),
    }
}
