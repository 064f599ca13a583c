use serde::{Deserialize, Serialize};

use crate::agents::{assign_identities, AgentIdentity, Backend, ChatTurn, CompletionParams};
use crate::dataset::Question;
use crate::defenses::DefenseKind;

use super::archetype::{role_sequence, Archetype, Protocol, ProtocolError};
use super::parse::{consolidate_memory, parse_answer};
use super::templates;

/// Backends and sampling parameters for one protocol run: the subject under
/// test and the narrator that generates group turns.
pub struct ProtocolSession<'a> {
    pub subject: &'a dyn Backend,
    pub narrator: &'a dyn Backend,
    pub subject_params: CompletionParams,
    pub narrator_params: CompletionParams,
}

/// Everything recorded about one (protocol, question) interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    pub question_id: String,
    pub protocol: Protocol,
    /// Group turns (speaker-named), the composed subject queries, and the
    /// subject's replies, in interaction order.
    pub transcript: Vec<ChatTurn>,
    /// Consolidated memory text; present only for long-term protocols.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<String>,
    /// The subject's final raw response.
    pub raw_answer: String,
    pub parsed_label: Option<char>,
    pub correct: bool,
    pub parse_failed: bool,
    pub distractor_adopted: bool,
    /// The prompt-level defense active for this run, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defense: Option<DefenseKind>,
}

impl ProtocolOutcome {
    /// Builds an outcome from the subject's final response, enforcing the
    /// field couplings (parse flag, correctness, distractor adoption).
    pub(crate) fn from_answer(
        q: &Question,
        protocol: Protocol,
        transcript: Vec<ChatTurn>,
        memory: Option<String>,
        raw_answer: String,
        parsed_label: Option<char>,
    ) -> Self {
        ProtocolOutcome {
            question_id: q.id.clone(),
            protocol,
            transcript,
            memory,
            raw_answer,
            parsed_label,
            correct: parsed_label == Some(q.answer_label),
            parse_failed: parsed_label.is_none(),
            distractor_adopted: q.distractor_label.is_some()
                && parsed_label == q.distractor_label,
            defense: None,
        }
    }
}

fn target_text<'q>(q: &'q Question, target: char) -> Result<&'q str, ProtocolError> {
    if target == q.answer_label {
        return Err(ProtocolError::InvalidTarget { id: q.id.clone(), label: target });
    }
    q.choice_text(target)
        .ok_or_else(|| ProtocolError::InvalidTarget { id: q.id.clone(), label: target })
}

/// Completes a narrator prompt, retrying once if the model returns only
/// whitespace.
fn complete_nonempty(
    backend: &dyn Backend,
    params: &CompletionParams,
    prompt: &str,
    stage: &str,
) -> Result<String, ProtocolError> {
    let messages = [ChatTurn::user(prompt)];
    for _ in 0..2 {
        let response = backend.complete(&messages, params)?;
        let trimmed = response.trim();
        if !trimmed.is_empty() {
            return Ok(trimmed.to_string());
        }
    }
    Err(ProtocolError::MalformedOutput {
        stage: stage.to_string(),
        detail: "empty response twice".into(),
    })
}

/// One generic misleading turn: identical template for every speaker, no
/// view of the conversation so far.
pub fn generate_generic_turn(
    identity: &AgentIdentity,
    q: &Question,
    distractor: char,
    backend: &dyn Backend,
    params: &CompletionParams,
) -> Result<ChatTurn, ProtocolError> {
    let target = target_text(q, distractor)?;
    let prompt = templates::generic_generation_prompt(identity, q, target);
    let content = complete_nonempty(backend, params, &prompt, "generic turn generation")?;
    Ok(ChatTurn::assistant_as(&identity.name, content))
}

/// One archetype turn in the role-based narrative. The initiator speaks to
/// an empty room; every later archetype must see prior history.
pub fn generate_role_turn(
    archetype: Archetype,
    identity: &AgentIdentity,
    q: &Question,
    distractor: char,
    history: &[ChatTurn],
    backend: &dyn Backend,
    params: &CompletionParams,
) -> Result<ChatTurn, ProtocolError> {
    if archetype == Archetype::E && !history.is_empty() {
        return Err(ProtocolError::OrderViolation {
            archetype,
            detail: "the initiator must speak first".into(),
        });
    }
    if archetype != Archetype::E && history.is_empty() {
        return Err(ProtocolError::OrderViolation {
            archetype,
            detail: "needs conversation history to react to".into(),
        });
    }
    let target = target_text(q, distractor)?;
    let prompt = templates::role_generation_prompt(archetype, identity, q, target, history);
    let content = complete_nonempty(backend, params, &prompt, "role turn generation")?;
    Ok(ChatTurn::assistant_as(&identity.name, content))
}

/// One correct-guidance turn, arguing for the true answer.
pub fn generate_guidance_turn(
    identity: &AgentIdentity,
    q: &Question,
    history: &[ChatTurn],
    backend: &dyn Backend,
    params: &CompletionParams,
) -> Result<ChatTurn, ProtocolError> {
    let prompt = templates::guidance_generation_prompt(identity, q, history);
    let content = complete_nonempty(backend, params, &prompt, "guidance turn generation")?;
    Ok(ChatTurn::assistant_as(&identity.name, content))
}

/// Generates the full set of group turns for an influence or guidance
/// protocol, in speaking order.
pub(crate) fn generate_group_turns(
    session: &ProtocolSession<'_>,
    protocol: Protocol,
    q: &Question,
    group_size: usize,
) -> Result<Vec<ChatTurn>, ProtocolError> {
    let identities = assign_identities(group_size, &q.task)?;
    let mut turns: Vec<ChatTurn> = Vec::with_capacity(group_size);
    match protocol {
        Protocol::B => {}
        Protocol::GS | Protocol::GL => {
            let distractor = q
                .distractor_label
                .ok_or_else(|| ProtocolError::MissingDistractor { id: q.id.clone() })?;
            for identity in &identities {
                turns.push(generate_generic_turn(
                    identity,
                    q,
                    distractor,
                    session.narrator,
                    &session.narrator_params,
                )?);
            }
        }
        Protocol::RS | Protocol::RL => {
            let distractor = q
                .distractor_label
                .ok_or_else(|| ProtocolError::MissingDistractor { id: q.id.clone() })?;
            let sequence = role_sequence(group_size)?;
            for (archetype, identity) in sequence.sequence.iter().zip(&identities) {
                let turn = generate_role_turn(
                    *archetype,
                    identity,
                    q,
                    distractor,
                    &turns,
                    session.narrator,
                    &session.narrator_params,
                )?;
                turns.push(turn);
            }
        }
        Protocol::C => {
            for identity in &identities {
                let turn = generate_guidance_turn(
                    identity,
                    q,
                    &turns,
                    session.narrator,
                    &session.narrator_params,
                )?;
                turns.push(turn);
            }
        }
    }
    Ok(turns)
}

/// Sends a subject query and parses the reply, re-prompting once with the
/// strict format reminder on parse failure. Returns the conversation with
/// the subject's replies appended, the final raw response, and the label.
pub(crate) fn ask_subject(
    session: &ProtocolSession<'_>,
    q: &Question,
    mut conversation: Vec<ChatTurn>,
) -> Result<(Vec<ChatTurn>, String, Option<char>), ProtocolError> {
    let raw = session.subject.complete(&conversation, &session.subject_params)?;
    let label = parse_answer(&raw, &q.choices);
    conversation.push(ChatTurn::assistant(&raw));
    if label.is_some() {
        return Ok((conversation, raw, label));
    }
    conversation.push(ChatTurn::user(templates::ANSWER_REMINDER));
    let retry = session.subject.complete(&conversation, &session.subject_params)?;
    let retry_label = parse_answer(&retry, &q.choices);
    conversation.push(ChatTurn::assistant(&retry));
    if retry_label.is_none() {
        log::warn!("question {}: subject answer unparseable after reminder", q.id);
    }
    Ok((conversation, retry, retry_label))
}

/// Acquires the subject's consolidated memory from the influence context,
/// re-prompting once when the required "Memory:" line is missing and falling
/// back to the full response if it still is.
fn acquire_memory(
    session: &ProtocolSession<'_>,
    q: &Question,
    group_size: usize,
    group: &[ChatTurn],
) -> Result<(Vec<ChatTurn>, String), ProtocolError> {
    let mut conversation = vec![
        ChatTurn::system(templates::MEMORY_SYSTEM_PROMPT),
        ChatTurn::user(templates::memory_acquisition_prompt(q, group_size, group)),
    ];
    let raw = session.subject.complete(&conversation, &session.subject_params)?;
    let mut memory = consolidate_memory(&raw);
    conversation.push(ChatTurn::assistant(&raw));
    if memory.is_empty() {
        conversation.push(ChatTurn::user(templates::MEMORY_REMINDER));
        let retry = session.subject.complete(&conversation, &session.subject_params)?;
        memory = consolidate_memory(&retry);
        conversation.push(ChatTurn::assistant(&retry));
        if memory.is_empty() {
            log::warn!(
                "question {}: no Memory line after reminder; keeping full response",
                q.id
            );
            memory = retry.trim().to_string();
        }
    }
    Ok((conversation, memory))
}

/// Runs one protocol end to end for one question and returns the recorded
/// outcome. Group turns are generated in speaking order; the subject is
/// queried in context (short-term), or via memory consolidation and a fresh
/// re-query (long-term).
pub fn run_protocol(
    session: &ProtocolSession<'_>,
    protocol: Protocol,
    q: &Question,
    group_size: usize,
) -> Result<ProtocolOutcome, ProtocolError> {
    q.validate()?;
    if protocol != Protocol::B && group_size < 1 {
        return Err(ProtocolError::InvalidGroupSize(group_size));
    }

    if protocol == Protocol::B {
        let conversation = templates::build_baseline_prompt(q);
        let (transcript, raw, label) = ask_subject(session, q, conversation)?;
        return Ok(ProtocolOutcome::from_answer(q, protocol, transcript, None, raw, label));
    }

    let group = generate_group_turns(session, protocol, q, group_size)?;
    let mut transcript = group.clone();

    if protocol.is_long_term() {
        let (acquisition, memory) = acquire_memory(session, q, group_size, &group)?;
        transcript.extend(acquisition);
        let requery = vec![ChatTurn::user(templates::requery_prompt(q, &memory))];
        let (answer_turns, raw, label) = ask_subject(session, q, requery)?;
        transcript.extend(answer_turns);
        return Ok(ProtocolOutcome::from_answer(
            q,
            protocol,
            transcript,
            Some(memory),
            raw,
            label,
        ));
    }

    let main = vec![ChatTurn::user(templates::subject_main_prompt(q, group_size, &group))];
    let (answer_turns, raw, label) = ask_subject(session, q, main)?;
    transcript.extend(answer_turns);
    Ok(ProtocolOutcome::from_answer(q, protocol, transcript, None, raw, label))
}
