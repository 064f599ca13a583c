use serde::{Deserialize, Serialize};

use super::schema::DatasetError;

/// The four knowledge domains questions are grouped into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    HistoryTimeEvents,
    MisconceptionsSocialCognition,
    GeneralKnowledge,
    DomainSpecificKnowledge,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::HistoryTimeEvents,
        Domain::MisconceptionsSocialCognition,
        Domain::GeneralKnowledge,
        Domain::DomainSpecificKnowledge,
    ];

    /// Stable machine-readable name, used in ledgers and report keys.
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::HistoryTimeEvents => "history_time_events",
            Domain::MisconceptionsSocialCognition => "misconceptions_social_cognition",
            Domain::GeneralKnowledge => "general_knowledge",
            Domain::DomainSpecificKnowledge => "domain_specific_knowledge",
        }
    }

    /// Human-readable name for rendered reports.
    pub fn display_name(self) -> &'static str {
        match self {
            Domain::HistoryTimeEvents => "History, Time & Events",
            Domain::MisconceptionsSocialCognition => "Misconceptions & Social Cognition",
            Domain::GeneralKnowledge => "General Knowledge",
            Domain::DomainSpecificKnowledge => "Domain-Specific Knowledge",
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Catalog entry for one supported task: its domain, the expert role agents
/// adopt when speaking about it, and the curated question count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskManifest {
    pub task_name: &'static str,
    pub domain: Domain,
    pub expert_role: &'static str,
    pub question_count: u32,
}

const fn entry(
    task_name: &'static str,
    domain: Domain,
    expert_role: &'static str,
    question_count: u32,
) -> TaskManifest {
    TaskManifest { task_name, domain, expert_role, question_count }
}

static CATALOG: [TaskManifest; 20] = [
    entry("anachronisms", Domain::HistoryTimeEvents, "Historical context expert", 230),
    entry("empirical_judgments", Domain::HistoryTimeEvents, "Empirical judgment expert", 99),
    entry(
        "presuppositions_as_nli",
        Domain::HistoryTimeEvents,
        "Natural language inference expert",
        300,
    ),
    entry("which_wiki_edit", Domain::HistoryTimeEvents, "Wikipedia revision expert", 300),
    entry(
        "causal_judgment",
        Domain::MisconceptionsSocialCognition,
        "Causal reasoning expert",
        190,
    ),
    entry(
        "disambiguation_qa",
        Domain::MisconceptionsSocialCognition,
        "Pronoun disambiguation expert",
        258,
    ),
    entry(
        "epistemic_reasoning",
        Domain::MisconceptionsSocialCognition,
        "Epistemic reasoning expert",
        300,
    ),
    entry(
        "known_unknowns",
        Domain::MisconceptionsSocialCognition,
        "Hallucination detection expert",
        46,
    ),
    entry(
        "misconceptions",
        Domain::MisconceptionsSocialCognition,
        "Misconception identification expert",
        219,
    ),
    entry("auto_categorization", Domain::GeneralKnowledge, "Classification expert", 300),
    entry("general_knowledge", Domain::GeneralKnowledge, "General knowledge expert", 70),
    entry("qa_wikidata", Domain::GeneralKnowledge, "Wikidata QA expert", 300),
    entry("tell_me_why", Domain::GeneralKnowledge, "Narrative reasoning expert", 300),
    entry("dyck_languages", Domain::DomainSpecificKnowledge, "Dyck language expert", 300),
    entry(
        "international_phonetic_alphabet_nli",
        Domain::DomainSpecificKnowledge,
        "IPA NLI expert",
        126,
    ),
    entry(
        "language_identification",
        Domain::DomainSpecificKnowledge,
        "Language identification expert",
        300,
    ),
    entry(
        "movie_recommendation",
        Domain::DomainSpecificKnowledge,
        "Movie recommendation expert",
        300,
    ),
    entry(
        "salient_translation_error_detection",
        Domain::DomainSpecificKnowledge,
        "Translation error detection expert",
        300,
    ),
    entry(
        "sports_understanding",
        Domain::DomainSpecificKnowledge,
        "Sports understanding expert",
        300,
    ),
    entry(
        "vitaminc_fact_verification",
        Domain::DomainSpecificKnowledge,
        "Fact verification expert",
        300,
    ),
];

/// All 20 supported tasks.
pub fn catalog() -> &'static [TaskManifest] {
    &CATALOG
}

fn canonical_task_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut last_sep = true;
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
            last_sep = false;
        } else if !last_sep {
            out.push('_');
            last_sep = true;
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

fn find_task(name: &str) -> Result<&'static TaskManifest, DatasetError> {
    let canonical = canonical_task_name(name);
    CATALOG
        .iter()
        .find(|t| t.task_name == canonical)
        .ok_or_else(|| DatasetError::UnknownTask { name: name.to_string() })
}

/// The knowledge domain a supported task belongs to. Task names are matched
/// case-insensitively with punctuation and spaces treated as underscores.
pub fn classify_domain(task_name: &str) -> Result<Domain, DatasetError> {
    find_task(task_name).map(|t| t.domain)
}

/// The expert role agents claim when discussing a supported task.
pub fn expert_role(task_name: &str) -> Result<&'static str, DatasetError> {
    find_task(task_name).map(|t| t.expert_role)
}
