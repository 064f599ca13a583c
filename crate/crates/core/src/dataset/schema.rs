use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::catalog::{classify_domain, Domain};
use crate::agents::BackendError;

/// One labeled answer option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: char,
    pub text: String,
}

/// One multiple-choice item from a curated task file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub task: String,
    pub domain: Domain,
    pub text: String,
    pub choices: Vec<Choice>,
    pub answer_label: char,
    pub distractor_label: Option<char>,
}

impl Question {
    pub fn choice_text(&self, label: char) -> Option<&str> {
        self.choices.iter().find(|c| c.label == label).map(|c| c.text.as_str())
    }

    pub fn answer_text(&self) -> &str {
        self.choice_text(self.answer_label).expect("validated answer label")
    }

    pub fn distractor_text(&self) -> Option<&str> {
        self.distractor_label.and_then(|l| self.choice_text(l))
    }

    pub fn incorrect_choices(&self) -> impl Iterator<Item = &Choice> {
        self.choices.iter().filter(move |c| c.label != self.answer_label)
    }

    /// Checks the structural invariants every curated question must satisfy.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let fail = |field: &str, message: String| DatasetError::Schema {
            id: self.id.clone(),
            field: field.to_string(),
            message,
        };
        if self.id.is_empty() {
            return Err(fail("id", "must be non-empty".into()));
        }
        if self.text.is_empty() {
            return Err(fail("question", "must be non-empty".into()));
        }
        if self.choices.len() < 2 {
            return Err(fail("choices", format!("need at least 2, got {}", self.choices.len())));
        }
        for (i, choice) in self.choices.iter().enumerate() {
            let expected = (b'A' + i as u8) as char;
            if choice.label != expected {
                return Err(fail(
                    "choices",
                    format!("label {} at position {} (expected {})", choice.label, i, expected),
                ));
            }
            if choice.text.is_empty() {
                return Err(fail("choices", format!("option {} has empty text", choice.label)));
            }
        }
        if self.choice_text(self.answer_label).is_none() {
            return Err(fail(
                "answer",
                format!("label {} is not among the choices", self.answer_label),
            ));
        }
        if let Some(d) = self.distractor_label {
            if self.choice_text(d).is_none() {
                return Err(fail("distractor", format!("label {d} is not among the choices")));
            }
            if d == self.answer_label {
                return Err(fail("distractor", "must differ from the answer".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a valid task file: {message}")]
    Parse { path: String, message: String },
    #[error("question {id}: invalid {field}: {message}")]
    Schema { id: String, field: String, message: String },
    #[error("unknown task '{name}'")]
    UnknownTask { name: String },
    #[error("no distractor resolved for question {id} after retries")]
    DistractorUnresolved { id: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

// On-disk shape. The domain is not stored; it is derived from the task name.
#[derive(Serialize, Deserialize)]
struct TaskFile {
    task: String,
    questions: Vec<QuestionFile>,
}

#[derive(Serialize, Deserialize)]
struct QuestionFile {
    id: String,
    question: String,
    choices: Vec<ChoiceFile>,
    answer: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    distractor: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ChoiceFile {
    label: String,
    text: String,
}

fn parse_label(raw: &str, id: &str, field: &str) -> Result<char, DatasetError> {
    let mut chars = raw.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_uppercase() => Ok(c),
        _ => Err(DatasetError::Schema {
            id: id.to_string(),
            field: field.to_string(),
            message: format!("{raw:?} is not a single uppercase letter"),
        }),
    }
}

/// Loads and validates a task file, preserving question order.
pub fn load_task(path: impl AsRef<Path>) -> Result<Vec<Question>, DatasetError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let raw = fs::read_to_string(path)
        .map_err(|source| DatasetError::Io { path: display.clone(), source })?;
    let file: TaskFile = serde_json::from_str(&raw)
        .map_err(|e| DatasetError::Parse { path: display.clone(), message: e.to_string() })?;
    let domain = classify_domain(&file.task)?;

    let mut seen_ids = std::collections::HashSet::new();
    let mut questions = Vec::with_capacity(file.questions.len());
    for q in file.questions {
        if !seen_ids.insert(q.id.clone()) {
            return Err(DatasetError::Schema {
                id: q.id,
                field: "id".into(),
                message: "duplicate question id".into(),
            });
        }
        let choices = q
            .choices
            .iter()
            .map(|c| {
                Ok(Choice { label: parse_label(&c.label, &q.id, "choices")?, text: c.text.clone() })
            })
            .collect::<Result<Vec<_>, DatasetError>>()?;
        let question = Question {
            answer_label: parse_label(&q.answer, &q.id, "answer")?,
            distractor_label: q
                .distractor
                .as_deref()
                .map(|d| parse_label(d, &q.id, "distractor"))
                .transpose()?,
            id: q.id,
            task: file.task.clone(),
            domain,
            text: q.question,
            choices,
        };
        question.validate()?;
        questions.push(question);
    }
    Ok(questions)
}

/// Writes a task file in the on-disk schema; the inverse of [`load_task`].
pub fn write_task(
    path: impl AsRef<Path>,
    task: &str,
    questions: &[Question],
) -> Result<(), DatasetError> {
    classify_domain(task)?;
    for q in questions {
        q.validate()?;
    }
    let file = TaskFile {
        task: task.to_string(),
        questions: questions
            .iter()
            .map(|q| QuestionFile {
                id: q.id.clone(),
                question: q.text.clone(),
                choices: q
                    .choices
                    .iter()
                    .map(|c| ChoiceFile { label: c.label.to_string(), text: c.text.clone() })
                    .collect(),
                answer: q.answer_label.to_string(),
                distractor: q.distractor_label.map(|d| d.to_string()),
            })
            .collect(),
    };
    let mut body = serde_json::to_string_pretty(&file).expect("serializable task file");
    body.push('\n');
    let display = path.as_ref().display().to_string();
    fs::write(path, body).map_err(|source| DatasetError::Io { path: display, source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_file(answer: &str) -> String {
        format!(
            r#"{{
  "task": "misconceptions",
  "questions": [
    {{
      "id": "q1",
      "question": "How many tails do humans have?",
      "choices": [
        {{"label": "A", "text": "none"}},
        {{"label": "B", "text": "three"}},
        {{"label": "C", "text": "four"}},
        {{"label": "D", "text": "two"}}
      ],
      "answer": "{answer}",
      "distractor": "B"
    }}
  ]
}}"#
        )
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let file = tempfile::NamedTempFile::new().unwrap();
        fs::write(file.path(), content).unwrap();
        file
    }

    #[test]
    fn loads_well_formed_file_in_order() {
        let file = write_temp(&sample_file("A"));
        let questions = load_task(file.path()).unwrap();
        assert_eq!(questions.len(), 1);
        let q = &questions[0];
        assert_eq!(q.id, "q1");
        assert_eq!(q.domain, Domain::MisconceptionsSocialCognition);
        assert_eq!(q.answer_text(), "none");
        assert_eq!(q.distractor_text(), Some("three"));
        assert_eq!(q.incorrect_choices().count(), 3);
    }

    #[test]
    fn answer_outside_choices_names_question_and_field() {
        let file = write_temp(&sample_file("E"));
        match load_task(file.path()) {
            Err(DatasetError::Schema { id, field, .. }) => {
                assert_eq!(id, "q1");
                assert_eq!(field, "answer");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        let content = sample_file("A").replace(r#""label": "C""#, r#""label": "B""#);
        let file = write_temp(&content);
        assert!(matches!(
            load_task(file.path()),
            Err(DatasetError::Schema { field, .. }) if field == "choices"
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_task("/nonexistent/task.json"),
            Err(DatasetError::Io { .. })
        ));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        let file = write_temp("{ not json");
        assert!(matches!(load_task(file.path()), Err(DatasetError::Parse { .. })));
    }

    #[test]
    fn round_trips_through_write_task() {
        let file = write_temp(&sample_file("A"));
        let questions = load_task(file.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_task(out.path(), "misconceptions", &questions).unwrap();
        let reloaded = load_task(out.path()).unwrap();
        assert_eq!(questions, reloaded);
    }

    #[test]
    fn distractor_equal_to_answer_rejected() {
        let content = sample_file("A").replace(r#""distractor": "B""#, r#""distractor": "A""#);
        let file = write_temp(&content);
        assert!(matches!(
            load_task(file.path()),
            Err(DatasetError::Schema { field, .. }) if field == "distractor"
        ));
    }
}
