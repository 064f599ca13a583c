use serde::{Deserialize, Serialize};

use crate::dataset::{expert_role, DatasetError};

/// Display names assigned to group agents, in assignment order.
pub const AGENT_NAME_POOL: [&str; 15] = [
    "Mary", "John", "George", "Tom", "Tony", "Jack", "Alice", "Bob", "Charlie", "David", "Emma",
    "Frank", "Sarah", "Michael", "Lisa",
];

/// A group agent's persona: pool name plus the task-specific expert role used
/// in generation prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentIdentity {
    pub name: String,
    pub expert_role: String,
}

/// Assigns `n` identities for a task. The first 15 names follow the pool
/// order; beyond that the pool cycles with a numeric suffix (the 16th agent is
/// "Mary-2"). Every identity carries the task's expert role.
pub fn assign_identities(n: usize, task_name: &str) -> Result<Vec<AgentIdentity>, DatasetError> {
    let role = expert_role(task_name)?;
    Ok((0..n)
        .map(|i| {
            let base = AGENT_NAME_POOL[i % AGENT_NAME_POOL.len()];
            let cycle = i / AGENT_NAME_POOL.len();
            let name =
                if cycle == 0 { base.to_string() } else { format!("{base}-{}", cycle + 1) };
            AgentIdentity { name, expert_role: role.to_string() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_five_for_misconceptions() {
        let ids = assign_identities(5, "misconceptions").unwrap();
        let names: Vec<_> = ids.iter().map(|i| i.name.as_str()).collect();
        assert_eq!(names, ["Mary", "John", "George", "Tom", "Tony"]);
        assert!(ids.iter().all(|i| i.expert_role == "Misconception identification expert"));
    }

    #[test]
    fn single_agent_is_mary() {
        let ids = assign_identities(1, "anachronisms").unwrap();
        assert_eq!(ids[0].name, "Mary");
        assert_eq!(ids[0].expert_role, "Historical context expert");
    }

    #[test]
    fn sixteenth_agent_cycles_with_suffix() {
        let ids = assign_identities(16, "misconceptions").unwrap();
        assert_eq!(ids.len(), 16);
        assert_eq!(ids[15].name, "Mary-2");
        assert_eq!(ids[14].name, "Lisa");
    }

    #[test]
    fn thirty_first_agent_reaches_third_cycle() {
        let ids = assign_identities(31, "misconceptions").unwrap();
        assert_eq!(ids[30].name, "Mary-3");
    }

    #[test]
    fn unknown_task_is_rejected() {
        assert!(matches!(
            assign_identities(3, "no_such_task"),
            Err(DatasetError::UnknownTask { .. })
        ));
    }
}
