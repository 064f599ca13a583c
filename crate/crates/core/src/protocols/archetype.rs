use serde::{Deserialize, Serialize};

use crate::agents::BackendError;
use crate::dataset::DatasetError;

/// The five persuasive archetypes a role-based group is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Archetype {
    /// Error Conclusion Initiator: speaks first, anchors the wrong answer.
    E,
    /// Detail Support Provider: adds credible-sounding detail.
    D,
    /// Group Consensus Reinforcer: amplifies the majority feeling.
    G,
    /// Authority Endorser: lends professional weight.
    A,
    /// Questioning Compromiser: doubts, then converts.
    Q,
}

impl Archetype {
    pub fn describe(self) -> &'static str {
        match self {
            Archetype::E => "Error Conclusion Initiator",
            Archetype::D => "Detail Support Provider",
            Archetype::G => "Group Consensus Reinforcer",
            Archetype::A => "Authority Endorser",
            Archetype::Q => "Questioning Compromiser",
        }
    }
}

/// The ordered archetype lineup for a group of `n` speakers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSequence {
    pub n: usize,
    pub sequence: Vec<Archetype>,
}

/// The six interaction protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// Baseline: the subject alone with the question.
    B,
    /// Generic short-term: uniform misleading peers, answer in context.
    GS,
    /// Generic long-term: uniform misleading peers, answer from memory.
    GL,
    /// Role-based short-term: archetype narrative, answer in context.
    RS,
    /// Role-based long-term: archetype narrative, answer from memory.
    RL,
    /// Correct guidance: peers argue for the true answer.
    C,
}

impl Protocol {
    pub const ALL: [Protocol; 6] =
        [Protocol::B, Protocol::GS, Protocol::GL, Protocol::RS, Protocol::RL, Protocol::C];

    pub const INFLUENCE: [Protocol; 4] =
        [Protocol::GS, Protocol::GL, Protocol::RS, Protocol::RL];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::B => "B",
            Protocol::GS => "GS",
            Protocol::GL => "GL",
            Protocol::RS => "RS",
            Protocol::RL => "RL",
            Protocol::C => "C",
        }
    }

    /// Misleading-influence protocols, the ones that need a distractor.
    pub fn is_influence(self) -> bool {
        matches!(self, Protocol::GS | Protocol::GL | Protocol::RS | Protocol::RL)
    }

    pub fn is_long_term(self) -> bool {
        matches!(self, Protocol::GL | Protocol::RL)
    }

    pub fn is_role_based(self) -> bool {
        matches!(self, Protocol::RS | Protocol::RL)
    }

    /// Stable ordering used when canonicalizing ledgers and reports.
    pub fn rank(self) -> usize {
        Protocol::ALL.iter().position(|p| *p == self).expect("member of ALL")
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL
            .iter()
            .copied()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown protocol '{s}' (expected B, GS, GL, RS, RL, or C)"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("group size {0} is invalid; need at least 1")]
    InvalidGroupSize(usize),
    #[error("archetype {archetype:?} spoken out of order: {detail}")]
    OrderViolation { archetype: Archetype, detail: String },
    #[error("question {id} has no distractor; curate the task first")]
    MissingDistractor { id: String },
    #[error("question {id}: target label {label} is not a valid wrong answer")]
    InvalidTarget { id: String, label: char },
    #[error("{stage} produced unusable output after retry: {detail}")]
    MalformedOutput { stage: String, detail: String },
    #[error("defense wrapping applies only to misleading protocols, not {0}")]
    UnsupportedProtocol(Protocol),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

// Archetype lineups for group sizes 1 through 15. Each row adds exactly one
// speaker; past 15 the group grows by consensus reinforcers appended at the
// end, matching how the tabulated rows themselves grow from 9 onward.
const LINEUPS: [&[Archetype]; 15] = {
    use Archetype::{A, D, E, G, Q};
    [
        &[E],
        &[E, D],
        &[E, D, G],
        &[E, D, G, A],
        &[E, D, G, A, Q],
        &[E, D, G, G, A, Q],
        &[E, D, D, G, G, A, Q],
        &[E, D, D, G, G, A, A, Q],
        &[E, D, D, G, G, A, A, Q, G],
        &[E, D, D, G, G, A, A, Q, G, G],
        &[E, D, D, G, G, A, A, Q, G, G, G],
        &[E, D, D, D, G, G, A, A, Q, G, G, G],
        &[E, D, D, D, G, G, A, A, A, Q, G, G, G],
        &[E, D, D, D, G, G, A, A, A, Q, G, G, G, G],
        &[E, D, D, D, D, G, G, A, A, A, Q, G, G, G, G],
    ]
};

/// The speaking order for a group of `n` agents.
pub fn role_sequence(n: usize) -> Result<RoleSequence, ProtocolError> {
    if n < 1 {
        return Err(ProtocolError::InvalidGroupSize(n));
    }
    let mut sequence: Vec<Archetype> = LINEUPS[n.min(15) - 1].to_vec();
    sequence.resize(n, Archetype::G);
    Ok(RoleSequence { n, sequence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Archetype::{A, D, E, G, Q};

    #[test]
    fn tabulated_rows_are_exact() {
        assert_eq!(role_sequence(1).unwrap().sequence, vec![E]);
        assert_eq!(role_sequence(3).unwrap().sequence, vec![E, D, G]);
        assert_eq!(role_sequence(5).unwrap().sequence, vec![E, D, G, A, Q]);
        assert_eq!(role_sequence(6).unwrap().sequence, vec![E, D, G, G, A, Q]);
        assert_eq!(
            role_sequence(10).unwrap().sequence,
            vec![E, D, D, G, G, A, A, Q, G, G]
        );
        assert_eq!(
            role_sequence(15).unwrap().sequence,
            vec![E, D, D, D, D, G, G, A, A, A, Q, G, G, G, G]
        );
    }

    #[test]
    fn structural_rules_hold_for_all_tabulated_sizes() {
        for n in 1..=15 {
            let seq = role_sequence(n).unwrap();
            assert_eq!(seq.n, n);
            assert_eq!(seq.sequence.len(), n);
            assert_eq!(seq.sequence[0], E, "first speaker at n={n}");
            assert_eq!(seq.sequence.iter().filter(|a| **a == E).count(), 1, "E count at n={n}");
            let q_count = seq.sequence.iter().filter(|a| **a == Q).count();
            assert_eq!(q_count, usize::from(n >= 5), "Q count at n={n}");
        }
    }

    #[test]
    fn beyond_table_appends_reinforcers() {
        let seq = role_sequence(18).unwrap();
        assert_eq!(seq.sequence.len(), 18);
        assert_eq!(&seq.sequence[..15], &role_sequence(15).unwrap().sequence[..]);
        assert_eq!(&seq.sequence[15..], &[G, G, G]);
    }

    #[test]
    fn zero_is_rejected() {
        assert!(matches!(role_sequence(0), Err(ProtocolError::InvalidGroupSize(0))));
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.as_str().parse::<Protocol>().unwrap(), p);
        }
        assert_eq!("gs".parse::<Protocol>().unwrap(), Protocol::GS);
        assert!("X".parse::<Protocol>().is_err());
    }
}
