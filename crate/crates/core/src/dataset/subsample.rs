use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::schema::Question;

/// Draws up to `cap` questions uniformly without replacement, then restores
/// the original relative order. Deterministic for a fixed seed; the identity
/// when `cap` covers the whole list.
pub fn subsample(questions: &[Question], cap: usize, seed: u64) -> Vec<Question> {
    assert!(cap >= 1, "subsample cap must be at least 1");
    if cap >= questions.len() {
        return questions.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, questions.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| questions[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Choice, Domain};

    fn corpus(n: usize) -> Vec<Question> {
        (0..n)
            .map(|i| Question {
                id: format!("q{i}"),
                task: "misconceptions".into(),
                domain: Domain::MisconceptionsSocialCognition,
                text: format!("question {i}"),
                choices: vec![
                    Choice { label: 'A', text: "yes".into() },
                    Choice { label: 'B', text: "no".into() },
                ],
                answer_label: 'A',
                distractor_label: Some('B'),
            })
            .collect()
    }

    #[test]
    fn cap_beyond_size_returns_all_unchanged() {
        let questions = corpus(46);
        assert_eq!(subsample(&questions, 300, 7), questions);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let questions = corpus(500);
        assert_eq!(subsample(&questions, 300, 7), subsample(&questions, 300, 7));
    }

    #[test]
    fn different_seeds_differ() {
        let questions = corpus(500);
        assert_ne!(subsample(&questions, 300, 7), subsample(&questions, 300, 8));
    }

    #[test]
    fn preserves_relative_order_without_duplicates() {
        let questions = corpus(100);
        let sampled = subsample(&questions, 40, 3);
        assert_eq!(sampled.len(), 40);
        let positions: Vec<usize> = sampled
            .iter()
            .map(|q| questions.iter().position(|o| o.id == q.id).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn idempotent_at_same_cap_and_seed() {
        let questions = corpus(200);
        let once = subsample(&questions, 80, 11);
        assert_eq!(subsample(&once, 80, 11), once);
    }
}
