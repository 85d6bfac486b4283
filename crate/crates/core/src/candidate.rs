use serde::{Deserialize, Serialize};

use crate::scoring::{EvalReport, FailureArtifact, StageEval, StageScore, MAX_FAILURES};
use crate::source::source_hash;

/// Ancestor feedback bundles carried along a lineage, nearest first.
pub const MAX_INHERITED_BUNDLES: usize = 2;

/// An evaluated program in an island population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub source: String,
    pub source_hash: String,
    pub island: usize,
    pub stage: usize,
    pub parent_id: Option<String>,
    pub score: StageScore,
    pub current: EvalReport,
    pub replay: EvalReport,
    pub created_iter: usize,
    /// Failure bundles of the nearest ancestors, at most [`MAX_INHERITED_BUNDLES`].
    #[serde(default)]
    pub inherited_feedback: Vec<Vec<FailureArtifact>>,
}

impl Candidate {
    pub fn new(
        id: String,
        source: String,
        island: usize,
        stage: usize,
        eval: StageEval,
        created_iter: usize,
        parent: Option<&Candidate>,
    ) -> Candidate {
        let inherited_feedback = parent.map(Candidate::lineage_for_child).unwrap_or_default();
        Candidate {
            id,
            source_hash: source_hash(&source),
            source,
            island,
            stage,
            parent_id: parent.map(|p| p.id.clone()),
            score: eval.score,
            current: eval.current,
            replay: eval.replay,
            created_iter,
            inherited_feedback,
        }
    }

    /// This candidate's own failures: current slice first, then replay.
    pub fn own_feedback(&self) -> Vec<FailureArtifact> {
        self.current
            .failures
            .iter()
            .chain(&self.replay.failures)
            .take(MAX_FAILURES)
            .cloned()
            .collect()
    }

    /// Own bundle followed by inherited ones, the chain shown when mutating this candidate.
    pub fn feedback_chain(&self) -> Vec<Vec<FailureArtifact>> {
        let mut chain = vec![self.own_feedback()];
        chain.extend(self.inherited_feedback.iter().take(MAX_INHERITED_BUNDLES).cloned());
        chain
    }

    fn lineage_for_child(&self) -> Vec<Vec<FailureArtifact>> {
        let mut chain = self.feedback_chain();
        chain.truncate(MAX_INHERITED_BUNDLES);
        chain
    }

    pub fn total(&self) -> f64 {
        self.score.total
    }

    /// A copy for another island under a new id; lineage is kept.
    pub fn clone_as(&self, id: String, island: usize) -> Candidate {
        Candidate {
            id,
            island,
            ..self.clone()
        }
    }
}

/// Preference order for "best": higher total, then shorter source, then older.
pub fn better(a: &Candidate, b: &Candidate) -> bool {
    rank_key(a) < rank_key(b)
}

fn rank_key(c: &Candidate) -> (std::cmp::Reverse<ordered::Total>, usize, usize) {
    (
        std::cmp::Reverse(ordered::Total(c.score.total)),
        c.source.len(),
        c.created_iter,
    )
}

/// Ordering with the preferred candidate first.
pub fn rank_cmp(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    rank_key(a).cmp(&rank_key(b))
}

/// Index of the best candidate by [`better`]; `None` when empty.
pub fn best_index(pop: &[Candidate]) -> Option<usize> {
    (0..pop.len()).min_by(|&i, &j| rank_key(&pop[i]).cmp(&rank_key(&pop[j])))
}

mod ordered {
    /// Totally ordered wrapper for finite scores.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Total(pub f64);

    impl Eq for Total {}

    impl PartialOrd for Total {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    impl Ord for Total {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }
}
