use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{JudgeBackend, JudgeError, JudgeResult, Submission};
use crate::corpus::Problem;

/// Replays pre-recorded results keyed by `(problem_id, attempt_index)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedJudge {
    script: BTreeMap<String, BTreeMap<u32, JudgeResult>>,
}

impl ScriptedJudge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, problem_id: &str, attempt_index: u32, result: JudgeResult) -> Self {
        self.insert(problem_id, attempt_index, result);
        self
    }

    pub fn insert(&mut self, problem_id: &str, attempt_index: u32, result: JudgeResult) {
        self.script
            .entry(problem_id.to_string())
            .or_default()
            .insert(attempt_index, result);
    }

    /// Scripts a whole trajectory for one problem, attempt 0 first.
    pub fn with_trajectory(mut self, problem_id: &str, results: impl IntoIterator<Item = JudgeResult>) -> Self {
        for (i, r) in results.into_iter().enumerate() {
            self.insert(problem_id, i as u32, r);
        }
        self
    }

    pub fn lookup(&self, problem_id: &str, attempt_index: u32) -> Result<JudgeResult, JudgeError> {
        self.script
            .get(problem_id)
            .and_then(|m| m.get(&attempt_index))
            .cloned()
            .ok_or_else(|| JudgeError::Unscripted {
                problem_id: problem_id.to_string(),
                attempt_index,
            })
    }
}

impl JudgeBackend for ScriptedJudge {
    fn evaluate(&self, submission: &Submission, _problem: &Problem) -> Result<JudgeResult, JudgeError> {
        self.lookup(&submission.problem_id, submission.attempt_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::{FailureDetail, Verdict};

    #[test]
    fn replays_verbatim_and_rejects_unknown_keys() {
        let wa = JudgeResult::failed(Verdict::WrongAnswer, 46, 100, FailureDetail::at(1));
        let ac = JudgeResult::accepted(140, 2048);
        let judge = ScriptedJudge::new().with("P", 0, wa.clone()).with("P", 1, ac.clone());
        let p = crate::corpus::tests::sample_problem("P");
        let replay: Vec<_> = (0..2)
            .map(|i| judge.evaluate(&Submission::new("P", "x", i).unwrap(), &p).unwrap())
            .collect();
        assert_eq!(replay, vec![wa, ac]);
        let err = judge.evaluate(&Submission::new("P", "x", 2).unwrap(), &p).unwrap_err();
        assert!(matches!(err, JudgeError::Unscripted { attempt_index: 2, .. }));
    }
}
