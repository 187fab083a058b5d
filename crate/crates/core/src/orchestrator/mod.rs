//! The refinement loop and the experiment runners built on it.
//!
//! [`solve_problem`] drives one problem through generate, judge, critique and
//! refine until acceptance or budget exhaustion. The runners in [`runner`]
//! fan that out over a corpus and a set of workflow arms, writing a resumable
//! ledger.

mod runner;
mod scripts;

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::corpus::Problem;
use crate::judge::{JudgeBackend, JudgeResult, Submission, Verdict, MAX_ATTEMPT_INDEX};
use crate::protocol::{self, ChatMessage, ConfidenceHint, ProtocolError};
use crate::providers::{ChatBackend, Provider, ProviderConfig, ProviderError, RetryPolicy, Session};

pub use runner::{
    baseline_arms, read_ledger, run_ablation, run_baselines, run_experiment, stratified_sample, write_ledger,
    AblationLedgers, Arm, ArmSummary, BaselineLedgers, RunManifest, RunOptions, RunSummary, ARTIFACT_DIR, LEDGER_FILE,
    RUN_MANIFEST_FILE,
};
pub use scripts::{LiveBackends, ScriptBook};

pub const DEFAULT_MAX_REFINEMENTS: u32 = 3;
pub const CONDITION_STATEFUL: &str = "stateful";
pub const CONDITION_STATELESS: &str = "stateless";

fn default_max_refinements() -> u32 {
    DEFAULT_MAX_REFINEMENTS
}

/// A generator/critic pairing with its attempt budget and context mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowConfig {
    pub workflow_id: String,
    pub generator: ProviderConfig,
    pub critic: ProviderConfig,
    #[serde(default = "default_max_refinements")]
    pub max_refinements: u32,
    #[serde(default)]
    pub stateless_mode: bool,
    #[serde(default)]
    pub seed: u64,
}

impl WorkflowConfig {
    pub fn new(workflow_id: impl Into<String>, generator: ProviderConfig, critic: ProviderConfig) -> Self {
        Self {
            workflow_id: workflow_id.into(),
            generator,
            critic,
            max_refinements: DEFAULT_MAX_REFINEMENTS,
            stateless_mode: false,
            seed: 0,
        }
    }

    pub fn attempt_budget(&self) -> u32 {
        self.max_refinements + 1
    }

    /// Label used for the arm when no explicit condition is given.
    pub fn default_condition(&self) -> &'static str {
        if self.stateless_mode {
            CONDITION_STATELESS
        } else {
            CONDITION_STATEFUL
        }
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.workflow_id.trim().is_empty() || self.workflow_id.contains('/') {
            return Err(OrchestratorError::InvalidConfig(format!(
                "workflow id `{}` must be nonempty and free of `/`",
                self.workflow_id
            )));
        }
        if self.max_refinements > MAX_ATTEMPT_INDEX {
            return Err(OrchestratorError::InvalidConfig(format!(
                "{}: max_refinements {} exceeds {MAX_ATTEMPT_INDEX}",
                self.workflow_id, self.max_refinements
            )));
        }
        self.generator.validate().map_err(|e| OrchestratorError::InvalidConfig(e.to_string()))?;
        self.critic.validate().map_err(|e| OrchestratorError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalStatus {
    Solved,
    Unsolved,
    Abstained,
}

/// One judged submission and everything that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt_index: u32,
    pub code: String,
    pub result: JudgeResult,
    /// Critic feedback embedded in this attempt's refinement prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic_hint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<ConfidenceHint>,
    #[serde(default)]
    pub started_at_ms: u64,
    #[serde(default)]
    pub ended_at_ms: u64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub prompt: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub raw_response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic_response: Option<String>,
    /// Generator context length just before / after the send for this attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_context_before: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_context_after: Option<usize>,
}

impl AttemptRecord {
    /// Minimal record, as used by replay fixtures.
    pub fn new(attempt_index: u32, code: impl Into<String>, result: JudgeResult) -> Self {
        Self {
            attempt_index,
            code: code.into(),
            result,
            critic_hint: None,
            confidence: None,
            started_at_ms: 0,
            ended_at_ms: 0,
            prompt: String::new(),
            raw_response: String::new(),
            critic_prompt: None,
            critic_response: None,
            generator_context_before: None,
            generator_context_after: None,
        }
    }

    pub fn verdict(&self) -> Verdict {
        self.result.verdict
    }

    pub fn compiled(&self) -> bool {
        self.result.verdict != Verdict::CompilationError
    }
}

/// The full trajectory of one problem under one workflow arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub problem_id: String,
    pub workflow_id: String,
    #[serde(default = "default_condition")]
    pub condition: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<u32>,
    #[serde(default = "default_budget")]
    pub attempt_budget: u32,
    pub attempts: Vec<AttemptRecord>,
    pub final_status: FinalStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solved_at: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Critic hint produced before an error stopped the refined attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_hint: Option<String>,
}

fn default_condition() -> String {
    CONDITION_STATEFUL.to_string()
}

fn default_budget() -> u32 {
    DEFAULT_MAX_REFINEMENTS + 1
}

impl SessionLog {
    /// Builds a log from finished attempts, deriving status and `solved_at`.
    pub fn from_attempts(
        problem_id: impl Into<String>,
        workflow_id: impl Into<String>,
        condition: impl Into<String>,
        rating: Option<u32>,
        attempt_budget: u32,
        attempts: Vec<AttemptRecord>,
        error: Option<String>,
    ) -> Self {
        let solved_at = attempts.iter().find(|a| a.verdict().is_accepted()).map(|a| a.attempt_index);
        let final_status = if solved_at.is_some() {
            FinalStatus::Solved
        } else if !attempts.is_empty() && attempts.iter().all(|a| !a.compiled()) {
            FinalStatus::Abstained
        } else {
            FinalStatus::Unsolved
        };
        Self {
            problem_id: problem_id.into(),
            workflow_id: workflow_id.into(),
            condition: condition.into(),
            rating,
            attempt_budget,
            attempts,
            final_status,
            solved_at,
            error,
            pending_hint: None,
        }
    }

    pub fn key(&self) -> SessionKey {
        SessionKey {
            problem_id: self.problem_id.clone(),
            workflow_id: self.workflow_id.clone(),
            condition: self.condition.clone(),
        }
    }

    pub fn is_solved(&self) -> bool {
        self.final_status == FinalStatus::Solved
    }

    /// Judge submissions this session made.
    pub fn submissions(&self) -> usize {
        self.attempts.len()
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.attempts.len();
        if n == 0 && self.error.is_none() {
            return Err("no attempts recorded".into());
        }
        if n as u32 > self.attempt_budget {
            return Err(format!("{n} attempts exceed budget {}", self.attempt_budget));
        }
        for (i, a) in self.attempts.iter().enumerate() {
            if a.attempt_index != i as u32 {
                return Err(format!("attempt {i} carries index {}", a.attempt_index));
            }
            a.result.check_invariants().map_err(|e| format!("attempt {i}: {e}"))?;
            if i == 0 && a.critic_hint.is_some() {
                return Err("attempt 0 carries a critic hint".into());
            }
            if i > 0 {
                if self.attempts[i - 1].verdict().is_accepted() {
                    return Err(format!("attempt {i} follows an accepted attempt"));
                }
                if a.critic_hint.is_none() {
                    return Err(format!("attempt {i} has no critic hint"));
                }
            }
        }
        let first_ac = self.attempts.iter().position(|a| a.verdict().is_accepted());
        match (self.final_status, first_ac) {
            (FinalStatus::Solved, Some(i)) if i + 1 == n && self.solved_at == Some(i as u32) => {}
            (FinalStatus::Solved, _) => return Err("solved log must end at its only accepted attempt".into()),
            (_, Some(_)) => return Err("unsolved log contains an accepted attempt".into()),
            (_, None) if self.solved_at.is_some() => return Err("solved_at set on unsolved log".into()),
            _ => {}
        }
        let abstained = n > 0 && self.attempts.iter().all(|a| !a.compiled());
        if abstained != (self.final_status == FinalStatus::Abstained) {
            return Err("abstained status disagrees with compilable attempts".into());
        }
        Ok(())
    }
}

/// Identifies one (problem, workflow, condition) session.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SessionKey {
    pub problem_id: String,
    pub workflow_id: String,
    pub condition: String,
}

/// Backends serving one session.
#[derive(Clone)]
pub struct SessionBackends {
    pub generator: Arc<dyn ChatBackend>,
    pub critic: Arc<dyn ChatBackend>,
    pub judge: Arc<dyn JudgeBackend>,
}

/// Supplies backends per session, so scripted runs can hand each session its
/// own canned replies.
pub trait BackendProvider: Send + Sync {
    fn backends(&self, key: &SessionKey, workflow: &WorkflowConfig) -> Result<SessionBackends, OrchestratorError>;
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("ledger in {dir} was produced by a different configuration (hash {found}, expected {expected})")]
    ConfigMismatch {
        dir: String,
        found: String,
        expected: String,
    },
    #[error("rating stratum {rating} has {available} problems, quota is {requested}")]
    InsufficientStratum {
        rating: u32,
        available: usize,
        requested: usize,
    },
    #[error("backend setup for {0}: {1}")]
    Backend(String, String),
    #[error("malformed ledger line {line}: {message}")]
    Ledger { line: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Loop knobs that are not part of the workflow definition.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub retry: RetryPolicy,
}

fn user_text(messages: Vec<ChatMessage>) -> String {
    messages
        .into_iter()
        .next_back()
        .map(|m| m.content)
        .unwrap_or_default()
}

struct Loop<'a> {
    problem: &'a Problem,
    judge: &'a dyn JudgeBackend,
    generator: Session,
    critic: Session,
}

impl Loop<'_> {
    /// Sends `prompt` to the generator and judges whatever code comes back.
    /// A reply without code is recorded as a compilation error and still
    /// consumes its slot.
    fn attempt(&self, index: u32, prompt: String) -> Result<AttemptRecord, String> {
        let started = now_ms();
        let before = self.generator.context_len().map_err(|e| e.to_string())?;
        let reply = self.generator.send(&prompt).map_err(|e| format!("generator: {e}"))?;
        let after = self.generator.context_len().map_err(|e| e.to_string())?;
        let (code, result) = match protocol::extract_code(&reply) {
            Ok(code) => {
                let submission = Submission::new(&self.problem.id, code.clone(), index).map_err(|e| e.to_string())?;
                let result = self
                    .judge
                    .evaluate(&submission, self.problem)
                    .map_err(|e| format!("judge: {e}"))?;
                (code, result)
            }
            Err(ProtocolError::NoCode) => (String::new(), JudgeResult::compilation_error("no code found in response")),
            Err(e) => return Err(e.to_string()),
        };
        let mut record = AttemptRecord::new(index, code, result);
        record.started_at_ms = started;
        record.ended_at_ms = now_ms();
        record.prompt = prompt;
        record.raw_response = reply;
        record.generator_context_before = Some(before);
        record.generator_context_after = Some(after);
        Ok(record)
    }

    /// On failure returns the error and, when the critic already answered,
    /// the hint that never reached the judge.
    fn refine(
        &self,
        index: u32,
        previous: &AttemptRecord,
        stateless: bool,
    ) -> Result<AttemptRecord, (String, Option<String>)> {
        if stateless {
            self.generator.reset_contexts().map_err(|e| (e.to_string(), None))?;
            self.critic.reset_contexts().map_err(|e| (e.to_string(), None))?;
        }
        let started = now_ms();
        let feedback = protocol::build_feedback_prompt(self.problem, &previous.code, &previous.result)
            .map_err(|e| (e.to_string(), None))?;
        let critic_prompt = user_text(feedback);
        let critic_reply = self
            .critic
            .send(&critic_prompt)
            .map_err(|e| (format!("critic: {e}"), None))?;
        let level = protocol::extract_confidence(&critic_reply);
        let mut hint = protocol::strip_confidence(&critic_reply);
        if hint.is_empty() {
            hint = critic_reply.trim().to_string();
        }
        let prompt = protocol::build_refinement_prompt(self.problem, &previous.code, &previous.result, &hint)
            .map_err(|e| (e.to_string(), Some(hint.clone())))?;
        let mut record = self
            .attempt(index, user_text(prompt))
            .map_err(|e| (e, Some(hint.clone())))?;
        record.started_at_ms = started;
        record.confidence = level
            .and_then(|l| ConfidenceHint::new(l, hint.clone()))
            .map(|c| c.resolved(record.result.verdict.is_accepted()));
        record.critic_hint = Some(hint);
        record.critic_prompt = Some(critic_prompt);
        record.critic_response = Some(critic_reply);
        Ok(record)
    }
}

/// Runs the closed refinement loop for one problem.
///
/// Transport or judge failures end the session early as unsolved with an
/// `error` annotation; attempts finished before the failure are kept.
pub fn solve_problem(
    problem: &Problem,
    workflow: &WorkflowConfig,
    condition: &str,
    backends: &SessionBackends,
    options: &SolveOptions,
) -> SessionLog {
    let finish = |attempts: Vec<AttemptRecord>, error: Option<String>| {
        SessionLog::from_attempts(
            &problem.id,
            &workflow.workflow_id,
            condition,
            problem.rating,
            workflow.attempt_budget(),
            attempts,
            error,
        )
    };
    let session_id = format!("{}/{}/{}", problem.id, workflow.workflow_id, condition);
    let open = |config: &ProviderConfig, backend: &Arc<dyn ChatBackend>, system: &str| -> Result<Session, ProviderError> {
        Provider::with_retry(config.clone(), Arc::clone(backend), options.retry)?.open_session(session_id.clone(), system)
    };
    let sessions = open(&workflow.generator, &backends.generator, protocol::generation_system_text()).and_then(|g| {
        open(&workflow.critic, &backends.critic, protocol::feedback_system_text()).map(|c| (g, c))
    });
    let (generator, critic) = match sessions {
        Ok(s) => s,
        Err(e) => return finish(Vec::new(), Some(e.to_string())),
    };
    let lp = Loop {
        problem,
        judge: backends.judge.as_ref(),
        generator,
        critic,
    };

    let mut attempts = Vec::with_capacity(workflow.attempt_budget() as usize);
    match lp.attempt(0, user_text(protocol::build_generation_prompt(problem))) {
        Ok(a) => attempts.push(a),
        Err(e) => return finish(attempts, Some(e)),
    }
    for k in 1..=workflow.max_refinements {
        let previous = attempts.last().expect("attempt 0 recorded");
        if previous.verdict().is_accepted() {
            break;
        }
        match lp.refine(k, previous, workflow.stateless_mode) {
            Ok(a) => attempts.push(a),
            Err((e, pending)) => {
                log::warn!("{session_id}: stopping at attempt {k}: {e}");
                let mut log = finish(attempts, Some(e));
                log.pending_hint = pending;
                return log;
            }
        }
    }
    finish(attempts, None)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::tests::sample_problem;
    use crate::judge::{FailureDetail, ScriptedJudge};
    use crate::providers::{ScriptStep, ScriptedBackend};

    pub(crate) fn workflow(stateless: bool) -> WorkflowConfig {
        let mut w = WorkflowConfig::new(
            "gpt5-deepseek",
            ProviderConfig::new("gpt5", "gpt-5"),
            ProviderConfig::new("deepseek", "deepseek-r1"),
        );
        w.stateless_mode = stateless;
        w
    }

    pub(crate) fn wa(test: u32) -> JudgeResult {
        JudgeResult::failed(Verdict::WrongAnswer, 46, 1024, FailureDetail::at(test))
    }

    fn code_reply(tag: &str) -> String {
        format!("```cpp\nint main(){{/*{tag}*/}}\n```")
    }

    struct Fixture {
        generator: Arc<ScriptedBackend>,
        critic: Arc<ScriptedBackend>,
        backends: SessionBackends,
    }

    fn fixture(verdicts: Vec<JudgeResult>, critic: Vec<&str>) -> Fixture {
        let n = verdicts.len();
        let generator = Arc::new(ScriptedBackend::new((0..n).map(|i| code_reply(&i.to_string()))).unwrap());
        let critic_steps: Vec<ScriptStep> = if critic.is_empty() {
            vec!["unused".into()]
        } else {
            critic.into_iter().map(Into::into).collect()
        };
        let critic = Arc::new(ScriptedBackend::new(critic_steps).unwrap());
        let judge = Arc::new(ScriptedJudge::new().with_trajectory("P", verdicts));
        Fixture {
            backends: SessionBackends {
                generator: generator.clone(),
                critic: critic.clone(),
                judge,
            },
            generator,
            critic,
        }
    }

    fn quick() -> SolveOptions {
        SolveOptions {
            retry: RetryPolicy::immediate(3),
        }
    }

    #[test]
    fn accepted_first_try() {
        let f = fixture(vec![JudgeResult::accepted(140, 2048)], vec![]);
        let log = solve_problem(&sample_problem("P"), &workflow(false), "stateful", &f.backends, &quick());
        assert_eq!(log.attempts.len(), 1);
        assert_eq!(log.solved_at, Some(0));
        assert_eq!(log.final_status, FinalStatus::Solved);
        assert!(log.attempts[0].critic_hint.is_none());
        assert_eq!(f.critic.transcript().len(), 0);
        log.check_invariants().unwrap();
    }

    #[test]
    fn verdict_progression_solved_on_last_attempt() {
        let f = fixture(
            vec![wa(1), JudgeResult::time_limit_exceeded(1000, 6), wa(8), JudgeResult::accepted(140, 2048)],
            vec!["fix A\nConfidence: 4", "fix B\nConfidence: 2", "fix C"],
        );
        let log = solve_problem(&sample_problem("P"), &workflow(false), "stateful", &f.backends, &quick());
        log.check_invariants().unwrap();
        assert_eq!(log.attempts.len(), 4);
        assert_eq!(log.solved_at, Some(3));
        let hints: Vec<_> = log.attempts.iter().map(|a| a.critic_hint.as_deref()).collect();
        assert_eq!(hints, vec![None, Some("fix A"), Some("fix B"), Some("fix C")]);
        let conf: Vec<_> = log.attempts.iter().map(|a| a.confidence.as_ref().map(|c| (c.raw_level, c.led_to_acceptance))).collect();
        assert_eq!(conf, vec![None, Some((4, Some(false))), Some((2, Some(false))), None]);
        // each refinement prompt embeds the previous code, verdict and hint
        assert!(log.attempts[1].prompt.contains("/*0*/"));
        assert!(log.attempts[1].prompt.contains("Wrong Answer on test 1"));
        assert!(log.attempts[2].prompt.contains("Time Limit Exceeded on test 6"));
        assert!(log.attempts[3].prompt.contains("fix C"));
        let before: Vec<_> = log.attempts.iter().map(|a| a.generator_context_before.unwrap()).collect();
        assert_eq!(before, vec![1, 3, 5, 7]);
        assert_eq!(f.generator.transcript()[3].len(), 8);
        // the critic keeps its history as well
        assert_eq!(f.critic.transcript()[2].len(), 6);
    }

    #[test]
    fn stateless_resets_both_sessions() {
        let f = fixture(vec![wa(1), wa(2), wa(3), wa(4)], vec!["a", "b", "c"]);
        let log = solve_problem(&sample_problem("P"), &workflow(true), "stateless", &f.backends, &quick());
        log.check_invariants().unwrap();
        assert_eq!(log.final_status, FinalStatus::Unsolved);
        assert_eq!(log.attempts.len(), 4);
        for a in &log.attempts[1..] {
            assert_eq!(a.generator_context_before, Some(1));
            assert_eq!(a.generator_context_after, Some(3));
        }
        assert!(f.critic.transcript().iter().all(|h| h.len() == 2));
        assert!(f.generator.transcript().iter().all(|h| h.len() == 2));
    }

    #[test]
    fn budget_zero_is_a_single_attempt() {
        let f = fixture(vec![wa(1)], vec![]);
        let mut w = workflow(false);
        w.max_refinements = 0;
        let log = solve_problem(&sample_problem("P"), &w, "zero-shot", &f.backends, &quick());
        assert_eq!(log.attempts.len(), 1);
        assert_eq!(log.attempt_budget, 1);
        log.check_invariants().unwrap();
    }

    #[test]
    fn no_code_counts_as_compilation_error() {
        let generator = Arc::new(ScriptedBackend::new(["```\n```", "```cpp\n```"]).unwrap());
        let critic = Arc::new(ScriptedBackend::new(["hint"]).unwrap());
        let backends = SessionBackends {
            generator,
            critic,
            judge: Arc::new(ScriptedJudge::new()),
        };
        let mut w = workflow(false);
        w.max_refinements = 1;
        let log = solve_problem(&sample_problem("P"), &w, "stateful", &backends, &quick());
        log.check_invariants().unwrap();
        assert_eq!(log.attempts.len(), 2);
        assert_eq!(log.final_status, FinalStatus::Abstained);
        assert!(log.attempts.iter().all(|a| a.verdict() == Verdict::CompilationError));
    }

    #[test]
    fn transport_failure_preserves_partial_trajectory() {
        let generator = Arc::new(
            ScriptedBackend::new(vec![
                ScriptStep::from(code_reply("0")),
                ScriptStep::Fail { fail: "down".into() },
                ScriptStep::Fail { fail: "down".into() },
                ScriptStep::Fail { fail: "down".into() },
            ])
            .unwrap(),
        );
        let critic = Arc::new(ScriptedBackend::new(["hint\nConfidence: 3"]).unwrap());
        let backends = SessionBackends {
            generator,
            critic,
            judge: Arc::new(ScriptedJudge::new().with("P", 0, wa(1))),
        };
        let log = solve_problem(&sample_problem("P"), &workflow(false), "stateful", &backends, &quick());
        log.check_invariants().unwrap();
        assert_eq!(log.attempts.len(), 1);
        assert_eq!(log.final_status, FinalStatus::Unsolved);
        assert!(log.error.as_deref().unwrap().contains("down"));
        assert_eq!(log.pending_hint.as_deref(), Some("hint"));
    }

    #[test]
    fn log_invariant_violations_are_detected() {
        let mut log = SessionLog::from_attempts("P", "w", "stateful", None, 4, vec![AttemptRecord::new(0, "x", wa(1))], None);
        log.check_invariants().unwrap();
        let mut second = AttemptRecord::new(1, "y", JudgeResult::accepted(1, 1));
        second.critic_hint = None;
        log.attempts.push(second);
        assert!(log.check_invariants().is_err());
        let empty = SessionLog::from_attempts("P", "w", "stateful", None, 4, vec![], None);
        assert!(empty.check_invariants().is_err());
    }

    #[test]
    fn workflow_validation() {
        let mut w = workflow(false);
        w.validate().unwrap();
        w.max_refinements = 4;
        assert!(w.validate().is_err());
        let parsed: WorkflowConfig = serde_json::from_value(serde_json::json!({
            "workflow_id": "w",
            "generator": {"name": "g", "model_id": "m"},
            "critic": {"name": "c", "model_id": "m"}
        }))
        .unwrap();
        assert_eq!(parsed.max_refinements, 3);
        assert!(!parsed.stateless_mode);
    }
}
