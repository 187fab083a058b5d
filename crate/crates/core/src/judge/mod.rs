//! Verdict taxonomy and judge backends.
//!
//! [`LocalJudge`] compiles and runs C++17 submissions under time and memory
//! limits. [`ScriptedJudge`] replays archived verdict traces. [`RemoteJudge`]
//! marks where an online-judge client would plug in.

mod local;
mod scripted;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Problem, TestCase};

pub use local::{
    compile, execute, probe_toolchain, Binary, CompileOutcome, Execution, JudgeReport, LocalJudge, Outcome, STDOUT_CAP,
};
pub use scripted::ScriptedJudge;

pub const LANGUAGE_CPP17: &str = "cpp17";
pub const MAX_ATTEMPT_INDEX: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    Accepted,
    WrongAnswer,
    TimeLimitExceeded,
    MemoryLimitExceeded,
    RuntimeError,
    CompilationError,
}

impl Verdict {
    pub const ALL: [Verdict; 6] = [
        Verdict::Accepted,
        Verdict::WrongAnswer,
        Verdict::TimeLimitExceeded,
        Verdict::MemoryLimitExceeded,
        Verdict::RuntimeError,
        Verdict::CompilationError,
    ];

    pub fn is_accepted(self) -> bool {
        self == Verdict::Accepted
    }

    pub fn abbrev(self) -> &'static str {
        match self {
            Verdict::Accepted => "AC",
            Verdict::WrongAnswer => "WA",
            Verdict::TimeLimitExceeded => "TLE",
            Verdict::MemoryLimitExceeded => "MLE",
            Verdict::RuntimeError => "RE",
            Verdict::CompilationError => "CE",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accepted => "Accepted",
            Verdict::WrongAnswer => "Wrong Answer",
            Verdict::TimeLimitExceeded => "Time Limit Exceeded",
            Verdict::MemoryLimitExceeded => "Memory Limit Exceeded",
            Verdict::RuntimeError => "Runtime Error",
            Verdict::CompilationError => "Compilation Error",
        })
    }
}

/// Diagnostics for the first failing test. For compilation errors
/// `test_index` is 1 and `message` holds the compiler output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureDetail {
    pub test_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl FailureDetail {
    pub fn at(test_index: u32) -> Self {
        Self {
            test_index: test_index.max(1),
            input: None,
            expected: None,
            actual: None,
            message: None,
        }
    }

    pub fn has_test_payload(&self) -> bool {
        self.input.is_some() || self.expected.is_some() || self.actual.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeResult {
    pub verdict: Verdict,
    pub time_ms: u64,
    pub memory_kb: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failing_test: Option<FailureDetail>,
}

impl JudgeResult {
    pub fn accepted(time_ms: u64, memory_kb: u64) -> Self {
        Self {
            verdict: Verdict::Accepted,
            time_ms,
            memory_kb,
            failing_test: None,
        }
    }

    pub fn failed(verdict: Verdict, time_ms: u64, memory_kb: u64, detail: FailureDetail) -> Self {
        debug_assert!(!verdict.is_accepted());
        Self {
            verdict,
            time_ms,
            memory_kb,
            failing_test: Some(detail),
        }
    }

    pub fn compilation_error(diagnostics: impl Into<String>) -> Self {
        let mut detail = FailureDetail::at(1);
        detail.message = Some(diagnostics.into());
        Self::failed(Verdict::CompilationError, 0, 0, detail)
    }

    /// Fixture shape for a scripted TLE: the reported time equals the limit.
    pub fn time_limit_exceeded(time_limit_ms: u64, test_index: u32) -> Self {
        Self::failed(Verdict::TimeLimitExceeded, time_limit_ms, 0, FailureDetail::at(test_index))
    }

    /// "Wrong Answer on test 2", or just the verdict when no index applies.
    pub fn verdict_line(&self) -> String {
        match (&self.failing_test, self.verdict) {
            (Some(d), v) if v != Verdict::CompilationError && v != Verdict::Accepted => {
                format!("{v} on test {}", d.test_index)
            }
            (_, v) => v.to_string(),
        }
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if self.verdict.is_accepted() && self.failing_test.is_some() {
            return Err("accepted result carries a failing test".into());
        }
        if self.verdict == Verdict::CompilationError && (self.time_ms != 0 || self.memory_kb != 0) {
            return Err("compilation error must report zero time and memory".into());
        }
        if let Some(d) = &self.failing_test {
            if d.test_index < 1 {
                return Err("failing test index must be >= 1".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub problem_id: String,
    pub source: String,
    pub language_tag: String,
    pub attempt_index: u32,
}

impl Submission {
    pub fn new(problem_id: impl Into<String>, source: impl Into<String>, attempt_index: u32) -> Result<Self, JudgeError> {
        let source = source.into();
        if source.trim().is_empty() {
            return Err(JudgeError::InvalidSubmission("source is empty".into()));
        }
        if attempt_index > MAX_ATTEMPT_INDEX {
            return Err(JudgeError::InvalidSubmission(format!(
                "attempt index {attempt_index} outside [0,{MAX_ATTEMPT_INDEX}]"
            )));
        }
        Ok(Self {
            problem_id: problem_id.into(),
            source,
            language_tag: LANGUAGE_CPP17.into(),
            attempt_index,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub time_limit_ms: u64,
    pub memory_limit_kb: u64,
}

impl Limits {
    pub fn of(problem: &Problem) -> Self {
        Self {
            time_limit_ms: problem.time_limit_ms,
            memory_limit_kb: problem.memory_limit_kb,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("toolchain unavailable: {0}")]
    ToolchainMissing(String),
    #[error("sandbox setup failed: {0}")]
    Sandbox(String),
    #[error("unsupported problem class: {0}")]
    Unsupported(String),
    #[error("no scripted result for ({problem_id}, {attempt_index})")]
    Unscripted { problem_id: String, attempt_index: u32 },
    #[error("invalid submission: {0}")]
    InvalidSubmission(String),
    #[error("no tests to run")]
    NoTests,
}

/// Something that turns a submission into a verdict for a problem.
pub trait JudgeBackend: Send + Sync {
    fn evaluate(&self, submission: &Submission, problem: &Problem) -> Result<JudgeResult, JudgeError>;
}

/// Placeholder for an online-judge client. Always reports the problem class as
/// unsupported so runs fail loudly rather than silently.
#[derive(Debug, Default, Clone)]
pub struct RemoteJudge {
    pub endpoint: String,
}

impl JudgeBackend for RemoteJudge {
    fn evaluate(&self, _submission: &Submission, _problem: &Problem) -> Result<JudgeResult, JudgeError> {
        Err(JudgeError::Unsupported(format!(
            "remote judge at `{}` is not implemented in this build",
            self.endpoint
        )))
    }
}

/// True iff both outputs have the same whitespace-separated token sequence.
pub fn compare_output(expected: &str, actual: &str) -> bool {
    expected.split_whitespace().eq(actual.split_whitespace())
}

pub(crate) fn ensure_judgeable(problem: &Problem) -> Result<(), JudgeError> {
    if problem.is_interactive() {
        return Err(JudgeError::Unsupported(format!(
            "problem {} is interactive",
            problem.id
        )));
    }
    Ok(())
}

pub(crate) fn tests_of(problem: &Problem) -> &[TestCase] {
    &problem.samples
}
