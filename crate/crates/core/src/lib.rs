//! Closed-loop generate / judge / critique / refine pipeline for competitive
//! programming problems, with the metrics and statistics used to evaluate it.

pub mod corpus;
pub mod judge;
pub mod metrics;
pub mod protocol;
pub mod orchestrator;
pub mod providers;
pub mod report;
pub mod stats;

pub use corpus::{Problem, ProblemSource, TestCase};
pub use judge::{FailureDetail, JudgeBackend, JudgeResult, Submission, Verdict};
pub use protocol::{ChatMessage, ConfidenceHint, Role};
pub use providers::{ChatContext, Provider, ProviderConfig, Session};
pub use orchestrator::{
    solve_problem, AttemptRecord, BackendProvider, FinalStatus, OrchestratorError, SessionBackends, SessionKey, SessionLog,
    WorkflowConfig,
};
pub use metrics::{IterationCurve, SummaryRow};
pub use stats::{ComparisonRow, McNemarResult, PairedOutcomes};
