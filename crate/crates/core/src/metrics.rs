//! Per-workflow evaluation quantities computed from session logs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::judge::Verdict;
use crate::orchestrator::{FinalStatus, SessionLog};
use crate::protocol::ConfidenceHint;

/// Number of iteration slots reported (initial attempt plus three refinements).
pub const ITERATION_SLOTS: usize = 4;
pub const SOLVABILITY_WORKFLOWS: usize = 6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no session logs")]
    Empty,
    #[error("logs mix arms: {0} and {1}")]
    MixedArms(String, String),
    #[error("{0} is undefined: no solved problems")]
    NoneSolved(&'static str),
    #[error("error repetition is undefined: no failed refinement attempts")]
    NoFailedRefinements,
    #[error("expected {expected} workflows, got {got}")]
    WorkflowCount { expected: usize, got: usize },
    #[error("log for problem {found} supplied where {expected} was expected")]
    ProblemMismatch { expected: String, found: String },
    #[error("{0} hint(s) have no resolved outcome")]
    UnresolvedHints(usize),
    #[error("confidence level {0} outside 1..=5")]
    BadLevel(u8),
    #[error("solved_at {0} outside the reported iteration slots")]
    SlotOverflow(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCurve {
    /// Problems solved within k refinements.
    pub cumulative: [u64; ITERATION_SLOTS],
    /// Problems first solved at exactly refinement k.
    pub delta: [u64; ITERATION_SLOTS],
    pub total_problems: u64,
}

impl IterationCurve {
    pub fn solved(&self) -> u64 {
        self.cumulative[ITERATION_SLOTS - 1]
    }

    pub fn unsolved(&self) -> u64 {
        self.total_problems - self.solved()
    }

    /// Cumulative solve rates in [0,1].
    pub fn rates(&self) -> [f64; ITERATION_SLOTS] {
        self.cumulative.map(|c| c as f64 / self.total_problems as f64)
    }
}

fn arm_label(l: &SessionLog) -> String {
    format!("{}/{}", l.workflow_id, l.condition)
}

fn single_arm(logs: &[SessionLog]) -> Result<(), MetricsError> {
    let first = logs.first().ok_or(MetricsError::Empty)?;
    match logs.iter().find(|l| l.workflow_id != first.workflow_id || l.condition != first.condition) {
        Some(other) => Err(MetricsError::MixedArms(arm_label(first), arm_label(other))),
        None => Ok(()),
    }
}

pub fn itr_curve(logs: &[SessionLog]) -> Result<IterationCurve, MetricsError> {
    single_arm(logs)?;
    let mut delta = [0u64; ITERATION_SLOTS];
    for k in logs.iter().filter_map(|l| l.solved_at) {
        *delta.get_mut(k as usize).ok_or(MetricsError::SlotOverflow(k))? += 1;
    }
    let mut cumulative = [0u64; ITERATION_SLOTS];
    let mut running = 0;
    for (c, d) in cumulative.iter_mut().zip(delta) {
        running += d;
        *c = running;
    }
    Ok(IterationCurve {
        cumulative,
        delta,
        total_problems: logs.len() as u64,
    })
}

fn solved_attempt_numbers(logs: &[SessionLog]) -> impl Iterator<Item = u64> + '_ {
    logs.iter().filter_map(|l| l.solved_at).map(|k| u64::from(k) + 1)
}

/// Mean 1-based attempt number at which solved problems were accepted.
pub fn avg_attempts(logs: &[SessionLog]) -> Result<f64, MetricsError> {
    let (n, sum) = solved_attempt_numbers(logs).fold((0u64, 0u64), |(n, s), a| (n + 1, s + a));
    if n == 0 {
        return Err(MetricsError::NoneSolved("average attempts"));
    }
    Ok(sum as f64 / n as f64)
}

/// Judge submissions spent per accepted solution, unsolved sessions included.
pub fn verification_cost(logs: &[SessionLog]) -> Result<f64, MetricsError> {
    let solved = logs.iter().filter(|l| l.is_solved()).count();
    if solved == 0 {
        return Err(MetricsError::NoneSolved("verification cost"));
    }
    let submissions: usize = logs.iter().map(SessionLog::submissions).sum();
    Ok(submissions as f64 / solved as f64)
}

pub fn abstention_rate(logs: &[SessionLog]) -> Result<f64, MetricsError> {
    if logs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let abstained = logs.iter().filter(|l| l.final_status == FinalStatus::Abstained).count();
    Ok(abstained as f64 / logs.len() as f64)
}

/// Count of every failed attempt by verdict kind.
pub fn verdict_distribution(logs: &[SessionLog]) -> BTreeMap<Verdict, u64> {
    let mut out = BTreeMap::new();
    for a in logs.iter().flat_map(|l| &l.attempts) {
        if !a.verdict().is_accepted() {
            *out.entry(a.verdict()).or_insert(0) += 1;
        }
    }
    out
}

/// `verdict_distribution` normalized to proportions.
pub fn verdict_proportions(distribution: &BTreeMap<Verdict, u64>) -> BTreeMap<Verdict, f64> {
    let total: u64 = distribution.values().sum();
    distribution
        .iter()
        .map(|(v, &c)| (*v, if total == 0 { 0.0 } else { c as f64 / total as f64 }))
        .collect()
}

/// Numerator and denominator of the error repetition rate.
pub fn error_repetition_counts(logs: &[SessionLog]) -> (u64, u64) {
    let mut repeats = 0;
    let mut qualifying = 0;
    for l in logs {
        for pair in l.attempts.windows(2) {
            let (prev, cur) = (pair[0].verdict(), pair[1].verdict());
            if cur.is_accepted() {
                continue;
            }
            qualifying += 1;
            if cur == prev {
                repeats += 1;
            }
        }
    }
    (repeats, qualifying)
}

/// Share of failed refinement attempts whose verdict repeats the previous one.
pub fn error_repetition_rate(logs: &[SessionLog]) -> Result<f64, MetricsError> {
    match error_repetition_counts(logs) {
        (_, 0) => Err(MetricsError::NoFailedRefinements),
        (r, q) => Ok(r as f64 / q as f64),
    }
}

/// Composite score from the share of workflows that solved a problem, the
/// mean attempts they needed and the share that solved it first try.
pub fn solvability_from_counts(solved: usize, avg_attempts_all: f64, solved_first_try: usize) -> f64 {
    let n = SOLVABILITY_WORKFLOWS as f64;
    (solved as f64 / n) * 100.0 - (avg_attempts_all / 3.0) * 20.0 + (solved_first_try as f64 / n) * 30.0
}

/// Score for one problem given its log under each of the six workflows.
/// Unsolved workflows count their full attempt budget.
pub fn solvability_score(problem_id: &str, logs_by_workflow: &BTreeMap<String, SessionLog>) -> Result<f64, MetricsError> {
    if logs_by_workflow.len() != SOLVABILITY_WORKFLOWS {
        return Err(MetricsError::WorkflowCount {
            expected: SOLVABILITY_WORKFLOWS,
            got: logs_by_workflow.len(),
        });
    }
    if let Some(l) = logs_by_workflow.values().find(|l| l.problem_id != problem_id) {
        return Err(MetricsError::ProblemMismatch {
            expected: problem_id.to_string(),
            found: l.problem_id.clone(),
        });
    }
    let attempts: u64 = logs_by_workflow
        .values()
        .map(|l| match l.solved_at {
            Some(k) => u64::from(k) + 1,
            None => u64::from(l.attempt_budget),
        })
        .sum();
    let solved = logs_by_workflow.values().filter(|l| l.is_solved()).count();
    let first = logs_by_workflow.values().filter(|l| l.solved_at == Some(0)).count();
    Ok(solvability_from_counts(solved, attempts as f64 / SOLVABILITY_WORKFLOWS as f64, first))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DifficultyTier {
    VeryEasy,
    Easy,
    Medium,
    Hard,
    VeryHard,
}

impl DifficultyTier {
    pub fn label(self) -> &'static str {
        match self {
            DifficultyTier::VeryEasy => "Very Easy",
            DifficultyTier::Easy => "Easy",
            DifficultyTier::Medium => "Medium",
            DifficultyTier::Hard => "Hard",
            DifficultyTier::VeryHard => "Very Hard",
        }
    }
}

pub fn difficulty_tier(score: f64) -> DifficultyTier {
    if score > 80.0 {
        DifficultyTier::VeryEasy
    } else if score > 60.0 {
        DifficultyTier::Easy
    } else if score > 40.0 {
        DifficultyTier::Medium
    } else if score > 20.0 {
        DifficultyTier::Hard
    } else {
        DifficultyTier::VeryHard
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub level: u8,
    pub count: u64,
    pub mean_confidence: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EceReport {
    pub ece: f64,
    pub bins: Vec<CalibrationBin>,
    pub n: u64,
}

/// Expected calibration error over the five discrete confidence levels.
/// Empty bins report a success rate of 0 and contribute nothing.
pub fn ece(hints: &[ConfidenceHint]) -> Result<EceReport, MetricsError> {
    if hints.is_empty() {
        return Err(MetricsError::Empty);
    }
    let unresolved = hints.iter().filter(|h| h.led_to_acceptance.is_none()).count();
    if unresolved > 0 {
        return Err(MetricsError::UnresolvedHints(unresolved));
    }
    let mut counts = [(0u64, 0u64); 5];
    for h in hints {
        if !(1..=5).contains(&h.raw_level) {
            return Err(MetricsError::BadLevel(h.raw_level));
        }
        let slot = &mut counts[usize::from(h.raw_level - 1)];
        slot.0 += 1;
        if h.led_to_acceptance == Some(true) {
            slot.1 += 1;
        }
    }
    let n = hints.len() as u64;
    let mut total = 0.0;
    let bins = counts
        .iter()
        .enumerate()
        .map(|(i, &(count, hits))| {
            let level = i as u8 + 1;
            let conf = f64::from(level) / 5.0;
            let acc = if count == 0 { 0.0 } else { hits as f64 / count as f64 };
            if count > 0 {
                total += (count as f64 / n as f64) * (acc - conf).abs();
            }
            CalibrationBin {
                level,
                count,
                mean_confidence: conf,
                success_rate: acc,
            }
        })
        .collect();
    Ok(EceReport { ece: total, bins, n })
}

/// Every confidence hint recorded in `logs`, in ledger order.
pub fn collect_hints(logs: &[SessionLog]) -> Vec<ConfidenceHint> {
    logs.iter()
        .flat_map(|l| &l.attempts)
        .filter_map(|a| a.confidence.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostHintAcceptance {
    pub hints: u64,
    pub accepted: u64,
    /// Hints whose refined attempt never reached the judge; not in the rate.
    pub excluded: u64,
    pub rate: Option<f64>,
}

/// Share of critic hints whose refined attempt was accepted.
pub fn post_hint_acceptance(logs: &[SessionLog]) -> PostHintAcceptance {
    let mut out = PostHintAcceptance {
        hints: 0,
        accepted: 0,
        excluded: 0,
        rate: None,
    };
    for l in logs {
        for a in l.attempts.iter().filter(|a| a.critic_hint.is_some()) {
            out.hints += 1;
            if a.verdict().is_accepted() {
                out.accepted += 1;
            }
        }
        if l.pending_hint.is_some() {
            out.excluded += 1;
        }
    }
    if out.hints > 0 {
        out.rate = Some(out.accepted as f64 / out.hints as f64);
    }
    out
}

/// One summary row in the iteration-table layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub workflow_id: String,
    pub condition: String,
    pub delta: [u64; ITERATION_SLOTS],
    pub cumulative: [u64; ITERATION_SLOTS],
    pub total: u64,
    pub unsolved: u64,
    pub solve_rate: f64,
    pub avg_attempts: Option<f64>,
    pub verification_cost: Option<f64>,
    pub abstention_rate: f64,
}

impl SummaryRow {
    /// "39 25 15 11 | 77 | 1.98 | 5.4"
    pub fn compact(&self) -> String {
        let deltas: Vec<String> = self.delta.iter().map(u64::to_string).collect();
        let fmt = |v: Option<f64>, digits: usize| v.map_or("-".to_string(), |x| format!("{x:.digits$}"));
        format!(
            "{} | {} | {} | {}",
            deltas.join(" "),
            self.unsolved,
            fmt(self.avg_attempts, 2),
            fmt(self.verification_cost, 1)
        )
    }
}

pub fn summary_row(logs: &[SessionLog]) -> Result<SummaryRow, MetricsError> {
    let curve = itr_curve(logs)?;
    let first = &logs[0];
    Ok(SummaryRow {
        workflow_id: first.workflow_id.clone(),
        condition: first.condition.clone(),
        delta: curve.delta,
        cumulative: curve.cumulative,
        total: curve.total_problems,
        unsolved: curve.unsolved(),
        solve_rate: curve.rates()[ITERATION_SLOTS - 1],
        avg_attempts: avg_attempts(logs).ok(),
        verification_cost: verification_cost(logs).ok(),
        abstention_rate: abstention_rate(logs)?,
    })
}

/// Groups logs by (workflow, condition), preserving first-seen order.
pub fn group_by_arm(logs: &[SessionLog]) -> Vec<((String, String), Vec<SessionLog>)> {
    let mut groups: Vec<((String, String), Vec<SessionLog>)> = Vec::new();
    for l in logs {
        let key = (l.workflow_id.clone(), l.condition.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(l.clone()),
            None => groups.push((key, vec![l.clone()])),
        }
    }
    groups
}
