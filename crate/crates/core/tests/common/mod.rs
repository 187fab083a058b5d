#![allow(dead_code)]

use std::path::{Path, PathBuf};

use refinebench::orchestrator::AttemptRecord;
use refinebench::{FailureDetail, JudgeResult, SessionLog, Verdict};

pub const ICPC_LEDGER: &str = "icpc_gpt5_deepseek.jsonl";
pub const CODEFORCES_LEDGER: &str = "codeforces_gpt5_deepseek.jsonl";
pub const ABLATION_LEDGER: &str = "ablation.jsonl";

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn failure(v: Verdict, test: u32) -> JudgeResult {
    match v {
        Verdict::CompilationError => JudgeResult::compilation_error("main.cpp:3:1: error: expected ';'"),
        Verdict::TimeLimitExceeded => JudgeResult::time_limit_exceeded(1000, test),
        _ => JudgeResult::failed(v, 31 + u64::from(test), 3_400, FailureDetail::at(test)),
    }
}

/// One session following `verdicts`; refinements carry a critic hint.
pub fn session(problem: &str, workflow: &str, condition: &str, rating: Option<u32>, verdicts: &[Verdict]) -> SessionLog {
    let attempts = verdicts
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let result = if v.is_accepted() { JudgeResult::accepted(140, 3_600) } else { failure(v, 2 * i as u32 + 1) };
            let mut a = AttemptRecord::new(i as u32, format!("// attempt {i}\nint main() {{}}\n"), result);
            if i > 0 {
                a.critic_hint = Some(format!("revisit the failing case from attempt {}", i - 1));
            }
            a
        })
        .collect();
    SessionLog::from_attempts(problem, workflow, condition, rating, 4, attempts, None)
}

/// Ledger with `counts[k]` problems first accepted at attempt `k` and
/// `unsolved` problems that fail all four attempts.
pub fn iteration_ledger(prefix: &str, workflow: &str, counts: [usize; 4], unsolved: usize) -> Vec<SessionLog> {
    let mut logs = Vec::new();
    let next = |verdicts: Vec<Verdict>, logs: &mut Vec<SessionLog>| {
        let n = logs.len();
        let rating = 1200 + 100 * (n % 7) as u32;
        logs.push(session(&format!("{prefix}-{:03}", n + 1), workflow, "stateful", Some(rating), &verdicts));
    };
    for (k, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            let mut v = vec![Verdict::WrongAnswer; k];
            v.push(Verdict::Accepted);
            next(v, &mut logs);
        }
    }
    for i in 0..unsolved {
        let last = if i % 3 == 0 { Verdict::TimeLimitExceeded } else { Verdict::WrongAnswer };
        next(vec![Verdict::WrongAnswer, Verdict::WrongAnswer, Verdict::WrongAnswer, last], &mut logs);
    }
    logs
}

pub fn icpc_logs() -> Vec<SessionLog> {
    iteration_ledger("icpc", "gpt5-deepseek", [39, 25, 15, 11], 77)
}

pub fn codeforces_logs() -> Vec<SessionLog> {
    iteration_ledger("cf", "gpt5-deepseek", [41, 20, 12, 9], 118)
}

/// Same three problems under both conditions.
pub fn ablation_logs() -> Vec<SessionLog> {
    use Verdict::*;
    let wf = "gpt4-deepseek";
    vec![
        session("1800-B", wf, "stateful", Some(1200), &[WrongAnswer, WrongAnswer, TimeLimitExceeded, Accepted]),
        session("1801-C", wf, "stateful", Some(1300), &[Accepted]),
        session("1802-D", wf, "stateful", Some(1400), &[RuntimeError, Accepted]),
        session("1800-B", wf, "stateless", Some(1200), &[WrongAnswer, WrongAnswer, WrongAnswer, WrongAnswer]),
        session("1801-C", wf, "stateless", Some(1300), &[Accepted]),
        session("1802-D", wf, "stateless", Some(1400), &[RuntimeError, TimeLimitExceeded, Accepted]),
    ]
}
