use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    now_ms, solve_problem, BackendProvider, OrchestratorError, SessionKey, SessionLog, SolveOptions, WorkflowConfig,
    CONDITION_STATEFUL, CONDITION_STATELESS,
};
use crate::corpus::{build_manifest, Problem};
use crate::providers::RetryPolicy;

pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const RUN_MANIFEST_FILE: &str = "manifest.json";
pub const ARTIFACT_DIR: &str = "artifacts";

/// A workflow under a named condition. Every (problem, arm) pair yields one
/// session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub workflow: WorkflowConfig,
    pub condition: String,
}

impl Arm {
    pub fn new(workflow: WorkflowConfig, condition: impl Into<String>) -> Self {
        Self {
            workflow,
            condition: condition.into(),
        }
    }

    /// Arm labelled by the workflow's own context mode.
    pub fn of(workflow: WorkflowConfig) -> Self {
        let condition = workflow.default_condition().to_string();
        Self { workflow, condition }
    }

    fn key(&self, problem_id: &str) -> SessionKey {
        SessionKey {
            problem_id: problem_id.to_string(),
            workflow_id: self.workflow.workflow_id.clone(),
            condition: self.condition.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub parallelism: usize,
    pub seed: u64,
    pub retry: RetryPolicy,
    pub corpus_path: Option<String>,
    pub write_artifacts: bool,
    /// Stop after this many new sessions; the run can be resumed later.
    pub stop_after: Option<usize>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            parallelism: 1,
            seed: 42,
            retry: RetryPolicy::default(),
            corpus_path: None,
            write_artifacts: true,
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub workflow_id: String,
    pub condition: String,
    pub generator: String,
    pub critic: String,
    pub max_refinements: u32,
    pub stateless_mode: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub corpus_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_path: Option<String>,
    pub problems: usize,
    pub arms: Vec<ArmSummary>,
    pub created_at_ms: u64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: RunManifest,
    /// Every log in the ledger after the run, in ledger order.
    pub logs: Vec<SessionLog>,
    pub executed: usize,
    pub skipped: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OrchestratorError + '_ {
    move |source| OrchestratorError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn config_hash(arms: &[Arm], seed: u64) -> String {
    let doc = serde_json::json!({ "arms": arms, "seed": seed });
    sha256_hex(doc.to_string().as_bytes())
}

fn safe_component(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Strict ledger reader: every nonblank line must be a session log.
pub fn read_ledger(path: &Path) -> Result<Vec<SessionLog>, OrchestratorError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_ledger(&text, false).map(|(logs, _)| logs)
}

/// Parses ledger text. With `tolerate_tail`, an unterminated final line that
/// fails to parse (an interrupted write) is dropped and reported.
fn parse_ledger(text: &str, tolerate_tail: bool) -> Result<(Vec<SessionLog>, bool), OrchestratorError> {
    let mut logs = Vec::new();
    let lines: Vec<&str> = text.split('\n').collect();
    let mut dropped = false;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SessionLog>(line) {
            Ok(log) => logs.push(log),
            Err(e) => {
                let is_tail = i + 1 == lines.len();
                if tolerate_tail && is_tail {
                    log::warn!("dropping truncated ledger line {}", i + 1);
                    dropped = true;
                } else {
                    return Err(OrchestratorError::Ledger {
                        line: i + 1,
                        message: e.to_string(),
                    });
                }
            }
        }
    }
    Ok((logs, dropped))
}

fn ledger_text(logs: &[SessionLog]) -> String {
    let mut text = String::new();
    for log in logs {
        text.push_str(&serde_json::to_string(log).expect("session log serializes"));
        text.push('\n');
    }
    text
}

/// Writes `logs` as JSON lines, replacing `path` atomically.
pub fn write_ledger(path: &Path, logs: &[SessionLog]) -> Result<(), OrchestratorError> {
    let text = ledger_text(logs);
    let tmp = path.with_extension("jsonl.tmp");
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_artifacts(root: &Path, log: &SessionLog) -> Result<(), OrchestratorError> {
    let dir = root
        .join(safe_component(&log.condition))
        .join(safe_component(&log.workflow_id))
        .join(safe_component(&log.problem_id));
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    for a in &log.attempts {
        let adir = dir.join(format!("attempt_{}", a.attempt_index));
        fs::create_dir_all(&adir).map_err(io_err(&adir))?;
        let mut files: Vec<(&str, String)> = vec![
            ("prompt.txt", a.prompt.clone()),
            ("response.txt", a.raw_response.clone()),
            ("code.cpp", a.code.clone()),
            ("judge.json", serde_json::to_string_pretty(&a.result).expect("result serializes")),
        ];
        if let Some(h) = &a.critic_hint {
            files.push(("hint.txt", h.clone()));
        }
        if let Some(p) = &a.critic_prompt {
            files.push(("critic_prompt.txt", p.clone()));
        }
        if let Some(r) = &a.critic_response {
            files.push(("critic_response.txt", r.clone()));
        }
        if let Some(c) = &a.confidence {
            files.push(("confidence.json", serde_json::to_string_pretty(c).expect("hint serializes")));
        }
        for (name, body) in files {
            let f = adir.join(name);
            fs::write(&f, body).map_err(io_err(&f))?;
        }
    }
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let f = dir.join("session.json");
    fs::write(&f, serde_json::to_string_pretty(log).expect("log serializes") + "\n").map_err(io_err(&f))
}

fn validate_arms(arms: &[Arm]) -> Result<(), OrchestratorError> {
    if arms.is_empty() {
        return Err(OrchestratorError::InvalidConfig("no workflows to run".into()));
    }
    let mut seen = HashSet::new();
    for arm in arms {
        arm.workflow.validate()?;
        if arm.condition.trim().is_empty() || arm.condition.contains('/') {
            return Err(OrchestratorError::InvalidConfig(format!(
                "condition `{}` must be nonempty and free of `/`",
                arm.condition
            )));
        }
        if !seen.insert((arm.workflow.workflow_id.clone(), arm.condition.clone())) {
            return Err(OrchestratorError::InvalidConfig(format!(
                "duplicate arm {}/{}",
                arm.workflow.workflow_id, arm.condition
            )));
        }
    }
    Ok(())
}

/// Runs every (problem, arm) pair not already in the ledger under
/// `opts.out_dir`, then rewrites the ledger in arm order and problem-id order.
pub fn run_experiment(
    corpus: &[Problem],
    arms: &[Arm],
    backends: &dyn BackendProvider,
    opts: &RunOptions,
) -> Result<RunSummary, OrchestratorError> {
    validate_arms(arms)?;
    if opts.parallelism == 0 {
        return Err(OrchestratorError::InvalidConfig("parallelism must be at least 1".into()));
    }
    let out = &opts.out_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let mut problems: Vec<&Problem> = corpus.iter().collect();
    problems.sort_by(|a, b| a.id.cmp(&b.id));
    let corpus_digest = build_manifest(corpus).corpus_digest;
    let hash = config_hash(arms, opts.seed);
    let manifest_path = out.join(RUN_MANIFEST_FILE);
    let manifest = if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let existing: RunManifest = serde_json::from_str(&text).map_err(|e| OrchestratorError::Ledger {
            line: 0,
            message: format!("{}: {e}", manifest_path.display()),
        })?;
        if existing.config_hash != hash || existing.corpus_digest != corpus_digest {
            return Err(OrchestratorError::ConfigMismatch {
                dir: out.display().to_string(),
                found: existing.config_hash,
                expected: hash,
            });
        }
        existing
    } else {
        let m = RunManifest {
            run_id: sha256_hex(format!("{hash}:{corpus_digest}").as_bytes())[..16].to_string(),
            config_hash: hash,
            seed: opts.seed,
            corpus_digest,
            corpus_path: opts.corpus_path.clone(),
            problems: problems.len(),
            arms: arms
                .iter()
                .map(|a| ArmSummary {
                    workflow_id: a.workflow.workflow_id.clone(),
                    condition: a.condition.clone(),
                    generator: a.workflow.generator.model_id.clone(),
                    critic: a.workflow.critic.model_id.clone(),
                    max_refinements: a.workflow.max_refinements,
                    stateless_mode: a.workflow.stateless_mode,
                })
                .collect(),
            created_at_ms: now_ms(),
        };
        fs::write(&manifest_path, serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n")
            .map_err(io_err(&manifest_path))?;
        m
    };

    let ledger_path = out.join(LEDGER_FILE);
    let mut logs = if ledger_path.exists() {
        let text = fs::read_to_string(&ledger_path).map_err(io_err(&ledger_path))?;
        let (logs, dropped) = parse_ledger(&text, true)?;
        if dropped {
            write_ledger(&ledger_path, &logs)?;
        }
        logs
    } else {
        Vec::new()
    };
    let done: HashSet<SessionKey> = logs.iter().map(SessionLog::key).collect();

    let mut tasks: Vec<(&Arm, &Problem)> = Vec::new();
    let mut skipped = 0;
    for arm in arms {
        for p in &problems {
            if done.contains(&arm.key(&p.id)) {
                skipped += 1;
            } else {
                tasks.push((arm, p));
            }
        }
    }
    if let Some(limit) = opts.stop_after {
        tasks.truncate(limit);
    }

    let solve_opts = SolveOptions { retry: opts.retry };
    let artifact_root = out.join(ARTIFACT_DIR);
    let mut appender = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&ledger_path)
        .map_err(io_err(&ledger_path))?;
    let next = AtomicUsize::new(0);
    let workers = opts.parallelism.min(tasks.len()).max(1);
    let mut fresh: Vec<SessionLog> = Vec::with_capacity(tasks.len());
    let mut first_error: Option<OrchestratorError> = None;

    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<Result<SessionLog, OrchestratorError>>();
        for _ in 0..workers {
            let tx = tx.clone();
            let tasks = &tasks;
            let next = &next;
            let artifact_root = &artifact_root;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((arm, problem)) = tasks.get(i) else { break };
                let key = arm.key(&problem.id);
                let outcome = backends.backends(&key, &arm.workflow).and_then(|b| {
                    let log = solve_problem(problem, &arm.workflow, &arm.condition, &b, &solve_opts);
                    if opts.write_artifacts {
                        write_artifacts(artifact_root, &log)?;
                    }
                    Ok(log)
                });
                if tx.send(outcome).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // single appender: only this thread touches the ledger file
        for outcome in rx {
            match outcome {
                Ok(log) => {
                    let line = serde_json::to_string(&log).expect("session log serializes");
                    if let Err(e) = writeln!(appender, "{line}").and_then(|_| appender.flush()) {
                        first_error.get_or_insert(OrchestratorError::Io {
                            path: ledger_path.display().to_string(),
                            source: e,
                        });
                    }
                    fresh.push(log);
                }
                Err(e) => {
                    log::error!("{e}");
                    first_error.get_or_insert(e);
                }
            }
        }
    });

    let executed = fresh.len();
    logs.extend(fresh);
    let arm_rank: BTreeMap<(String, String), usize> = arms
        .iter()
        .enumerate()
        .map(|(i, a)| ((a.workflow.workflow_id.clone(), a.condition.clone()), i))
        .collect();
    logs.sort_by(|a, b| {
        let ra = arm_rank.get(&(a.workflow_id.clone(), a.condition.clone())).unwrap_or(&usize::MAX);
        let rb = arm_rank.get(&(b.workflow_id.clone(), b.condition.clone())).unwrap_or(&usize::MAX);
        ra.cmp(rb)
            .then_with(|| a.workflow_id.cmp(&b.workflow_id))
            .then_with(|| a.condition.cmp(&b.condition))
            .then_with(|| a.problem_id.cmp(&b.problem_id))
    });
    // A resume with nothing to do leaves the file (and its mtime) alone.
    let unchanged = fs::read_to_string(&ledger_path).is_ok_and(|t| t == ledger_text(&logs));
    if !unchanged {
        write_ledger(&ledger_path, &logs)?;
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(RunSummary {
        manifest,
        logs,
        executed,
        skipped,
    })
}

/// Uniform sample without replacement inside each rating stratum.
/// The result is ordered by rating, then id.
pub fn stratified_sample(
    corpus: &[Problem],
    quotas: &BTreeMap<u32, usize>,
    seed: u64,
) -> Result<Vec<Problem>, OrchestratorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(quotas.values().sum());
    for (&rating, &quota) in quotas {
        let mut stratum: Vec<&Problem> = corpus.iter().filter(|p| p.rating == Some(rating)).collect();
        if stratum.len() < quota {
            return Err(OrchestratorError::InsufficientStratum {
                rating,
                available: stratum.len(),
                requested: quota,
            });
        }
        stratum.sort_by(|a, b| a.id.cmp(&b.id));
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, stratum.len(), quota).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| stratum[i].clone()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct AblationLedgers {
    pub stateful: Vec<SessionLog>,
    pub stateless: Vec<SessionLog>,
    pub summary: RunSummary,
}

fn split_by_condition(logs: &[SessionLog], condition: &str) -> Vec<SessionLog> {
    let mut v: Vec<SessionLog> = logs.iter().filter(|l| l.condition == condition).cloned().collect();
    v.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    v
}

/// Runs each problem with persistent and with reset contexts; everything else
/// about the workflow is held fixed.
pub fn run_ablation(
    subset: &[Problem],
    workflow: &WorkflowConfig,
    backends: &dyn BackendProvider,
    opts: &RunOptions,
) -> Result<AblationLedgers, OrchestratorError> {
    if subset.is_empty() {
        return Err(OrchestratorError::InvalidConfig("ablation subset is empty".into()));
    }
    let mut stateful = workflow.clone();
    stateful.stateless_mode = false;
    let mut stateless = workflow.clone();
    stateless.stateless_mode = true;
    let arms = [Arm::new(stateful, CONDITION_STATEFUL), Arm::new(stateless, CONDITION_STATELESS)];
    let summary = run_experiment(subset, &arms, backends, opts)?;
    Ok(AblationLedgers {
        stateful: split_by_condition(&summary.logs, CONDITION_STATEFUL),
        stateless: split_by_condition(&summary.logs, CONDITION_STATELESS),
        summary,
    })
}

pub const BASELINE_ZERO_SHOT: &str = "zero-shot";
pub const BASELINE_SINGLE_ROUND: &str = "single-round-stateless";
pub const BASELINE_MULTI_ROUND: &str = "multi-round-stateless";
pub const BASELINE_STATEFUL: &str = "stateful";

/// The four loop variants compared against each other, sharing one
/// generator/critic pairing.
pub fn baseline_arms(workflow: &WorkflowConfig) -> Vec<Arm> {
    let variant = |refinements: u32, stateless: bool, label: &str| {
        let mut w = workflow.clone();
        w.max_refinements = refinements;
        w.stateless_mode = stateless;
        Arm::new(w, label)
    };
    vec![
        variant(0, false, BASELINE_ZERO_SHOT),
        variant(1, true, BASELINE_SINGLE_ROUND),
        variant(3, true, BASELINE_MULTI_ROUND),
        variant(3, false, BASELINE_STATEFUL),
    ]
}

#[derive(Debug, Clone)]
pub struct BaselineLedgers {
    pub zero_shot: Vec<SessionLog>,
    pub single_round_stateless: Vec<SessionLog>,
    pub multi_round_stateless: Vec<SessionLog>,
    pub stateful: Vec<SessionLog>,
    pub summary: RunSummary,
}

pub fn run_baselines(
    subset: &[Problem],
    workflow: &WorkflowConfig,
    backends: &dyn BackendProvider,
    opts: &RunOptions,
) -> Result<BaselineLedgers, OrchestratorError> {
    if subset.is_empty() {
        return Err(OrchestratorError::InvalidConfig("baseline subset is empty".into()));
    }
    let summary = run_experiment(subset, &baseline_arms(workflow), backends, opts)?;
    Ok(BaselineLedgers {
        zero_shot: split_by_condition(&summary.logs, BASELINE_ZERO_SHOT),
        single_round_stateless: split_by_condition(&summary.logs, BASELINE_SINGLE_ROUND),
        multi_round_stateless: split_by_condition(&summary.logs, BASELINE_MULTI_ROUND),
        stateful: split_by_condition(&summary.logs, BASELINE_STATEFUL),
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::sample_problem;
    use crate::judge::{JudgeResult, Verdict};
    use crate::orchestrator::tests::{wa, workflow};
    use crate::orchestrator::ScriptBook;
    use crate::providers::ScriptStep;

    fn problems(n: usize) -> Vec<Problem> {
        (0..n).map(|i| sample_problem(&format!("P{i}"))).collect()
    }

    fn arms(n: usize) -> Vec<Arm> {
        (0..n)
            .map(|i| {
                let mut w = workflow(false);
                w.workflow_id = format!("w{i}");
                Arm::of(w)
            })
            .collect()
    }

    /// Problem `i` fails `i % 3` times before being accepted.
    fn book(corpus: &[Problem]) -> ScriptBook {
        let mut b = ScriptBook::default();
        for (i, p) in corpus.iter().enumerate() {
            let fails = i % 3;
            let replies: Vec<ScriptStep> =
                (0..=fails).map(|k| ScriptStep::from(format!("```cpp\nint main(){{/*{k}*/}}\n```"))).collect();
            let mut verdicts: Vec<JudgeResult> = (0..fails).map(|k| wa(k as u32 + 1)).collect();
            verdicts.push(JudgeResult::accepted(15, 1024));
            b.generator.insert(p.id.clone(), replies);
            b.critic.insert(p.id.clone(), (0..fails).map(|k| ScriptStep::from(format!("hint {k}\nConfidence: 3"))).collect());
            b.judge.insert(p.id.clone(), verdicts);
        }
        b
    }

    fn opts(dir: &Path) -> RunOptions {
        let mut o = RunOptions::new(dir);
        o.retry = RetryPolicy::immediate(3);
        o
    }

    fn strip_times(text: &str) -> String {
        let re = regex::Regex::new(r#""(started|ended)_at_ms":\d+"#).unwrap();
        re.replace_all(text, "").into_owned()
    }

    #[test]
    fn every_pair_yields_one_log() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = problems(2);
        let s = run_experiment(&corpus, &arms(6), &book(&corpus), &opts(dir.path())).unwrap();
        assert_eq!(s.logs.len(), 12);
        assert_eq!(s.executed, 12);
        for l in &s.logs {
            l.check_invariants().unwrap();
            assert!(l.is_solved());
        }
        assert_eq!(read_ledger(&dir.path().join(LEDGER_FILE)).unwrap(), s.logs);
        let session = dir.path().join("artifacts/stateful/w0/P1/attempt_1/hint.txt");
        assert_eq!(fs::read_to_string(session).unwrap(), "hint 0");
    }

    #[test]
    fn interrupted_run_resumes_without_touching_finished_logs() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = problems(2);
        let b = book(&corpus);
        let mut o = opts(dir.path());
        o.stop_after = Some(7);
        let first = run_experiment(&corpus, &arms(6), &b, &o).unwrap();
        assert_eq!(first.logs.len(), 7);
        let before = fs::read_to_string(dir.path().join(LEDGER_FILE)).unwrap();
        o.stop_after = None;
        o.parallelism = 3;
        let second = run_experiment(&corpus, &arms(6), &b, &o).unwrap();
        assert_eq!((second.executed, second.skipped, second.logs.len()), (5, 7, 12));
        let after = fs::read_to_string(dir.path().join(LEDGER_FILE)).unwrap();
        assert!(after.starts_with(&before));
        let third = run_experiment(&corpus, &arms(6), &b, &o).unwrap();
        assert_eq!(third.executed, 0);
        assert_eq!(fs::read_to_string(dir.path().join(LEDGER_FILE)).unwrap(), after);
    }

    #[test]
    fn truncated_tail_is_dropped_on_resume() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = problems(2);
        let b = book(&corpus);
        run_experiment(&corpus, &arms(1), &b, &opts(dir.path())).unwrap();
        let path = dir.path().join(LEDGER_FILE);
        let mut text = fs::read_to_string(&path).unwrap();
        let cut = text.trim_end().rfind('\n').unwrap() + 1;
        text.truncate(cut + 20);
        fs::write(&path, &text).unwrap();
        let s = run_experiment(&corpus, &arms(1), &b, &opts(dir.path())).unwrap();
        assert_eq!((s.executed, s.logs.len()), (1, 2));
    }

    #[test]
    fn same_seed_gives_identical_ledgers_modulo_timestamps() {
        let corpus = problems(3);
        let b = book(&corpus);
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            let mut o = opts(dir.path());
            o.parallelism = 4;
            run_experiment(&corpus, &arms(2), &b, &o).unwrap();
            let ledger = fs::read_to_string(dir.path().join(LEDGER_FILE)).unwrap();
            let manifest: RunManifest =
                serde_json::from_str(&fs::read_to_string(dir.path().join(RUN_MANIFEST_FILE)).unwrap()).unwrap();
            (strip_times(&ledger), manifest.run_id, manifest.config_hash)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn changed_config_refuses_to_resume() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = problems(1);
        let b = book(&corpus);
        run_experiment(&corpus, &arms(1), &b, &opts(dir.path())).unwrap();
        let mut o = opts(dir.path());
        o.seed = 7;
        assert!(matches!(
            run_experiment(&corpus, &arms(1), &b, &o),
            Err(OrchestratorError::ConfigMismatch { .. })
        ));
    }

    #[test]
    fn missing_script_marks_session_with_error() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = problems(1);
        let s = run_experiment(&corpus, &arms(1), &ScriptBook::default(), &opts(dir.path())).unwrap();
        assert_eq!(s.logs[0].attempts.len(), 0);
        assert!(s.logs[0].error.as_deref().unwrap().contains("no generator script"));
    }

    fn rated(id: &str, rating: u32) -> Problem {
        let mut p = sample_problem(id);
        p.rating = Some(rating);
        p
    }

    #[test]
    fn stratified_sampling_meets_quotas_deterministically() {
        let corpus: Vec<Problem> = [1200u32, 1300, 1400]
            .iter()
            .flat_map(|&r| (0..10).map(move |i| rated(&format!("{r}-{i}"), r)))
            .collect();
        let quotas: BTreeMap<u32, usize> = [(1200, 4), (1300, 2), (1400, 10)].into_iter().collect();
        let a = stratified_sample(&corpus, &quotas, 42).unwrap();
        assert_eq!(a.len(), 16);
        for (r, q) in &quotas {
            assert_eq!(a.iter().filter(|p| p.rating == Some(*r)).count(), *q);
        }
        let ids: HashSet<_> = a.iter().map(|p| p.id.clone()).collect();
        assert_eq!(ids.len(), 16);
        assert_eq!(a, stratified_sample(&corpus, &quotas, 42).unwrap());
        assert_ne!(a, stratified_sample(&corpus, &quotas, 43).unwrap());
        let over: BTreeMap<u32, usize> = [(1300, 11)].into_iter().collect();
        assert!(matches!(
            stratified_sample(&corpus, &over, 42),
            Err(OrchestratorError::InsufficientStratum { rating: 1300, .. })
        ));
    }

    #[test]
    fn ablation_pairs_conditions() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = problems(4);
        let ab = run_ablation(&corpus, &workflow(false), &book(&corpus), &opts(dir.path())).unwrap();
        assert_eq!(ab.stateful.len(), 4);
        assert_eq!(ab.stateless.len(), 4);
        for (a, b) in ab.stateful.iter().zip(&ab.stateless) {
            assert_eq!(a.problem_id, b.problem_id);
            assert_eq!(a.attempts[0].prompt, b.attempts[0].prompt);
            assert_eq!(a.attempts[0].code, b.attempts[0].code);
            for (k, att) in b.attempts.iter().enumerate().skip(1) {
                assert_eq!(att.generator_context_after, Some(3), "stateless attempt {k}");
            }
            for (k, att) in a.attempts.iter().enumerate() {
                assert_eq!(att.generator_context_before, Some(1 + 2 * k));
            }
        }
    }

    #[test]
    fn baselines_respect_their_budgets() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = problems(3);
        let mut b = ScriptBook::default();
        for p in &corpus {
            b.generator.insert(p.id.clone(), (0..4).map(|k| ScriptStep::from(format!("int main(){{/*{k}*/}}"))).collect());
            b.critic.insert(p.id.clone(), (0..3).map(|_| ScriptStep::from("hint")).collect());
            b.judge.insert(
                p.id.clone(),
                vec![wa(1), wa(1), JudgeResult::failed(Verdict::RuntimeError, 1, 1, crate::judge::FailureDetail::at(2)), wa(3)],
            );
        }
        let bl = run_baselines(&corpus, &workflow(false), &b, &opts(dir.path())).unwrap();
        assert!(bl.zero_shot.iter().all(|l| l.attempts.len() == 1));
        assert!(bl.single_round_stateless.iter().all(|l| l.attempts.len() == 2));
        assert!(bl.multi_round_stateless.iter().all(|l| l.attempts.len() == 4));
        assert!(bl.stateful.iter().all(|l| l.attempts.len() == 4));
        assert_eq!(bl.summary.logs.len(), 12);
    }
}
