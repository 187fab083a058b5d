use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use log::info;
use refinebench::corpus::{self, CorpusError};
use refinebench::judge::{JudgeBackend, LocalJudge, RemoteJudge};
use refinebench::orchestrator::{
    read_ledger, run_ablation, run_baselines, run_experiment, stratified_sample, write_ledger, Arm, BackendProvider,
    LiveBackends, OrchestratorError, RunOptions, ScriptBook, LEDGER_FILE,
};
use refinebench::stats::{align_ledgers, compare_family};
use refinebench::{metrics, report, Problem, SessionLog, WorkflowConfig};

use crate::config::{usage, JudgeKind, RunConfig};

/// Flags shared by the commands that execute sessions.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub judge: Option<JudgeKind>,
    pub stateless: bool,
    pub max_refinements: Option<u32>,
    pub out: Option<PathBuf>,
    pub workflows: Vec<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = self.parallelism {
            cfg.parallelism = p;
        }
        if let Some(j) = self.judge {
            cfg.judge = j;
        }
        if let Some(m) = self.max_refinements {
            cfg.max_refinements = Some(m);
            for w in &mut cfg.workflows {
                w.max_refinements = Some(m);
            }
        }
        if self.stateless {
            for w in &mut cfg.workflows {
                w.stateless = true;
            }
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
    }

    fn selected(&self) -> Option<&[String]> {
        (!self.workflows.is_empty()).then_some(self.workflows.as_slice())
    }
}

/// Errors the operator can fix by changing inputs get exit code 2.
fn classify(e: OrchestratorError) -> anyhow::Error {
    match e {
        OrchestratorError::InvalidConfig(_)
        | OrchestratorError::ConfigMismatch { .. }
        | OrchestratorError::InsufficientStratum { .. } => usage(e.to_string()),
        other => other.into(),
    }
}

fn corpus_error(e: CorpusError) -> anyhow::Error {
    match e {
        CorpusError::Io { .. } | CorpusError::Serialize(_) => e.into(),
        other => usage(other.to_string()),
    }
}

struct Prepared {
    cfg: RunConfig,
    corpus: Vec<Problem>,
    backends: Box<dyn BackendProvider>,
}

fn prepare(config: &Path, ov: &Overrides) -> Result<Prepared> {
    let mut cfg = RunConfig::load(config)?;
    ov.apply(&mut cfg);
    cfg.validate()?;
    let corpus = corpus::load_corpus(&cfg.corpus).map_err(corpus_error)?;
    let backends = backend_provider(&cfg)?;
    Ok(Prepared { cfg, corpus, backends })
}

fn backend_provider(cfg: &RunConfig) -> Result<Box<dyn BackendProvider>> {
    let judge: Option<Arc<dyn JudgeBackend>> = match cfg.judge {
        JudgeKind::Scripted => None,
        JudgeKind::Local => Some(Arc::new(LocalJudge::new(cfg.parallelism))),
        JudgeKind::RemoteStub => Some(Arc::new(RemoteJudge {
            endpoint: cfg.remote_judge_endpoint.clone().unwrap_or_else(|| "unset".into()),
        })),
    };
    match (&cfg.scripts, judge) {
        (Some(path), judge) => {
            let book = ScriptBook::load(path).map_err(classify)?;
            Ok(Box::new(match judge {
                Some(j) => book.with_judge(j),
                None => book,
            }))
        }
        (None, Some(judge)) => Ok(Box::new(LiveBackends {
            judge,
            timeout: Duration::from_secs(cfg.request_timeout_secs),
        })),
        (None, None) => Err(usage("the scripted judge needs a `scripts` file in the config")),
    }
}

fn options(cfg: &RunConfig, out: PathBuf, config_path: &Path) -> RunOptions {
    let mut o = RunOptions::new(out);
    o.parallelism = cfg.parallelism;
    o.seed = cfg.seed;
    o.corpus_path = Some(cfg.corpus.display().to_string());
    info!("config {}, output {}", config_path.display(), o.out_dir.display());
    o
}

fn print_rows(logs: &[SessionLog]) {
    print!("{}", report::summary_text(&report::summary_rows(logs)));
}

pub fn ingest(source: &Path, out: Option<&Path>) -> Result<()> {
    let problems: Vec<Problem> = corpus::load_corpus(source)
        .map_err(corpus_error)?
        .iter()
        .map(corpus::normalize_problem)
        .collect();
    let manifest = match out {
        Some(dir) => corpus::persist_corpus(&problems, dir).map_err(corpus_error)?,
        None => corpus::build_manifest(&problems),
    };
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(())
}

pub fn run(config: &Path, ov: &Overrides) -> Result<()> {
    let p = prepare(config, ov)?;
    let arms: Vec<Arm> = p.cfg.workflow_configs(ov.selected())?.into_iter().map(Arm::of).collect();
    if arms.is_empty() {
        return Err(usage("no workflows configured"));
    }
    let opts = options(&p.cfg, p.cfg.out.clone(), config);
    let s = run_experiment(&p.corpus, &arms, p.backends.as_ref(), &opts).map_err(classify)?;
    println!(
        "run {}: {} sessions ({} executed, {} resumed) -> {}",
        s.manifest.run_id,
        s.logs.len(),
        s.executed,
        s.skipped,
        opts.out_dir.join(LEDGER_FILE).display()
    );
    let failed = s.logs.iter().filter(|l| l.error.is_some()).count();
    if failed > 0 {
        println!("{failed} sessions ended with a backend error");
    }
    print_rows(&s.logs);
    Ok(())
}

fn single_workflow(cfg: &RunConfig, ov: &Overrides) -> Result<WorkflowConfig> {
    let id = match (ov.workflows.as_slice(), &cfg.ablation.workflow) {
        ([one], _) => one.clone(),
        ([], Some(w)) => w.clone(),
        ([], None) if cfg.workflows.len() == 1 => cfg.workflows[0].id.clone(),
        _ => return Err(usage("choose exactly one workflow with --workflow")),
    };
    let mut w = cfg.workflow_configs(Some(&[id]))?;
    Ok(w.remove(0))
}

fn write_split(dir: &Path, named: &[(&str, &[SessionLog])]) -> Result<()> {
    for (name, logs) in named {
        let path = dir.join(format!("{name}.jsonl"));
        write_ledger(&path, logs).map_err(classify)?;
        println!("{}: {} sessions -> {}", name, logs.len(), path.display());
    }
    Ok(())
}

pub fn ablate(config: &Path, ov: &Overrides, quotas: &[(u32, usize)]) -> Result<()> {
    let p = prepare(config, ov)?;
    let workflow = single_workflow(&p.cfg, ov)?;
    let mut q = p.cfg.quotas()?;
    q.extend(quotas.iter().copied());
    let subset = if q.is_empty() {
        p.corpus.clone()
    } else {
        stratified_sample(&p.corpus, &q, p.cfg.seed).map_err(classify)?
    };
    let ids: Vec<&str> = subset.iter().map(|p| p.id.as_str()).collect();
    println!("subset ({} problems, seed {}): {}", ids.len(), p.cfg.seed, ids.join(" "));
    let out = ov.out.clone().unwrap_or_else(|| p.cfg.out.join(format!("ablation-{}", workflow.workflow_id)));
    let opts = options(&p.cfg, out.clone(), config);
    let l = run_ablation(&subset, &workflow, p.backends.as_ref(), &opts).map_err(classify)?;
    write_split(&out, &[("stateful", &l.stateful), ("stateless", &l.stateless)])?;
    print_rows(&l.summary.logs);
    for (name, logs) in [("stateful", &l.stateful), ("stateless", &l.stateless)] {
        match metrics::error_repetition_rate(logs) {
            Ok(r) => println!("{name} error repetition: {r:.3}"),
            Err(e) => println!("{name} error repetition: n/a ({e})"),
        }
    }
    Ok(())
}

pub fn baselines(config: &Path, ov: &Overrides) -> Result<()> {
    let p = prepare(config, ov)?;
    let workflow = single_workflow(&p.cfg, ov)?;
    let out = ov.out.clone().unwrap_or_else(|| p.cfg.out.join(format!("baselines-{}", workflow.workflow_id)));
    let opts = options(&p.cfg, out.clone(), config);
    let l = run_baselines(&p.corpus, &workflow, p.backends.as_ref(), &opts).map_err(classify)?;
    write_split(
        &out,
        &[
            ("zero-shot", &l.zero_shot),
            ("single-round-stateless", &l.single_round_stateless),
            ("multi-round-stateless", &l.multi_round_stateless),
            ("stateful", &l.stateful),
        ],
    )?;
    print_rows(&l.summary.logs);
    Ok(())
}

fn read_all(ledgers: &[PathBuf]) -> Result<Vec<SessionLog>> {
    let mut logs = Vec::new();
    for p in ledgers {
        logs.extend(read_ledger(p).with_context(|| format!("reading {}", p.display()))?);
    }
    Ok(logs)
}

pub fn report(ledgers: &[PathBuf], out: &Path) -> Result<()> {
    let logs = read_all(ledgers)?;
    let files = report::write_report(out, &logs).with_context(|| format!("writing {}", out.display()))?;
    print_rows(&logs);
    println!("{} sessions; wrote {} to {}", logs.len(), files.join(", "), out.display());
    Ok(())
}

fn arm_label(file: &Path, many_files: bool, log: &SessionLog) -> String {
    let arm = format!("{}/{}", log.workflow_id, log.condition);
    if many_files {
        let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        format!("{stem}:{arm}")
    } else {
        arm
    }
}

pub struct StatsArgs<'a> {
    pub ledgers: &'a [PathBuf],
    pub pairs: &'a [String],
    pub resamples: usize,
    pub seed: u64,
    pub alpha: f64,
    pub out: Option<&'a Path>,
}

pub fn stats(a: StatsArgs<'_>) -> Result<()> {
    let many = a.ledgers.len() > 1;
    let mut arms: BTreeMap<String, Vec<SessionLog>> = BTreeMap::new();
    let mut order = Vec::new();
    for path in a.ledgers {
        for log in read_ledger(path).with_context(|| format!("reading {}", path.display()))? {
            let label = arm_label(path, many, &log);
            if !arms.contains_key(&label) {
                order.push(label.clone());
            }
            arms.entry(label).or_default().push(log);
        }
    }
    let pairs: Vec<(String, String)> = if a.pairs.is_empty() {
        match order.as_slice() {
            [x, y] => vec![(x.clone(), y.clone())],
            _ => return Err(usage(format!("found {} arms ({}); name comparisons with --pair A=B", order.len(), order.join(", ")))),
        }
    } else {
        a.pairs
            .iter()
            .map(|s| {
                s.split_once('=')
                    .map(|(x, y)| (x.to_string(), y.to_string()))
                    .ok_or_else(|| usage(format!("`{s}` is not A=B")))
            })
            .collect::<Result<_>>()?
    };
    let mut family = Vec::new();
    for (x, y) in &pairs {
        let get = |k: &String| arms.get(k).ok_or_else(|| usage(format!("unknown arm `{k}` (known: {})", order.join(", "))));
        let (paired, _) = align_ledgers(get(x)?, get(y)?).with_context(|| format!("{x} vs {y}"))?;
        family.push((format!("{x} vs {y}"), paired));
    }
    let rows = compare_family(&family, a.resamples, a.seed, a.alpha)?;
    print!("{}", report::comparisons_text(&rows));
    if let Some(dir) = a.out {
        fs::create_dir_all(dir)?;
        let path = dir.join("comparisons.csv");
        fs::write(&path, report::comparisons_csv(&rows))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Reprints each session's verdict trajectory and checks that the stored
/// outcome agrees with its attempts.
pub fn replay(ledger: &Path, problem: Option<&str>) -> Result<()> {
    let logs = read_ledger(ledger).with_context(|| format!("reading {}", ledger.display()))?;
    let mut bad = 0;
    for log in logs.iter().filter(|l| problem.is_none_or(|p| p == l.problem_id)) {
        let steps: Vec<String> = log
            .attempts
            .iter()
            .map(|a| match &a.result.failing_test {
                Some(d) if !a.verdict().is_accepted() => format!("{}({}, {} ms)", a.verdict().abbrev(), d.test_index, a.result.time_ms),
                _ => format!("{}({} ms)", a.verdict().abbrev(), a.result.time_ms),
            })
            .collect();
        let recomputed = SessionLog::from_attempts(
            log.problem_id.clone(),
            log.workflow_id.clone(),
            log.condition.clone(),
            log.rating,
            log.attempt_budget,
            log.attempts.clone(),
            log.error.clone(),
        );
        let consistent = recomputed.final_status == log.final_status
            && recomputed.solved_at == log.solved_at
            && log.check_invariants().is_ok();
        if !consistent {
            bad += 1;
        }
        println!(
            "{} {}/{}: {} => {:?}{}{}",
            log.problem_id,
            log.workflow_id,
            log.condition,
            steps.join(" -> "),
            log.final_status,
            log.error.as_deref().map(|e| format!(" [error: {e}]")).unwrap_or_default(),
            if consistent { "" } else { " [INCONSISTENT]" }
        );
    }
    if bad > 0 {
        anyhow::bail!("{bad} sessions disagree with their recorded attempts");
    }
    Ok(())
}
