//! Run configuration file. Relative paths resolve against the file's
//! directory; provider credentials come only from environment variables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use refinebench::orchestrator::DEFAULT_MAX_REFINEMENTS;
use refinebench::{ProviderConfig, WorkflowConfig};
use serde::Deserialize;

/// Bad input from the operator: maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum JudgeKind {
    Local,
    Scripted,
    RemoteStub,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowEntry {
    pub id: String,
    pub generator: ProviderConfig,
    pub critic: ProviderConfig,
    #[serde(default)]
    pub max_refinements: Option<u32>,
    #[serde(default)]
    pub stateless: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSection {
    pub workflow: Option<String>,
    /// Problems to draw per rating, keyed by rating.
    #[serde(default)]
    pub quotas: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub out: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_judge")]
    pub judge: JudgeKind,
    /// Script book for replayed chat (and judge) traffic.
    #[serde(default)]
    pub scripts: Option<PathBuf>,
    #[serde(default)]
    pub remote_judge_endpoint: Option<String>,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: u64,
    #[serde(default)]
    pub max_refinements: Option<u32>,
    #[serde(default)]
    pub workflows: Vec<WorkflowEntry>,
    #[serde(default)]
    pub ablation: AblationSection,
}

fn default_seed() -> u64 {
    42
}

fn default_parallelism() -> usize {
    1
}

fn default_judge() -> JudgeKind {
    JudgeKind::Scripted
}

fn default_timeout() -> u64 {
    120
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.corpus = resolve(base, &cfg.corpus);
        cfg.out = resolve(base, &cfg.out);
        cfg.scripts = cfg.scripts.map(|s| resolve(base, &s));
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.parallelism == 0 {
            return Err(usage("parallelism must be at least 1"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for w in &self.workflows {
            if !seen.insert(&w.id) {
                return Err(usage(format!("workflow `{}` is defined twice", w.id)));
            }
        }
        for w in self.workflow_configs(None)? {
            w.validate().map_err(|e| usage(e.to_string()))?;
        }
        Ok(())
    }

    pub fn ids(&self) -> Vec<&str> {
        self.workflows.iter().map(|w| w.id.as_str()).collect()
    }

    /// Workflow configs, restricted to `only` when given. Unknown ids are a
    /// usage error.
    pub fn workflow_configs(&self, only: Option<&[String]>) -> anyhow::Result<Vec<WorkflowConfig>> {
        if let Some(ids) = only {
            for id in ids {
                if !self.workflows.iter().any(|w| &w.id == id) {
                    return Err(usage(format!("unknown workflow `{id}` (known: {})", self.ids().join(", "))));
                }
            }
        }
        Ok(self
            .workflows
            .iter()
            .filter(|w| only.is_none_or(|ids| ids.contains(&w.id)))
            .map(|w| {
                let mut c = WorkflowConfig::new(w.id.clone(), w.generator.clone(), w.critic.clone());
                c.max_refinements = w.max_refinements.or(self.max_refinements).unwrap_or(DEFAULT_MAX_REFINEMENTS);
                c.stateless_mode = w.stateless;
                c.seed = self.seed;
                c
            })
            .collect())
    }

    pub fn quotas(&self) -> anyhow::Result<BTreeMap<u32, usize>> {
        self.ablation
            .quotas
            .iter()
            .map(|(k, &v)| k.parse::<u32>().map(|r| (r, v)).map_err(|_| usage(format!("quota key `{k}` is not a rating"))))
            .collect()
    }
}

/// Parses `1200:8` quota arguments.
pub fn parse_quota(s: &str) -> Result<(u32, usize), String> {
    let (r, n) = s.split_once(':').ok_or_else(|| format!("`{s}` is not RATING:COUNT"))?;
    Ok((r.trim().parse().map_err(|_| format!("bad rating in `{s}`"))?, n.trim().parse().map_err(|_| format!("bad count in `{s}`"))?))
}
