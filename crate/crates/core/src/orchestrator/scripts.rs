use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendProvider, OrchestratorError, SessionBackends, SessionKey, WorkflowConfig};
use crate::judge::{JudgeBackend, JudgeResult, ScriptedJudge};
use crate::providers::{BackendError, ChatBackend, FnBackend, HttpBackend, ScriptStep, ScriptedBackend};

/// Canned generator replies, critic replies and judge verdicts for offline
/// runs.
///
/// Scripts are looked up per session under `workflow/condition/problem`,
/// then `workflow/problem`, then `problem`, so one script can be shared by
/// every condition of a workflow (which keeps attempt-0 inputs identical
/// across ablation arms).
#[derive(Clone, Default, Serialize, Deserialize)]
pub struct ScriptBook {
    #[serde(default)]
    pub generator: BTreeMap<String, Vec<ScriptStep>>,
    #[serde(default)]
    pub critic: BTreeMap<String, Vec<ScriptStep>>,
    #[serde(default)]
    pub judge: BTreeMap<String, Vec<JudgeResult>>,
    #[serde(skip)]
    judge_override: Option<Arc<dyn JudgeBackend>>,
}

impl std::fmt::Debug for ScriptBook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScriptBook")
            .field("generator", &self.generator.len())
            .field("critic", &self.critic.len())
            .field("judge", &self.judge.len())
            .field("judge_override", &self.judge_override.is_some())
            .finish()
    }
}

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, key: &SessionKey) -> Option<&'a T> {
    let candidates = [
        format!("{}/{}/{}", key.workflow_id, key.condition, key.problem_id),
        format!("{}/{}", key.workflow_id, key.problem_id),
        key.problem_id.clone(),
    ];
    candidates.iter().find_map(|k| map.get(k))
}

impl ScriptBook {
    pub fn load(path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path).map_err(|source| OrchestratorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| OrchestratorError::InvalidConfig(format!("script book {}: {e}", path.display())))
    }

    /// Judges every session with `judge` instead of the scripted verdicts.
    pub fn with_judge(mut self, judge: Arc<dyn JudgeBackend>) -> Self {
        self.judge_override = Some(judge);
        self
    }

    fn chat(map: &BTreeMap<String, Vec<ScriptStep>>, key: &SessionKey, role: &'static str) -> Arc<dyn ChatBackend> {
        match lookup(map, key).and_then(|steps| ScriptedBackend::new(steps.clone()).ok()) {
            Some(b) => Arc::new(b),
            None => {
                let what = format!("no {role} script for {}/{}/{}", key.workflow_id, key.condition, key.problem_id);
                Arc::new(FnBackend(move |_: &crate::providers::ChatRequest<'_>| {
                    Err(BackendError::Malformed(what.clone()))
                }))
            }
        }
    }
}

impl BackendProvider for ScriptBook {
    fn backends(&self, key: &SessionKey, _workflow: &WorkflowConfig) -> Result<SessionBackends, OrchestratorError> {
        let judge: Arc<dyn JudgeBackend> = match &self.judge_override {
            Some(j) => Arc::clone(j),
            None => {
                let trajectory = lookup(&self.judge, key).cloned().unwrap_or_default();
                Arc::new(ScriptedJudge::new().with_trajectory(&key.problem_id, trajectory))
            }
        };
        Ok(SessionBackends {
            generator: Self::chat(&self.generator, key, "generator"),
            critic: Self::chat(&self.critic, key, "critic"),
            judge,
        })
    }
}

/// HTTP chat backends built from each workflow's provider configs.
pub struct LiveBackends {
    pub judge: Arc<dyn JudgeBackend>,
    pub timeout: Duration,
}

impl BackendProvider for LiveBackends {
    fn backends(&self, key: &SessionKey, workflow: &WorkflowConfig) -> Result<SessionBackends, OrchestratorError> {
        let label = format!("{}/{}", key.workflow_id, key.problem_id);
        let generator = HttpBackend::from_config(&workflow.generator, self.timeout)
            .map_err(|e| OrchestratorError::Backend(label.clone(), e.to_string()))?;
        let critic = HttpBackend::from_config(&workflow.critic, self.timeout)
            .map_err(|e| OrchestratorError::Backend(label, e.to_string()))?;
        Ok(SessionBackends {
            generator: Arc::new(generator),
            critic: Arc::new(critic),
            judge: Arc::clone(&self.judge),
        })
    }
}
