//! Prompt construction for the generator and critic roles, and parsing of
//! their replies.
//!
//! Templates live under `templates/<version>/` and are compiled in; their
//! rendered output is pinned by golden files in `tests/golden/`.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Problem;
use crate::judge::{FailureDetail, JudgeResult};

pub const TEMPLATE_VERSION: &str = "v1";

const GENERATION_SYSTEM: &str = include_str!("../templates/v1/generation_system.txt");
const GENERATION_USER: &str = include_str!("../templates/v1/generation_user.txt");
const FEEDBACK_SYSTEM: &str = include_str!("../templates/v1/feedback_system.txt");
const FEEDBACK_USER: &str = include_str!("../templates/v1/feedback_user.txt");
const REFINEMENT_USER: &str = include_str!("../templates/v1/refinement_user.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

/// Critic confidence on the 1..=5 scale, normalized to `level / 5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceHint {
    pub raw_level: u8,
    pub normalized: f64,
    pub hint_text: String,
    /// Whether the attempt that consumed this hint was accepted.
    pub led_to_acceptance: Option<bool>,
}

impl ConfidenceHint {
    pub fn new(raw_level: u8, hint_text: impl Into<String>) -> Option<Self> {
        (1..=5).contains(&raw_level).then(|| Self {
            raw_level,
            normalized: f64::from(raw_level) / 5.0,
            hint_text: hint_text.into(),
            led_to_acceptance: None,
        })
    }

    pub fn resolved(mut self, accepted: bool) -> Self {
        self.led_to_acceptance = Some(accepted);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("feedback prompts require a failed verdict, got Accepted")]
    AcceptedResult,
    #[error("critic hint is empty")]
    EmptyHint,
    #[error("no code found in response")]
    NoCode,
}

/// Replaces `{{name}}` placeholders in a single pass, so substituted values
/// are never re-expanded.
fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let template = template.trim_end_matches('\n');
    let mut out = String::with_capacity(template.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let key = &after[..end];
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(key);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn fenced(body: &str) -> String {
    let mut s = String::from("```\n");
    s.push_str(body);
    if !body.ends_with('\n') {
        s.push('\n');
    }
    s.push_str("```");
    s
}

/// All problem fields in presentation order: statement, input and output
/// specifications, samples, tags, rating.
pub fn render_problem(problem: &Problem) -> String {
    let mut sections = vec![
        format!("Problem Statement:\n{}", problem.statement),
        format!("Input Specification:\n{}", problem.input_spec),
        format!("Output Specification:\n{}", problem.output_spec),
    ];
    let samples: Vec<String> = problem
        .samples
        .iter()
        .enumerate()
        .map(|(i, t)| {
            format!(
                "Sample {}\nInput:\n{}\nOutput:\n{}",
                i + 1,
                fenced(&t.input),
                fenced(&t.expected_output)
            )
        })
        .collect();
    sections.push(format!("Sample Tests:\n{}", samples.join("\n\n")));
    if !problem.tags.is_empty() {
        sections.push(format!("Tags: {}", problem.tags.join(", ")));
    }
    if let Some(r) = problem.rating {
        sections.push(format!("Rating: {r}"));
    }
    sections.join("\n\n")
}

fn render_details(detail: Option<&FailureDetail>, verdict: crate::judge::Verdict) -> String {
    let Some(d) = detail else {
        return String::new();
    };
    let mut blocks = Vec::new();
    if d.has_test_payload() {
        let mut s = String::from("Test Case Details:");
        if let Some(i) = &d.input {
            s.push_str(&format!("\nInput:\n{}", fenced(i)));
        }
        if let Some(e) = &d.expected {
            s.push_str(&format!("\nExpected Output:\n{}", fenced(e)));
        }
        if let Some(a) = &d.actual {
            s.push_str(&format!("\nGiven Output:\n{}", fenced(a)));
        }
        blocks.push(s);
    }
    if let Some(m) = &d.message {
        let heading = if verdict == crate::judge::Verdict::CompilationError {
            "Compiler Output"
        } else {
            "Judge Message"
        };
        blocks.push(format!("{heading}:\n{}", fenced(m)));
    }
    if blocks.is_empty() {
        String::new()
    } else {
        format!("\n{}\n", blocks.join("\n\n"))
    }
}

pub fn generation_system_text() -> &'static str {
    GENERATION_SYSTEM.trim_end_matches('\n')
}

pub fn feedback_system_text() -> &'static str {
    FEEDBACK_SYSTEM.trim_end_matches('\n')
}

pub fn build_generation_prompt(problem: &Problem) -> Vec<ChatMessage> {
    let problem_text = render_problem(problem);
    vec![
        ChatMessage::system(generation_system_text()),
        ChatMessage::user(render(GENERATION_USER, &[("problem", &problem_text)])),
    ]
}

pub fn build_feedback_prompt(
    problem: &Problem,
    failed_code: &str,
    result: &JudgeResult,
) -> Result<Vec<ChatMessage>, ProtocolError> {
    if result.verdict.is_accepted() {
        return Err(ProtocolError::AcceptedResult);
    }
    let problem_text = render_problem(problem);
    let verdict = result.verdict_line();
    let details = render_details(result.failing_test.as_ref(), result.verdict);
    let user = render(
        FEEDBACK_USER,
        &[
            ("problem", &problem_text),
            ("code", failed_code.trim_end_matches('\n')),
            ("verdict", &verdict),
            ("details", &details),
        ],
    );
    Ok(vec![ChatMessage::system(feedback_system_text()), ChatMessage::user(user)])
}

pub fn build_refinement_prompt(
    problem: &Problem,
    failed_code: &str,
    result: &JudgeResult,
    hint: &str,
) -> Result<Vec<ChatMessage>, ProtocolError> {
    if result.verdict.is_accepted() {
        return Err(ProtocolError::AcceptedResult);
    }
    if hint.trim().is_empty() {
        return Err(ProtocolError::EmptyHint);
    }
    let problem_text = render_problem(problem);
    let verdict = result.verdict_line();
    let details = render_details(result.failing_test.as_ref(), result.verdict);
    let user = render(
        REFINEMENT_USER,
        &[
            ("problem", &problem_text),
            ("code", failed_code.trim_end_matches('\n')),
            ("verdict", &verdict),
            ("details", &details),
            ("hint", hint),
        ],
    );
    Ok(vec![ChatMessage::system(generation_system_text()), ChatMessage::user(user)])
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Pulls the program out of a model reply.
///
/// Fences are recognized at line starts only. With several fenced blocks the
/// one with the most lines wins (first on ties); an unterminated fence runs to
/// the end of the reply. Without fences the whole reply is used.
pub fn extract_code(response: &str) -> Result<String, ProtocolError> {
    let lines: Vec<&str> = response.lines().collect();
    let mut blocks: Vec<&[&str]> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if is_fence(lines[i]) {
            let start = i + 1;
            let mut end = start;
            while end < lines.len() && !is_fence(lines[end]) {
                end += 1;
            }
            blocks.push(&lines[start..end]);
            i = end + 1;
        } else {
            i += 1;
        }
    }
    let code = if blocks.is_empty() {
        response.trim().to_string()
    } else {
        let mut best: &[&str] = blocks[0];
        for b in &blocks[1..] {
            let better = b.len() > best.len() || (b.len() == best.len() && b.concat().len() > best.concat().len());
            if better {
                best = b;
            }
        }
        best.join("\n").trim().to_string()
    };
    if code.is_empty() {
        Err(ProtocolError::NoCode)
    } else {
        Ok(code)
    }
}

static CONFIDENCE_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[\s*_>#-]*confidence[\s*_]*:[\s*_\[]*(-?\d+)").expect("valid regex")
});

/// Integer from the last `Confidence: N` line; `None` when absent or outside 1..=5.
pub fn extract_confidence(response: &str) -> Option<u8> {
    let captured = response
        .lines()
        .rev()
        .find_map(|l| CONFIDENCE_LINE.captures(l.trim()))?;
    let value: i64 = captured[1].parse().ok()?;
    if (1..=5).contains(&value) {
        Some(value as u8)
    } else {
        log::warn!("ignoring out-of-range critic confidence {value}");
        None
    }
}

/// The critic reply with its confidence marker lines removed.
pub fn strip_confidence(response: &str) -> String {
    response
        .lines()
        .filter(|l| !CONFIDENCE_LINE.is_match(l.trim()))
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string()
}
