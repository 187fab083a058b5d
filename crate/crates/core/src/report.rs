//! Tabular and plot-data renderings of ledgers. Everything here is a pure
//! function of the session logs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::judge::Verdict;
use crate::metrics::{self, SummaryRow, ITERATION_SLOTS};
use crate::orchestrator::SessionLog;
use crate::stats::ComparisonRow;

pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const CALIBRATION_CSV: &str = "calibration.csv";
pub const VERDICTS_CSV: &str = "verdicts.csv";
pub const REPETITION_CSV: &str = "error_repetition.csv";
pub const SOLVABILITY_CSV: &str = "solvability.csv";
pub const PLOT_JSON: &str = "plot_data.json";

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or(String::new(), |x| format!("{x:.digits$}"))
}

fn arm_name(workflow: &str, condition: &str) -> String {
    format!("{workflow}/{condition}")
}

pub fn summary_rows(logs: &[SessionLog]) -> Vec<SummaryRow> {
    metrics::group_by_arm(logs)
        .into_iter()
        .filter_map(|(_, group)| metrics::summary_row(&group).ok())
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let header = [
        "workflow",
        "condition",
        "new_itr0",
        "new_itr1",
        "new_itr2",
        "new_itr3",
        "itr0",
        "itr1",
        "itr2",
        "itr3",
        "total",
        "unsolved",
        "solve_rate",
        "avg_attempts",
        "verification_cost",
        "abstention_rate",
    ];
    let body = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.workflow_id.clone(), r.condition.clone()];
            v.extend(r.delta.iter().map(u64::to_string));
            v.extend(r.cumulative.iter().map(u64::to_string));
            v.push(r.total.to_string());
            v.push(r.unsolved.to_string());
            v.push(format!("{:.4}", r.solve_rate));
            v.push(opt(r.avg_attempts, 4));
            v.push(opt(r.verification_cost, 4));
            v.push(format!("{:.4}", r.abstention_rate));
            v
        })
        .collect();
    csv_string(&header, body)
}

/// One line per arm: new solves per iteration | unsolved | avg | cost.
pub fn summary_text(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&format!("{}\t{}\n", arm_name(&r.workflow_id, &r.condition), r.compact()));
    }
    out
}

pub fn calibration_csv(logs: &[SessionLog]) -> String {
    let body = metrics::group_by_arm(logs)
        .into_iter()
        .map(|((w, c), group)| {
            let hints = metrics::collect_hints(&group);
            let e = metrics::ece(&hints).ok().map(|r| r.ece);
            let post = metrics::post_hint_acceptance(&group);
            vec![
                w,
                c,
                hints.len().to_string(),
                opt(e, 4),
                opt(post.rate, 4),
                post.excluded.to_string(),
                opt(metrics::verification_cost(&group).ok(), 2),
            ]
        })
        .collect();
    csv_string(
        &["workflow", "condition", "n_hints", "ece", "post_hint_acceptance", "excluded_hints", "verification_cost"],
        body,
    )
}

pub fn verdicts_csv(logs: &[SessionLog]) -> String {
    let mut body = Vec::new();
    for ((w, c), group) in metrics::group_by_arm(logs) {
        let dist = metrics::verdict_distribution(&group);
        let props = metrics::verdict_proportions(&dist);
        for v in Verdict::ALL.iter().filter(|v| !v.is_accepted()) {
            body.push(vec![
                w.clone(),
                c.clone(),
                v.abbrev().to_string(),
                dist.get(v).copied().unwrap_or(0).to_string(),
                format!("{:.4}", props.get(v).copied().unwrap_or(0.0)),
            ]);
        }
    }
    csv_string(&["workflow", "condition", "verdict", "count", "proportion"], body)
}

pub fn repetition_csv(logs: &[SessionLog]) -> String {
    let body = metrics::group_by_arm(logs)
        .into_iter()
        .map(|((w, c), group)| {
            let (r, q) = metrics::error_repetition_counts(&group);
            vec![w, c, r.to_string(), q.to_string(), opt(metrics::error_repetition_rate(&group).ok(), 4)]
        })
        .collect();
    csv_string(&["workflow", "condition", "repeats", "failed_refinements", "rate"], body)
}

/// Solvability for every problem that has a log under exactly six arms.
pub fn solvability_csv(logs: &[SessionLog]) -> String {
    let mut by_problem: BTreeMap<&str, BTreeMap<String, SessionLog>> = BTreeMap::new();
    for l in logs {
        by_problem
            .entry(&l.problem_id)
            .or_default()
            .insert(arm_name(&l.workflow_id, &l.condition), l.clone());
    }
    let body = by_problem
        .into_iter()
        .filter_map(|(pid, arms)| {
            let score = metrics::solvability_score(pid, &arms).ok()?;
            let rating = arms.values().find_map(|l| l.rating);
            let solved = arms.values().filter(|l| l.is_solved()).count();
            let first = arms.values().filter(|l| l.solved_at == Some(0)).count();
            Some(vec![
                pid.to_string(),
                rating.map(|r| r.to_string()).unwrap_or_default(),
                solved.to_string(),
                first.to_string(),
                format!("{score:.2}"),
                metrics::difficulty_tier(score).label().to_string(),
            ])
        })
        .collect();
    csv_string(&["problem", "rating", "workflows_solved", "solved_first_try", "score", "tier"], body)
}

#[derive(Debug, Serialize)]
struct CurveSeries {
    arm: String,
    iterations: Vec<usize>,
    cumulative_rate: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct RatingPoint {
    arm: String,
    rating: u32,
    solved: usize,
    total: usize,
    rate: f64,
}

#[derive(Debug, Serialize)]
struct VerdictSeries {
    arm: String,
    counts: BTreeMap<String, u64>,
}

#[derive(Debug, Serialize)]
struct PlotData {
    iteration_curves: Vec<CurveSeries>,
    rating_vs_solve_rate: Vec<RatingPoint>,
    verdicts: Vec<VerdictSeries>,
}

pub fn plot_data_json(logs: &[SessionLog]) -> String {
    let groups = metrics::group_by_arm(logs);
    let mut data = PlotData {
        iteration_curves: Vec::new(),
        rating_vs_solve_rate: Vec::new(),
        verdicts: Vec::new(),
    };
    for ((w, c), group) in &groups {
        let arm = arm_name(w, c);
        if let Ok(curve) = metrics::itr_curve(group) {
            data.iteration_curves.push(CurveSeries {
                arm: arm.clone(),
                iterations: (0..ITERATION_SLOTS).collect(),
                cumulative_rate: curve.rates().to_vec(),
            });
        }
        let mut by_rating: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        for l in group {
            if let Some(r) = l.rating {
                let e = by_rating.entry(r).or_default();
                e.1 += 1;
                if l.is_solved() {
                    e.0 += 1;
                }
            }
        }
        for (rating, (solved, total)) in by_rating {
            data.rating_vs_solve_rate.push(RatingPoint {
                arm: arm.clone(),
                rating,
                solved,
                total,
                rate: solved as f64 / total as f64,
            });
        }
        data.verdicts.push(VerdictSeries {
            arm,
            counts: metrics::verdict_distribution(group)
                .into_iter()
                .map(|(v, n)| (v.abbrev().to_string(), n))
                .collect(),
        });
    }
    serde_json::to_string_pretty(&data).expect("plot data serializes") + "\n"
}

/// All report files for `logs`, keyed by file name.
pub fn render(logs: &[SessionLog]) -> BTreeMap<&'static str, String> {
    let rows = summary_rows(logs);
    BTreeMap::from([
        (SUMMARY_CSV, summary_csv(&rows)),
        (SUMMARY_TXT, summary_text(&rows)),
        (CALIBRATION_CSV, calibration_csv(logs)),
        (VERDICTS_CSV, verdicts_csv(logs)),
        (REPETITION_CSV, repetition_csv(logs)),
        (SOLVABILITY_CSV, solvability_csv(logs)),
        (PLOT_JSON, plot_data_json(logs)),
    ])
}

pub fn write_report(dir: &Path, logs: &[SessionLog]) -> std::io::Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, body) in render(logs) {
        fs::write(dir.join(name), body)?;
        written.push(name.to_string());
    }
    Ok(written)
}

fn sig_mark(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

pub fn comparisons_csv(rows: &[ComparisonRow]) -> String {
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.n.to_string(),
                format!("{:.4}", r.rate_a),
                format!("{:.4}", r.rate_b),
                format!("{:.4}", r.difference),
                r.mcnemar.b.to_string(),
                r.mcnemar.c.to_string(),
                format!("{:.4}", r.mcnemar.chi2_cc),
                format!("{:.6}", r.mcnemar.p_exact),
                format!("{:.6}", r.mcnemar.p_asymptotic),
                format!("{:.6}", r.mcnemar.p_value()),
                format!("{:.6}", r.p_holm),
                format!("{:.4}", r.ci.lower),
                format!("{:.4}", r.ci.upper),
                format!("{:.4}", r.cohens_h),
                r.effect.label().to_string(),
                sig_mark(r.p_holm).to_string(),
            ]
        })
        .collect();
    csv_string(
        &[
            "comparison",
            "n",
            "rate_a",
            "rate_b",
            "difference",
            "b",
            "c",
            "chi2_cc",
            "p_exact",
            "p_asymptotic",
            "p_raw",
            "p_holm",
            "ci_lower",
            "ci_upper",
            "cohens_h",
            "effect",
            "sig",
        ],
        body,
    )
}

pub fn comparisons_text(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("comparison | rates | diff | p raw | p holm | 95% CI | h | sig\n");
    for r in rows {
        out.push_str(&format!(
            "{} | {:.1}% vs {:.1}% | {:+.1} pp | {:.4} | {:.4} | [{:+.3}, {:+.3}] | {:.2} {} | {}\n",
            r.label,
            100.0 * r.rate_a,
            100.0 * r.rate_b,
            100.0 * r.difference,
            r.mcnemar.p_value(),
            r.p_holm,
            r.ci.lower,
            r.ci.upper,
            r.cohens_h,
            r.effect.label(),
            sig_mark(r.p_holm)
        ));
    }
    out
}
