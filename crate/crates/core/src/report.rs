//! Scenario reports: a machine-readable structure and a text rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::scenario::{ScenarioState, StageRecord};
use crate::schema::FORMAT_VERSION;
use crate::solver::{DecisionInterval, SessionResult};
use crate::subject::SubjectId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioReport {
    pub format_version: &'static str,
    pub stages: Vec<StageRecord>,
    /// Final decisions when every branch of the final session agrees.
    pub final_intervals: Option<BTreeMap<SubjectId, DecisionInterval>>,
    pub narrative: Vec<String>,
}

impl ScenarioReport {
    pub fn from_state(state: &ScenarioState) -> Self {
        let final_intervals = state
            .final_session()
            .and_then(SessionResult::unique_intervals)
            .cloned();
        Self {
            format_version: FORMAT_VERSION,
            stages: state.stage_log.clone(),
            final_intervals,
            narrative: narrative(&state.stage_log),
        }
    }

    pub fn final_session(&self) -> Option<&SessionResult> {
        self.stages.iter().rev().find_map(|r| match r {
            StageRecord::Final { session, .. } => Some(session),
            _ => None,
        })
    }

    /// Human-readable report. With `trace`, each session also shows its
    /// diagonal form.
    pub fn render_text(&self, trace: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "format_version: {}", self.format_version);
        for record in &self.stages {
            render_record(&mut out, record, trace);
        }
        out.push_str("\nSummary:\n");
        for line in &self.narrative {
            let _ = writeln!(out, "  {line}");
        }
        out
    }
}

fn narrative(log: &[StageRecord]) -> Vec<String> {
    let mut step = 0;
    let mut lines = Vec::new();
    for record in log {
        let line = match record {
            StageRecord::Choices { committed } => {
                let picks: Vec<String> = committed
                    .iter()
                    .map(|(s, v)| format!("{s} = {v}"))
                    .collect();
                format!("Operator committed {}.", picks.join(", "))
            }
            StageRecord::Influence { points_of_view, .. } => {
                step += 1;
                let povs: Vec<String> = points_of_view
                    .iter()
                    .map(|(s, v)| format!("{s}: {v}"))
                    .collect();
                format!("Step {step}: points of view formed ({}).", povs.join("; "))
            }
            StageRecord::Structure {
                edit,
                applied,
                polynomial_after,
                vote,
                ..
            } => {
                step += 1;
                let how = if vote.is_some() { " by vote" } else { "" };
                let structure = match polynomial_after {
                    Some(p) => format!("group polynomial {p}"),
                    None => "group not decomposable".into(),
                };
                if *applied {
                    format!("Step {step}: decided{how} to {edit}; {structure}.")
                } else {
                    format!("Step {step}: proposal to {edit} rejected{how}; {structure}.")
                }
            }
            StageRecord::Final { session, .. } => {
                step += 1;
                let decisions = match session.unique_intervals() {
                    Some(intervals) => intervals
                        .values()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join("; "),
                    None => format!("{} distinct branches", session.branches.len()),
                };
                format!(
                    "Step {step}: final session on {}: {decisions}.",
                    session.polynomial
                )
            }
            StageRecord::FinalSkipped { reason, .. } => {
                step += 1;
                format!("Step {step}: final session not started: {reason}.")
            }
        };
        lines.push(line);
    }
    lines
}

fn render_record(out: &mut String, record: &StageRecord, trace: bool) {
    match record {
        StageRecord::Choices { committed } => {
            out.push_str("\nOperator choices:\n");
            for (s, v) in committed {
                let _ = writeln!(out, "  {s} = {v}");
            }
        }
        StageRecord::Influence {
            stage,
            session,
            diagonal_form,
            points_of_view,
        } => {
            let _ = writeln!(out, "\nStage {}: influence formation", stage + 1);
            render_session(out, session, diagonal_form, trace);
            out.push_str("  points of view:\n");
            for (s, v) in points_of_view {
                let _ = writeln!(out, "    {s}: {v}");
            }
        }
        StageRecord::Structure {
            stage,
            edit,
            mode,
            vote,
            applied,
            polynomial_after,
        } => {
            let _ = writeln!(
                out,
                "\nStage {}: structure edit ({edit}, {mode})",
                stage + 1
            );
            if let Some(vote) = vote {
                let _ = writeln!(out, "  vote rule: {}", vote.rule);
                for (i, session) in vote.rounds.iter().enumerate() {
                    let _ = writeln!(out, "  round {}:", i + 1);
                    render_session(out, session, &[], false);
                }
                out.push_str("  forced decisions:\n");
                for (s, d) in &vote.decisions {
                    match d {
                        Some(v) => {
                            let _ = writeln!(out, "    {s} = {v}");
                        }
                        None => {
                            let _ = writeln!(out, "    {s}: not forced");
                        }
                    }
                }
            }
            let _ = writeln!(out, "  applied: {}", if *applied { "yes" } else { "no" });
            match polynomial_after {
                Some(p) => {
                    let _ = writeln!(out, "  polynomial: {p}");
                }
                None => out.push_str("  polynomial: not decomposable\n"),
            }
        }
        StageRecord::Final {
            stage,
            session,
            diagonal_form,
        } => {
            let _ = writeln!(out, "\nStage {}: final session", stage + 1);
            render_session(out, session, diagonal_form, trace);
        }
        StageRecord::FinalSkipped { stage, reason } => {
            let _ = writeln!(
                out,
                "\nStage {}: final session skipped ({reason})",
                stage + 1
            );
        }
    }
}

/// Equations and intervals of one session, branch by branch.
pub fn render_session(out: &mut String, session: &SessionResult, diagonal: &[String], trace: bool) {
    let _ = writeln!(out, "  polynomial: {}", session.polynomial);
    if trace && !diagonal.is_empty() {
        out.push_str("  diagonal form:\n");
        for line in diagonal {
            let _ = writeln!(out, "    {line}");
        }
    }
    out.push_str("  decision equations:\n");
    for eq in &session.equations {
        let _ = writeln!(out, "    {eq}");
    }
    let _ = writeln!(
        out,
        "  branches: {} expanded, {} distinct",
        session.branch_count,
        session.branches.len()
    );
    for (i, branch) in session.branches.iter().enumerate() {
        let labels: Vec<String> = branch
            .assignments
            .iter()
            .filter(|a| !a.is_empty())
            .map(|a| {
                a.iter()
                    .map(|(k, v)| format!("{k} = {v}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            })
            .collect();
        if labels.is_empty() {
            out.push_str("  decision intervals:\n");
        } else {
            let _ = writeln!(out, "  branch {} ({}):", i + 1, labels.join(" | "));
        }
        for interval in branch.intervals.values() {
            let _ = writeln!(out, "    {interval}");
        }
    }
}

/// Text listing for a standalone session (the `solve` command).
pub fn render_session_text(session: &SessionResult, trace: bool, diagonal: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format_version: {FORMAT_VERSION}");
    render_session(&mut out, session, diagonal, trace);
    out
}

/// Payload of a standalone session solve, shared by the CLI and the HTTP API.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolveOutput {
    pub format_version: &'static str,
    pub session: SessionResult,
}

impl SolveOutput {
    pub fn new(session: SessionResult) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            session,
        }
    }
}
