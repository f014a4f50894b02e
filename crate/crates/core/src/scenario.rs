//! Multi-stage decision processes.
//!
//! A scenario is an ordered list of stages ending in the final session.
//! Earlier stages decide parameters of the final session: an influence
//! stage forms every subject's point of view, a structure stage edits the
//! group (directly or after a vote), and the final session is solved with
//! the row-constant matrix built from the points of view.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::Serialize;

use crate::algebra::{ActionUniverse, Alternative};
use crate::error::{Error, Result};
use crate::group::{Polynomial, Relation, RelationshipGraph};
use crate::report::ScenarioReport;
use crate::schema::MatrixDraft;
use crate::solver::{
    render_diagonal_form, solve_session, Branch, InfluenceMatrix, InfluenceValue, IntervalKind,
    SessionOptions, SessionResult,
};
use crate::subject::SubjectId;
use crate::symbolic::SymbolicExpr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureEdit {
    RemoveSubject(SubjectId),
    SetRelation(SubjectId, SubjectId, Relation),
    /// Gate for the final session; when rejected the final session is skipped.
    StartFinalSession,
}

impl std::fmt::Display for StructureEdit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StructureEdit::RemoveSubject(s) => write!(f, "remove subject {s}"),
            StructureEdit::SetRelation(a, b, r) => write!(f, "set {a}–{b} to {r}"),
            StructureEdit::StartFinalSession => f.write_str("start the final session"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VoteRule {
    /// Every subject's decision must be forced to 1.
    Unanimity,
    /// The named subject's decision must be forced to 1.
    DeciderIs(SubjectId),
}

impl std::fmt::Display for VoteRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VoteRule::Unanimity => f.write_str("unanimity"),
            VoteRule::DeciderIs(s) => write!(f, "decider {s}"),
        }
    }
}

/// A yes/no session over its own universe deciding whether an edit happens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vote {
    pub universe: ActionUniverse,
    pub matrix: MatrixDraft,
    pub rule: VoteRule,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EditMode {
    Direct,
    Vote(Vote),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stage {
    InfluenceFormation { matrix: MatrixDraft },
    StructureEdit { edit: StructureEdit, mode: EditMode },
    FinalSession { enumeration_bound: u64 },
}

impl Stage {
    fn name(&self) -> &'static str {
        match self {
            Stage::InfluenceFormation { .. } => "influence",
            Stage::StructureEdit { .. } => "structure",
            Stage::FinalSession { .. } => "final",
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    universe: ActionUniverse,
    graph: RelationshipGraph,
    stages: Vec<Stage>,
    parallel_blocks: Vec<Vec<usize>>,
    points_of_view: BTreeMap<SubjectId, InfluenceValue>,
    enumeration_bound: u64,
    steps: Vec<Range<usize>>,
}

impl Scenario {
    pub fn new(
        universe: ActionUniverse,
        graph: RelationshipGraph,
        stages: Vec<Stage>,
        parallel_blocks: Vec<Vec<usize>>,
        points_of_view: BTreeMap<SubjectId, InfluenceValue>,
        enumeration_bound: u64,
    ) -> Result<Self> {
        let finals: Vec<usize> = stages
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Stage::FinalSession { .. }))
            .map(|(i, _)| i)
            .collect();
        match finals.as_slice() {
            [i] if *i + 1 == stages.len() => {}
            [] => {
                return Err(Error::StageOrderViolation(
                    "scenario has no final session".into(),
                ))
            }
            [_] => {
                return Err(Error::StageOrderViolation(
                    "the final session must be the last stage".into(),
                ))
            }
            _ => {
                return Err(Error::StageOrderViolation(
                    "scenario has more than one final session".into(),
                ))
            }
        }
        let steps = plan_steps(&stages, &parallel_blocks)?;
        Ok(Self {
            universe,
            graph,
            stages,
            parallel_blocks,
            points_of_view,
            enumeration_bound,
            steps,
        })
    }

    pub fn universe(&self) -> &ActionUniverse {
        &self.universe
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn parallel_blocks(&self) -> &[Vec<usize>] {
        &self.parallel_blocks
    }

    /// Stage index ranges executed as one step each (a stage or a parallel block).
    pub fn steps(&self) -> &[Range<usize>] {
        &self.steps
    }

    pub fn initial_state(&self) -> ScenarioState {
        ScenarioState {
            universe: self.universe.clone(),
            graph: self.graph.clone(),
            points_of_view: self.points_of_view.clone(),
            committed: BTreeMap::new(),
            final_session_approved: None,
            enumeration_bound: self.enumeration_bound,
            stages_run: 0,
            finished: false,
            stage_log: Vec::new(),
        }
    }
}

fn plan_steps(stages: &[Stage], blocks: &[Vec<usize>]) -> Result<Vec<Range<usize>>> {
    let mut owner: Vec<Option<usize>> = vec![None; stages.len()];
    for (b, block) in blocks.iter().enumerate() {
        let violation =
            |why: &str| Error::StageOrderViolation(format!("parallel block {b}: {why}"));
        let Some(&first) = block.first() else {
            return Err(violation("is empty"));
        };
        for (k, &i) in block.iter().enumerate() {
            if i != first + k {
                return Err(violation("indices must be consecutive and increasing"));
            }
            match stages.get(i) {
                None => return Err(violation("refers to a missing stage")),
                Some(Stage::FinalSession { .. }) => {
                    return Err(violation("cannot contain the final session"))
                }
                Some(_) => {}
            }
            if owner[i].replace(b).is_some() {
                return Err(violation("overlaps another block"));
            }
        }
        for kind in ["influence", "structure"] {
            if block.iter().filter(|&&i| stages[i].name() == kind).count() > 1 {
                return Err(violation(&format!(
                    "holds more than one {kind} stage; parallel stages must decide distinct parameters"
                )));
            }
        }
    }
    let mut steps = Vec::new();
    let mut i = 0;
    while i < stages.len() {
        let end = match owner[i] {
            Some(b) => i + blocks[b].len(),
            None => i + 1,
        };
        steps.push(i..end);
        i = end;
    }
    Ok(steps)
}

/// Outcome of the vote that preceded a structure edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoteRecord {
    pub rule: String,
    /// One session per round, solved until no further decision became
    /// forced; the first uses the vote matrix as given.
    pub rounds: Vec<SessionResult>,
    /// Forced decisions; `None` where a subject's decision is not forced.
    pub decisions: BTreeMap<SubjectId, Option<Alternative>>,
    pub approved: bool,
}

impl VoteRecord {
    /// The last round, on which the outcome was decided.
    pub fn session(&self) -> &SessionResult {
        self.rounds
            .last()
            .expect("a vote solves at least one round")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StageRecord {
    Choices {
        committed: BTreeMap<SubjectId, Alternative>,
    },
    Influence {
        stage: usize,
        session: SessionResult,
        diagonal_form: Vec<String>,
        points_of_view: BTreeMap<SubjectId, InfluenceValue>,
    },
    Structure {
        stage: usize,
        edit: String,
        mode: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        vote: Option<VoteRecord>,
        applied: bool,
        /// `None` when the edited group is not decomposable.
        polynomial_after: Option<Polynomial>,
    },
    Final {
        stage: usize,
        session: SessionResult,
        diagonal_form: Vec<String>,
    },
    FinalSkipped {
        stage: usize,
        reason: String,
    },
}

/// Everything carried from one stage to the next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioState {
    pub universe: ActionUniverse,
    pub graph: RelationshipGraph,
    pub points_of_view: BTreeMap<SubjectId, InfluenceValue>,
    /// Choices fixed by an operator; they narrow the committed subject's own
    /// decision in the final session.
    pub committed: BTreeMap<SubjectId, Alternative>,
    pub final_session_approved: Option<bool>,
    pub enumeration_bound: u64,
    pub stages_run: usize,
    pub finished: bool,
    pub stage_log: Vec<StageRecord>,
}

impl ScenarioState {
    fn options(&self, bound: u64) -> SessionOptions {
        SessionOptions {
            enumeration_bound: bound,
            ..SessionOptions::default()
        }
    }

    fn check_open(&self) -> Result<()> {
        if self.finished {
            Err(Error::StageOrderViolation(
                "the final session has already run".into(),
            ))
        } else {
            Ok(())
        }
    }

    /// The final session's result, once it has run.
    pub fn final_session(&self) -> Option<&SessionResult> {
        self.stage_log.iter().rev().find_map(|r| match r {
            StageRecord::Final { session, .. } => Some(session),
            _ => None,
        })
    }
}

/// Point of view each subject takes from a session: the tightest ground
/// interval covering its decision in every branch. Bounds are monotone in
/// the remaining variables, so the lower bound is least with every variable
/// at 0 and the upper bound greatest with every variable at 1.
fn points_of_view_from(
    session: &SessionResult,
    universe: &ActionUniverse,
) -> Result<BTreeMap<SubjectId, InfluenceValue>> {
    let mut out = BTreeMap::new();
    for subject in session.polynomial.subjects() {
        let mut inf = universe.one();
        let mut sup = universe.zero();
        for branch in &session.branches {
            let interval = &branch.intervals[&subject];
            let lowest = interval
                .inf
                .eval(&constant_assignment(&interval.inf, universe.zero()))?;
            let highest = interval
                .sup
                .eval(&constant_assignment(&interval.sup, universe.one()))?;
            inf = inf.meet(&lowest)?;
            sup = sup.join(&highest)?;
        }
        out.insert(subject, InfluenceValue::interval(inf, sup)?.normalized());
    }
    Ok(out)
}

fn constant_assignment(e: &SymbolicExpr, value: Alternative) -> BTreeMap<SubjectId, Alternative> {
    e.free_variables()
        .into_iter()
        .map(|v| (v, value.clone()))
        .collect()
}

/// Forms points of view: solves the session for `matrix` on the current
/// group and makes each subject's resulting interval its point of view.
pub fn run_influence_stage(state: &ScenarioState, matrix: &MatrixDraft) -> Result<ScenarioState> {
    run_influence_at(state, matrix, state.stages_run)
}

fn run_influence_at(
    state: &ScenarioState,
    matrix: &MatrixDraft,
    index: usize,
) -> Result<ScenarioState> {
    state.check_open()?;
    let polynomial = state.graph.decompose()?;
    let matrix = matrix.bind(state.graph.subjects())?;
    let session = solve_session(
        &state.universe,
        &polynomial,
        &matrix,
        state.options(state.enumeration_bound),
    )?;
    let points_of_view = points_of_view_from(&session, &state.universe)?;
    let mut next = state.clone();
    next.points_of_view = points_of_view.clone();
    next.committed.clear();
    next.stages_run = index + 1;
    next.stage_log.push(StageRecord::Influence {
        stage: index,
        diagonal_form: render_diagonal_form(&polynomial).lines().to_vec(),
        session,
        points_of_view,
    });
    Ok(next)
}

/// Applies a structure edit, after a vote when the mode asks for one.
/// Points of view of the remaining subjects are carried over unchanged.
pub fn run_structure_stage(
    state: &ScenarioState,
    edit: &StructureEdit,
    mode: &EditMode,
) -> Result<ScenarioState> {
    run_structure_at(state, edit, mode, state.stages_run)
}

fn run_structure_at(
    state: &ScenarioState,
    edit: &StructureEdit,
    mode: &EditMode,
    index: usize,
) -> Result<ScenarioState> {
    state.check_open()?;
    let edited = match edit {
        StructureEdit::RemoveSubject(s) => Some(state.graph.remove_subject(s)?),
        StructureEdit::SetRelation(a, b, r) => Some(state.graph.set_relation(a, b, *r)?),
        StructureEdit::StartFinalSession => None,
    };
    let vote = match mode {
        EditMode::Direct => None,
        EditMode::Vote(vote) => Some(run_vote(state, vote)?),
    };
    let applied = vote.as_ref().is_none_or(|v| v.approved);

    let mut next = state.clone();
    if applied {
        if let Some(graph) = edited {
            next.graph = graph;
        }
    }
    if matches!(edit, StructureEdit::StartFinalSession) {
        next.final_session_approved = Some(applied);
    }
    let remaining = next.graph.subjects().to_vec();
    next.points_of_view.retain(|s, _| remaining.contains(s));
    next.committed.retain(|s, _| remaining.contains(s));
    next.stages_run = index + 1;
    next.stage_log.push(StageRecord::Structure {
        stage: index,
        edit: edit.to_string(),
        mode: match mode {
            EditMode::Direct => "direct".into(),
            EditMode::Vote(_) => "vote".into(),
        },
        vote,
        applied,
        polynomial_after: next.graph.decompose().ok(),
    });
    Ok(next)
}

/// Solves the vote session, repeatedly replacing symbolic influences of
/// subjects whose decision has become forced by that forced value.
fn run_vote(state: &ScenarioState, vote: &Vote) -> Result<VoteRecord> {
    if let VoteRule::DeciderIs(decider) = &vote.rule {
        if !state.graph.contains(decider) {
            return Err(Error::UnknownSubject(decider.to_string()));
        }
    }
    let polynomial = state.graph.decompose()?;
    let subjects = state.graph.subjects();
    let mut matrix = vote.matrix.bind(subjects)?;
    let options = state.options(state.enumeration_bound);
    let mut rounds = Vec::new();
    let decisions = loop {
        let session = solve_session(&vote.universe, &polynomial, &matrix, options)?;
        let decisions = forced_decisions(&session);
        let mut changed = false;
        let mut entries = Vec::new();
        for (source, target, value) in matrix.entries() {
            let value = match (value, decisions.get(source)) {
                (InfluenceValue::Symbolic, Some(Some(forced))) => {
                    changed = true;
                    InfluenceValue::Concrete(forced.clone())
                }
                (v, _) => v.clone(),
            };
            entries.push((source.clone(), target.clone(), value));
        }
        rounds.push(session);
        if !changed {
            break decisions;
        }
        matrix = InfluenceMatrix::new(subjects.to_vec(), entries)?;
    };
    let forced_one = |s: &SubjectId| {
        decisions
            .get(s)
            .and_then(Option::as_ref)
            .is_some_and(Alternative::is_one)
    };
    let approved = match &vote.rule {
        VoteRule::Unanimity => subjects.iter().all(forced_one),
        VoteRule::DeciderIs(s) => forced_one(s),
    };
    Ok(VoteRecord {
        rule: vote.rule.to_string(),
        rounds,
        decisions,
        approved,
    })
}

/// A subject's decision is forced when every branch gives it the same
/// ground point interval.
fn forced_decisions(session: &SessionResult) -> BTreeMap<SubjectId, Option<Alternative>> {
    session
        .polynomial
        .subjects()
        .into_iter()
        .map(|s| {
            let mut points = session.branches.iter().map(|b| b.intervals[&s].point());
            let first = points.next().flatten();
            let forced = first.filter(|f| points.all(|p| p.as_ref() == Some(f)));
            (s, forced)
        })
        .collect()
}

/// Runs the final session with the set-up influences formed so far.
pub fn run_final_stage(state: &ScenarioState, bound: u64) -> Result<ScenarioReport> {
    Ok(ScenarioReport::from_state(&apply_final(
        state,
        bound,
        state.stages_run,
    )?))
}

fn apply_final(state: &ScenarioState, bound: u64, index: usize) -> Result<ScenarioState> {
    state.check_open()?;
    let mut next = state.clone();
    next.stages_run = index + 1;
    next.finished = true;
    if state.final_session_approved == Some(false) {
        next.stage_log.push(StageRecord::FinalSkipped {
            stage: index,
            reason: "the vote to start the final session was not carried".into(),
        });
        return Ok(next);
    }
    let polynomial = state.graph.decompose()?;
    let matrix = InfluenceMatrix::row_constant(state.graph.subjects(), &state.points_of_view)?;
    let mut session = solve_session(&state.universe, &polynomial, &matrix, state.options(bound))?;
    if !state.committed.is_empty() {
        session.branches = narrow_committed(session.branches, &state.committed, state)?;
    }
    next.stage_log.push(StageRecord::Final {
        stage: index,
        diagonal_form: render_diagonal_form(&polynomial).lines().to_vec(),
        session,
    });
    Ok(next)
}

/// Replaces a committed subject's interval by its choice wherever the
/// interval admits the choice under every assignment, then re-merges.
fn narrow_committed(
    branches: Vec<Branch>,
    committed: &BTreeMap<SubjectId, Alternative>,
    state: &ScenarioState,
) -> Result<Vec<Branch>> {
    let guard = state.options(state.enumeration_bound).guard;
    let mut merged: Vec<Branch> = Vec::new();
    for mut branch in branches {
        for (subject, choice) in committed {
            let Some(interval) = branch.intervals.get(subject) else {
                continue;
            };
            let value = SymbolicExpr::constant(choice);
            if interval.kind != IntervalKind::Point
                && interval.inf.leq(&value, guard)?
                && value.leq(&interval.sup, guard)?
            {
                let narrowed = interval.committed(choice);
                branch.intervals.insert(subject.clone(), narrowed);
            }
        }
        match merged.iter_mut().find(|b| b.intervals == branch.intervals) {
            Some(existing) => existing.assignments.extend(branch.assignments),
            None => merged.push(branch),
        }
    }
    Ok(merged)
}

/// Commits operator choices: each must lie inside the subject's current
/// point of view, which then becomes that concrete choice.
pub fn apply_choices(
    state: &ScenarioState,
    choices: &BTreeMap<SubjectId, Alternative>,
) -> Result<ScenarioState> {
    state.check_open()?;
    let mut next = state.clone();
    for (subject, choice) in choices {
        if !state.graph.contains(subject) {
            return Err(Error::UnknownSubject(subject.to_string()));
        }
        if !choice.universe().same_as(&state.universe) {
            return Err(Error::UniverseMismatch);
        }
        let current = state
            .points_of_view
            .get(subject)
            .cloned()
            .unwrap_or(InfluenceValue::Symbolic);
        if !current.admits(choice)? {
            return Err(Error::ChoiceOutsideInterval {
                subject: subject.to_string(),
                choice: choice.to_string(),
                interval: current.to_string(),
            });
        }
        next.points_of_view
            .insert(subject.clone(), InfluenceValue::Concrete(choice.clone()));
        next.committed.insert(subject.clone(), choice.clone());
    }
    if !choices.is_empty() {
        next.stage_log.push(StageRecord::Choices {
            committed: choices.clone(),
        });
    }
    Ok(next)
}

/// Runs one stage after committing optional operator choices.
pub fn step_scenario(
    state: &ScenarioState,
    stage: &Stage,
    human_choices: Option<&BTreeMap<SubjectId, Alternative>>,
) -> Result<ScenarioState> {
    let state = match human_choices {
        Some(choices) => apply_choices(state, choices)?,
        None => state.clone(),
    };
    run_stage(&state, stage, state.stages_run)
}

fn run_stage(state: &ScenarioState, stage: &Stage, index: usize) -> Result<ScenarioState> {
    match stage {
        Stage::InfluenceFormation { matrix } => run_influence_at(state, matrix, index),
        Stage::StructureEdit { edit, mode } => run_structure_at(state, edit, mode, index),
        Stage::FinalSession { enumeration_bound } => apply_final(state, *enumeration_bound, index),
    }
}

/// Runs a parallel block: every stage reads the same prior state and the
/// parameters they decide are combined afterwards.
fn run_block(
    state: &ScenarioState,
    stages: &[Stage],
    range: Range<usize>,
) -> Result<ScenarioState> {
    let mut merged = state.clone();
    let before = state.stage_log.len();
    for index in range.clone() {
        let out = run_stage(state, &stages[index], index)?;
        match &stages[index] {
            Stage::InfluenceFormation { .. } => {
                merged.points_of_view = out.points_of_view;
                merged.committed = out.committed;
            }
            Stage::StructureEdit { .. } => {
                merged.graph = out.graph;
                merged.final_session_approved = out.final_session_approved;
            }
            Stage::FinalSession { .. } => unreachable!("validated: no final session in a block"),
        }
        merged
            .stage_log
            .extend(out.stage_log[before..].iter().cloned());
    }
    let remaining = merged.graph.subjects().to_vec();
    merged.points_of_view.retain(|s, _| remaining.contains(s));
    merged.committed.retain(|s, _| remaining.contains(s));
    merged.stages_run = range.end;
    Ok(merged)
}

/// Drives a scenario one step at a time; a failed step leaves it untouched.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    scenario: Scenario,
    state: ScenarioState,
    cursor: usize,
}

impl ScenarioRun {
    pub fn new(scenario: Scenario) -> Self {
        let state = scenario.initial_state();
        Self {
            scenario,
            state,
            cursor: 0,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &ScenarioState {
        &self.state
    }

    /// Number of steps already taken.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn is_finished(&self) -> bool {
        self.cursor == self.scenario.steps.len()
    }

    /// Stage indices the next step will run.
    pub fn next_step(&self) -> Option<Range<usize>> {
        self.scenario.steps.get(self.cursor).cloned()
    }

    pub fn step(&mut self, human_choices: Option<&BTreeMap<SubjectId, Alternative>>) -> Result<()> {
        let range = self
            .next_step()
            .ok_or_else(|| Error::StageOrderViolation("every stage has already run".into()))?;
        let state = match human_choices {
            Some(choices) => apply_choices(&self.state, choices)?,
            None => self.state.clone(),
        };
        let next = if range.len() == 1 {
            run_stage(&state, &self.scenario.stages[range.start], range.start)?
        } else {
            run_block(&state, &self.scenario.stages, range)?
        };
        self.state = next;
        self.cursor += 1;
        Ok(())
    }

    pub fn report(&self) -> ScenarioReport {
        ScenarioReport::from_state(&self.state)
    }
}

/// Runs every stage in order.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioReport> {
    let mut run = ScenarioRun::new(scenario.clone());
    while !run.is_finished() {
        run.step(None)?;
    }
    Ok(run.report())
}
