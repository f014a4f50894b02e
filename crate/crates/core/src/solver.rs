//! Decision equations and decision intervals.
//!
//! For a group polynomial `P` and a subject `x`, the decision equation is
//! `x = P[x:=1]·x + P[x:=0]·x̄`; its solutions are exactly the alternatives
//! between `P[x:=0]` and `P[x:=1]`. Substituting the influences other
//! subjects exert on `x` turns the two bounds into that subject's decision
//! interval.

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::algebra::{enumerate_between, interval_len, ActionUniverse, Alternative};
use crate::error::{Error, Result};
use crate::group::Polynomial;
use crate::subject::SubjectId;
use crate::symbolic::{Guard, SymbolicExpr};

/// What one subject exerts on another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InfluenceValue {
    Concrete(Alternative),
    /// Any alternative between the bounds; expanded into branches or kept
    /// symbolic by the session solver.
    Interval {
        inf: Alternative,
        sup: Alternative,
    },
    /// Unknown: the source's own variable stays in the result.
    Symbolic,
}

impl InfluenceValue {
    pub fn interval(inf: Alternative, sup: Alternative) -> Result<Self> {
        if !inf.leq(&sup)? {
            return Err(Error::EmptyInterval {
                inf: inf.to_string(),
                sup: sup.to_string(),
            });
        }
        Ok(InfluenceValue::Interval { inf, sup })
    }

    /// Collapses a one-element interval to a concrete value.
    pub fn normalized(self) -> Self {
        match self {
            InfluenceValue::Interval { inf, sup } if inf == sup => InfluenceValue::Concrete(inf),
            other => other,
        }
    }

    pub fn admits(&self, choice: &Alternative) -> Result<bool> {
        match self {
            InfluenceValue::Concrete(v) => Ok(v.leq(choice)? && choice.leq(v)?),
            InfluenceValue::Interval { inf, sup } => Ok(inf.leq(choice)? && choice.leq(sup)?),
            InfluenceValue::Symbolic => Ok(true),
        }
    }

    fn universe(&self) -> Option<&ActionUniverse> {
        match self {
            InfluenceValue::Concrete(v) => Some(v.universe()),
            InfluenceValue::Interval { inf, .. } => Some(inf.universe()),
            InfluenceValue::Symbolic => None,
        }
    }
}

impl fmt::Display for InfluenceValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfluenceValue::Concrete(v) => write!(f, "{v}"),
            InfluenceValue::Interval { inf, sup } => write!(f, "[{inf}, {sup}]"),
            InfluenceValue::Symbolic => f.write_str("symbolic"),
        }
    }
}

impl Serialize for InfluenceValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            InfluenceValue::Concrete(v) => v.serialize(serializer),
            InfluenceValue::Interval { inf, sup } => {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("inf", inf)?;
                map.serialize_entry("sup", sup)?;
                map.end()
            }
            InfluenceValue::Symbolic => serializer.serialize_str("symbolic"),
        }
    }
}

/// Off-diagonal influences, keyed by `(source, target)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceMatrix {
    subjects: Vec<SubjectId>,
    entries: BTreeMap<(SubjectId, SubjectId), InfluenceValue>,
}

impl InfluenceMatrix {
    pub fn new<I>(subjects: Vec<SubjectId>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (SubjectId, SubjectId, InfluenceValue)>,
    {
        let mut map = BTreeMap::new();
        for (source, target, value) in entries {
            for s in [&source, &target] {
                if !subjects.contains(s) {
                    return Err(Error::UnknownSubject(s.to_string()));
                }
            }
            if source == target {
                return Err(Error::Schema(format!(
                    "influence matrix has a diagonal entry for {source}; the diagonal is the subject's own variable"
                )));
            }
            if map
                .insert((source.clone(), target.clone()), value)
                .is_some()
            {
                return Err(Error::Schema(format!(
                    "influence {source} -> {target} given more than once"
                )));
            }
        }
        for source in &subjects {
            for target in &subjects {
                if source != target && !map.contains_key(&(source.clone(), target.clone())) {
                    return Err(Error::MatrixIncomplete(format!(
                        "missing influence {source} -> {target}"
                    )));
                }
            }
        }
        Ok(Self {
            subjects,
            entries: map,
        })
    }

    /// The matrix in which every subject exerts its point of view on all others.
    pub fn row_constant(
        subjects: &[SubjectId],
        points_of_view: &BTreeMap<SubjectId, InfluenceValue>,
    ) -> Result<Self> {
        let mut entries = Vec::new();
        for source in subjects {
            let value = points_of_view
                .get(source)
                .ok_or_else(|| Error::MatrixIncomplete(format!("no point of view for {source}")))?;
            for target in subjects.iter().filter(|t| *t != source) {
                entries.push((source.clone(), target.clone(), value.clone()));
            }
        }
        Self::new(subjects.to_vec(), entries)
    }

    pub fn subjects(&self) -> &[SubjectId] {
        &self.subjects
    }

    pub fn get(&self, source: &SubjectId, target: &SubjectId) -> Option<&InfluenceValue> {
        self.entries.get(&(source.clone(), target.clone()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&SubjectId, &SubjectId, &InfluenceValue)> {
        self.entries.iter().map(|((s, t), v)| (s, t, v))
    }

    /// Influences acting on `target`, keyed by source.
    pub fn column(&self, target: &SubjectId) -> BTreeMap<SubjectId, InfluenceValue> {
        self.entries
            .iter()
            .filter(|((_, t), _)| t == target)
            .map(|((s, _), v)| (s.clone(), v.clone()))
            .collect()
    }
}

/// `subject = pos·subject + neg·¬subject`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionEquation {
    pub subject: SubjectId,
    pub pos: SymbolicExpr,
    pub neg: SymbolicExpr,
}

impl fmt::Display for DecisionEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = &self.subject;
        let factor = |e: &SymbolicExpr| {
            if e.terms().len() > 1 {
                format!("({e})")
            } else {
                e.to_string()
            }
        };
        let mut parts = Vec::new();
        if self.pos.is_one() {
            parts.push(x.to_string());
        } else if !self.pos.is_zero() {
            parts.push(format!("{}·{x}", factor(&self.pos)));
        }
        if self.neg.is_one() {
            parts.push(format!("¬{x}"));
        } else if !self.neg.is_zero() {
            parts.push(format!("{}·¬{x}", factor(&self.neg)));
        }
        if parts.is_empty() {
            return write!(f, "{x} = 0");
        }
        write!(f, "{x} = {}", parts.join(" + "))
    }
}

/// Converts a group polynomial into a symbolic expression over `universe`.
pub fn polynomial_expr(p: &Polynomial, universe: &ActionUniverse) -> Result<SymbolicExpr> {
    match p {
        Polynomial::Var(s) => Ok(SymbolicExpr::variable(s.clone(), universe)),
        Polynomial::Meet(children) => children
            .iter()
            .try_fold(SymbolicExpr::one(universe), |acc, c| {
                acc.meet(&polynomial_expr(c, universe)?)
            }),
        Polynomial::Join(children) => children
            .iter()
            .try_fold(SymbolicExpr::zero(universe), |acc, c| {
                acc.join(&polynomial_expr(c, universe)?)
            }),
    }
}

/// Derives `subject`'s decision equation by two-point substitution.
pub fn decision_equation(
    p: &Polynomial,
    subject: &SubjectId,
    universe: &ActionUniverse,
) -> Result<DecisionEquation> {
    if !p.contains(subject) {
        return Err(Error::UnknownSubject(subject.to_string()));
    }
    let expr = polynomial_expr(p, universe)?;
    let at = |value: SymbolicExpr| expr.substitute(&BTreeMap::from([(subject.clone(), value)]));
    Ok(DecisionEquation {
        subject: subject.clone(),
        pos: at(SymbolicExpr::one(universe))?,
        neg: at(SymbolicExpr::zero(universe))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    /// A single forced alternative.
    Point,
    /// Any alternative: `1 ⊇ x ⊇ 0`.
    Free,
    Range,
}

/// The solution set `{x : inf ⊆ x ⊆ sup}` of one subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionInterval {
    pub subject: SubjectId,
    pub inf: SymbolicExpr,
    pub sup: SymbolicExpr,
    pub kind: IntervalKind,
}

impl DecisionInterval {
    fn classify(subject: SubjectId, inf: SymbolicExpr, sup: SymbolicExpr) -> Self {
        let kind = if inf == sup {
            IntervalKind::Point
        } else if inf.is_zero() && sup.is_one() {
            IntervalKind::Free
        } else {
            IntervalKind::Range
        };
        Self {
            subject,
            inf,
            sup,
            kind,
        }
    }

    /// The forced value of a ground point interval.
    pub fn point(&self) -> Option<Alternative> {
        match self.kind {
            IntervalKind::Point => self.inf.as_constant(),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.inf.is_ground() && self.sup.is_ground()
    }

    /// Narrows the interval to a committed choice.
    pub(crate) fn committed(&self, choice: &Alternative) -> Self {
        let value = SymbolicExpr::constant(choice);
        Self::classify(self.subject.clone(), value.clone(), value)
    }
}

impl fmt::Display for DecisionInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = &self.subject;
        match self.kind {
            IntervalKind::Point => write!(f, "{x} = {}", self.inf),
            IntervalKind::Free => write!(f, "1 ⊇ {x} ⊇ 0 (free choice)"),
            IntervalKind::Range => write!(f, "{} ⊇ {x} ⊇ {}", self.sup, self.inf),
        }
    }
}

/// Substitutes the influences acting on one subject into its equation.
///
/// Concrete influences are folded in; interval and symbolic influences leave
/// the source's variable in place.
pub fn solve_subject(
    eq: &DecisionEquation,
    influences: &BTreeMap<SubjectId, InfluenceValue>,
    guard: Guard,
) -> Result<DecisionInterval> {
    let universe = eq.pos.universe();
    let mut bindings = BTreeMap::new();
    for var in eq.pos.free_variables().union(&eq.neg.free_variables()) {
        let value = influences.get(var).ok_or_else(|| {
            Error::MatrixIncomplete(format!("no influence {var} -> {}", eq.subject))
        })?;
        if let Some(u) = value.universe() {
            if !u.same_as(universe) {
                return Err(Error::UniverseMismatch);
            }
        }
        if let InfluenceValue::Concrete(v) = value {
            bindings.insert(var.clone(), SymbolicExpr::constant(v));
        }
    }
    let sup = eq.pos.substitute(&bindings)?;
    let inf = eq.neg.substitute(&bindings)?;
    if !inf.leq(&sup, guard)? {
        return Err(Error::NotSolvable {
            subject: eq.subject.to_string(),
            inf: inf.to_string(),
            sup: sup.to_string(),
        });
    }
    Ok(DecisionInterval::classify(eq.subject.clone(), inf, sup))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionOptions {
    /// Interval influences with at most this many alternatives are expanded
    /// into branches; larger ones stay symbolic.
    pub enumeration_bound: u64,
    pub guard: Guard,
}

pub const DEFAULT_ENUMERATION_BOUND: u64 = 4;

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            enumeration_bound: DEFAULT_ENUMERATION_BOUND,
            guard: Guard::default(),
        }
    }
}

/// An expanded interval influence: either a source's whole row (when all
/// its interval entries agree) or a single matrix entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChoiceKey {
    Source(SubjectId),
    Entry(SubjectId, SubjectId),
}

impl fmt::Display for ChoiceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChoiceKey::Source(s) => write!(f, "{s}"),
            ChoiceKey::Entry(s, t) => write!(f, "{s}->{t}"),
        }
    }
}

impl Serialize for ChoiceKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

pub type BranchAssignment = BTreeMap<ChoiceKey, Alternative>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Branch {
    /// Every expansion choice that produced these intervals.
    pub assignments: Vec<BranchAssignment>,
    pub intervals: BTreeMap<SubjectId, DecisionInterval>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionResult {
    pub polynomial: Polynomial,
    pub equations: Vec<DecisionEquation>,
    /// Number of branches before identical outcomes were merged.
    pub branch_count: u64,
    pub branches: Vec<Branch>,
}

impl SessionResult {
    /// The intervals when every branch agrees.
    pub fn unique_intervals(&self) -> Option<&BTreeMap<SubjectId, DecisionInterval>> {
        match self.branches.as_slice() {
            [only] => Some(&only.intervals),
            _ => None,
        }
    }
}

/// Runs one complete session: equations for every subject, interval
/// influences expanded into branches, each branch solved and identical
/// outcomes merged.
pub fn solve_session(
    universe: &ActionUniverse,
    p: &Polynomial,
    matrix: &InfluenceMatrix,
    options: SessionOptions,
) -> Result<SessionResult> {
    let subjects = p.subjects();
    let mut matrix_subjects = matrix.subjects().to_vec();
    matrix_subjects.sort();
    if matrix_subjects != subjects {
        return Err(Error::MatrixIncomplete(format!(
            "matrix subjects {{{}}} differ from group {{{}}}",
            join_ids(&matrix_subjects),
            join_ids(&subjects)
        )));
    }
    for (_, _, value) in matrix.entries() {
        if let Some(u) = value.universe() {
            if !u.same_as(universe) {
                return Err(Error::UniverseMismatch);
            }
        }
    }

    let equations = subjects
        .iter()
        .map(|s| decision_equation(p, s, universe))
        .collect::<Result<Vec<_>>>()?;

    let choices = expansion_choices(matrix, options.enumeration_bound)?;
    let branch_count = choices.iter().map(|(_, opts)| opts.len() as u64).product();

    let mut branches: Vec<Branch> = Vec::new();
    for assignment in cartesian(&choices) {
        let mut intervals = BTreeMap::new();
        for eq in &equations {
            let target = &eq.subject;
            let influences = matrix
                .column(target)
                .into_iter()
                .map(|(source, value)| {
                    let chosen = assignment
                        .get(&ChoiceKey::Source(source.clone()))
                        .or_else(|| {
                            assignment.get(&ChoiceKey::Entry(source.clone(), target.clone()))
                        });
                    let value = match (chosen, value) {
                        (Some(v), _) => InfluenceValue::Concrete(v.clone()),
                        (None, InfluenceValue::Interval { .. }) => InfluenceValue::Symbolic,
                        (None, other) => other,
                    };
                    (source, value)
                })
                .collect();
            intervals.insert(
                target.clone(),
                solve_subject(eq, &influences, options.guard)?,
            );
        }
        match branches.iter_mut().find(|b| b.intervals == intervals) {
            Some(existing) => existing.assignments.push(assignment),
            None => branches.push(Branch {
                assignments: vec![assignment],
                intervals,
            }),
        }
    }

    Ok(SessionResult {
        polynomial: p.clone(),
        equations,
        branch_count,
        branches,
    })
}

/// Interval influences small enough to enumerate, with their alternatives.
fn expansion_choices(
    matrix: &InfluenceMatrix,
    bound: u64,
) -> Result<Vec<(ChoiceKey, Vec<Alternative>)>> {
    let mut out = Vec::new();
    for source in matrix.subjects() {
        let row: Vec<(&SubjectId, &Alternative, &Alternative)> = matrix
            .entries()
            .filter(|(s, _, _)| *s == source)
            .filter_map(|(_, t, v)| match v {
                InfluenceValue::Interval { inf, sup } => Some((t, inf, sup)),
                _ => None,
            })
            .collect();
        let Some(&(_, first_inf, first_sup)) = row.first() else {
            continue;
        };
        let uniform = row
            .iter()
            .all(|(_, inf, sup)| *inf == first_inf && *sup == first_sup);
        let small = |inf: &Alternative, sup: &Alternative| -> Result<bool> {
            Ok(interval_len(inf, sup)?.is_some_and(|n| n <= u128::from(bound)))
        };
        if uniform {
            if small(first_inf, first_sup)? {
                out.push((
                    ChoiceKey::Source(source.clone()),
                    enumerate_between(first_inf, first_sup)?,
                ));
            }
        } else {
            for (target, inf, sup) in row {
                if small(inf, sup)? {
                    out.push((
                        ChoiceKey::Entry(source.clone(), target.clone()),
                        enumerate_between(inf, sup)?,
                    ));
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// All combinations in lexicographic order of the (sorted) keys.
fn cartesian(choices: &[(ChoiceKey, Vec<Alternative>)]) -> Vec<BranchAssignment> {
    let mut out = vec![BranchAssignment::new()];
    for (key, options) in choices {
        out = out
            .into_iter()
            .flat_map(|partial| {
                options.iter().map(move |opt| {
                    let mut next = partial.clone();
                    next.insert(key.clone(), opt.clone());
                    next
                })
            })
            .collect();
    }
    out
}

fn join_ids(ids: &[SubjectId]) -> String {
    ids.iter()
        .map(SubjectId::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}

/// The stacked bracket rendering of a polynomial and its fold.
///
/// Each line brackets the nodes at one depth, deepest first; the last line
/// brackets the whole polynomial and shows that folding it returns the
/// polynomial unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalForm {
    lines: Vec<String>,
    folded: String,
    compact: bool,
}

impl DiagonalForm {
    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// Reads the polynomial back from the outermost bracket.
    pub fn fold(&self) -> Result<Polynomial> {
        let last = self.lines.last().expect("at least one line");
        let inner = last
            .strip_prefix('[')
            .and_then(|l| l.split_once("] = "))
            .map(|(inner, _)| inner)
            .ok_or_else(|| Error::Parse {
                input: last.clone(),
                reason: "diagonal form has no outer bracket".into(),
            })?;
        Polynomial::parse_with(inner, self.compact)
    }

    pub fn folded(&self) -> &str {
        &self.folded
    }
}

impl fmt::Display for DiagonalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lines.join("\n"))
    }
}

pub fn render_diagonal_form(p: &Polynomial) -> DiagonalForm {
    let compact = p.compact();
    let folded = p.rendered(compact);
    let mut lines: Vec<String> = (1..=p.depth())
        .rev()
        .map(|depth| {
            let mut out = String::new();
            bracket_at(p, 0, depth, compact, &mut out);
            out
        })
        .collect();
    lines.push(format!("[{folded}] = {folded}"));
    DiagonalForm {
        lines,
        folded,
        compact,
    }
}

fn bracket_at(p: &Polynomial, depth: usize, target: usize, compact: bool, out: &mut String) {
    if depth == target {
        out.push('[');
        p.render(compact, out);
        out.push(']');
        return;
    }
    match p {
        Polynomial::Var(s) => out.push_str(s.as_str()),
        Polynomial::Meet(children) => {
            for (i, child) in children.iter().enumerate() {
                if i > 0 && !compact {
                    out.push('·');
                }
                let wrap = matches!(child, Polynomial::Join(_)) && depth + 1 != target;
                if wrap {
                    out.push('(');
                }
                bracket_at(child, depth + 1, target, compact, out);
                if wrap {
                    out.push(')');
                }
            }
        }
        Polynomial::Join(children) => {
            for (i, child) in children.iter().enumerate() {
                if i > 0 {
                    out.push_str(" + ");
                }
                bracket_at(child, depth + 1, target, compact, out);
            }
        }
    }
}
