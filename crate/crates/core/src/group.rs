//! Relationship graphs and the polynomials they decompose into.
//!
//! A group is a complete graph whose edges are labelled alliance or
//! conflict. A graph is decomposable when its subjects can be split
//! recursively into blocks whose cross-block relations are all alliances
//! (a meet, `·`) or all conflicts (a join, `+`).

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subject::SubjectId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Alliance,
    Conflict,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Alliance => "alliance",
            Relation::Conflict => "conflict",
        })
    }
}

/// A complete, edge-labelled graph over an ordered list of subjects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationshipGraph {
    subjects: Vec<SubjectId>,
    // Row-major n×n, symmetric; the diagonal is never read.
    relations: Vec<Relation>,
}

impl RelationshipGraph {
    pub fn new<I>(subjects: Vec<SubjectId>, relations: I) -> Result<Self>
    where
        I: IntoIterator<Item = (SubjectId, SubjectId, Relation)>,
    {
        if subjects.is_empty() {
            return Err(Error::EmptyGroup);
        }
        for (i, s) in subjects.iter().enumerate() {
            if subjects[..i].contains(s) {
                return Err(Error::DuplicateSubject(s.to_string()));
            }
        }
        let n = subjects.len();
        let index = |s: &SubjectId| {
            subjects
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| Error::UnknownSubject(s.to_string()))
        };
        let mut cells: Vec<Option<Relation>> = vec![None; n * n];
        for (a, b, relation) in relations {
            let (i, j) = (index(&a)?, index(&b)?);
            if i == j {
                return Err(Error::SelfRelation(a.to_string()));
            }
            if cells[i * n + j].is_some() {
                return Err(Error::DuplicateRelation(a.to_string(), b.to_string()));
            }
            cells[i * n + j] = Some(relation);
            cells[j * n + i] = Some(relation);
        }
        let mut relations = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                relations.push(match cells[i * n + j] {
                    Some(r) => r,
                    None if i == j => Relation::Alliance,
                    None => {
                        return Err(Error::IncompleteGraph(
                            subjects[i.min(j)].to_string(),
                            subjects[i.max(j)].to_string(),
                        ))
                    }
                });
            }
        }
        Ok(Self {
            subjects,
            relations,
        })
    }

    pub fn subjects(&self) -> &[SubjectId] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn contains(&self, subject: &SubjectId) -> bool {
        self.subjects.contains(subject)
    }

    fn index(&self, subject: &SubjectId) -> Result<usize> {
        self.subjects
            .iter()
            .position(|s| s == subject)
            .ok_or_else(|| Error::UnknownSubject(subject.to_string()))
    }

    fn at(&self, i: usize, j: usize) -> Relation {
        self.relations[i * self.len() + j]
    }

    pub fn relation(&self, a: &SubjectId, b: &SubjectId) -> Result<Relation> {
        let (i, j) = (self.index(a)?, self.index(b)?);
        if i == j {
            return Err(Error::SelfRelation(a.to_string()));
        }
        Ok(self.at(i, j))
    }

    /// Every unordered pair once, in subject declaration order.
    pub fn relations(&self) -> impl Iterator<Item = (&SubjectId, &SubjectId, Relation)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| {
            ((i + 1)..n).map(move |j| (&self.subjects[i], &self.subjects[j], self.at(i, j)))
        })
    }

    pub fn remove_subject(&self, subject: &SubjectId) -> Result<Self> {
        let removed = self.index(subject)?;
        if self.len() == 1 {
            return Err(Error::LastSubjectRemoval(subject.to_string()));
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != removed).collect();
        let relations = keep
            .iter()
            .flat_map(|&i| keep.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.at(i, j))
            .collect();
        Ok(Self {
            subjects: keep.iter().map(|&i| self.subjects[i].clone()).collect(),
            relations,
        })
    }

    pub fn set_relation(&self, a: &SubjectId, b: &SubjectId, relation: Relation) -> Result<Self> {
        let (i, j) = (self.index(a)?, self.index(b)?);
        if i == j {
            return Err(Error::SelfRelation(a.to_string()));
        }
        let mut next = self.clone();
        let n = self.len();
        next.relations[i * n + j] = relation;
        next.relations[j * n + i] = relation;
        Ok(next)
    }

    /// Splits the graph into its polynomial, or reports `NotDecomposable`.
    ///
    /// At each level the finest partition with uniform cross-block relations
    /// is taken: the connected components of the conflict edges give a meet,
    /// otherwise the components of the alliance edges give a join.
    pub fn decompose(&self) -> Result<Polynomial> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.decompose_block(&all)
    }

    fn decompose_block(&self, block: &[usize]) -> Result<Polynomial> {
        if let [only] = block {
            return Ok(Polynomial::Var(self.subjects[*only].clone()));
        }
        let conflict_parts = self.components(block, Relation::Conflict);
        if conflict_parts.len() > 1 {
            let children = conflict_parts
                .iter()
                .map(|part| self.decompose_block(part))
                .collect::<Result<Vec<_>>>()?;
            return Ok(Polynomial::meet(children));
        }
        let alliance_parts = self.components(block, Relation::Alliance);
        if alliance_parts.len() > 1 {
            let children = alliance_parts
                .iter()
                .map(|part| self.decompose_block(part))
                .collect::<Result<Vec<_>>>()?;
            return Ok(Polynomial::join(children));
        }
        let names: Vec<&str> = block.iter().map(|&i| self.subjects[i].as_str()).collect();
        Err(Error::NotDecomposable(names.join(", ")))
    }

    /// Connected components of `block` using only edges labelled `edge`.
    fn components(&self, block: &[usize], edge: Relation) -> Vec<Vec<usize>> {
        let mut seen = vec![false; block.len()];
        let mut parts = Vec::new();
        for start in 0..block.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut part = vec![block[start]];
            let mut stack = vec![start];
            while let Some(k) = stack.pop() {
                for m in 0..block.len() {
                    if !seen[m] && self.at(block[k], block[m]) == edge {
                        seen[m] = true;
                        part.push(block[m]);
                        stack.push(m);
                    }
                }
            }
            part.sort_unstable();
            parts.push(part);
        }
        parts
    }

    /// Graphviz rendering: solid edges for alliance, dashed for conflict.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph group {\n");
        for s in &self.subjects {
            let _ = writeln!(out, "  \"{s}\";");
        }
        for (a, b, relation) in self.relations() {
            let style = match relation {
                Relation::Alliance => "solid",
                Relation::Conflict => "dashed",
            };
            let _ = writeln!(
                out,
                "  \"{a}\" -- \"{b}\" [style={style}, label=\"{relation}\"];"
            );
        }
        out.push_str("}\n");
        out
    }
}

impl Serialize for RelationshipGraph {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("RelationshipGraph", 3)?;
        st.serialize_field("subjects", &self.subjects)?;
        let relations: Vec<(&SubjectId, &SubjectId, Relation)> = self.relations().collect();
        st.serialize_field("relations", &relations)?;
        st.serialize_field("polynomial", &self.decompose().ok())?;
        st.end()
    }
}

/// Group structure as a term over subject variables.
///
/// Constructed through [`Polynomial::meet`] and [`Polynomial::join`], which
/// flatten nested nodes of the same kind and order children by their least
/// subject.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Polynomial {
    Var(SubjectId),
    Meet(Vec<Polynomial>),
    Join(Vec<Polynomial>),
}

impl Polynomial {
    pub fn var(id: SubjectId) -> Self {
        Polynomial::Var(id)
    }

    pub fn meet(children: Vec<Polynomial>) -> Self {
        Self::node(children, true)
    }

    pub fn join(children: Vec<Polynomial>) -> Self {
        Self::node(children, false)
    }

    fn node(children: Vec<Polynomial>, is_meet: bool) -> Self {
        let mut flat = Vec::with_capacity(children.len());
        for child in children {
            match child {
                Polynomial::Meet(inner) if is_meet => flat.extend(inner),
                Polynomial::Join(inner) if !is_meet => flat.extend(inner),
                other => flat.push(other),
            }
        }
        assert!(!flat.is_empty(), "polynomial node needs children");
        if flat.len() == 1 {
            return flat.pop().expect("one child");
        }
        flat.sort_by(|a, b| a.least_subject().cmp(b.least_subject()));
        if is_meet {
            Polynomial::Meet(flat)
        } else {
            Polynomial::Join(flat)
        }
    }

    pub fn least_subject(&self) -> &SubjectId {
        match self {
            Polynomial::Var(s) => s,
            Polynomial::Meet(c) | Polynomial::Join(c) => c
                .iter()
                .map(Polynomial::least_subject)
                .min()
                .expect("non-empty node"),
        }
    }

    /// Subjects in canonical (name) order.
    pub fn subjects(&self) -> Vec<SubjectId> {
        let mut out = Vec::new();
        self.collect_subjects(&mut out);
        out.sort();
        out
    }

    fn collect_subjects(&self, out: &mut Vec<SubjectId>) {
        match self {
            Polynomial::Var(s) => out.push(s.clone()),
            Polynomial::Meet(c) | Polynomial::Join(c) => {
                c.iter().for_each(|child| child.collect_subjects(out))
            }
        }
    }

    pub fn contains(&self, subject: &SubjectId) -> bool {
        match self {
            Polynomial::Var(s) => s == subject,
            Polynomial::Meet(c) | Polynomial::Join(c) => c.iter().any(|p| p.contains(subject)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Polynomial::Var(_) => 0,
            Polynomial::Meet(c) | Polynomial::Join(c) => {
                1 + c.iter().map(Polynomial::depth).max().unwrap_or(0)
            }
        }
    }

    /// The complete graph this polynomial describes: two subjects are allied
    /// exactly when their least common ancestor is a meet.
    pub fn to_graph(&self) -> RelationshipGraph {
        let mut relations = Vec::new();
        self.collect_relations(&mut relations);
        RelationshipGraph::new(self.subjects(), relations)
            .expect("a polynomial names each subject once")
    }

    fn collect_relations(&self, out: &mut Vec<(SubjectId, SubjectId, Relation)>) {
        let (children, relation) = match self {
            Polynomial::Var(_) => return,
            Polynomial::Meet(c) => (c, Relation::Alliance),
            Polynomial::Join(c) => (c, Relation::Conflict),
        };
        for (i, left) in children.iter().enumerate() {
            for right in &children[i + 1..] {
                for a in left.subjects() {
                    for b in right.subjects() {
                        out.push((a.clone(), b, relation));
                    }
                }
            }
        }
        children.iter().for_each(|c| c.collect_relations(out));
    }

    /// Whether every subject name is one character, so meets can be written
    /// by juxtaposition (`abd`) instead of with `·`.
    pub(crate) fn compact(&self) -> bool {
        self.subjects()
            .iter()
            .all(|s| s.as_str().chars().count() == 1)
    }

    pub(crate) fn render(&self, compact: bool, out: &mut String) {
        match self {
            Polynomial::Var(s) => out.push_str(s.as_str()),
            Polynomial::Meet(children) => {
                for (i, child) in children.iter().enumerate() {
                    if i > 0 && !compact {
                        out.push('·');
                    }
                    if matches!(child, Polynomial::Join(_)) {
                        out.push('(');
                        child.render(compact, out);
                        out.push(')');
                    } else {
                        child.render(compact, out);
                    }
                }
            }
            Polynomial::Join(children) => {
                for (i, child) in children.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" + ");
                    }
                    child.render(compact, out);
                }
            }
        }
    }

    pub(crate) fn rendered(&self, compact: bool) -> String {
        let mut out = String::new();
        self.render(compact, &mut out);
        out
    }

    /// Parses a polynomial such as `abd + c` or `x1·y2 + z`.
    ///
    /// Every letter is its own subject unless the text contains `·`, `*`,
    /// a digit or `_`; then identifiers are whole alphanumeric runs. Use
    /// [`Polynomial::parse_with`] for multi-letter names without a meet.
    pub fn parse(text: &str) -> Result<Polynomial> {
        let compact = !text.contains(|c: char| matches!(c, '·' | '*' | '_') || c.is_numeric());
        Self::parse_with(text, compact)
    }

    /// Parses with an explicit identifier mode: `compact` reads every letter
    /// as a subject, otherwise identifiers are whole alphanumeric runs.
    pub fn parse_with(text: &str, compact: bool) -> Result<Polynomial> {
        let mut parser = PolyParser {
            input: text,
            pos: 0,
            compact,
        };
        let p = parser.expr()?;
        parser.skip_ws();
        if parser.pos != text.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        let mut seen = BTreeSet::new();
        let mut all = Vec::new();
        p.collect_subjects(&mut all);
        for s in all {
            if !seen.insert(s.clone()) {
                return Err(parser.error(&format!("subject `{s}` appears more than once")));
            }
        }
        Ok(p)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered(self.compact()))
    }
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

struct PolyParser<'a> {
    input: &'a str,
    pos: usize,
    compact: bool,
}

impl PolyParser<'_> {
    fn error(&self, reason: &str) -> Error {
        Error::Parse {
            input: self.input.to_owned(),
            reason: format!("{reason} at byte {}", self.pos),
        }
    }

    fn rest(&self) -> &str {
        &self.input[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.input.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut children = vec![self.term()?];
        while self.peek() == Some('+') {
            self.pos += 1;
            children.push(self.term()?);
        }
        Ok(Polynomial::join(children))
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut children = vec![self.factor()?];
        loop {
            match self.peek() {
                Some(c @ ('·' | '*')) => {
                    self.pos += c.len_utf8();
                    children.push(self.factor()?);
                }
                Some(c) if c == '(' || c.is_alphabetic() || c == '_' => {
                    children.push(self.factor()?)
                }
                _ => return Ok(Polynomial::meet(children)),
            }
        }
    }

    fn factor(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                let len = if self.compact {
                    c.len_utf8()
                } else {
                    self.rest()
                        .find(|c: char| !(c.is_alphanumeric() || c == '_'))
                        .unwrap_or(self.rest().len())
                };
                let id = SubjectId::new(&self.rest()[..len])?;
                self.pos += len;
                Ok(Polynomial::Var(id))
            }
            _ => Err(self.error("expected a subject or `(`")),
        }
    }
}
