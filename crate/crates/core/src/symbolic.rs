//! Monotone symbolic expressions over set constants and subject variables.
//!
//! An expression is a join of terms, each term being a constant coefficient
//! met with a set of variables. Expressions are kept in a canonical form:
//!
//! * terms with an empty coefficient are dropped (the zero expression has no
//!   terms at all);
//! * every term's variable set is a minimal implicant for at least one action,
//!   and its coefficient holds every action the variable set implies;
//! * terms are sorted by variable set.
//!
//! Because the algebra operates action by action, this form is unique for a
//! given function, so structural equality coincides with semantic equality.
//! It also guarantees that no term is absorbed by another.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::algebra::{ActionUniverse, Alternative};
use crate::error::{Error, Result};
use crate::subject::SubjectId;

/// A single term `coefficient · v1 · v2 · …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    coefficient: u64,
    variables: BTreeSet<SubjectId>,
}

impl Term {
    pub fn variables(&self) -> &BTreeSet<SubjectId> {
        &self.variables
    }

    pub fn coefficient_bits(&self) -> u64 {
        self.coefficient
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicExpr {
    universe: ActionUniverse,
    terms: Vec<Term>,
}

/// Size limits for exhaustive containment checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Guard {
    pub max_variables: usize,
    pub max_actions: usize,
}

impl Default for Guard {
    fn default() -> Self {
        Self {
            max_variables: 4,
            max_actions: 12,
        }
    }
}

impl SymbolicExpr {
    pub fn constant(value: &Alternative) -> Self {
        Self::from_raw(value.universe().clone(), [(BTreeSet::new(), value.bits())])
    }

    pub fn variable(subject: SubjectId, universe: &ActionUniverse) -> Self {
        Self::from_raw(
            universe.clone(),
            [(BTreeSet::from([subject]), universe.one().bits())],
        )
    }

    pub fn zero(universe: &ActionUniverse) -> Self {
        Self {
            universe: universe.clone(),
            terms: Vec::new(),
        }
    }

    pub fn one(universe: &ActionUniverse) -> Self {
        Self::constant(&universe.one())
    }

    /// Canonicalizes an arbitrary collection of `(variables, coefficient)` terms.
    fn from_raw<I>(universe: ActionUniverse, raw: I) -> Self
    where
        I: IntoIterator<Item = (BTreeSet<SubjectId>, u64)>,
    {
        let mut merged: BTreeMap<BTreeSet<SubjectId>, u64> = BTreeMap::new();
        for (vars, coefficient) in raw {
            if coefficient != 0 {
                *merged.entry(vars).or_default() |= coefficient;
            }
        }
        let mut terms = Vec::with_capacity(merged.len());
        for (vars, &coefficient) in &merged {
            let implied_by_subsets = merged
                .iter()
                .filter(|(other, _)| *other != vars && other.is_subset(vars))
                .fold(0u64, |acc, (_, c)| acc | c);
            // Keep the term only if it is a minimal implicant for some action.
            if coefficient & !implied_by_subsets != 0 {
                terms.push(Term {
                    coefficient: coefficient | implied_by_subsets,
                    variables: vars.clone(),
                });
            }
        }
        Self { universe, terms }
    }

    pub fn universe(&self) -> &ActionUniverse {
        &self.universe
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn coefficient(&self, term: &Term) -> Alternative {
        self.universe
            .from_bits(term.coefficient)
            .expect("term coefficient within universe")
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn is_ground(&self) -> bool {
        self.terms.iter().all(|t| t.variables.is_empty())
    }

    /// The constant value of a ground expression.
    pub fn as_constant(&self) -> Option<Alternative> {
        match self.terms.as_slice() {
            [] => Some(self.universe.zero()),
            [t] if t.variables.is_empty() => Some(self.coefficient(t)),
            _ => None,
        }
    }

    pub fn free_variables(&self) -> BTreeSet<SubjectId> {
        self.terms
            .iter()
            .flat_map(|t| t.variables.iter().cloned())
            .collect()
    }

    fn check(&self, other: &SymbolicExpr) -> Result<()> {
        if self.universe.same_as(&other.universe) {
            Ok(())
        } else {
            Err(Error::UniverseMismatch)
        }
    }

    pub fn meet(&self, other: &SymbolicExpr) -> Result<SymbolicExpr> {
        self.check(other)?;
        let products = self.terms.iter().flat_map(|a| {
            other.terms.iter().map(move |b| {
                (
                    a.variables.union(&b.variables).cloned().collect(),
                    a.coefficient & b.coefficient,
                )
            })
        });
        Ok(Self::from_raw(self.universe.clone(), products))
    }

    pub fn join(&self, other: &SymbolicExpr) -> Result<SymbolicExpr> {
        self.check(other)?;
        let all = self
            .terms
            .iter()
            .chain(&other.terms)
            .map(|t| (t.variables.clone(), t.coefficient));
        Ok(Self::from_raw(self.universe.clone(), all))
    }

    /// Replaces bound variables by their expressions; unbound ones stay.
    pub fn substitute(&self, bindings: &BTreeMap<SubjectId, SymbolicExpr>) -> Result<SymbolicExpr> {
        let mut result = SymbolicExpr::zero(&self.universe);
        for term in &self.terms {
            let mut kept = BTreeSet::new();
            let mut product =
                Self::from_raw(self.universe.clone(), [(BTreeSet::new(), term.coefficient)]);
            for var in &term.variables {
                match bindings.get(var) {
                    Some(bound) => product = product.meet(bound)?,
                    None => {
                        kept.insert(var.clone());
                    }
                }
            }
            if !kept.is_empty() {
                let rest =
                    Self::from_raw(self.universe.clone(), [(kept, self.universe.one().bits())]);
                product = product.meet(&rest)?;
            }
            result = result.join(&product)?;
        }
        Ok(result)
    }

    /// Evaluates the expression under a complete assignment.
    pub fn eval(&self, assignment: &BTreeMap<SubjectId, Alternative>) -> Result<Alternative> {
        let mut bits = 0u64;
        for term in &self.terms {
            let mut value = term.coefficient;
            for var in &term.variables {
                let bound = assignment
                    .get(var)
                    .ok_or_else(|| Error::UnboundVariable(var.to_string()))?;
                if !bound.universe().same_as(&self.universe) {
                    return Err(Error::UniverseMismatch);
                }
                value &= bound.bits();
            }
            bits |= value;
        }
        self.universe.from_bits(bits)
    }

    /// Decides `self ⊆ other` for every assignment of the free variables.
    ///
    /// All operations act on each action independently, so the check runs
    /// over every Boolean assignment of the variables once per action, which
    /// covers every assignment of alternatives.
    pub fn leq(&self, other: &SymbolicExpr, guard: Guard) -> Result<bool> {
        self.check(other)?;
        let vars: Vec<SubjectId> = self
            .free_variables()
            .union(&other.free_variables())
            .cloned()
            .collect();
        if vars.len() > guard.max_variables {
            return Err(Error::GuardExceeded(format!(
                "{} free variables, limit {}",
                vars.len(),
                guard.max_variables
            )));
        }
        if self.universe.size() > guard.max_actions {
            return Err(Error::GuardExceeded(format!(
                "{} actions, limit {}",
                self.universe.size(),
                guard.max_actions
            )));
        }
        let masks = |e: &SymbolicExpr| -> Vec<(u64, u32)> {
            e.terms
                .iter()
                .map(|t| {
                    let m = t
                        .variables
                        .iter()
                        .map(|v| vars.iter().position(|x| x == v).expect("collected"))
                        .fold(0u32, |acc, i| acc | (1 << i));
                    (t.coefficient, m)
                })
                .collect()
        };
        let lhs = masks(self);
        let rhs = masks(other);
        let holds = |terms: &[(u64, u32)], action: usize, assignment: u32| {
            terms
                .iter()
                .any(|&(c, m)| c & (1 << action) != 0 && m & !assignment == 0)
        };
        for action in 0..self.universe.size() {
            for assignment in 0..(1u32 << vars.len()) {
                if holds(&lhs, action, assignment) && !holds(&rhs, action, assignment) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Parses the rendering grammar: terms joined by `+`, factors joined by
    /// `·`, `*` or juxtaposition, factors being `0`, `1`, `{…}`, a subject
    /// identifier or a parenthesized expression.
    pub fn parse(text: &str, universe: &ActionUniverse) -> Result<SymbolicExpr> {
        let mut parser = Parser {
            input: text,
            pos: 0,
            universe,
        };
        let expr = parser.expr()?;
        parser.skip_ws();
        if parser.pos != text.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(expr)
    }
}

impl fmt::Display for SymbolicExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let full = self.universe.one().bits();
        for (i, term) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            let mut parts: Vec<String> = Vec::new();
            if term.variables.is_empty() {
                parts.push(if term.coefficient == full {
                    "1".to_owned()
                } else {
                    self.coefficient(term).to_string()
                });
            } else if term.coefficient != full {
                parts.push(self.coefficient(term).to_string());
            }
            parts.extend(term.variables.iter().map(ToString::to_string));
            f.write_str(&parts.join("·"))?;
        }
        Ok(())
    }
}

impl Serialize for SymbolicExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

struct Parser<'a> {
    input: &'a str,
    pos: usize,
    universe: &'a ActionUniverse,
}

impl Parser<'_> {
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

    fn bump(&mut self, c: char) {
        self.pos += c.len_utf8();
    }

    fn expr(&mut self) -> Result<SymbolicExpr> {
        let mut acc = self.term()?;
        while self.peek() == Some('+') {
            self.bump('+');
            acc = acc.join(&self.term()?)?;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<SymbolicExpr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(c @ ('·' | '*')) => {
                    self.bump(c);
                    acc = acc.meet(&self.factor()?)?;
                }
                Some(c) if starts_factor(c) => acc = acc.meet(&self.factor()?)?,
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<SymbolicExpr> {
        match self.peek() {
            Some('(') => {
                self.bump('(');
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.bump(')');
                Ok(inner)
            }
            Some('{') => {
                let end = self
                    .rest()
                    .find('}')
                    .ok_or_else(|| self.error("unterminated `{`"))?;
                let literal = &self.rest()[..=end];
                let value = self.universe.parse_alternative(literal)?;
                self.pos += end + 1;
                Ok(SymbolicExpr::constant(&value))
            }
            Some(c @ ('0' | '1')) => {
                self.bump(c);
                if self
                    .rest()
                    .starts_with(|c: char| c.is_alphanumeric() || c == '_')
                {
                    return Err(self.error("identifiers cannot start with a digit"));
                }
                Ok(if c == '0' {
                    SymbolicExpr::zero(self.universe)
                } else {
                    SymbolicExpr::one(self.universe)
                })
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                let len = self
                    .rest()
                    .find(|c: char| !(c.is_alphanumeric() || c == '_'))
                    .unwrap_or(self.rest().len());
                let name = &self.rest()[..len];
                let id = SubjectId::new(name)?;
                self.pos += len;
                Ok(SymbolicExpr::variable(id, self.universe))
            }
            _ => Err(self.error("expected a factor")),
        }
    }
}

fn starts_factor(c: char) -> bool {
    c == '(' || c == '{' || c == '0' || c == '1' || c.is_alphabetic() || c == '_'
}
