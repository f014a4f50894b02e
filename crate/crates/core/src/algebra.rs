//! The Boolean algebra of alternatives over a finite universal action set.
//!
//! An [`Alternative`] is a subset of the actions of an [`ActionUniverse`],
//! stored as a bit mask where bit `i` is the `i`-th declared action. The
//! algebra's `1` is the full set and `0` is the empty set.

use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported universe (one bit per action in a `u64`).
pub const MAX_ACTIONS: usize = 64;

#[derive(Debug)]
struct UniverseInner {
    actions: Vec<String>,
}

/// An ordered set of distinct action names.
///
/// The declaration order is canonical: bit positions, enumeration order and
/// rendering all follow it. Cloning is cheap and clones share storage.
#[derive(Debug, Clone)]
pub struct ActionUniverse(Arc<UniverseInner>);

impl ActionUniverse {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let actions: Vec<String> = names.into_iter().map(Into::into).collect();
        if actions.is_empty() {
            return Err(Error::EmptyUniverse);
        }
        if actions.len() > MAX_ACTIONS {
            return Err(Error::UniverseTooLarge {
                max: MAX_ACTIONS,
                got: actions.len(),
            });
        }
        for (i, name) in actions.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::EmptyActionName);
            }
            if name.contains(['{', '}', ',']) {
                return Err(Error::Schema(format!(
                    "action name `{name}` must not contain braces or commas"
                )));
            }
            if actions[..i].contains(name) {
                return Err(Error::DuplicateAction(name.clone()));
            }
        }
        Ok(Self(Arc::new(UniverseInner { actions })))
    }

    pub fn actions(&self) -> &[String] {
        &self.0.actions
    }

    pub fn size(&self) -> usize {
        self.0.actions.len()
    }

    fn mask(&self) -> u64 {
        if self.size() == MAX_ACTIONS {
            u64::MAX
        } else {
            (1u64 << self.size()) - 1
        }
    }

    pub fn index_of(&self, action: &str) -> Option<usize> {
        self.0.actions.iter().position(|a| a == action)
    }

    pub fn zero(&self) -> Alternative {
        Alternative {
            universe: self.clone(),
            bits: 0,
        }
    }

    pub fn one(&self) -> Alternative {
        Alternative {
            universe: self.clone(),
            bits: self.mask(),
        }
    }

    /// Builds the alternative containing exactly the named actions.
    pub fn alternative<I, S>(&self, actions: I) -> Result<Alternative>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut bits = 0;
        for action in actions {
            let action = action.as_ref();
            let i = self
                .index_of(action)
                .ok_or_else(|| Error::UnknownAction(action.to_owned()))?;
            bits |= 1 << i;
        }
        Ok(self.zero().with_bits(bits))
    }

    pub fn from_bits(&self, bits: u64) -> Result<Alternative> {
        if bits & !self.mask() != 0 {
            return Err(Error::Schema(format!(
                "bit pattern {bits:#b} exceeds a universe of {} actions",
                self.size()
            )));
        }
        Ok(self.zero().with_bits(bits))
    }

    /// Parses `0`, `1`, `{}` or a braced, comma-separated list of actions.
    pub fn parse_alternative(&self, text: &str) -> Result<Alternative> {
        let trimmed = text.trim();
        match trimmed {
            "0" => return Ok(self.zero()),
            "1" => return Ok(self.one()),
            _ => {}
        }
        let inner = trimmed
            .strip_prefix('{')
            .and_then(|t| t.strip_suffix('}'))
            .ok_or_else(|| Error::Parse {
                input: text.to_owned(),
                reason: "expected `0`, `1` or a braced action list".into(),
            })?;
        if inner.trim().is_empty() {
            return Ok(self.zero());
        }
        self.alternative(inner.split(',').map(str::trim))
    }

    /// Every alternative of the algebra, in bit-pattern order.
    pub fn all(&self) -> impl Iterator<Item = Alternative> + '_ {
        assert!(self.size() < MAX_ACTIONS, "universe too large to enumerate");
        (0..=self.mask()).map(move |bits| self.zero().with_bits(bits))
    }

    pub fn same_as(&self, other: &ActionUniverse) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.actions == other.0.actions
    }
}

impl PartialEq for ActionUniverse {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl Eq for ActionUniverse {}

impl Serialize for ActionUniverse {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.actions.serialize(serializer)
    }
}

/// An element of the Boolean algebra: a subset of the universe's actions.
#[derive(Debug, Clone)]
pub struct Alternative {
    universe: ActionUniverse,
    bits: u64,
}

impl Alternative {
    fn with_bits(mut self, bits: u64) -> Self {
        self.bits = bits;
        self
    }

    pub fn universe(&self) -> &ActionUniverse {
        &self.universe
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    pub fn is_one(&self) -> bool {
        self.bits == self.universe.mask()
    }

    /// Number of actions in the set.
    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn contains_action(&self, action: &str) -> bool {
        self.universe
            .index_of(action)
            .is_some_and(|i| self.bits & (1 << i) != 0)
    }

    /// Member actions in canonical order.
    pub fn actions(&self) -> impl Iterator<Item = &str> {
        self.universe
            .actions()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.bits & (1 << i) != 0)
            .map(|(_, a)| a.as_str())
    }

    fn check(&self, other: &Alternative) -> Result<()> {
        if self.universe.same_as(&other.universe) {
            Ok(())
        } else {
            Err(Error::UniverseMismatch)
        }
    }

    pub fn meet(&self, other: &Alternative) -> Result<Alternative> {
        self.check(other)?;
        Ok(self.clone().with_bits(self.bits & other.bits))
    }

    pub fn join(&self, other: &Alternative) -> Result<Alternative> {
        self.check(other)?;
        Ok(self.clone().with_bits(self.bits | other.bits))
    }

    pub fn complement(&self) -> Alternative {
        self.clone().with_bits(!self.bits & self.universe.mask())
    }

    /// Set inclusion `self ⊆ other`.
    pub fn leq(&self, other: &Alternative) -> Result<bool> {
        self.check(other)?;
        Ok(self.bits & !other.bits == 0)
    }
}

impl PartialEq for Alternative {
    fn eq(&self, other: &Self) -> bool {
        self.bits == other.bits && self.universe.same_as(&other.universe)
    }
}

impl Eq for Alternative {}

impl PartialOrd for Alternative {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order by bit pattern (the canonical enumeration order).
impl Ord for Alternative {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bits.cmp(&other.bits)
    }
}

impl std::hash::Hash for Alternative {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.bits.hash(state);
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, action) in self.actions().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(action)?;
        }
        f.write_str("}")
    }
}

impl Serialize for Alternative {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Number of alternatives `s` with `inf ⊆ s ⊆ sup`, or `None` when the
/// interval is empty.
pub fn interval_len(inf: &Alternative, sup: &Alternative) -> Result<Option<u128>> {
    if !inf.leq(sup)? {
        return Ok(None);
    }
    Ok(Some(1u128 << (sup.bits & !inf.bits).count_ones()))
}

/// All lattice elements between `inf` and `sup`, in bit-pattern order.
pub fn enumerate_between(inf: &Alternative, sup: &Alternative) -> Result<Vec<Alternative>> {
    if !inf.leq(sup)? {
        return Err(Error::EmptyInterval {
            inf: inf.to_string(),
            sup: sup.to_string(),
        });
    }
    let free = sup.bits & !inf.bits;
    let free_positions: Vec<u32> = (0..64).filter(|i| free & (1 << i) != 0).collect();
    assert!(
        free_positions.len() < 32,
        "interval with {} free actions is too large to enumerate",
        free_positions.len()
    );
    let count = 1u64 << free_positions.len();
    Ok((0..count)
        .map(|k| {
            let extra = free_positions
                .iter()
                .enumerate()
                .filter(|(j, _)| k & (1 << j) != 0)
                .fold(0u64, |acc, (_, &pos)| acc | (1 << pos));
            inf.clone().with_bits(inf.bits | extra)
        })
        .collect())
}
