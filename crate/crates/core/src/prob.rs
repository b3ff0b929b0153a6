//! Finite probability distributions with exact arithmetic.
//!
//! The building blocks here are deliberately strict: a [`ClassicalState`] can
//! only be constructed if its entries are nonnegative rationals summing to
//! exactly one, an [`Ensemble`] only if its weights do the same, and a
//! [`CorrelatedState`] only if the whole joint table is a distribution. Code
//! downstream relies on these invariants instead of re-checking them.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rational::Rational;

/// Errors raised while building or combining distributions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbError {
    #[error("denominator must be nonzero")]
    ZeroDenominator,
    #[error("cannot parse {0:?} as a rational (expected \"n\" or \"n/d\")")]
    MalformedRational(String),
    #[error("an outcome space needs at least one label")]
    EmptySpace,
    #[error("duplicate outcome label {0:?}")]
    DuplicateLabel(String),
    #[error("expected {expected} probabilities, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("probability {0} is negative")]
    NegativeProbability(Rational),
    #[error("weight {0} is negative")]
    NegativeWeight(Rational),
    #[error("entries sum to {total}, not 1")]
    NotNormalized { total: Rational },
    #[error("outcome spaces do not match")]
    SpaceMismatch,
    #[error("an ensemble needs at least one member")]
    EmptyEnsemble,
}

/// The two ends of a shared correlated state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    Alice,
    Bob,
}

/// An ordered set of distinct outcome labels.
///
/// Label order is fixed at construction and is the canonical order for
/// probability vectors, sampling, and serialization.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl OutcomeSpace {
    pub fn new<I, S>(labels: I) -> Result<Self, ProbError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(ProbError::EmptySpace);
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.clone()) {
                return Err(ProbError::DuplicateLabel(label.clone()));
            }
        }
        Ok(OutcomeSpace { labels })
    }

    /// The binary space `{"0", "1"}`.
    pub fn bit() -> Self {
        Self::dits(2)
    }

    /// The space `{"0", "1", ..., "d-1"}`. Panics if `d == 0`.
    pub fn dits(d: u64) -> Self {
        assert!(d > 0, "an outcome space needs at least one label");
        OutcomeSpace {
            labels: (0..d).map(|v| v.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl fmt::Debug for OutcomeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OutcomeSpace{:?}", self.labels)
    }
}

/// A probability distribution over an [`OutcomeSpace`].
///
/// Entries are exact rationals, nonnegative, and sum to exactly one.
#[derive(Clone, PartialEq, Eq)]
pub struct ClassicalState {
    space: OutcomeSpace,
    probs: Vec<Rational>,
}

impl ClassicalState {
    pub fn new(space: OutcomeSpace, probs: Vec<Rational>) -> Result<Self, ProbError> {
        if probs.len() != space.len() {
            return Err(ProbError::LengthMismatch {
                expected: space.len(),
                got: probs.len(),
            });
        }
        if let Some(p) = probs.iter().find(|p| p.is_negative()) {
            return Err(ProbError::NegativeProbability(p.clone()));
        }
        let total: Rational = probs.iter().sum();
        if !total.is_one() {
            return Err(ProbError::NotNormalized { total });
        }
        Ok(ClassicalState { space, probs })
    }

    /// The uniform distribution.
    pub fn uniform(space: OutcomeSpace) -> Self {
        let d = space.len() as i64;
        let p = Rational::new(1, d).expect("space is never empty");
        ClassicalState {
            space,
            probs: vec![p; d as usize],
        }
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> &Rational {
        &self.probs[index]
    }

    /// Outcome indices carrying nonzero probability.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(i, _)| i)
    }

    /// Total variation distance: half the sum of absolute differences.
    pub fn total_variation(&self, other: &ClassicalState) -> Result<Rational, ProbError> {
        if self.space != other.space {
            return Err(ProbError::SpaceMismatch);
        }
        let sum: Rational = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(sum * Rational::new(1, 2).unwrap())
    }
}

impl fmt::Debug for ClassicalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClassicalState[")?;
        for (i, (label, p)) in self.space.labels().iter().zip(&self.probs).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{label}:{p}")?;
        }
        write!(f, "]")
    }
}

/// A convex mixture of states over a common space: pairs `(weight, state)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Ensemble {
    members: Vec<(Rational, ClassicalState)>,
}

impl Ensemble {
    pub fn new(members: Vec<(Rational, ClassicalState)>) -> Result<Self, ProbError> {
        let Some(first) = members.first() else {
            return Err(ProbError::EmptyEnsemble);
        };
        let space = first.1.space().clone();
        for (weight, state) in &members {
            if weight.is_negative() {
                return Err(ProbError::NegativeWeight(weight.clone()));
            }
            if state.space() != &space {
                return Err(ProbError::SpaceMismatch);
            }
        }
        let total: Rational = members.iter().map(|(w, _)| w).sum();
        if !total.is_one() {
            return Err(ProbError::NotNormalized { total });
        }
        Ok(Ensemble { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn members(&self) -> &[(Rational, ClassicalState)] {
        &self.members
    }

    pub fn weight(&self, j: usize) -> &Rational {
        &self.members[j].0
    }

    pub fn state(&self, j: usize) -> &ClassicalState {
        &self.members[j].1
    }

    /// The common outcome space of all members.
    pub fn member_space(&self) -> &OutcomeSpace {
        self.members[0].1.space()
    }

    /// The weighted average of the members, computed exactly.
    pub fn mix(&self) -> ClassicalState {
        let space = self.member_space().clone();
        let probs: Vec<Rational> = (0..space.len())
            .map(|i| {
                self.members
                    .iter()
                    .map(|(w, state)| w * state.prob(i))
                    .sum()
            })
            .collect();
        // Weights and members are normalized, so the mixture is too.
        ClassicalState { space, probs }
    }
}

/// A joint distribution over a pair of outcome spaces.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CorrelatedState {
    alice_space: OutcomeSpace,
    bob_space: OutcomeSpace,
    joint: Vec<Vec<Rational>>,
}

impl CorrelatedState {
    /// Builds a joint distribution from a row-major table: `joint[a][b]` is the
    /// probability that Alice holds outcome `a` while Bob holds outcome `b`.
    pub fn new(
        alice_space: OutcomeSpace,
        bob_space: OutcomeSpace,
        joint: Vec<Vec<Rational>>,
    ) -> Result<Self, ProbError> {
        if joint.len() != alice_space.len() {
            return Err(ProbError::LengthMismatch {
                expected: alice_space.len(),
                got: joint.len(),
            });
        }
        for row in &joint {
            if row.len() != bob_space.len() {
                return Err(ProbError::LengthMismatch {
                    expected: bob_space.len(),
                    got: row.len(),
                });
            }
            if let Some(p) = row.iter().find(|p| p.is_negative()) {
                return Err(ProbError::NegativeProbability(p.clone()));
            }
        }
        let total: Rational = joint.iter().flatten().sum();
        if !total.is_one() {
            return Err(ProbError::NotNormalized { total });
        }
        Ok(CorrelatedState {
            alice_space,
            bob_space,
            joint,
        })
    }

    /// The maximally correlated extension of `p`: both parties always hold the
    /// same outcome, drawn with the probabilities of `p`.
    pub fn fully_correlated(p: &ClassicalState) -> Self {
        let d = p.space().len();
        let mut joint = vec![vec![Rational::zero(); d]; d];
        for (i, row) in joint.iter_mut().enumerate() {
            row[i] = p.prob(i).clone();
        }
        CorrelatedState {
            alice_space: p.space().clone(),
            bob_space: p.space().clone(),
            joint,
        }
    }

    /// The product joint of two independent states.
    pub fn product(a: &ClassicalState, b: &ClassicalState) -> Self {
        let joint = a
            .probs()
            .iter()
            .map(|pa| b.probs().iter().map(|pb| pa * pb).collect())
            .collect();
        CorrelatedState {
            alice_space: a.space().clone(),
            bob_space: b.space().clone(),
            joint,
        }
    }

    pub fn alice_space(&self) -> &OutcomeSpace {
        &self.alice_space
    }

    pub fn bob_space(&self) -> &OutcomeSpace {
        &self.bob_space
    }

    pub fn entry(&self, a: usize, b: usize) -> &Rational {
        &self.joint[a][b]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.joint
    }

    /// True when both spaces coincide and all off-diagonal mass is zero.
    pub fn is_fully_correlated(&self) -> bool {
        self.alice_space == self.bob_space
            && self
                .joint
                .iter()
                .enumerate()
                .all(|(a, row)| row.iter().enumerate().all(|(b, p)| a == b || p.is_zero()))
    }

    /// Sums out the other party, leaving `party`'s local distribution.
    pub fn marginal(&self, party: Party) -> ClassicalState {
        match party {
            Party::Alice => {
                let probs = self.joint.iter().map(|row| row.iter().sum()).collect();
                ClassicalState {
                    space: self.alice_space.clone(),
                    probs,
                }
            }
            Party::Bob => {
                let probs = (0..self.bob_space.len())
                    .map(|b| self.joint.iter().map(|row| &row[b]).sum())
                    .collect();
                ClassicalState {
                    space: self.bob_space.clone(),
                    probs,
                }
            }
        }
    }

    /// Total variation distance between two joints over the same spaces.
    pub fn total_variation(&self, other: &CorrelatedState) -> Result<Rational, ProbError> {
        if self.alice_space != other.alice_space || self.bob_space != other.bob_space {
            return Err(ProbError::SpaceMismatch);
        }
        let sum: Rational = self
            .joint
            .iter()
            .flatten()
            .zip(other.joint.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(sum * Rational::new(1, 2).unwrap())
    }
}

// --- JSON encodings ---------------------------------------------------------
//
// States, ensembles, and joints travel as JSON with every probability printed
// as a fraction string. Deserialization runs the same validation as the
// constructors, so a non-normalized file is rejected at the parse boundary.

#[derive(Serialize, Deserialize)]
struct ClassicalStateRepr {
    space: Vec<String>,
    probs: Vec<Rational>,
}

impl TryFrom<ClassicalStateRepr> for ClassicalState {
    type Error = ProbError;
    fn try_from(repr: ClassicalStateRepr) -> Result<Self, ProbError> {
        ClassicalState::new(OutcomeSpace::new(repr.space)?, repr.probs)
    }
}

impl From<ClassicalState> for ClassicalStateRepr {
    fn from(state: ClassicalState) -> Self {
        ClassicalStateRepr {
            space: state.space.labels.clone(),
            probs: state.probs,
        }
    }
}

impl Serialize for ClassicalState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ClassicalStateRepr::from(self.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ClassicalState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = ClassicalStateRepr::deserialize(deserializer)?;
        ClassicalState::try_from(repr).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleMemberRepr {
    weight: Rational,
    probs: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleRepr {
    space: Vec<String>,
    members: Vec<EnsembleMemberRepr>,
}

impl TryFrom<EnsembleRepr> for Ensemble {
    type Error = ProbError;
    fn try_from(repr: EnsembleRepr) -> Result<Self, ProbError> {
        let space = OutcomeSpace::new(repr.space)?;
        let members = repr
            .members
            .into_iter()
            .map(|m| Ok((m.weight, ClassicalState::new(space.clone(), m.probs)?)))
            .collect::<Result<Vec<_>, ProbError>>()?;
        Ensemble::new(members)
    }
}

impl Serialize for Ensemble {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let repr = EnsembleRepr {
            space: self.member_space().labels.clone(),
            members: self
                .members
                .iter()
                .map(|(w, s)| EnsembleMemberRepr {
                    weight: w.clone(),
                    probs: s.probs.clone(),
                })
                .collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Ensemble {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = EnsembleRepr::deserialize(deserializer)?;
        Ensemble::try_from(repr).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct CorrelatedStateRepr {
    space: Vec<String>,
    joint: Vec<Vec<Rational>>,
}

impl Serialize for CorrelatedState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.alice_space != self.bob_space {
            return Err(serde::ser::Error::custom(
                "only joints over a single shared space have a JSON form",
            ));
        }
        let repr = CorrelatedStateRepr {
            space: self.alice_space.labels.clone(),
            joint: self.joint.clone(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CorrelatedState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = CorrelatedStateRepr::deserialize(deserializer)?;
        let space = OutcomeSpace::new(repr.space).map_err(serde::de::Error::custom)?;
        CorrelatedState::new(space.clone(), space, repr.joint).map_err(serde::de::Error::custom)
    }
}
