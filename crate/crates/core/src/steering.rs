//! Remote steering of an ensemble over a shared fully correlated state, with
//! zero communication.
//!
//! Alice and Bob share a fully correlated state whose common marginal is
//! `p`. A target decomposition of `p` into weighted members `(w_j, P_j)` is
//! turned into a [`SteeringPlan`]: one generalized coin `Q_i` per Alice
//! outcome `i` with `p_i > 0`, derived by the conditioning rule
//!
//! ```text
//! Q_i(j) = w_j * P_j(i) / p_i
//! ```
//!
//! Executing the plan, Alice looks at her part of the shared state, throws
//! the matching coin, announces the coin's result `j`, and forgets what she
//! saw. Verification is by exact enumeration: the announcement lands on `j`
//! with probability exactly `w_j`, and conditioned on the announcement Bob's
//! part is distributed exactly as `P_j`. Nothing is ever sent to Bob, which
//! [`verify_no_communication`] checks on the transcript.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::prob::{ClassicalState, CorrelatedState, Ensemble, OutcomeSpace, Party, ProbError};
use crate::rational::Rational;
use crate::runtime::{Actor, EventKind, RandomSource, Sampler, Transcript, Visibility};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SteeringError {
    #[error("the shared resource is not fully correlated")]
    NotFullyCorrelated,
    #[error("the target ensemble averages to a different state than the resource marginal")]
    EnsembleMismatch {
        marginal: ClassicalState,
        mix: ClassicalState,
    },
    #[error("no coin for outcome {0:?}, which has nonzero probability")]
    MissingCoin(String),
    #[error("coin for outcome {0:?} refers to no such outcome in the resource")]
    UnknownCoinLabel(String),
    #[error("coin for outcome {outcome:?} is unusable: {reason}")]
    InvalidCoin { outcome: String, reason: ProbError },
    #[error("coin given for outcome {0:?}, which has probability zero")]
    CoinForZeroOutcome(String),
}

/// A full steering strategy: the shared resource, the target decomposition,
/// and one generalized coin per Alice outcome in the support.
///
/// Coins are stored as raw probability rows over the member indices so that a
/// hand-edited plan can still be loaded and *checked*; [`analyze`] decides
/// whether the rows are consistent. Plans built by [`derive_plan`] always
/// carry valid, consistent coins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SteeringPlan {
    resource: CorrelatedState,
    target: Ensemble,
    coins: BTreeMap<usize, Vec<Rational>>,
}

impl SteeringPlan {
    /// Assembles a plan from parts, checking structure only: the resource is
    /// fully correlated, the target mixes to its marginal, and there is a
    /// coin row of the right length with nonnegative entries for exactly the
    /// outcomes with nonzero probability. Whether the rows actually steer the
    /// target is the job of [`analyze`].
    pub fn from_parts(
        resource: CorrelatedState,
        target: Ensemble,
        coins: BTreeMap<usize, Vec<Rational>>,
    ) -> Result<Self, SteeringError> {
        if !resource.is_fully_correlated() {
            return Err(SteeringError::NotFullyCorrelated);
        }
        let marginal = resource.marginal(Party::Bob);
        let mix = target.mix();
        if mix != marginal {
            return Err(SteeringError::EnsembleMismatch { marginal, mix });
        }
        let space = marginal.space();
        for (&i, row) in &coins {
            let label = || space.label(i).to_string();
            if i >= space.len() {
                return Err(SteeringError::UnknownCoinLabel(i.to_string()));
            }
            if marginal.prob(i).is_zero() {
                return Err(SteeringError::CoinForZeroOutcome(label()));
            }
            if row.len() != target.len() {
                return Err(SteeringError::InvalidCoin {
                    outcome: label(),
                    reason: ProbError::LengthMismatch {
                        expected: target.len(),
                        got: row.len(),
                    },
                });
            }
            if let Some(q) = row.iter().find(|q| q.is_negative()) {
                return Err(SteeringError::InvalidCoin {
                    outcome: label(),
                    reason: ProbError::NegativeProbability(q.clone()),
                });
            }
        }
        for i in marginal.support() {
            if !coins.contains_key(&i) {
                return Err(SteeringError::MissingCoin(space.label(i).to_string()));
            }
        }
        Ok(SteeringPlan {
            resource,
            target,
            coins,
        })
    }

    pub fn resource(&self) -> &CorrelatedState {
        &self.resource
    }

    pub fn target(&self) -> &Ensemble {
        &self.target
    }

    /// Coin rows keyed by Alice outcome index, in outcome order.
    pub fn coins(&self) -> &BTreeMap<usize, Vec<Rational>> {
        &self.coins
    }

    /// The outcome space the announcements live in: member indices as labels.
    pub fn member_index_space(&self) -> OutcomeSpace {
        OutcomeSpace::dits(self.target.len() as u64)
    }

    /// The coin for outcome `i` as a sampleable distribution.
    pub fn coin_state(&self, i: usize) -> Result<ClassicalState, SteeringError> {
        let space = self.resource.bob_space();
        let row = self
            .coins
            .get(&i)
            .ok_or_else(|| SteeringError::MissingCoin(space.label(i).to_string()))?;
        ClassicalState::new(self.member_index_space(), row.clone()).map_err(|reason| {
            SteeringError::InvalidCoin {
                outcome: space.label(i).to_string(),
                reason,
            }
        })
    }

    /// Checks the defining identity `Q_i(j) * p_i == w_j * P_j(i)` for every
    /// outcome in the support and every member, exactly.
    pub fn is_consistent(&self) -> bool {
        let marginal = self.resource.marginal(Party::Bob);
        let support: Vec<usize> = marginal.support().collect();
        support.into_iter().all(|i| {
            let Some(row) = self.coins.get(&i) else {
                return false;
            };
            self.target
                .members()
                .iter()
                .enumerate()
                .all(|(j, (w, s))| &row[j] * marginal.prob(i) == w * s.prob(i))
        })
    }

    /// The joint distribution of (announcement, Bob outcome) implied by the
    /// plan. Fails if the coin rows do not form a distribution overall.
    pub fn exact_joint(&self) -> Result<CorrelatedState, ProbError> {
        let marginal = self.resource.marginal(Party::Bob);
        let n_j = self.target.len();
        let n_i = marginal.space().len();
        let mut joint = vec![vec![Rational::zero(); n_i]; n_j];
        for (&i, row) in &self.coins {
            for (j, q) in row.iter().enumerate() {
                joint[j][i] = marginal.prob(i) * q;
            }
        }
        CorrelatedState::new(self.member_index_space(), marginal.space().clone(), joint)
    }
}

/// Derives the steering plan for `target` over `resource` by exact
/// conditioning, one coin per outcome of nonzero probability.
pub fn derive_plan(
    resource: CorrelatedState,
    target: Ensemble,
) -> Result<SteeringPlan, SteeringError> {
    if !resource.is_fully_correlated() {
        return Err(SteeringError::NotFullyCorrelated);
    }
    let marginal = resource.marginal(Party::Bob);
    let mix = target.mix();
    if mix != marginal {
        return Err(SteeringError::EnsembleMismatch { marginal, mix });
    }
    let mut coins = BTreeMap::new();
    for i in marginal.support() {
        let p_i = marginal.prob(i);
        let row: Vec<Rational> = target
            .members()
            .iter()
            .map(|(w, member)| w * member.prob(i) / p_i)
            .collect();
        coins.insert(i, row);
    }
    Ok(SteeringPlan {
        resource,
        target,
        coins,
    })
}

/// What one run of the protocol produced.
#[derive(Debug, Clone)]
pub struct SteeringOutcome {
    announced: usize,
    bob_outcome: String,
    transcript: Transcript,
}

impl SteeringOutcome {
    /// Index of the ensemble member Alice announced.
    pub fn announced_index(&self) -> usize {
        self.announced
    }

    /// The announcement as a label of the member-index space.
    pub fn announced_label(&self) -> String {
        self.announced.to_string()
    }

    /// The outcome Bob's part of the shared state carries.
    pub fn bob_outcome(&self) -> &str {
        &self.bob_outcome
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

/// Runs the protocol once: look, throw the matching coin, forget, announce.
pub fn execute(
    plan: &SteeringPlan,
    rng: &mut RandomSource,
) -> Result<SteeringOutcome, SteeringError> {
    let mut transcript = Transcript::new(rng.seed());
    let marginal = plan.resource.marginal(Party::Bob);

    // One draw realizes both halves of the fully correlated state.
    let i = Sampler::new(&marginal).draw_index(rng);
    let label = marginal.space().label(i).to_string();
    transcript.record(
        Actor::Referee,
        EventKind::Share,
        format!("shared={label}"),
        Visibility::RefereeOnly,
    );
    transcript.record(
        Actor::Alice,
        EventKind::Sample,
        format!("observed={label}"),
        Visibility::RefereeOnly,
    );
    transcript.record(
        Actor::Bob,
        EventKind::Sample,
        format!("held={label}"),
        Visibility::PartyPrivate,
    );

    let coin = plan.coin_state(i)?;
    let j = Sampler::new(&coin).draw_index(rng);
    transcript.record(
        Actor::Alice,
        EventKind::Sample,
        format!("coin={j}"),
        Visibility::PartyPrivate,
    );
    transcript.record(
        Actor::Alice,
        EventKind::Forget,
        format!("observed={label}"),
        Visibility::RefereeOnly,
    );
    transcript.record(
        Actor::Alice,
        EventKind::Outcome,
        format!("announced={j}"),
        Visibility::Public,
    );

    Ok(SteeringOutcome {
        announced: j,
        bob_outcome: label,
        transcript,
    })
}

/// Exact account of what a plan's coins actually produce.
#[derive(Debug, Clone, Serialize)]
pub struct SteeringAnalysis {
    /// Distribution of the announcement, entry per member index. For a
    /// consistent plan this equals the target weights.
    pub announced: Vec<Rational>,
    /// Bob's state conditioned on each announcement; `None` where the
    /// announcement has probability zero.
    pub conditionals: Vec<Option<ClassicalState>>,
    /// Members the target itself assigns zero weight. These cannot be
    /// produced and are reported rather than fabricated.
    pub zero_weight_members: Vec<usize>,
    /// The announcement lands on every member with exactly its target weight.
    pub announced_matches_weights: bool,
    /// Conditioned on each announceable member, Bob holds exactly that
    /// member's state.
    pub conditionals_match_members: bool,
}

/// Enumerates the joint behaviour of the plan's coins exactly.
///
/// This recomputes everything from the coin rows and the resource marginal.
/// It shares no code path with [`derive_plan`], so the two sides check each
/// other: a plan whose rows were edited by hand fails here even though it
/// loaded fine.
pub fn analyze(plan: &SteeringPlan) -> SteeringAnalysis {
    let marginal = plan.resource.marginal(Party::Bob);
    let n_i = marginal.space().len();
    let n_j = plan.target.len();

    let mut announced = vec![Rational::zero(); n_j];
    let mut joint = vec![vec![Rational::zero(); n_i]; n_j];
    for (&i, row) in &plan.coins {
        let p_i = marginal.prob(i);
        for (j, q) in row.iter().enumerate() {
            let mass = p_i * q;
            announced[j] = &announced[j] + &mass;
            joint[j][i] = mass;
        }
    }

    let conditionals: Vec<Option<ClassicalState>> = (0..n_j)
        .map(|j| {
            if announced[j].is_zero() {
                return None;
            }
            let probs: Vec<Rational> = joint[j].iter().map(|m| m / &announced[j]).collect();
            Some(
                ClassicalState::new(marginal.space().clone(), probs)
                    .expect("normalized by division"),
            )
        })
        .collect();

    let zero_weight_members: Vec<usize> = plan
        .target
        .members()
        .iter()
        .enumerate()
        .filter(|(_, (w, _))| w.is_zero())
        .map(|(j, _)| j)
        .collect();

    let announced_matches_weights = plan
        .target
        .members()
        .iter()
        .zip(&announced)
        .all(|((w, _), q)| w == q);

    let conditionals_match_members =
        plan.target
            .members()
            .iter()
            .enumerate()
            .all(|(j, (w, member))| {
                if w.is_zero() {
                    return true;
                }
                conditionals[j].as_ref() == Some(member)
            });

    SteeringAnalysis {
        announced,
        conditionals,
        zero_weight_members,
        announced_matches_weights,
        conditionals_match_members,
    }
}

/// True when the transcript shows no message on any channel.
pub fn verify_no_communication(transcript: &Transcript) -> bool {
    transcript.total_messages() == 0
}

/// A randomly generated valid steering problem.
#[derive(Debug, Clone)]
pub struct SteeringInstance {
    pub resource: CorrelatedState,
    pub target: Ensemble,
}

/// Draws a random target ensemble (up to `max_outcomes` outcomes and
/// `max_members` members, both at least 1) and pairs it with the fully
/// correlated resource over its mixture, so the instance is valid by
/// construction. Zero weights and zero probabilities do occur.
pub fn random_instance(
    rng: &mut RandomSource,
    max_outcomes: u64,
    max_members: u64,
) -> SteeringInstance {
    let n_i = 1 + rng.next_below(max_outcomes);
    let n_j = 1 + rng.next_below(max_members);
    let space = OutcomeSpace::dits(n_i);

    let random_row = |rng: &mut RandomSource, len: u64| -> Vec<u64> {
        let mut row: Vec<u64> = (0..len).map(|_| rng.next_below(10)).collect();
        if row.iter().all(|&x| x == 0) {
            let hot = rng.next_below(len) as usize;
            row[hot] = 1;
        }
        row
    };
    let normalize = |row: Vec<u64>| -> Vec<Rational> {
        let total: u64 = row.iter().sum();
        row.into_iter()
            .map(|x| Rational::new(x as i64, total as i64).expect("total is positive"))
            .collect()
    };

    let weights = normalize(random_row(rng, n_j));
    let members: Vec<(Rational, ClassicalState)> = weights
        .into_iter()
        .map(|w| {
            let probs = normalize(random_row(rng, n_i));
            (
                w,
                ClassicalState::new(space.clone(), probs).expect("rows are normalized"),
            )
        })
        .collect();
    let target = Ensemble::new(members).expect("weights are normalized");
    let resource = CorrelatedState::fully_correlated(&target.mix());
    SteeringInstance { resource, target }
}

/// The worked example shipped with the demo subcommand: a biased bit whose
/// marginal `[11/32, 21/32]` is steered into three binary members with
/// weights `1/2, 1/4, 1/4`.
pub fn demo_instance() -> SteeringInstance {
    let r = |n, d| Rational::new(n, d).expect("static demo values");
    let space = OutcomeSpace::bit();
    let member = |p0, p1| ClassicalState::new(space.clone(), vec![p0, p1]).expect("demo member");
    let target = Ensemble::new(vec![
        (r(1, 2), member(r(1, 2), r(1, 2))),
        (r(1, 4), member(r(1, 4), r(3, 4))),
        (r(1, 4), member(r(1, 8), r(7, 8))),
    ])
    .expect("demo ensemble is normalized");
    let resource = CorrelatedState::fully_correlated(&target.mix());
    SteeringInstance { resource, target }
}

// --- JSON encoding -----------------------------------------------------------
//
// A plan travels as {"coins": {<outcome label>: {"probs": [...]}}, "target":
// <ensemble>}. The resource is not stored: a valid plan's resource is the
// fully correlated state over the target's mixture, so it is rebuilt on load.
// Coin rows are deliberately NOT required to be normalized here; a corrupted
// row should load and then fail verification, not hide behind a parse error.

#[derive(Serialize, Deserialize)]
struct CoinRepr {
    probs: Vec<Rational>,
}

impl Serialize for SteeringPlan {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let space = self.resource.bob_space();
        let mut top = serializer.serialize_map(Some(2))?;
        let coins: BTreeMap<usize, CoinRepr> = self
            .coins
            .iter()
            .map(|(&i, row)| (i, CoinRepr { probs: row.clone() }))
            .collect();
        // BTreeMap keys are outcome indices, so labels come out in space order.
        let labeled: Vec<(&str, &CoinRepr)> = coins
            .iter()
            .map(|(&i, repr)| (space.label(i), repr))
            .collect();
        struct OrderedCoins<'a>(Vec<(&'a str, &'a CoinRepr)>);
        impl Serialize for OrderedCoins<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some(self.0.len()))?;
                for (label, repr) in &self.0 {
                    map.serialize_entry(label, repr)?;
                }
                map.end()
            }
        }
        top.serialize_entry("coins", &OrderedCoins(labeled))?;
        top.serialize_entry("target", &self.target)?;
        top.end()
    }
}

#[derive(Deserialize)]
struct PlanRepr {
    coins: BTreeMap<String, CoinRepr>,
    target: Ensemble,
}

impl<'de> Deserialize<'de> for SteeringPlan {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PlanRepr::deserialize(deserializer)?;
        let space = repr.target.member_space().clone();
        let mut coins = BTreeMap::new();
        for (label, coin) in repr.coins {
            let index = space
                .index_of(&label)
                .ok_or_else(|| D::Error::custom(SteeringError::UnknownCoinLabel(label)))?;
            coins.insert(index, coin.probs);
        }
        let resource = CorrelatedState::fully_correlated(&repr.target.mix());
        SteeringPlan::from_parts(resource, repr.target, coins).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::empirical;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    fn bit_state(p0: Rational, p1: Rational) -> ClassicalState {
        ClassicalState::new(OutcomeSpace::bit(), vec![p0, p1]).unwrap()
    }

    #[test]
    fn demo_plan_matches_hand_derivation() {
        // Oracle computed by hand with the conditioning rule:
        //   marginal p = [11/32, 21/32]
        //   Q_0 = [ (1/2)(1/2), (1/4)(1/4), (1/4)(1/8) ] / (11/32) = [8/11, 2/11, 1/11]
        //   Q_1 = [ (1/2)(1/2), (1/4)(3/4), (1/4)(7/8) ] / (21/32) = [8/21, 6/21, 7/21]
        let inst = demo_instance();
        assert_eq!(
            inst.resource.marginal(Party::Bob),
            bit_state(r(11, 32), r(21, 32))
        );
        let plan = derive_plan(inst.resource, inst.target).unwrap();
        assert_eq!(plan.coins()[&0], vec![r(8, 11), r(2, 11), r(1, 11)]);
        assert_eq!(plan.coins()[&1], vec![r(8, 21), r(6, 21), r(7, 21)]);
        assert!(plan.is_consistent());
    }

    #[test]
    fn parity_pair_plan_matches_hand_derivation() {
        // Uniform marginal split into [3/4, 1/4] and [1/4, 3/4] at weights
        // 1/2 each; the coins echo the members.
        let target = Ensemble::new(vec![
            (r(1, 2), bit_state(r(3, 4), r(1, 4))),
            (r(1, 2), bit_state(r(1, 4), r(3, 4))),
        ])
        .unwrap();
        let resource = CorrelatedState::fully_correlated(&target.mix());
        let plan = derive_plan(resource, target).unwrap();
        assert_eq!(plan.coins()[&0], vec![r(3, 4), r(1, 4)]);
        assert_eq!(plan.coins()[&1], vec![r(1, 4), r(3, 4)]);
    }

    #[test]
    fn lazy_mixing_plan_matches_hand_derivation() {
        // Uniform bit presented as: totally mixed with weight 1/3, or one of
        // the two point masses with weight 1/3 each.
        let target = Ensemble::new(vec![
            (r(1, 3), bit_state(r(1, 2), r(1, 2))),
            (r(1, 3), bit_state(Rational::one(), Rational::zero())),
            (r(1, 3), bit_state(Rational::zero(), Rational::one())),
        ])
        .unwrap();
        let resource = CorrelatedState::fully_correlated(&target.mix());
        let plan = derive_plan(resource, target).unwrap();
        assert_eq!(plan.coins()[&0], vec![r(1, 3), r(2, 3), Rational::zero()]);
        assert_eq!(plan.coins()[&1], vec![r(1, 3), Rational::zero(), r(2, 3)]);
        let analysis = analyze(&plan);
        assert!(analysis.announced_matches_weights);
        assert!(analysis.conditionals_match_members);
    }

    #[test]
    fn single_member_target_gets_constant_coins() {
        let state = bit_state(r(1, 3), r(2, 3));
        let target = Ensemble::new(vec![(Rational::one(), state.clone())]).unwrap();
        let resource = CorrelatedState::fully_correlated(&state);
        let plan = derive_plan(resource, target).unwrap();
        assert_eq!(plan.coins()[&0], vec![Rational::one()]);
        assert_eq!(plan.coins()[&1], vec![Rational::one()]);
    }

    #[test]
    fn derive_rejects_uncorrelated_resource() {
        let coin = bit_state(r(1, 2), r(1, 2));
        let product = CorrelatedState::product(&coin, &coin);
        let target = Ensemble::new(vec![(Rational::one(), coin)]).unwrap();
        assert_eq!(
            derive_plan(product, target).unwrap_err(),
            SteeringError::NotFullyCorrelated
        );
    }

    #[test]
    fn derive_rejects_mismatched_ensemble() {
        let resource = CorrelatedState::fully_correlated(&bit_state(r(1, 2), r(1, 2)));
        let target = Ensemble::new(vec![(Rational::one(), bit_state(r(1, 4), r(3, 4)))]).unwrap();
        match derive_plan(resource, target).unwrap_err() {
            SteeringError::EnsembleMismatch { marginal, mix } => {
                assert_eq!(marginal, bit_state(r(1, 2), r(1, 2)));
                assert_eq!(mix, bit_state(r(1, 4), r(3, 4)));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_probability_outcomes_get_no_coin() {
        let state = bit_state(Rational::one(), Rational::zero());
        let target = Ensemble::new(vec![(Rational::one(), state.clone())]).unwrap();
        let plan = derive_plan(CorrelatedState::fully_correlated(&state), target).unwrap();
        assert!(plan.coins().contains_key(&0));
        assert!(!plan.coins().contains_key(&1));
    }

    #[test]
    fn demo_analysis_reproduces_target_exactly() {
        let inst = demo_instance();
        let plan = derive_plan(inst.resource, inst.target.clone()).unwrap();
        let analysis = analyze(&plan);
        assert_eq!(analysis.announced, vec![r(1, 2), r(1, 4), r(1, 4)]);
        for (j, (_, member)) in inst.target.members().iter().enumerate() {
            assert_eq!(analysis.conditionals[j].as_ref(), Some(member));
        }
        assert!(analysis.announced_matches_weights);
        assert!(analysis.conditionals_match_members);
        assert!(analysis.zero_weight_members.is_empty());
    }

    #[test]
    fn zero_weight_members_are_flagged_not_fabricated() {
        let state = bit_state(r(1, 2), r(1, 2));
        let target = Ensemble::new(vec![
            (Rational::one(), state.clone()),
            (
                Rational::zero(),
                bit_state(Rational::one(), Rational::zero()),
            ),
        ])
        .unwrap();
        let plan = derive_plan(CorrelatedState::fully_correlated(&state), target).unwrap();
        let analysis = analyze(&plan);
        assert_eq!(analysis.zero_weight_members, vec![1]);
        assert_eq!(analysis.conditionals[1], None);
        assert_eq!(analysis.announced[1], Rational::zero());
        assert!(analysis.announced_matches_weights);
        assert!(analysis.conditionals_match_members);
    }

    #[test]
    fn corrupted_coin_fails_verification_but_loads() {
        let inst = demo_instance();
        let plan = derive_plan(inst.resource.clone(), inst.target.clone()).unwrap();
        let mut coins = plan.coins().clone();
        // 8/11 -> 7/11 in the first coin: the row no longer sums to one.
        coins.get_mut(&0).unwrap()[0] = r(7, 11);
        let corrupted = SteeringPlan::from_parts(inst.resource, inst.target, coins).unwrap();
        assert!(!corrupted.is_consistent());
        let analysis = analyze(&corrupted);
        assert!(!analysis.announced_matches_weights);
    }

    #[test]
    fn swapped_coins_fail_verification() {
        // A normalization-preserving corruption: exchange the two coins.
        let inst = demo_instance();
        let plan = derive_plan(inst.resource.clone(), inst.target.clone()).unwrap();
        let mut coins = plan.coins().clone();
        let row0 = coins[&0].clone();
        let row1 = coins[&1].clone();
        coins.insert(0, row1);
        coins.insert(1, row0);
        let corrupted = SteeringPlan::from_parts(inst.resource, inst.target, coins).unwrap();
        let analysis = analyze(&corrupted);
        assert!(!analysis.announced_matches_weights || !analysis.conditionals_match_members);
    }

    #[test]
    fn from_parts_checks_structure() {
        let inst = demo_instance();
        let plan = derive_plan(inst.resource.clone(), inst.target.clone()).unwrap();

        let mut missing = plan.coins().clone();
        missing.remove(&1);
        assert!(matches!(
            SteeringPlan::from_parts(inst.resource.clone(), inst.target.clone(), missing),
            Err(SteeringError::MissingCoin(_))
        ));

        let mut short = plan.coins().clone();
        short.get_mut(&0).unwrap().pop();
        assert!(matches!(
            SteeringPlan::from_parts(inst.resource.clone(), inst.target.clone(), short),
            Err(SteeringError::InvalidCoin { .. })
        ));

        let mut negative = plan.coins().clone();
        negative.get_mut(&0).unwrap()[0] = r(-1, 2);
        assert!(matches!(
            SteeringPlan::from_parts(inst.resource, inst.target, negative),
            Err(SteeringError::InvalidCoin { .. })
        ));
    }

    #[test]
    fn execute_is_deterministic_and_silent() {
        let inst = demo_instance();
        let plan = derive_plan(inst.resource, inst.target).unwrap();
        let run = |seed| {
            let mut rng = RandomSource::new(seed);
            execute(&plan, &mut rng).unwrap()
        };
        let a = run(7);
        let b = run(7);
        assert_eq!(a.announced_index(), b.announced_index());
        assert_eq!(a.bob_outcome(), b.bob_outcome());
        assert_eq!(a.transcript().to_jsonl(), b.transcript().to_jsonl());
        assert!(verify_no_communication(a.transcript()));
        assert_eq!(a.transcript().total_messages(), 0);
    }

    #[test]
    fn execute_on_point_mass_resource_is_constant() {
        let state = bit_state(Rational::one(), Rational::zero());
        let target = Ensemble::new(vec![(Rational::one(), state.clone())]).unwrap();
        let plan = derive_plan(CorrelatedState::fully_correlated(&state), target).unwrap();
        for seed in 0..20 {
            let mut rng = RandomSource::new(seed);
            let outcome = execute(&plan, &mut rng).unwrap();
            assert_eq!(outcome.bob_outcome(), "0");
            assert_eq!(outcome.announced_index(), 0);
        }
    }

    #[test]
    fn announcement_is_public_and_observation_is_hidden() {
        let inst = demo_instance();
        let plan = derive_plan(inst.resource, inst.target).unwrap();
        let mut rng = RandomSource::new(11);
        let outcome = execute(&plan, &mut rng).unwrap();
        let transcript = outcome.transcript();

        let bob_view = transcript.view(Actor::Bob);
        assert!(bob_view.iter().any(|e| e.payload.starts_with("announced=")));
        assert!(bob_view.iter().all(|e| !e.payload.starts_with("observed=")));
        assert!(bob_view.iter().all(|e| !e.payload.starts_with("coin=")));

        // Alice's own record of what she observed is gone from her view too.
        let alice_view = transcript.view(Actor::Alice);
        assert!(alice_view
            .iter()
            .all(|e| !e.payload.starts_with("observed=")));
    }

    #[test]
    fn empirical_run_tracks_exact_analysis() {
        let inst = demo_instance();
        let plan = derive_plan(inst.resource, inst.target.clone()).unwrap();
        let trials = 20_000u64;
        let mut announced = Vec::with_capacity(trials as usize);
        for run in 0..trials {
            let mut rng = RandomSource::for_run(77, run);
            let outcome = execute(&plan, &mut rng).unwrap();
            announced.push(outcome.announced_label());
        }
        let space = plan.member_index_space();
        let freq = empirical(&announced, &space).unwrap();
        let exact = ClassicalState::new(space, analyze(&plan).announced).unwrap();
        let tv = freq.total_variation(&exact).unwrap();
        assert!(tv < r(1, 50), "tv = {tv}");
    }

    #[test]
    fn plan_json_round_trip_and_shape() {
        let inst = demo_instance();
        let plan = derive_plan(inst.resource, inst.target).unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        assert!(json.starts_with(r#"{"coins":{"0":{"probs":["8/11","2/11","1/11"]}"#));
        let back: SteeringPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn plan_json_with_corrupted_row_still_loads() {
        let inst = demo_instance();
        let plan = derive_plan(inst.resource, inst.target).unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        let corrupted_json = json.replacen("8/11", "7/11", 1);
        let corrupted: SteeringPlan = serde_json::from_str(&corrupted_json).unwrap();
        let analysis = analyze(&corrupted);
        assert!(!analysis.announced_matches_weights);
    }

    #[test]
    fn plan_json_rejects_structural_damage() {
        let inst = demo_instance();
        let plan = derive_plan(inst.resource, inst.target).unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        // Unknown coin label.
        let bad_label = json.replacen("\"0\":{\"probs\"", "\"9\":{\"probs\"", 1);
        assert!(serde_json::from_str::<SteeringPlan>(&bad_label).is_err());
        // Negative coin entry.
        let negative = json.replacen("8/11", "-8/11", 1);
        assert!(serde_json::from_str::<SteeringPlan>(&negative).is_err());
        // Target that is not a valid ensemble.
        let bad_target = json.replacen("\"weight\":\"1/2\"", "\"weight\":\"1/3\"", 1);
        assert!(serde_json::from_str::<SteeringPlan>(&bad_target).is_err());
    }

    #[test]
    fn random_instances_are_valid_and_bounded() {
        let mut rng = RandomSource::new(1);
        for _ in 0..200 {
            let inst = random_instance(&mut rng, 6, 5);
            assert!(inst.resource.is_fully_correlated());
            assert!(inst.target.len() <= 5);
            assert!(inst.target.member_space().len() <= 6);
            assert_eq!(inst.resource.marginal(Party::Bob), inst.target.mix());
        }
    }

    proptest! {
        #[test]
        fn derived_plans_satisfy_both_claims(seed in any::<u64>()) {
            let mut rng = RandomSource::new(seed);
            let inst = random_instance(&mut rng, 6, 5);
            let plan = derive_plan(inst.resource, inst.target.clone()).unwrap();
            let analysis = analyze(&plan);
            prop_assert!(analysis.announced_matches_weights);
            prop_assert!(analysis.conditionals_match_members);
            for (j, (w, _)) in inst.target.members().iter().enumerate() {
                prop_assert_eq!(&analysis.announced[j], w);
            }
        }

        #[test]
        fn derived_plans_satisfy_the_conditioning_identity(seed in any::<u64>()) {
            // Independent check of Q_i(j) * p_i == w_j * P_j(i), outside both
            // derive_plan and analyze.
            let mut rng = RandomSource::new(seed);
            let inst = random_instance(&mut rng, 6, 5);
            let marginal = inst.resource.marginal(Party::Bob);
            let plan = derive_plan(inst.resource, inst.target.clone()).unwrap();
            prop_assert!(plan.is_consistent());
            for (&i, row) in plan.coins() {
                let total: Rational = row.iter().sum();
                prop_assert_eq!(&total, &Rational::one());
                for (j, (w, member)) in inst.target.members().iter().enumerate() {
                    prop_assert_eq!(&row[j] * marginal.prob(i), w * member.prob(i));
                }
            }
        }

        #[test]
        fn plan_joint_has_the_right_marginals(seed in any::<u64>()) {
            let mut rng = RandomSource::new(seed);
            let inst = random_instance(&mut rng, 6, 5);
            let plan = derive_plan(inst.resource, inst.target.clone()).unwrap();
            let joint = plan.exact_joint().unwrap();
            // Announcement side: the target weights. Outcome side: the marginal.
            let weights: Vec<Rational> =
                inst.target.members().iter().map(|(w, _)| w.clone()).collect();
            let announced_marginal = joint.marginal(Party::Alice);
            prop_assert_eq!(announced_marginal.probs(), &weights[..]);
            prop_assert_eq!(
                joint.marginal(Party::Bob),
                plan.resource().marginal(Party::Bob)
            );
        }

        #[test]
        fn conditionals_recombine_to_the_marginal(seed in any::<u64>()) {
            let mut rng = RandomSource::new(seed);
            let inst = random_instance(&mut rng, 6, 5);
            let plan = derive_plan(inst.resource, inst.target).unwrap();
            let marginal = plan.resource().marginal(Party::Bob);
            let analysis = analyze(&plan);
            let n_i = marginal.space().len();
            for i in 0..n_i {
                let total: Rational = analysis
                    .announced
                    .iter()
                    .zip(&analysis.conditionals)
                    .filter_map(|(q, c)| c.as_ref().map(|c| q * c.prob(i)))
                    .sum();
                prop_assert_eq!(&total, marginal.prob(i));
            }
        }

        #[test]
        fn plan_json_round_trips(seed in any::<u64>()) {
            let mut rng = RandomSource::new(seed);
            let inst = random_instance(&mut rng, 6, 5);
            let plan = derive_plan(inst.resource, inst.target).unwrap();
            let json = serde_json::to_string(&plan).unwrap();
            let back: SteeringPlan = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, plan);
        }
    }
}
