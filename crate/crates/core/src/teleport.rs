//! Teleportation of a classical sample using one shared uniform dit and one
//! sent dit.
//!
//! Setup deals both parties the same uniform value `v` from `Z_d`. Alice holds
//! a sealed coin; on her turn its sample `s` is drawn and immediately combined
//! into the parity `m = (s - v) mod d`, which is the only thing she learns and
//! the only thing sent. Bob recovers `b = (m + v) mod d = s`. For `d = 2` the
//! parity is the XOR of sample and share, and Bob flips his share exactly when
//! the message is 1.
//!
//! The message is independent of the sample, so a wiretap on the channel
//! learns nothing about the teleported value; [`analyze_teleport`] checks this
//! exactly by enumeration instead of trusting the algebra.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::prob::{ClassicalState, CorrelatedState, OutcomeSpace};
use crate::rational::Rational;
use crate::runtime::{sample, Actor, EventKind, RandomSource, Sampler, Transcript, Visibility};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TeleportError {
    #[error("the sealed coin was already consumed")]
    CoinAlreadyConsumed,
    #[error("a shared dit needs d >= 2, got {0}")]
    DitSizeTooSmall(u64),
    #[error("share {share} is out of range for d = {d}")]
    ShareOutOfRange { share: u64, d: u64 },
    #[error("coin has {coin_outcomes} outcomes but the shared dit has d = {d}")]
    DitMismatch { coin_outcomes: usize, d: u64 },
}

/// A distribution that can be sampled exactly once.
///
/// The sealed state is hidden from the protocol parties; only the referee may
/// inspect it. Consuming the single sample is what makes a coin value behave
/// like a physical token: there is nothing left to copy afterwards.
#[derive(Debug, Clone)]
pub struct SealedCoin {
    state: ClassicalState,
    consumed: bool,
}

impl SealedCoin {
    pub fn seal(state: ClassicalState) -> Self {
        SealedCoin {
            state,
            consumed: false,
        }
    }

    /// Draws the one sample this coin holds. A second call fails.
    pub fn sample(&mut self, rng: &mut RandomSource) -> Result<String, TeleportError> {
        if self.consumed {
            return Err(TeleportError::CoinAlreadyConsumed);
        }
        self.consumed = true;
        Ok(sample(&self.state, rng))
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// The hidden distribution. Referee access only; protocol parties never
    /// call this.
    pub fn referee_state(&self) -> &ClassicalState {
        &self.state
    }
}

/// The two copies of the uniform shared dit dealt at setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharedDit {
    pub alice_share: u64,
    pub bob_share: u64,
    pub d: u64,
}

/// `(s - v) mod d`: the parity Alice sends.
fn encode_index(sample: u64, share: u64, d: u64) -> u64 {
    (sample + d - share) % d
}

/// `(m + v) mod d`: Bob's correction.
fn decode_index(message: u64, share: u64, d: u64) -> u64 {
    (message + share) % d
}

/// Deals both parties one copy of a uniform value from `Z_d`.
///
/// The realized value is recorded referee-only: the parties hold their copies
/// but the protocol never has them look until a step consumes the copy.
pub fn setup_shared(
    d: u64,
    rng: &mut RandomSource,
    transcript: &mut Transcript,
) -> Result<SharedDit, TeleportError> {
    if d < 2 {
        return Err(TeleportError::DitSizeTooSmall(d));
    }
    let uniform = ClassicalState::uniform(OutcomeSpace::dits(d));
    let v = Sampler::new(&uniform).draw_index(rng) as u64;
    transcript.record(
        Actor::Referee,
        EventKind::Share,
        format!("shared={v}"),
        Visibility::RefereeOnly,
    );
    Ok(SharedDit {
        alice_share: v,
        bob_share: v,
        d,
    })
}

/// Alice's move: consume the coin's sample and fold it into the parity.
///
/// The raw sample is recorded referee-only; Alice learns the parity and
/// nothing else. Returns the parity value to send.
pub fn alice_encode(
    coin: &mut SealedCoin,
    alice_share: u64,
    d: u64,
    rng: &mut RandomSource,
    transcript: &mut Transcript,
) -> Result<u64, TeleportError> {
    if alice_share >= d {
        return Err(TeleportError::ShareOutOfRange {
            share: alice_share,
            d,
        });
    }
    let coin_outcomes = coin.referee_state().space().len();
    if coin_outcomes as u64 != d {
        return Err(TeleportError::DitMismatch { coin_outcomes, d });
    }
    let label = coin.sample(rng)?;
    let sample_index = coin
        .referee_state()
        .space()
        .index_of(&label)
        .expect("sampled label is in the coin's own space") as u64;
    transcript.record(
        Actor::Alice,
        EventKind::Sample,
        format!("coin={label}"),
        Visibility::RefereeOnly,
    );
    Ok(encode_index(sample_index, alice_share, d))
}

/// Bob's move: `(message + share) mod d`, the index of his corrected outcome.
pub fn bob_decode(message: u64, bob_share: u64, d: u64) -> u64 {
    decode_index(message, bob_share, d)
}

/// Outcome of one full teleportation run.
#[derive(Debug, Clone)]
pub struct TeleportResult {
    message: u64,
    bob_outcome: String,
    transcript: Transcript,
}

impl TeleportResult {
    /// The parity dit that crossed the channel, as a label.
    pub fn message(&self) -> String {
        self.message.to_string()
    }

    /// Bob's corrected outcome, as a label of the coin's space.
    pub fn bob_outcome(&self) -> &str {
        &self.bob_outcome
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn messages_sent(&self) -> usize {
        self.transcript.total_messages()
    }
}

impl Serialize for TeleportResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("TeleportResult", 3)?;
        s.serialize_field("message", &self.message())?;
        s.serialize_field("bob_outcome", &self.bob_outcome)?;
        s.serialize_field("messages_sent", &self.messages_sent())?;
        s.end()
    }
}

/// Runs the whole protocol on one sealed coin: setup, encode, send, decode.
///
/// The coin is moved in and consumed; its number of outcomes fixes `d`. The
/// returned transcript holds exactly one Alice-to-Bob message.
pub fn run_teleport(
    mut coin: SealedCoin,
    rng: &mut RandomSource,
) -> Result<TeleportResult, TeleportError> {
    let d = coin.referee_state().space().len() as u64;
    let mut transcript = Transcript::new(rng.seed());
    let shares = setup_shared(d, rng, &mut transcript)?;
    let message = alice_encode(&mut coin, shares.alice_share, d, rng, &mut transcript)?;
    transcript.send(Actor::Alice, Actor::Bob, format!("parity={message}"));
    transcript.record(
        Actor::Bob,
        EventKind::Sample,
        format!("share={}", shares.bob_share),
        Visibility::PartyPrivate,
    );
    let outcome_index = bob_decode(message, shares.bob_share, d) as usize;
    let bob_outcome = coin
        .referee_state()
        .space()
        .label(outcome_index)
        .to_string();
    transcript.record(
        Actor::Bob,
        EventKind::Outcome,
        format!("outcome={bob_outcome}"),
        Visibility::PartyPrivate,
    );
    Ok(TeleportResult {
        message,
        bob_outcome,
        transcript,
    })
}

/// Exact, fully enumerated account of what the protocol does to one coin.
#[derive(Debug, Clone, Serialize)]
pub struct TeleportAnalysis {
    /// Distribution of Bob's corrected outcome; equals the coin state.
    pub bob_distribution: ClassicalState,
    /// Distribution of the parity message; uniform over `Z_d`.
    pub message_distribution: ClassicalState,
    /// For each message value, the posterior over Bob's outcome held by a
    /// wiretapper who knows the protocol but not the coin (flat prior over
    /// outcomes). Uniform for every message: the channel leaks nothing.
    pub eve_conditionals: Vec<ClassicalState>,
    /// True when the joint of (outcome, message) factors exactly into the
    /// product of its marginals.
    pub message_independent_of_outcome: bool,
    /// Pre-shared uniform dits consumed per run.
    pub shared_dits: u32,
    /// Dits sent over the channel per run.
    pub sent_dits: u32,
    // Kept out of the serialized report; derivable from the pieces above.
    #[serde(skip)]
    joint: CorrelatedState,
}

impl TeleportAnalysis {
    /// Exact joint of (Bob's outcome, message), row per outcome.
    pub fn outcome_message_joint(&self) -> &CorrelatedState {
        &self.joint
    }
}

/// Enumerates every (sample, share) pair exactly.
///
/// All quantities are computed by pushing each pair through the same
/// encode/decode maps the protocol runs, never by shortcutting to the
/// algebraic answer.
pub fn analyze_teleport(coin_state: &ClassicalState) -> TeleportAnalysis {
    let d = coin_state.space().len() as u64;
    let message_space = OutcomeSpace::dits(d);
    let per_share = Rational::new(1, d as i64).expect("space is never empty");

    let n = d as usize;
    let mut bob = vec![Rational::zero(); n];
    let mut message = vec![Rational::zero(); n];
    let mut joint = vec![vec![Rational::zero(); n]; n];
    for s in 0..d {
        let weight = coin_state.prob(s as usize) * &per_share;
        for v in 0..d {
            let m = encode_index(s, v, d);
            let b = decode_index(m, v, d);
            bob[b as usize] = &bob[b as usize] + &weight;
            message[m as usize] = &message[m as usize] + &weight;
            joint[b as usize][m as usize] = &joint[b as usize][m as usize] + &weight;
        }
    }

    // Wiretapper posterior: flat prior over the sample, likelihood from the
    // uniform share. posterior(b | m) is proportional to sum over shares v
    // with encode(b, v) = m of 1/(d*d).
    let mut eve_conditionals = Vec::with_capacity(n);
    for m in 0..d {
        let mut unnormalized = vec![Rational::zero(); n];
        for s in 0..d {
            for v in 0..d {
                if encode_index(s, v, d) == m {
                    unnormalized[s as usize] =
                        &unnormalized[s as usize] + (&per_share * &per_share);
                }
            }
        }
        let total: Rational = unnormalized.iter().sum();
        let probs: Vec<Rational> = unnormalized.into_iter().map(|p| p / &total).collect();
        eve_conditionals.push(
            ClassicalState::new(coin_state.space().clone(), probs)
                .expect("normalized by construction"),
        );
    }

    let bob_distribution = ClassicalState::new(coin_state.space().clone(), bob.clone())
        .expect("enumeration covers total mass");
    let message_distribution = ClassicalState::new(message_space.clone(), message.clone())
        .expect("enumeration covers total mass");
    let message_independent_of_outcome =
        (0..n).all(|b| (0..n).all(|m| joint[b][m] == &bob[b] * &message[m]));
    let joint = CorrelatedState::new(coin_state.space().clone(), message_space, joint)
        .expect("enumeration covers total mass");

    TeleportAnalysis {
        bob_distribution,
        message_distribution,
        eve_conditionals,
        message_independent_of_outcome,
        shared_dits: 1,
        sent_dits: 1,
        joint,
    }
}
