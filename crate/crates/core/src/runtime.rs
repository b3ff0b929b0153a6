//! Protocol plumbing: seeded randomness, exact sampling, and transcripts.
//!
//! # Sampling contract
//!
//! A [`RandomSource`] is a ChaCha20 stream seeded from a single `u64`. Each
//! draw produces a 64-bit word `k` that is read as the exact rational
//! `k / 2^64`, and a [`Sampler`] inverts the cumulative distribution against
//! that variate with integer comparisons only. The cutoff for cumulative
//! probability `C` is `ceil(C * 2^64)`, so the probability of each outcome is
//! off from its exact value by strictly less than `2^-64` per draw, and is
//! exact whenever the cumulative sums are multiples of `2^-64` (for example
//! the fair coin). No floating point is involved anywhere.
//!
//! # Transcripts
//!
//! Every protocol run appends to a [`Transcript`]: an ordered list of events,
//! each owned by an actor and stamped with a visibility level. After the run,
//! [`Transcript::view`] yields exactly the events a given actor is entitled to
//! read; referee-only events are invisible even to the actor that produced
//! them, which is how the protocols model values a party holds but never
//! looks at. Message counts are computed from the event list, so they cannot
//! drift out of sync with it.

use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob::{ClassicalState, OutcomeSpace};
use crate::rational::Rational;

/// Name of the PRNG recorded in every transcript header.
pub const PRNG_NAME: &str = "chacha20";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("outcome label {0:?} is not in the outcome space")]
    UnknownLabel(String),
    #[error("cannot compute frequencies of an empty sample")]
    EmptySample,
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
}

/// A deterministic, platform-independent random stream.
///
/// Two sources built with the same seed produce the same draws on every
/// platform. The seed and the number of draws made so far are observable so
/// that runs can be reproduced and audited.
pub struct RandomSource {
    seed: u64,
    draws: u64,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            draws: 0,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// The source for run `run_index` of a batch: seed plus run index,
    /// wrapping on overflow. Trial loops use this so that runs are
    /// independent of execution order.
    pub fn for_run(master_seed: u64, run_index: u64) -> Self {
        RandomSource::new(master_seed.wrapping_add(run_index))
    }

    /// The next 64-bit word, read as the exact uniform variate `k / 2^64`.
    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }

    /// A uniform index below `n`, for instance generation. Uses rejection so
    /// the result is exactly uniform. Panics if `n == 0`.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let k = self.next_u64();
            if k < zone {
                return k % n;
            }
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }
}

impl fmt::Debug for RandomSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RandomSource {{ prng: {PRNG_NAME:?}, seed: {}, draws: {} }}",
            self.seed, self.draws
        )
    }
}

/// Precomputed inversion table for sampling one distribution repeatedly.
pub struct Sampler {
    labels: Vec<String>,
    // thresholds[i] = ceil(C_i * 2^64) where C_i is the cumulative probability
    // through outcome i; the final entry is exactly 2^64.
    thresholds: Vec<u128>,
}

impl Sampler {
    pub fn new(state: &ClassicalState) -> Self {
        let two_to_64 = BigInt::from(1u8) << 64u32;
        let mut thresholds = Vec::with_capacity(state.space().len());
        let mut cumulative = Rational::zero();
        for p in state.probs() {
            cumulative = cumulative + p;
            // ceil((numer << 64) / denom) via integer division.
            let scaled =
                (cumulative.numer() * &two_to_64 + cumulative.denom() - 1u8) / cumulative.denom();
            thresholds.push(
                scaled
                    .to_u128()
                    .expect("cumulative probability is at most 1"),
            );
        }
        Sampler {
            labels: state.space().labels().to_vec(),
            thresholds,
        }
    }

    /// Exact inversion cutoffs, exposed so tests can check the bias bound.
    pub fn thresholds(&self) -> &[u128] {
        &self.thresholds
    }

    pub fn draw_index(&self, rng: &mut RandomSource) -> usize {
        let k = rng.next_u64() as u128;
        self.thresholds
            .iter()
            .position(|&t| k < t)
            .expect("final threshold 2^64 exceeds every draw")
    }

    pub fn draw(&self, rng: &mut RandomSource) -> &str {
        &self.labels[self.draw_index(rng)]
    }
}

/// Draws one outcome from `state`. For tight loops over a fixed distribution,
/// build a [`Sampler`] once instead.
pub fn sample(state: &ClassicalState, rng: &mut RandomSource) -> String {
    Sampler::new(state).draw(rng).to_string()
}

/// Exact empirical frequencies of `outcomes` over `space`.
pub fn empirical(
    outcomes: &[String],
    space: &OutcomeSpace,
) -> Result<ClassicalState, RuntimeError> {
    if outcomes.is_empty() {
        return Err(RuntimeError::EmptySample);
    }
    let mut counts = vec![0u64; space.len()];
    for outcome in outcomes {
        let index = space
            .index_of(outcome)
            .ok_or_else(|| RuntimeError::UnknownLabel(outcome.clone()))?;
        counts[index] += 1;
    }
    let n = outcomes.len() as i64;
    let probs = counts
        .iter()
        .map(|&c| Rational::new(c as i64, n).expect("sample is not empty"))
        .collect();
    Ok(ClassicalState::new(space.clone(), probs).expect("counts over n sum to one"))
}

/// Who produced or may read a transcript event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Actor {
    Alice,
    Bob,
    Referee,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Actor::Alice => "alice",
            Actor::Bob => "bob",
            Actor::Referee => "referee",
        };
        f.write_str(name)
    }
}

/// What kind of step an event records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EventKind {
    /// Part of a pre-shared resource was dealt or read.
    Share,
    /// A local random value was drawn.
    Sample,
    /// A value crossed the channel to another actor.
    Message { to: Actor },
    /// A final or derived local value.
    Outcome,
    /// The owning actor discarded this value; only the referee keeps it.
    Forget,
}

/// Read access level of a transcript event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Visibility {
    /// Every actor may read it.
    Public,
    /// Only the owning actor (and the referee) may read it.
    PartyPrivate,
    /// Only the referee may read it, including when the owning actor is not
    /// the referee: the value passed through the actor's hands unobserved.
    RefereeOnly,
}

/// One step of a protocol run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub actor: Actor,
    #[serde(flatten)]
    pub kind: EventKind,
    pub payload: String,
    pub visibility: Visibility,
}

#[derive(Serialize, Deserialize)]
struct TranscriptHeader {
    seed: u64,
    prng: String,
}

/// An append-only record of a protocol run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    seed: u64,
    prng: String,
    events: Vec<Event>,
}

impl Transcript {
    /// Starts an empty transcript for a run driven by the source with the
    /// given seed.
    pub fn new(seed: u64) -> Self {
        Transcript {
            seed,
            prng: PRNG_NAME.to_string(),
            events: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn prng(&self) -> &str {
        &self.prng
    }

    pub fn record(
        &mut self,
        actor: Actor,
        kind: EventKind,
        payload: impl Into<String>,
        visibility: Visibility,
    ) {
        self.events.push(Event {
            actor,
            kind,
            payload: payload.into(),
            visibility,
        });
    }

    /// Records a public message from one actor to another.
    pub fn send(&mut self, from: Actor, to: Actor, payload: impl Into<String>) {
        self.record(from, EventKind::Message { to }, payload, Visibility::Public);
    }

    /// Full event list. This is the referee's view.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// The events `viewer` is entitled to read. The referee reads everything;
    /// a party reads public events and its own party-private events, and never
    /// referee-only events, not even its own.
    pub fn view(&self, viewer: Actor) -> Vec<&Event> {
        self.events
            .iter()
            .filter(|e| match e.visibility {
                Visibility::Public => true,
                Visibility::PartyPrivate => viewer == Actor::Referee || e.actor == viewer,
                Visibility::RefereeOnly => viewer == Actor::Referee,
            })
            .collect()
    }

    /// Number of messages sent on the directed channel `from -> to`.
    pub fn message_count(&self, from: Actor, to: Actor) -> usize {
        self.events
            .iter()
            .filter(|e| e.actor == from && e.kind == EventKind::Message { to })
            .count()
    }

    /// Total messages on all channels.
    pub fn total_messages(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Message { .. }))
            .count()
    }

    /// Serializes as JSON lines: a header naming the seed and PRNG, then one
    /// event per line. Byte-identical across runs with equal seeds and inputs.
    pub fn to_jsonl(&self) -> String {
        let header = TranscriptHeader {
            seed: self.seed,
            prng: self.prng.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        for event in &self.events {
            out.push('\n');
            out.push_str(&serde_json::to_string(event).expect("event serializes"));
        }
        out.push('\n');
        out
    }

    /// Parses the format produced by [`Transcript::to_jsonl`].
    pub fn from_jsonl(text: &str) -> Result<Self, RuntimeError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header_line = lines
            .next()
            .ok_or_else(|| RuntimeError::MalformedTranscript("missing header".into()))?;
        let header: TranscriptHeader = serde_json::from_str(header_line)
            .map_err(|e| RuntimeError::MalformedTranscript(format!("bad header: {e}")))?;
        let mut transcript = Transcript {
            seed: header.seed,
            prng: header.prng,
            events: Vec::new(),
        };
        for line in lines {
            let event: Event = serde_json::from_str(line)
                .map_err(|e| RuntimeError::MalformedTranscript(format!("bad event: {e}")))?;
            transcript.events.push(event);
        }
        Ok(transcript)
    }
}
