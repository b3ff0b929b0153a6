//! A minimal quantum reference point for the classical protocols.
//!
//! Just enough two-qubit machinery to state the analogy precisely: a shared
//! pure state in Schmidt form, the two standard measurement choices on one
//! half of the Bell pair, and the decoherence map that turns a Schmidt state
//! into the fully correlated classical state the steering module consumes.
//! Amplitudes use `f64`; everything classical downstream is exact.

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::prob::{ClassicalState, CorrelatedState, OutcomeSpace};
use crate::rational::Rational;

/// Tolerance for normalization checks on amplitudes and report entries.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Denominator used when squared amplitudes are rationalized: probabilities
/// are rounded to integer multiples of `1/10^12`, then renormalized exactly.
pub const RATIONALIZATION_DENOMINATOR: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("amplitudes have squared norm {norm}, not 1 (tolerance {NORM_TOLERANCE})")]
    NotNormalized { norm: f64 },
    #[error("expected {expected} amplitudes, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// A bipartite pure state in Schmidt form: amplitude `alpha_i` on the shared
/// basis label `i` of both parties.
#[derive(Debug, Clone)]
pub struct SchmidtState {
    space: OutcomeSpace,
    amplitudes: Vec<Complex64>,
}

impl SchmidtState {
    pub fn new(space: OutcomeSpace, amplitudes: Vec<Complex64>) -> Result<Self, QuantumError> {
        if amplitudes.len() != space.len() {
            return Err(QuantumError::LengthMismatch {
                expected: space.len(),
                got: amplitudes.len(),
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(QuantumError::NotNormalized { norm });
        }
        Ok(SchmidtState { space, amplitudes })
    }

    /// The Bell pair: equal amplitudes on the two matching basis labels.
    pub fn bell() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        SchmidtState::new(OutcomeSpace::bit(), vec![a, a]).expect("bell amplitudes are normalized")
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }
}

/// Drops the off-diagonal structure of a Schmidt state, leaving the fully
/// correlated classical state over the same labels.
///
/// Each squared amplitude is rounded to a multiple of
/// `1/`[`RATIONALIZATION_DENOMINATOR`] and the results are renormalized
/// exactly, so the output is a genuine distribution no matter how the
/// floating point rounding fell. Phases are discarded; they are invisible to
/// every classical quantity this crate computes.
pub fn decohere(state: &SchmidtState) -> CorrelatedState {
    let numerators: Vec<i64> = state
        .amplitudes
        .iter()
        .map(|a| (a.norm_sqr() * RATIONALIZATION_DENOMINATOR as f64).round() as i64)
        .collect();
    let total: i64 = numerators.iter().sum();
    let probs: Vec<Rational> = numerators
        .into_iter()
        .map(|n| Rational::new(n, total).expect("normalized amplitudes have positive total"))
        .collect();
    let classical = ClassicalState::new(state.space.clone(), probs)
        .expect("rounded squared amplitudes renormalize to a distribution");
    CorrelatedState::fully_correlated(&classical)
}

/// Which observable Alice measures on her half of the Bell pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementBasis {
    /// The shared Schmidt basis itself.
    Z,
    /// The conjugate basis `(|0> +- |1>)/sqrt(2)`.
    X,
}

/// The ensemble steered onto Bob's qubit by measuring Alice's half.
#[derive(Debug, Clone)]
pub struct QubitEnsembleReport {
    basis: MeasurementBasis,
    members: Vec<(f64, [Complex64; 2])>,
}

impl QubitEnsembleReport {
    pub fn basis(&self) -> MeasurementBasis {
        self.basis
    }

    /// Pairs of (probability, normalized state vector), one per outcome.
    pub fn members(&self) -> &[(f64, [Complex64; 2])] {
        &self.members
    }

    /// The weighted average of the member projectors.
    pub fn average_density(&self) -> [[Complex64; 2]; 2] {
        let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (p, v) in &self.members {
            for r in 0..2 {
                for c in 0..2 {
                    rho[r][c] += v[r] * v[c].conj() * *p;
                }
            }
        }
        rho
    }
}

impl Serialize for QubitEnsembleReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct MemberRepr {
            probability: f64,
            amplitudes: Vec<[f64; 2]>,
        }
        let members: Vec<MemberRepr> = self
            .members
            .iter()
            .map(|(p, v)| MemberRepr {
                probability: *p,
                amplitudes: v.iter().map(|a| [a.re, a.im]).collect(),
            })
            .collect();
        let basis = match self.basis {
            MeasurementBasis::Z => "z",
            MeasurementBasis::X => "x",
        };
        let mut s = serializer.serialize_struct("QubitEnsembleReport", 2)?;
        s.serialize_field("basis", basis)?;
        s.serialize_field("members", &members)?;
        s.end()
    }
}

/// Measures Alice's half of the Bell pair in `basis` and reports the ensemble
/// left on Bob's side: outcome probabilities and post-measurement states.
pub fn epr_measure(basis: MeasurementBasis) -> QubitEnsembleReport {
    let bell = SchmidtState::bell();
    // Joint amplitude matrix A[a][b]: diagonal in the Schmidt basis.
    let mut joint = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, alpha) in bell.amplitudes().iter().enumerate() {
        joint[i][i] = *alpha;
    }

    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let basis_vectors: [[Complex64; 2]; 2] = match basis {
        MeasurementBasis::Z => [
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ],
        MeasurementBasis::X => [[h, h], [h, -h]],
    };

    let members = basis_vectors
        .iter()
        .map(|u| {
            // Unnormalized Bob vector after Alice sees this outcome.
            let mut w = [Complex64::new(0.0, 0.0); 2];
            for b in 0..2 {
                for a in 0..2 {
                    w[b] += u[a].conj() * joint[a][b];
                }
            }
            let p: f64 = w.iter().map(|c| c.norm_sqr()).sum();
            let scale = 1.0 / p.sqrt();
            (p, [w[0] * scale, w[1] * scale])
        })
        .collect();

    QubitEnsembleReport { basis, members }
}
