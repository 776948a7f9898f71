//! End-to-end simulation of enrolment, verification and the emulation attack.
//!
//! Every session owns independent ChaCha streams, one per role, derived from
//! a master seed and the session index (see [`stream`]). Swapping the
//! adversary strategy therefore never perturbs the challenges or the
//! verifier's detector noise.

mod adversary;
mod crp;
mod session;

pub use adversary::{
    adversary_infer, adversary_respond, AdversaryKind, AdversaryStrategy, WrongGuess,
};
pub use crp::{enroll, enroll_noisy, CrpTable, CRP_FORMAT_VERSION, DEFAULT_MASK_ID};
pub use session::{
    bin_check, detection_experiment, honest_sample, run_session, run_session_with_device,
    ExperimentSummary, QuadratureCounts, SessionResult, VerificationPolicy,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::Quadrature;

/// A verification query: probe index and measured quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Challenge {
    pub k: usize,
    pub quadrature: Quadrature,
}

impl Challenge {
    /// Draws `k` uniformly from `Z_N` and `θ` uniformly from `{0, π/2}`.
    pub fn draw<R: Rng + ?Sized>(n_phases: usize, rng: &mut R) -> Self {
        let k = rng.random_range(0..n_phases);
        let quadrature = if rng.random::<bool>() {
            Quadrature::Y
        } else {
            Quadrature::X
        };
        Self { k, quadrature }
    }
}

/// Randomness consumers inside a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    Challenge = 0,
    VerifierNoise = 1,
    Adversary = 2,
    Enrolment = 3,
}

const ROLES_PER_SESSION: u64 = 4;

/// The stream for `role` in session `session` under master `seed`.
pub fn stream(seed: u64, session: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(session * ROLES_PER_SESSION + role as u64);
    rng
}

/// The three streams consumed by one verification session.
#[derive(Debug, Clone)]
pub struct SessionStreams {
    pub challenge: ChaCha8Rng,
    pub verifier: ChaCha8Rng,
    pub adversary: ChaCha8Rng,
}

impl SessionStreams {
    pub fn new(seed: u64, session: u64) -> Self {
        Self {
            challenge: stream(seed, session, StreamRole::Challenge),
            verifier: stream(seed, session, StreamRole::VerifierNoise),
            adversary: stream(seed, session, StreamRole::Adversary),
        }
    }
}
