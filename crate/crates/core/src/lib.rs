//! Security bounds and Monte Carlo simulation for continuous-variable
//! quantum authentication of physical unclonable keys (PUKs).
//!
//! A verifier interrogates a PUK with coherent states `|√μ_P e^{2πik/N}⟩`,
//! measures one random quadrature of the scattered light by homodyne
//! detection and checks whether the outcome falls in a bin of width `Δ`
//! centred on the enrolled response. An adversary holding all
//! challenge-response pairs can intercept each probe, guess `k` and replay
//! the recorded response. This crate computes the analytic security margin
//! against that emulation attack and simulates the attack end to end.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`ensemble`] | probe alphabet, coherent overlaps, Holevo quantity `χ = S(ρ)` |
//! | [`bounds`] | Fano bound, homodyne bin probabilities, security margin `D`, sample size |
//! | [`channel`] | set-up losses and enhancement mapping `μ_P` to `μ_R` |
//! | [`protocol`] | CRP tables, sessions, adversaries, detection experiments |
//! | [`json`] | fixed 17-significant-digit JSON output |

pub mod bounds;
pub mod channel;
pub mod ensemble;
mod error;
pub mod json;
pub mod protocol;

pub use bounds::{
    fano_error_lower_bound, max_pair_probability, min_sample_size, p_in_honest, p_in_pair,
    p_in_shifted, p_in_upper_bound, quadrature_mean, security_margin, DetectionConfig, Quadrature,
    ResponseModel, SecurityReport,
};
pub use channel::{mu_response, OpticalChannel};
pub use ensemble::{
    coherent_overlap, entropy_continuous_limit, holevo_bound, CutoffPolicy, EigenSpectrum,
    HolevoMethod, ProbeEnsemble,
};
pub use error::{Error, Result};
