use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    min_sample_size, p_in_honest, p_in_upper_bound, security_margin, DetectionConfig,
    ResponseModel, SecurityReport,
};
use crate::ensemble::ProbeEnsemble;
use crate::error::{invalid, Error, Result};

use super::adversary::{adversary_infer, AdversaryStrategy};
use super::crp::{CrpTable, DEFAULT_MASK_ID};
use super::{Challenge, SessionStreams};

/// Sample count and acceptance rule `|f_in - P_in^(0)| < ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationPolicy {
    pub m: u64,
    pub epsilon: f64,
    pub zeta: f64,
    /// When set, `m` must reach `min_sample_size(ε, ζ)`.
    pub strict: bool,
}

impl VerificationPolicy {
    /// `m = min_sample_size(ε, ζ)`.
    pub fn strict(epsilon: f64, zeta: f64) -> Result<Self> {
        let m = min_sample_size(epsilon, zeta)?;
        Ok(Self {
            m,
            epsilon,
            zeta,
            strict: true,
        })
    }

    /// Any positive `m`, for quick runs.
    pub fn desk(m: u64, epsilon: f64, zeta: f64) -> Result<Self> {
        let policy = Self {
            m,
            epsilon,
            zeta,
            strict: false,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        let required = min_sample_size(self.epsilon, self.zeta)?;
        if self.m == 0 {
            return Err(invalid("a session needs at least one query"));
        }
        if self.strict && self.m < required {
            return Err(invalid(format!(
                "m = {} is below the required sample size {required} for ε = {}, ζ = {}",
                self.m, self.epsilon, self.zeta
            )));
        }
        Ok(())
    }
}

/// Per-quadrature query and in-bin counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct QuadratureCounts {
    pub queries: u64,
    pub in_bin: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionResult {
    pub m: u64,
    pub m_in: u64,
    pub f_in: f64,
    pub accepted: bool,
    /// Fraction of queries where the adversary guessed wrong; `None` without an adversary.
    pub p_err_empirical: Option<f64>,
    pub adversary_errors: u64,
    /// Indexed by [`Quadrature::index`].
    pub per_quadrature: [QuadratureCounts; 2],
}

/// One homodyne outcome from `N(table mean, σ²)` for the challenge.
pub fn honest_sample<R: Rng + ?Sized>(
    crp: &CrpTable,
    ch: &Challenge,
    det: &DetectionConfig,
    rng: &mut R,
) -> Result<f64> {
    crp.entry(ch.k)?;
    Ok(gaussian(crp.mean(ch.k, ch.quadrature), det.sigma(), rng))
}

fn gaussian<R: Rng + ?Sized>(mean: f64, sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + sigma * z
}

/// Whether `outcome` lies in the closed bin `[q̄ - Δ/2, q̄ + Δ/2]` around the enrolled mean.
pub fn bin_check(
    crp: &CrpTable,
    ch: &Challenge,
    det: &DetectionConfig,
    outcome: f64,
) -> Result<bool> {
    crp.entry(ch.k)?;
    Ok(in_bin(
        crp.mean(ch.k, ch.quadrature),
        det.bin_width(),
        outcome,
    ))
}

fn in_bin(center: f64, width: f64, outcome: f64) -> bool {
    let half = 0.5 * width;
    center - half <= outcome && outcome <= center + half
}

/// A session in which the genuine key responds exactly as enrolled.
pub fn run_session(
    ensemble: &ProbeEnsemble,
    crp: &CrpTable,
    det: &DetectionConfig,
    policy: &VerificationPolicy,
    strategy: &AdversaryStrategy,
    streams: &mut SessionStreams,
) -> Result<SessionResult> {
    run_session_with_device(ensemble, crp, crp, det, policy, strategy, streams)
}

/// A session where bins come from `database` and the genuine key answers
/// with `device` means. The adversary replays `database` entries.
pub fn run_session_with_device(
    ensemble: &ProbeEnsemble,
    database: &CrpTable,
    device: &CrpTable,
    det: &DetectionConfig,
    policy: &VerificationPolicy,
    strategy: &AdversaryStrategy,
    streams: &mut SessionStreams,
) -> Result<SessionResult> {
    policy.validate()?;
    let n = ensemble.n_phases();
    for table in [database, device] {
        if table.n_phases() != n {
            return Err(Error::PhaseCountMismatch {
                ensemble: n,
                model: table.n_phases(),
            });
        }
    }
    let sigma = det.sigma();
    let width = det.bin_width();
    let mut counts = [QuadratureCounts::default(); 2];
    let mut errors = 0u64;
    for _ in 0..policy.m {
        let ch = Challenge::draw(n, &mut streams.challenge);
        let mean = if strategy.is_active() {
            let k_tilde = adversary_infer(strategy, ch.k, ensemble, &mut streams.adversary)?;
            if k_tilde != ch.k {
                errors += 1;
            }
            strategy.response_scale * database.mean(k_tilde, ch.quadrature)
        } else {
            device.mean(ch.k, ch.quadrature)
        };
        let outcome = gaussian(mean, sigma, &mut streams.verifier);
        let c = &mut counts[ch.quadrature.index()];
        c.queries += 1;
        if in_bin(database.mean(ch.k, ch.quadrature), width, outcome) {
            c.in_bin += 1;
        }
    }
    let m_in = counts[0].in_bin + counts[1].in_bin;
    let f_in = m_in as f64 / policy.m as f64;
    let accepted = (f_in - p_in_honest(det)).abs() < policy.epsilon;
    Ok(SessionResult {
        m: policy.m,
        m_in,
        f_in,
        accepted,
        p_err_empirical: strategy
            .is_active()
            .then(|| errors as f64 / policy.m as f64),
        adversary_errors: errors,
        per_quadrature: counts,
    })
}

/// Aggregate of many independent sessions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub n_sessions: usize,
    pub m: u64,
    pub epsilon: f64,
    pub accepted: usize,
    pub accept_rate: f64,
    pub mean_f_in: f64,
    /// Standard error of `mean_f_in` from the spread across sessions.
    pub f_in_std_error: f64,
    pub p_in0: f64,
    /// Pooled adversary error rate over all queries.
    pub p_err_empirical: Option<f64>,
    /// Upper bound on `P_in` evaluated at the empirical error rate.
    pub p_in_bound: Option<f64>,
    /// Whether `D > 2ε` for these parameters.
    pub predicted_detection: bool,
    pub report: SecurityReport,
    pub f_in: Vec<f64>,
}

/// Runs `n_sessions` independent sessions (in parallel, merged by session index).
pub fn detection_experiment(
    ensemble: &ProbeEnsemble,
    model: &ResponseModel,
    det: &DetectionConfig,
    policy: &VerificationPolicy,
    strategy: &AdversaryStrategy,
    n_sessions: usize,
    seed: u64,
) -> Result<ExperimentSummary> {
    if n_sessions == 0 {
        return Err(invalid("need at least one session"));
    }
    let report = security_margin(ensemble, model, det, policy.epsilon)?;
    let crp = CrpTable::from_model(model, DEFAULT_MASK_ID);
    let sessions: Vec<SessionResult> = (0..n_sessions)
        .into_par_iter()
        .map(|s| {
            let mut streams = SessionStreams::new(seed, s as u64);
            run_session(ensemble, &crp, det, policy, strategy, &mut streams)
        })
        .collect::<Result<_>>()?;

    let n = n_sessions as f64;
    let f_in: Vec<f64> = sessions.iter().map(|s| s.f_in).collect();
    let mean_f_in = f_in.iter().sum::<f64>() / n;
    let var = if n_sessions > 1 {
        f_in.iter().map(|f| (f - mean_f_in).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let accepted = sessions.iter().filter(|s| s.accepted).count();
    let p_err_empirical = strategy.is_active().then(|| {
        let errors: u64 = sessions.iter().map(|s| s.adversary_errors).sum();
        errors as f64 / (policy.m as f64 * n)
    });
    let p_in_bound = match p_err_empirical {
        Some(p) => Some(p_in_upper_bound(p, report.p_in0, report.max_pair_prob)?),
        None => None,
    };
    Ok(ExperimentSummary {
        n_sessions,
        m: policy.m,
        epsilon: policy.epsilon,
        accepted,
        accept_rate: accepted as f64 / n,
        mean_f_in,
        f_in_std_error: (var / n).sqrt(),
        p_in0: report.p_in0,
        p_err_empirical,
        p_in_bound,
        predicted_detection: report.secure,
        report,
        f_in,
    })
}
