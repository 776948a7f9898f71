use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensemble::{phase_of, ProbeEnsemble};
use crate::error::{invalid, Error, Result};

use super::crp::CrpTable;

/// How a forced wrong guess is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WrongGuess {
    /// Uniform over `Z_N \ {k}`.
    #[default]
    Uniform,
    /// `k ± 1 (mod N)` with equal probability.
    Adjacent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversaryKind {
    /// No adversary: the genuine key answers.
    None,
    /// Always infers the right `k`.
    Oracle,
    /// Errs with probability `p`.
    FixedError { p: f64, wrong: WrongGuess },
    /// Ideal heterodyne measurement of the probe followed by nearest-phase rounding.
    Heterodyne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryStrategy {
    pub kind: AdversaryKind,
    /// Multiplies the replayed response means; 1 replays the table as recorded.
    pub response_scale: f64,
}

impl AdversaryStrategy {
    pub fn new(kind: AdversaryKind) -> Result<Self> {
        if let AdversaryKind::FixedError { p, .. } = kind {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!(
                    "forced error rate must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(Self {
            kind,
            response_scale: 1.0,
        })
    }

    pub fn honest() -> Self {
        Self {
            kind: AdversaryKind::None,
            response_scale: 1.0,
        }
    }

    pub fn with_response_scale(mut self, scale: f64) -> Result<Self> {
        if !scale.is_finite() {
            return Err(invalid("response scale must be finite"));
        }
        self.response_scale = scale;
        Ok(self)
    }

    pub fn is_active(&self) -> bool {
        !matches!(self.kind, AdversaryKind::None)
    }

    /// Parses `honest`, `oracle`, `heterodyne`, `fixed-error:P` or `fixed-error-adjacent:P`.
    pub fn parse(spec: &str) -> Result<Self> {
        let kind = match spec {
            "honest" | "none" => AdversaryKind::None,
            "oracle" => AdversaryKind::Oracle,
            "heterodyne" => AdversaryKind::Heterodyne,
            other => {
                let (name, p) = other
                    .split_once(':')
                    .ok_or_else(|| invalid(format!("unknown strategy `{other}`")))?;
                let wrong = match name {
                    "fixed-error" => WrongGuess::Uniform,
                    "fixed-error-adjacent" => WrongGuess::Adjacent,
                    _ => return Err(invalid(format!("unknown strategy `{other}`"))),
                };
                let p: f64 = p
                    .parse()
                    .map_err(|_| invalid(format!("bad error rate in `{other}`")))?;
                AdversaryKind::FixedError { p, wrong }
            }
        };
        Self::new(kind)
    }
}

/// The adversary's estimate `k̃` of the probe index.
pub fn adversary_infer<R: Rng + ?Sized>(
    strategy: &AdversaryStrategy,
    true_k: usize,
    ensemble: &ProbeEnsemble,
    rng: &mut R,
) -> Result<usize> {
    ensemble.check_index(true_k)?;
    let n = ensemble.n_phases();
    Ok(match strategy.kind {
        AdversaryKind::None | AdversaryKind::Oracle => true_k,
        AdversaryKind::FixedError { p, wrong } => {
            if rng.random::<f64>() < p {
                wrong_guess(true_k, n, wrong, rng)
            } else {
                true_k
            }
        }
        AdversaryKind::Heterodyne => {
            // vacuum 1/2 plus heterodyne penalty 1/2 per quadrature
            let amp = (2.0 * ensemble.mu_p()).sqrt();
            let phi = phase_of(true_k, n);
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let zx = amp * phi.cos() + g1;
            let zy = amp * phi.sin() + g2;
            let turns = n as f64 * zy.atan2(zx) / TAU;
            (turns.round() as i64).rem_euclid(n as i64) as usize
        }
    })
}

fn wrong_guess<R: Rng + ?Sized>(k: usize, n: usize, wrong: WrongGuess, rng: &mut R) -> usize {
    match wrong {
        WrongGuess::Uniform => {
            let r = rng.random_range(0..n - 1);
            if r >= k {
                r + 1
            } else {
                r
            }
        }
        WrongGuess::Adjacent => {
            if rng.random::<bool>() {
                (k + 1) % n
            } else {
                (k + n - 1) % n
            }
        }
    }
}

/// Response means the adversary replays after guessing `k_tilde`.
pub fn adversary_respond(crp: &CrpTable, k_tilde: usize) -> Result<(f64, f64)> {
    crp.entry(k_tilde).map_err(|_| Error::IndexOutOfRange {
        index: k_tilde,
        n_phases: crp.n_phases(),
    })
}
