//! Coarse-grained homodyne statistics and the emulation-attack security margin.
//!
//! A homodyne outcome is Gaussian with standard deviation `σ = 1/√(2η)` and
//! is accepted when it lands in a bin of width `Δ = Δ̄σ` centred on the
//! enrolled quadrature mean. Honest responses land there with probability
//! `P_in^(0) = Erf(Δ̄/(2√2))`. A cheater who guesses `k̃ ≠ k` shifts the
//! Gaussian by `S = ⟨Q_k̃(θ)⟩ - ⟨Q_k(θ)⟩` and lowers that probability.
//! Combining Fano's inequality with the largest wrong-guess probability
//! gives the margin
//!
//! ```text
//! D = p_err^low · (P_in^(0) - max_{k≠k̃} P(in|k,k̃))
//! ```
//!
//! and cheating is detected with high confidence when `D > 2ε`.

use std::f64::consts::{FRAC_PI_2, LN_2, SQRT_2, TAU};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{holevo_bound, holevo_deficit, CutoffPolicy, HolevoMethod, ProbeEnsemble};
use crate::error::{invalid, Error, Result};

const FANO_MAX_ITER: usize = 200;
/// Smallest error probability the Fano solver resolves; below it the bound is 0.
const FANO_P_MIN: f64 = 1e-300;

/// Homodyne detector and binning parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    eta: f64,
    delta_bar: f64,
}

impl DetectionConfig {
    /// `eta ∈ (0, 1]`, `delta_bar > 0`. Values of `Δ̄` outside `[2, 4)` only warn.
    pub fn new(eta: f64, delta_bar: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0 && eta <= 1.0) {
            return Err(invalid(format!(
                "detection efficiency must lie in (0, 1], got {eta}"
            )));
        }
        Self::checked_bin(eta, delta_bar)
    }

    /// Accepts any positive efficiency, including unphysical `η > 1`.
    /// Only meant for probing the `σ → 0` limit.
    pub fn unchecked_efficiency(eta: f64, delta_bar: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(invalid(format!(
                "detection efficiency must be finite and > 0, got {eta}"
            )));
        }
        Self::checked_bin(eta, delta_bar)
    }

    fn checked_bin(eta: f64, delta_bar: f64) -> Result<Self> {
        if !(delta_bar.is_finite() && delta_bar > 0.0) {
            return Err(invalid(format!(
                "bin ratio Δ̄ must be finite and > 0, got {delta_bar}"
            )));
        }
        if !(2.0..4.0).contains(&delta_bar) {
            warn!("bin ratio Δ̄ = {delta_bar} is outside the recommended range [2, 4)");
        }
        Ok(Self { eta, delta_bar })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn delta_bar(&self) -> f64 {
        self.delta_bar
    }

    /// Homodyne noise `σ = 1/√(2η)`.
    pub fn sigma(&self) -> f64 {
        1.0 / (2.0 * self.eta).sqrt()
    }

    /// Absolute bin width `Δ = Δ̄σ`.
    pub fn bin_width(&self) -> f64 {
        self.delta_bar * self.sigma()
    }
}

/// The two local-oscillator phases used by the verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    /// `θ = 0`
    X,
    /// `θ = π/2`
    Y,
}

impl Quadrature {
    pub const BOTH: [Quadrature; 2] = [Quadrature::X, Quadrature::Y];

    pub fn angle(self) -> f64 {
        match self {
            Quadrature::X => 0.0,
            Quadrature::Y => FRAC_PI_2,
        }
    }

    /// Maps `0` and `π/2` to a quadrature; any other angle is rejected.
    pub fn from_angle(theta: f64) -> Result<Self> {
        const TOL: f64 = 1e-12;
        if theta.abs() <= TOL {
            Ok(Quadrature::X)
        } else if (theta - FRAC_PI_2).abs() <= TOL {
            Ok(Quadrature::Y)
        } else {
            Err(invalid(format!(
                "only θ ∈ {{0, π/2}} is measured, got {theta}"
            )))
        }
    }

    pub fn index(self) -> usize {
        match self {
            Quadrature::X => 0,
            Quadrature::Y => 1,
        }
    }
}

/// Expected response of the key: amplitude `√(2μ_R)` and phases `ψ_k = arg 𝓕 + 2πk/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    mu_r: f64,
    arg_f: f64,
    n_phases: usize,
}

impl ResponseModel {
    pub fn new(mu_r: f64, arg_f: f64, n_phases: usize) -> Result<Self> {
        if !(mu_r.is_finite() && mu_r >= 0.0) {
            return Err(invalid(format!(
                "response photon number must be finite and >= 0, got {mu_r}"
            )));
        }
        if !arg_f.is_finite() {
            return Err(invalid("arg(F) must be finite"));
        }
        if n_phases < 2 {
            return Err(invalid(format!("need at least 2 phases, got {n_phases}")));
        }
        Ok(Self {
            mu_r,
            arg_f,
            n_phases,
        })
    }

    pub fn mu_r(&self) -> f64 {
        self.mu_r
    }

    pub fn arg_f(&self) -> f64 {
        self.arg_f
    }

    pub fn n_phases(&self) -> usize {
        self.n_phases
    }

    pub fn amplitude(&self) -> f64 {
        (2.0 * self.mu_r).sqrt()
    }

    /// `ψ_k`.
    pub fn response_phase(&self, k: usize) -> f64 {
        self.arg_f + TAU * k as f64 / self.n_phases as f64
    }

    /// `(⟨X_k⟩, ⟨Y_k⟩)` without bounds checking.
    pub(crate) fn means(&self, k: usize) -> (f64, f64) {
        let a = self.amplitude();
        let psi = self.response_phase(k);
        (a * psi.cos(), a * psi.sin())
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k < self.n_phases {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: k,
                n_phases: self.n_phases,
            })
        }
    }
}

/// `⟨Q_k(θ)⟩ = √(2μ_R) cos(ψ_k - θ)`.
pub fn quadrature_mean(model: &ResponseModel, k: usize, quadrature: Quadrature) -> Result<f64> {
    model.check_index(k)?;
    let (x, y) = model.means(k);
    Ok(match quadrature {
        Quadrature::X => x,
        Quadrature::Y => y,
    })
}

/// `P_in^(0) = Erf(Δ̄/(2√2))`.
pub fn p_in_honest(det: &DetectionConfig) -> f64 {
    libm::erf(det.delta_bar / (2.0 * SQRT_2))
}

/// Mass of `N(ξ̄, 1)` inside `[-Δ̄/2, Δ̄/2]`, both in units of σ.
///
/// Evaluated on `|ξ̄|` so the result is exactly even; when the whole bin lies
/// in one tail the complementary error function avoids cancellation.
pub(crate) fn normalized_bin_mass(xi_bar: f64, delta_bar: f64) -> f64 {
    let s = xi_bar.abs();
    let upper = (2.0 * s + delta_bar) / (2.0 * SQRT_2);
    let lower = (2.0 * s - delta_bar) / (2.0 * SQRT_2);
    if lower > 0.0 {
        0.5 * (libm::erfc(lower) - libm::erfc(upper))
    } else {
        0.5 * (libm::erf(upper) + libm::erf(-lower))
    }
}

/// Probability that a sample of `N(mean, σ²)` falls in `[center - width/2, center + width/2]`.
pub fn gaussian_bin_probability(mean: f64, center: f64, width: f64, sigma: f64) -> f64 {
    normalized_bin_mass((mean - center) / sigma, width / sigma)
}

/// In-bin probability when the verifier samples a Gaussian displaced by
/// `shift` (absolute quadrature units) from the bin centre.
pub fn p_in_shifted(det: &DetectionConfig, shift: f64) -> f64 {
    normalized_bin_mass(shift / det.sigma(), det.delta_bar)
}

fn pair_probability(
    means: &[(f64, f64)],
    sigma: f64,
    delta_bar: f64,
    k: usize,
    k_tilde: usize,
) -> f64 {
    let (xk, yk) = means[k];
    let (xt, yt) = means[k_tilde];
    0.5 * (normalized_bin_mass((xt - xk) / sigma, delta_bar)
        + normalized_bin_mass((yt - yk) / sigma, delta_bar))
}

fn all_means(model: &ResponseModel) -> Vec<(f64, f64)> {
    (0..model.n_phases).map(|k| model.means(k)).collect()
}

/// `P(in|k,k̃)`: the shifted in-bin probability averaged over both quadratures.
pub fn p_in_pair(
    model: &ResponseModel,
    det: &DetectionConfig,
    k: usize,
    k_tilde: usize,
) -> Result<f64> {
    model.check_index(k)?;
    model.check_index(k_tilde)?;
    let means = [model.means(k), model.means(k_tilde)];
    Ok(pair_probability(&means, det.sigma(), det.delta_bar, 0, 1))
}

/// Largest wrong-guess in-bin probability and the pair attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxPair {
    pub probability: f64,
    pub pair: (usize, usize),
}

/// Pairs within this relative distance of the maximum count as tied.
/// Mirror-image pairs are equal in exact arithmetic but their means come
/// from different `cos`/`sin` evaluations and differ in the last few bits.
pub const PAIR_TIE_TOLERANCE: f64 = 1e-12;

/// Exhaustive `max_{k≠k̃} P(in|k,k̃)`.
///
/// `P(in|k,k̃) = P(in|k̃,k)` exactly because the bin mass is evaluated on
/// `|S|`, so only `k < k̃` is visited. The maximum is found with a parallel
/// row scan; the reported pair is then the lexicographically first one
/// within [`PAIR_TIE_TOLERANCE`] of it, which is also the first tied pair
/// of a full ordered scan since it has `k < k̃`.
pub fn max_pair_probability(model: &ResponseModel, det: &DetectionConfig) -> MaxPair {
    let n = model.n_phases;
    let means = all_means(model);
    let sigma = det.sigma();
    let delta_bar = det.delta_bar;
    let prob = |k: usize, kt: usize| pair_probability(&means, sigma, delta_bar, k, kt);
    let best = (0..n - 1)
        .into_par_iter()
        .map(|k| {
            (k + 1..n)
                .map(|kt| prob(k, kt))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let threshold = best - PAIR_TIE_TOLERANCE * best.abs();
    let pair = (0..n - 1)
        .flat_map(|k| (k + 1..n).map(move |kt| (k, kt)))
        .find(|&(k, kt)| prob(k, kt) >= threshold)
        .expect("the maximum is attained");
    MaxPair {
        probability: best,
        pair,
    }
}

/// Binary entropy `H(p)` in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    (-p * p.ln() - (1.0 - p) * (-p).ln_1p()) / LN_2
}

/// Left-hand side of Fano's inequality, `H(p) + p log2(N-1)`.
pub fn fano_lhs(p: f64, n_phases: usize) -> f64 {
    binary_entropy(p) + p * ((n_phases - 1) as f64).log2()
}

/// Smallest error probability compatible with Fano's inequality
/// `H(p) + p log2(N-1) ≥ log2 N - χ`.
pub fn fano_error_lower_bound(chi: f64, n_phases: usize) -> Result<f64> {
    if n_phases < 2 {
        return Err(invalid(format!("Fano bound needs N >= 2, got {n_phases}")));
    }
    if chi.is_nan() || chi < 0.0 {
        return Err(invalid(format!("Holevo quantity must be >= 0, got {chi}")));
    }
    fano_bound_from_deficit((n_phases as f64).log2() - chi, n_phases)
}

/// Fano bound from the right-hand side `r = log2 N - χ` directly.
///
/// The left-hand side rises strictly from 0 to `log2 N` on `[0, 1 - 1/N]`;
/// the root is bracketed by bisection in `ln p`, which resolves `p` to full
/// relative precision even when `r` is astronomically small. The returned
/// value is the lower end of the final bracket.
pub fn fano_bound_from_deficit(rhs: f64, n_phases: usize) -> Result<f64> {
    if n_phases < 2 {
        return Err(invalid(format!("Fano bound needs N >= 2, got {n_phases}")));
    }
    if rhs.is_nan() {
        return Err(invalid("Fano right-hand side is NaN"));
    }
    let p_max = 1.0 - 1.0 / n_phases as f64;
    if rhs <= 0.0 {
        return Ok(0.0);
    }
    if rhs >= (n_phases as f64).log2() {
        return Ok(p_max);
    }
    if fano_lhs(FANO_P_MIN, n_phases) >= rhs {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (FANO_P_MIN.ln(), p_max.ln());
    for _ in 0..FANO_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if fano_lhs(mid.exp(), n_phases) >= rhs {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(lo.exp())
}

/// Everything that enters the security condition `D > 2ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub n_phases: usize,
    pub chi: f64,
    pub p_err_low: f64,
    pub p_in0: f64,
    pub max_pair_prob: f64,
    pub max_pair: (usize, usize),
    pub margin_d: f64,
    pub epsilon: f64,
    pub secure: bool,
}

/// Evaluates `D` and compares it with `2ε`.
pub fn security_margin(
    ensemble: &ProbeEnsemble,
    model: &ResponseModel,
    det: &DetectionConfig,
    epsilon: f64,
) -> Result<SecurityReport> {
    if ensemble.n_phases() != model.n_phases {
        return Err(Error::PhaseCountMismatch {
            ensemble: ensemble.n_phases(),
            model: model.n_phases,
        });
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(invalid(format!("ε must be finite and >= 0, got {epsilon}")));
    }
    let n = ensemble.n_phases();
    let chi = holevo_bound(ensemble, HolevoMethod::Fast, CutoffPolicy::Default)?;
    let deficit = holevo_deficit(ensemble, CutoffPolicy::Default)?;
    let p_err_low = fano_bound_from_deficit(deficit, n)?;
    let p_in0 = p_in_honest(det);
    let max_pair = max_pair_probability(model, det);
    let gap = (p_in0 - max_pair.probability).max(0.0);
    let margin_d = p_err_low * gap;
    Ok(SecurityReport {
        n_phases: n,
        chi,
        p_err_low,
        p_in0,
        max_pair_prob: max_pair.probability.min(p_in0),
        max_pair: max_pair.pair,
        margin_d,
        epsilon,
        secure: margin_d > 2.0 * epsilon,
    })
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!(
            "{name} must be a probability in [0, 1], got {p}"
        )))
    }
}

/// Upper bound `(1 - p_err) P_in^(0) + p_err · max_pair` on the in-bin
/// probability under attack.
pub fn p_in_upper_bound(p_err: f64, p_in0: f64, max_pair: f64) -> Result<f64> {
    check_probability("p_err", p_err)?;
    check_probability("p_in0", p_in0)?;
    check_probability("max_pair", max_pair)?;
    if max_pair > p_in0 {
        return Err(invalid(format!(
            "max pair probability {max_pair} exceeds honest probability {p_in0}"
        )));
    }
    Ok((1.0 - p_err) * p_in0 + p_err * max_pair)
}

/// Sample size `ceil(3 ln(2/ζ) / ε²)` guaranteeing `Pr(|f_in - P_in| ≥ ε) < ζ`.
pub fn min_sample_size(epsilon: f64, zeta: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("ε must lie in (0, 1), got {epsilon}")));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(invalid(format!("ζ must lie in (0, 1), got {zeta}")));
    }
    Ok((3.0 * (2.0 / zeta).ln() / (epsilon * epsilon)).ceil() as u64)
}
