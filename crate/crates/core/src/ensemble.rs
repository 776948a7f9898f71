//! Uniform ensembles of phase-keyed coherent states and their entropy.
//!
//! The adversary sees the probe as `ρ = (1/N) Σ_k |α_k⟩⟨α_k|` with
//! `α_k = √μ_P e^{2πik/N}`. Averaging over the `N` phases kills every Fock
//! coherence `|m⟩⟨n|` with `m ≢ n (mod N)`, so `ρ` is block diagonal and its
//! non-zero eigenvalues are the Poisson masses collected by photon-number
//! residue class:
//!
//! ```text
//! λ_m = Σ_{n ≡ m (mod N)} e^{-μ} μ^n / n!
//! ```
//!
//! [`holevo_bound`] uses that closed form; [`HolevoMethod::DenseOracle`]
//! builds the truncated density matrix explicitly and diagonalizes it.

use std::f64::consts::{LN_2, PI, TAU};

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Largest Poisson tail mass a Fock cutoff may discard.
pub const TRUNCATION_LIMIT: f64 = 1e-12;

/// Eigenvalues at or below this are dropped from entropy sums (`0 log 0 = 0`).
pub const EIGENVALUE_FLOOR: f64 = 1e-300;

/// Eigenvalues above `-NEGATIVE_TOLERANCE` are clamped to zero.
const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// Above this `|⟨α_k|α_{k+1}⟩|` the residue-class spectrum is no longer close
/// enough to uniform to need the characteristic-function route.
const FOURIER_SWITCH: f64 = 1e-3;

/// The probe alphabet `{|√μ_P e^{2πik/N}⟩ : k ∈ Z_N}`, drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeEnsemble {
    mu_p: f64,
    n_phases: usize,
}

impl ProbeEnsemble {
    pub fn new(mu_p: f64, n_phases: usize) -> Result<Self> {
        if !(mu_p.is_finite() && mu_p > 0.0) {
            return Err(invalid(format!(
                "mean photon number must be finite and > 0, got {mu_p}"
            )));
        }
        if n_phases < 2 {
            return Err(invalid(format!("need at least 2 phases, got {n_phases}")));
        }
        Ok(Self { mu_p, n_phases })
    }

    pub fn mu_p(&self) -> f64 {
        self.mu_p
    }

    pub fn n_phases(&self) -> usize {
        self.n_phases
    }

    /// Phase `φ_k = 2πk/N` of probe `k`, computed directly rather than by accumulation.
    pub fn phase(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        Ok(phase_of(k, self.n_phases))
    }

    /// Complex amplitude `α_k`.
    pub fn amplitude(&self, k: usize) -> Result<Complex64> {
        Ok(Complex64::from_polar(self.mu_p.sqrt(), self.phase(k)?))
    }

    pub(crate) fn check_index(&self, k: usize) -> Result<()> {
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

pub(crate) fn phase_of(k: usize, n: usize) -> f64 {
    TAU * k as f64 / n as f64
}

/// How to choose the Fock-space truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutoffPolicy {
    /// `ceil(μ + 12√μ + 25)`.
    #[default]
    Default,
    /// Keep photon numbers `0..=n`.
    Fixed(usize),
}

impl CutoffPolicy {
    pub fn resolve(self, mu: f64) -> usize {
        match self {
            CutoffPolicy::Default => default_cutoff(mu),
            CutoffPolicy::Fixed(n) => n,
        }
    }
}

pub fn default_cutoff(mu: f64) -> usize {
    (mu + 12.0 * mu.sqrt() + 25.0).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HolevoMethod {
    /// Poisson mass aggregated by residue class, O(cutoff).
    #[default]
    Fast,
    /// Explicit truncated Fock-basis density matrix, Hermitian eigensolver.
    DenseOracle,
}

/// Spectrum of the ensemble density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    pub eigenvalues: Vec<f64>,
    pub cutoff_used: usize,
    pub truncation_mass: f64,
}

impl EigenSpectrum {
    /// Von Neumann entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        shannon_entropy_bits(&self.eigenvalues)
    }
}

/// `-Σ p log2 p`, skipping entries at or below [`EIGENVALUE_FLOOR`].
pub fn shannon_entropy_bits(probs: &[f64]) -> f64 {
    let nats: f64 = probs
        .iter()
        .filter(|&&p| p > EIGENVALUE_FLOOR)
        .map(|&p| -p * p.ln())
        .sum();
    nats / LN_2
}

/// `ln(e^{-μ} μ^n / n!)`.
pub fn poisson_ln_pmf(mu: f64, n: usize) -> f64 {
    let n_f = n as f64;
    if n == 0 {
        return -mu;
    }
    -mu + n_f * mu.ln() - libm::lgamma(n_f + 1.0)
}

/// Poisson probability mass above photon number `cutoff`.
pub fn poisson_tail_mass(mu: f64, cutoff: usize) -> f64 {
    if (cutoff as f64) > mu {
        // terms decrease monotonically past the mode
        let mut total = 0.0;
        let mut n = cutoff + 1;
        loop {
            let term = poisson_ln_pmf(mu, n).exp();
            total += term;
            if term <= total * 1e-20 || term < 1e-320 {
                break;
            }
            n += 1;
        }
        total
    } else {
        let kept: f64 = (0..=cutoff).map(|n| poisson_ln_pmf(mu, n).exp()).sum();
        (1.0 - kept).max(0.0)
    }
}

/// Poisson masses for `n = 0..=cutoff`, generated outward from the mode by
/// the ratio `p(n+1)/p(n) = μ/(n+1)` and scaled to total `1 - tail`.
/// Evaluating each term through log-gamma instead leaves absolute errors
/// near 1e-12 at `μ ~ 1000`, enough to push `S(ρ)` above `log2 N`.
pub fn poisson_pmf_table(mu: f64, cutoff: usize, tail: f64) -> Vec<f64> {
    let mode = (mu.floor() as usize).min(cutoff);
    let mut p = vec![0.0; cutoff + 1];
    p[mode] = poisson_ln_pmf(mu, mode).exp();
    for n in mode..cutoff {
        p[n + 1] = p[n] * mu / (n + 1) as f64;
    }
    for n in (1..=mode).rev() {
        p[n - 1] = p[n] * n as f64 / mu;
    }
    let total: f64 = p.iter().sum();
    let scale = (1.0 - tail) / total;
    p.iter_mut().for_each(|x| *x *= scale);
    p
}

fn checked_cutoff(mu: f64, policy: CutoffPolicy) -> Result<(usize, f64)> {
    let cutoff = policy.resolve(mu);
    let mass = poisson_tail_mass(mu, cutoff);
    if mass >= TRUNCATION_LIMIT {
        return Err(Error::Truncation {
            cutoff,
            mass,
            limit: TRUNCATION_LIMIT,
        });
    }
    Ok((cutoff, mass))
}

/// `⟨α_j|α_k⟩ = exp(μ_P (e^{iΔφ} - 1))` with `Δφ = 2π(k-j)/N`.
pub fn coherent_overlap(ensemble: &ProbeEnsemble, j: usize, k: usize) -> Result<Complex64> {
    ensemble.check_index(j)?;
    ensemble.check_index(k)?;
    let n = ensemble.n_phases as i64;
    // signed offset in (-N/2, N/2] keeps overlap(j,k) = conj(overlap(k,j))
    let mut d = (k as i64 - j as i64).rem_euclid(n);
    if 2 * d > n {
        d -= n;
    }
    let dphi = TAU * d as f64 / n as f64;
    let half = 0.5 * dphi;
    // cos(x) - 1 = -2 sin^2(x/2), accurate for small offsets
    let exponent = Complex64::new(-2.0 * half.sin().powi(2), dphi.sin()) * ensemble.mu_p;
    Ok(exponent.exp())
}

/// Spectrum of `ρ` by the chosen method.
pub fn spectrum(
    ensemble: &ProbeEnsemble,
    method: HolevoMethod,
    policy: CutoffPolicy,
) -> Result<EigenSpectrum> {
    let (cutoff, truncation_mass) = checked_cutoff(ensemble.mu_p, policy)?;
    let eigenvalues = match method {
        HolevoMethod::Fast => residue_class_masses(ensemble, cutoff, truncation_mass),
        HolevoMethod::DenseOracle => dense_eigenvalues(ensemble, cutoff),
    };
    Ok(EigenSpectrum {
        eigenvalues,
        cutoff_used: cutoff,
        truncation_mass,
    })
}

/// Holevo quantity `χ = S(ρ)` in bits.
pub fn holevo_bound(
    ensemble: &ProbeEnsemble,
    method: HolevoMethod,
    policy: CutoffPolicy,
) -> Result<f64> {
    let s = spectrum(ensemble, method, policy)?.entropy_bits();
    // rounding can leave S a few ulps outside [0, log2 N]
    Ok(s.clamp(0.0, (ensemble.n_phases as f64).log2()))
}

/// `log2 N - χ`, the right-hand side of Fano's inequality.
///
/// When the probe states are nearly orthogonal this difference is far below
/// the rounding error of `log2 N - S(ρ)`. In that regime the residue-class
/// masses are written as `λ_m = (1 + δ_m)/N` with the deviations taken from
/// the Poisson characteristic function,
/// `δ_m = Σ_{j=1}^{N-1} exp(μ(ω^j - 1)) ω^{-jm}`, `ω = e^{2πi/N}`,
/// and the difference is summed as `Σ_m [(1+δ_m) ln(1+δ_m) - δ_m] / (N ln 2)`,
/// every term of which is non-negative.
pub fn holevo_deficit(ensemble: &ProbeEnsemble, policy: CutoffPolicy) -> Result<f64> {
    let n = ensemble.n_phases as f64;
    let nearest = (-2.0 * ensemble.mu_p * (PI / n).sin().powi(2)).exp();
    if nearest < FOURIER_SWITCH {
        let deltas = residue_class_deviations(ensemble);
        let nats: f64 = deltas.iter().map(|&d| excess_entropy_term(d)).sum();
        return Ok(nats / (n * LN_2));
    }
    let chi = holevo_bound(ensemble, HolevoMethod::Fast, policy)?;
    Ok((n.log2() - chi).max(0.0))
}

fn residue_class_masses(ensemble: &ProbeEnsemble, cutoff: usize, tail: f64) -> Vec<f64> {
    let n = ensemble.n_phases;
    let mut lambda = vec![0.0; n.min(cutoff + 1)];
    for (photons, p) in poisson_pmf_table(ensemble.mu_p, cutoff, tail)
        .into_iter()
        .enumerate()
    {
        lambda[photons % n] += p;
    }
    lambda
}

/// `N λ_m - 1` for every residue class, without Fock truncation.
pub(crate) fn residue_class_deviations(ensemble: &ProbeEnsemble) -> Vec<f64> {
    let n = ensemble.n_phases;
    let mu = ensemble.mu_p;
    // (|c_j|, arg c_j) for j = 1..N-1, dropping underflowed terms
    let coeffs: Vec<(usize, f64, f64)> = (1..n)
        .filter_map(|j| {
            let x = PI * j as f64 / n as f64;
            let modulus = (-2.0 * mu * x.sin().powi(2)).exp();
            (modulus > 0.0).then(|| (j, modulus, mu * (2.0 * x).sin()))
        })
        .collect();
    (0..n)
        .map(|m| {
            coeffs
                .iter()
                .map(|&(j, modulus, arg)| {
                    let turn = ((j * m) % n) as f64 / n as f64;
                    modulus * (arg - TAU * turn).cos()
                })
                .sum()
        })
        .collect()
}

/// `(1+δ) ln(1+δ) - δ`, using its Taylor series near zero.
fn excess_entropy_term(d: f64) -> f64 {
    if d.abs() < 1e-3 {
        // Σ_{n≥2} (-1)^n d^n / (n(n-1))
        let mut sum = 0.0;
        let mut power = d * d;
        for n in 2..12 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * power / (n * (n - 1)) as f64;
            power *= d;
        }
        sum
    } else {
        (1.0 + d) * d.ln_1p() - d
    }
}

fn coherent_fock_vector(mu: f64, phase: f64, cutoff: usize) -> DVector<Complex64> {
    DVector::from_iterator(
        cutoff + 1,
        (0..=cutoff).map(|n| {
            let modulus = (0.5 * poisson_ln_pmf(mu, n)).exp();
            Complex64::from_polar(modulus, n as f64 * phase)
        }),
    )
}

fn dense_eigenvalues(ensemble: &ProbeEnsemble, cutoff: usize) -> Vec<f64> {
    let dim = cutoff + 1;
    let n = ensemble.n_phases;
    let weight = Complex64::new(1.0 / n as f64, 0.0);
    let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..n {
        let v = coherent_fock_vector(ensemble.mu_p, phase_of(k, n), cutoff);
        rho.gerc(weight, &v, &v, Complex64::new(1.0, 0.0));
    }
    let eig = SymmetricEigen::new(rho);
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -NEGATIVE_TOLERANCE {
                warn!("density matrix eigenvalue {v:e} below tolerance; clamping to 0");
            }
            *v = 0.0;
        }
    }
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// `log2 √(2πe μ_P)`, the large-`N` entropy of the ensemble.
pub fn entropy_continuous_limit(mu_p: f64) -> Result<f64> {
    if !(mu_p.is_finite() && mu_p > 0.0) {
        return Err(invalid(format!(
            "mean photon number must be finite and > 0, got {mu_p}"
        )));
    }
    if mu_p < 10.0 {
        warn!("continuous-limit entropy is only accurate for μ_P ≳ 10 (got {mu_p})");
    }
    Ok(0.5 * (TAU * std::f64::consts::E * mu_p).log2())
}
