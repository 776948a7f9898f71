//! Loss and enhancement model of the interrogation set-up.
//!
//! Photons pass fibre A (`τ_A`), the wavefront-shaping chamber (`τ_IC`, enhancement
//! `𝓔` over `𝒩` controlled modes, slab with `l/L`) and fibre B (`τ_B`):
//!
//! ```text
//! μ_A = τ_A μ_P
//! μ_B = τ_IC 𝓔 (1/𝒩)(1 - l/L) μ_A
//! μ_R = τ_B μ_B = 𝓔 |𝓕|² μ_P,   |𝓕|² = τ_A τ_IC τ_B (1/𝒩)(1 - l/L)
//! ```

use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Typical single-mode fibre transmission over tens of metres at 1550 nm.
pub const SMF_TRANSMISSION: f64 = 0.99;

fn smf_default() -> f64 {
    SMF_TRANSMISSION
}

fn unity() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalChannel {
    #[serde(default = "smf_default")]
    pub tau_a: f64,
    #[serde(default = "smf_default")]
    pub tau_b: f64,
    #[serde(default = "unity")]
    pub tau_ic: f64,
    pub n_modes: u32,
    pub enhancement: f64,
    #[serde(default)]
    pub mean_free_path_ratio: f64,
    #[serde(default)]
    pub arg_f: f64,
}

/// Conditions that are physically suspicious but not invalid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelWarning {
    /// `|𝓕|² = 1/𝒩`: only reachable without any loss and with `l → 0`.
    IdealTransmission,
    /// `𝓔 > π𝒩/4`.
    EnhancementAboveIdeal { enhancement: f64, ideal: f64 },
}

/// Photon numbers along the optical path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseChain {
    pub mu_p: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_r: f64,
}

impl OpticalChannel {
    /// Lossless fibres and chamber with no diffusive loss.
    pub fn lossless(n_modes: u32, enhancement: f64) -> Self {
        Self {
            tau_a: 1.0,
            tau_b: 1.0,
            tau_ic: 1.0,
            n_modes,
            enhancement,
            mean_free_path_ratio: 0.0,
            arg_f: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, tau) in [
            ("tau_a", self.tau_a),
            ("tau_b", self.tau_b),
            ("tau_ic", self.tau_ic),
        ] {
            if !(0.0..=1.0).contains(&tau) {
                return Err(invalid(format!(
                    "{name} must be a transmission in [0, 1], got {tau}"
                )));
            }
        }
        if self.n_modes == 0 {
            return Err(invalid("at least one controlled mode is required"));
        }
        if !(self.enhancement.is_finite() && self.enhancement >= 0.0) {
            return Err(invalid(format!(
                "enhancement must be finite and >= 0, got {}",
                self.enhancement
            )));
        }
        if !(0.0..1.0).contains(&self.mean_free_path_ratio) {
            return Err(invalid(format!(
                "mean free path ratio l/L must lie in [0, 1), got {}",
                self.mean_free_path_ratio
            )));
        }
        if !self.arg_f.is_finite() {
            return Err(invalid("arg(F) must be finite"));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<ChannelWarning> {
        let mut out = Vec::new();
        if self.f_squared() >= 1.0 / self.n_modes as f64 {
            out.push(ChannelWarning::IdealTransmission);
        }
        let ideal = PI * self.n_modes as f64 / 4.0;
        if self.enhancement > ideal {
            out.push(ChannelWarning::EnhancementAboveIdeal {
                enhancement: self.enhancement,
                ideal,
            });
        }
        out
    }

    /// `|𝓕|² = τ_B τ_IC τ_A (1/𝒩)(1 - l/L)`, never above `1/𝒩` for a valid channel.
    pub fn f_squared(&self) -> f64 {
        self.tau_b * self.tau_ic * self.tau_a * (1.0 - self.mean_free_path_ratio)
            / self.n_modes as f64
    }

    /// Propagates `mu_p` through the set-up.
    pub fn response_chain(&self, mu_p: f64) -> Result<ResponseChain> {
        self.validate()?;
        if !(mu_p.is_finite() && mu_p > 0.0) {
            return Err(invalid(format!(
                "probe photon number must be finite and > 0, got {mu_p}"
            )));
        }
        for w in self.warnings() {
            match w {
                ChannelWarning::IdealTransmission => {
                    warn!("|F|^2 equals 1/N: lossless, l -> 0 idealization")
                }
                ChannelWarning::EnhancementAboveIdeal { enhancement, ideal } => {
                    warn!("enhancement {enhancement} exceeds the ideal value pi*N/4 = {ideal}")
                }
            }
        }
        let mu_a = self.tau_a * mu_p;
        let mu_b = self.tau_ic * self.enhancement * (1.0 - self.mean_free_path_ratio)
            / self.n_modes as f64
            * mu_a;
        let mu_r = self.tau_b * mu_b;
        Ok(ResponseChain {
            mu_p,
            mu_a,
            mu_b,
            mu_r,
        })
    }
}

/// `μ_R = 𝓔 |𝓕|² μ_P`.
pub fn mu_response(channel: &OpticalChannel, mu_p: f64) -> Result<f64> {
    Ok(channel.response_chain(mu_p)?.mu_r)
}

/// Ratio of adjacent lengths in `λ ≪ l ≪ L ≪ L_abs` that exceeds 0.1.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyViolation {
    pub smaller: &'static str,
    pub larger: &'static str,
    pub ratio: f64,
}

/// Checks the diffusive-regime ordering of wavelength, mean free path, slab
/// thickness and absorption length. None of these enter any computed quantity.
pub fn check_length_hierarchy(
    wavelength: f64,
    mean_free_path: f64,
    thickness: f64,
    absorption_length: f64,
) -> Vec<HierarchyViolation> {
    let lengths = [
        ("wavelength", wavelength),
        ("mean_free_path", mean_free_path),
        ("thickness", thickness),
        ("absorption_length", absorption_length),
    ];
    let violations: Vec<_> = lengths
        .windows(2)
        .filter_map(|w| {
            let ratio = w[0].1 / w[1].1;
            (ratio > 0.1).then_some(HierarchyViolation {
                smaller: w[0].0,
                larger: w[1].0,
                ratio,
            })
        })
        .collect();
    for v in &violations {
        warn!(
            "{} / {} = {} is not much smaller than 1",
            v.smaller, v.larger, v.ratio
        );
    }
    violations
}
