use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::bounds::{Quadrature, ResponseModel};
use crate::channel::{mu_response, OpticalChannel};
use crate::ensemble::ProbeEnsemble;
use crate::error::{invalid, Error, Result};
use crate::json::format_f64;

pub const CRP_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MASK_ID: &str = "mask-0";

const FIELDS: [&str; 6] = ["version", "n_phases", "mu_r", "arg_f", "mask_id", "entries"];

/// Enrolled challenge-response pairs: quadrature means `(⟨X_k⟩, ⟨Y_k⟩)` per probe index.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpTable {
    n_phases: usize,
    mu_r: f64,
    arg_f: f64,
    mask_id: String,
    entries: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CrpFile {
    version: u32,
    n_phases: usize,
    mu_r: f64,
    arg_f: f64,
    mask_id: String,
    entries: Vec<(usize, f64, f64)>,
}

impl CrpTable {
    /// Noiseless table from the response model.
    pub fn from_model(model: &ResponseModel, mask_id: impl Into<String>) -> Self {
        let entries = (0..model.n_phases()).map(|k| model.means(k)).collect();
        Self {
            n_phases: model.n_phases(),
            mu_r: model.mu_r(),
            arg_f: model.arg_f(),
            mask_id: mask_id.into(),
            entries,
        }
    }

    pub fn n_phases(&self) -> usize {
        self.n_phases
    }

    pub fn mu_r(&self) -> f64 {
        self.mu_r
    }

    pub fn arg_f(&self) -> f64 {
        self.arg_f
    }

    pub fn mask_id(&self) -> &str {
        &self.mask_id
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> Result<(f64, f64)> {
        self.entries.get(k).copied().ok_or(Error::IndexOutOfRange {
            index: k,
            n_phases: self.n_phases,
        })
    }

    pub(crate) fn mean(&self, k: usize, quadrature: Quadrature) -> f64 {
        let (x, y) = self.entries[k];
        match quadrature {
            Quadrature::X => x,
            Quadrature::Y => y,
        }
    }

    pub fn model(&self) -> Result<ResponseModel> {
        ResponseModel::new(self.mu_r, self.arg_f, self.n_phases)
    }

    /// Largest deviation of any entry from the noiseless model.
    pub fn max_model_deviation(&self) -> Result<f64> {
        let model = self.model()?;
        Ok(self
            .entries
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| {
                let (mx, my) = model.means(k);
                (x - mx).abs().max((y - my).abs())
            })
            .fold(0.0, f64::max))
    }

    /// Canonical JSON text; floats carry 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = String::new();
        s.push_str("{\n");
        let _ = writeln!(s, "  \"version\": {CRP_FORMAT_VERSION},");
        let _ = writeln!(s, "  \"n_phases\": {},", self.n_phases);
        let _ = writeln!(s, "  \"mu_r\": {},", format_f64(self.mu_r));
        let _ = writeln!(s, "  \"arg_f\": {},", format_f64(self.arg_f));
        let mask = serde_json::to_string(&self.mask_id).expect("strings always serialize");
        let _ = writeln!(s, "  \"mask_id\": {mask},");
        s.push_str("  \"entries\": [\n");
        for (k, &(x, y)) in self.entries.iter().enumerate() {
            let sep = if k + 1 == self.entries.len() { "" } else { "," };
            let _ = writeln!(s, "    [{k}, {}, {}]{sep}", format_f64(x), format_f64(y));
        }
        s.push_str("  ]\n}\n");
        s
    }

    /// Parses and validates the JSON format written by [`CrpTable::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        let file: CrpFile =
            serde_json::from_str(text).map_err(|e| describe_parse_error(text, &e))?;
        if file.version != CRP_FORMAT_VERSION {
            return Err(Error::CrpFormat(format!(
                "field `version`: unsupported version {} (expected {CRP_FORMAT_VERSION})",
                file.version
            )));
        }
        if file.n_phases < 2 {
            return Err(Error::CrpFormat(format!(
                "field `n_phases`: need at least 2, got {}",
                file.n_phases
            )));
        }
        if !(file.mu_r.is_finite() && file.mu_r >= 0.0) {
            return Err(Error::CrpFormat(format!(
                "field `mu_r`: invalid value {}",
                file.mu_r
            )));
        }
        if file.entries.len() != file.n_phases {
            return Err(Error::CrpFormat(format!(
                "field `entries`: expected {} entries, found {}",
                file.n_phases,
                file.entries.len()
            )));
        }
        let mut entries = Vec::with_capacity(file.n_phases);
        for (pos, &(k, x, y)) in file.entries.iter().enumerate() {
            if k != pos {
                return Err(Error::CrpFormat(format!(
                    "field `entries[{pos}]`: index {k}, expected {pos}"
                )));
            }
            entries.push((x, y));
        }
        Ok(Self {
            n_phases: file.n_phases,
            mu_r: file.mu_r,
            arg_f: file.arg_f,
            mask_id: file.mask_id,
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn describe_parse_error(text: &str, err: &serde_json::Error) -> Error {
    let location = format!("line {} column {}", err.line(), err.column());
    if err.is_eof() {
        let missing: Vec<&str> = FIELDS
            .iter()
            .copied()
            .filter(|f| !text.contains(&format!("\"{f}\"")))
            .collect();
        let detail = match missing.first() {
            Some(first) => format!("missing field `{first}`"),
            // every key present: the entries list itself was cut short
            None => "field `entries` is incomplete".to_string(),
        };
        return Error::CrpFormat(format!("truncated file at {location}: {detail}"));
    }
    Error::CrpFormat(err.to_string())
}

/// Noiseless enrolment of a key behind `channel`.
pub fn enroll(channel: &OpticalChannel, ensemble: &ProbeEnsemble) -> Result<CrpTable> {
    let mu_r = mu_response(channel, ensemble.mu_p())?;
    let model = ResponseModel::new(mu_r, channel.arg_f, ensemble.n_phases())?;
    Ok(CrpTable::from_model(&model, DEFAULT_MASK_ID))
}

/// Enrolment with independent Gaussian error of standard deviation `sd` on each recorded mean.
pub fn enroll_noisy<R: Rng + ?Sized>(
    model: &ResponseModel,
    mask_id: impl Into<String>,
    sd: f64,
    rng: &mut R,
) -> Result<CrpTable> {
    let noise = Normal::new(0.0, sd).map_err(|e| invalid(format!("enrolment noise: {e}")))?;
    let mut table = CrpTable::from_model(model, mask_id);
    for (x, y) in table.entries.iter_mut() {
        *x += noise.sample(rng);
        *y += noise.sample(rng);
    }
    Ok(table)
}
