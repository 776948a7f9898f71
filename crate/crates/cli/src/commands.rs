//! Command implementations. Each returns its output instead of printing so
//! the binary decides where text goes and which exit code to use.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qpuk::json::{format_f64, to_string_sig17};
use qpuk::protocol::{detection_experiment, AdversaryStrategy, CrpTable, VerificationPolicy};
use qpuk::{
    min_sample_size, security_margin, DetectionConfig, ProbeEnsemble, ResponseModel, SecurityReport,
};
use serde::Serialize;

use crate::config::Params;
use crate::sweep::{run_sweep, write_csv, SweepGrid, SweepRow};

#[derive(Debug, Serialize)]
struct CheckOutput<'a> {
    params: &'a Params,
    mu_r: f64,
    report: &'a SecurityReport,
}

pub struct CheckOutcome {
    pub report: SecurityReport,
    pub json: String,
    pub summary: String,
}

pub fn security_check(params: &Params) -> Result<CheckOutcome> {
    let pt = params.point();
    let ensemble = ProbeEnsemble::new(pt.mu_p, pt.n)?;
    let mu_r = pt.mu_r_ratio * pt.mu_p;
    let model = ResponseModel::new(mu_r, params.arg_f, pt.n)?;
    let det = DetectionConfig::new(pt.eta, pt.delta_bar)?;
    let report = security_margin(&ensemble, &model, &det, pt.epsilon)?;
    let json = to_string_sig17(&CheckOutput {
        params,
        mu_r,
        report: &report,
    })?;
    let verdict = if report.secure { "secure" } else { "insecure" };
    let summary = format!(
        "chi        = {:.6} bits (log2 N = {:.6})\n\
         p_err_low  = {:.6e}\n\
         P_in0      = {:.6}\n\
         max pair   = {:.6} at {:?}\n\
         D          = {:.6e}\n\
         2 epsilon  = {:.6e}\n\
         verdict    : {verdict}",
        report.chi,
        (pt.n as f64).log2(),
        report.p_err_low,
        report.p_in0,
        report.max_pair_prob,
        report.max_pair,
        report.margin_d,
        2.0 * pt.epsilon,
    );
    Ok(CheckOutcome {
        report,
        json,
        summary,
    })
}

/// Sidecar path holding the resolved parameters of a CSV output.
pub fn params_sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".params.json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct SweepProvenance<'a> {
    params: &'a Params,
    grid: &'a SweepGrid,
    rows: usize,
}

/// Runs the sweep and writes the CSV to `params.out` (plus the parameter
/// sidecar) or, without an output path, to stdout.
pub fn sweep(params: &Params) -> Result<Vec<SweepRow>> {
    let grid = SweepGrid::from_params(params);
    let rows = run_sweep(&grid)?;
    match &params.out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&rows, BufWriter::new(file))
                .with_context(|| format!("writing {}", path.display()))?;
            let side = params_sidecar(path);
            let prov = to_string_sig17(&SweepProvenance {
                params,
                grid: &grid,
                rows: rows.len(),
            })?;
            std::fs::write(&side, prov + "\n")
                .with_context(|| format!("writing {}", side.display()))?;
        }
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct SimulateOutput<'a> {
    pub accept_rate: f64,
    pub mean_f_in: f64,
    pub f_in_std_error: f64,
    pub p_in0: f64,
    pub p_err_empirical: Option<f64>,
    pub p_err_fano_low: f64,
    pub p_in_bound: Option<f64>,
    pub margin_d: f64,
    pub predicted_detection: bool,
    pub sessions: usize,
    pub accepted: usize,
    pub m_used: u64,
    pub m_meets_requirement: bool,
    pub seed: u64,
    pub strategy: &'a str,
    pub params: &'a Params,
}

pub fn simulate(params: &Params) -> Result<String> {
    let pt = params.point();
    let strategy = AdversaryStrategy::parse(&params.strategy)?;
    let ensemble = ProbeEnsemble::new(pt.mu_p, pt.n)?;
    let model = ResponseModel::new(pt.mu_r_ratio * pt.mu_p, params.arg_f, pt.n)?;
    let det = DetectionConfig::new(pt.eta, pt.delta_bar)?;
    let required = min_sample_size(pt.epsilon, params.zeta)?;
    let policy = match params.m {
        Some(m) if m < required => {
            log::warn!(
                "m = {m} is below the sample size {required} required for ε = {}, ζ = {}",
                pt.epsilon,
                params.zeta
            );
            VerificationPolicy::desk(m, pt.epsilon, params.zeta)?
        }
        Some(m) => VerificationPolicy {
            m,
            ..VerificationPolicy::strict(pt.epsilon, params.zeta)?
        },
        None => VerificationPolicy::strict(pt.epsilon, params.zeta)?,
    };
    let s = detection_experiment(
        &ensemble,
        &model,
        &det,
        &policy,
        &strategy,
        params.sessions,
        params.seed,
    )?;
    let out = SimulateOutput {
        accept_rate: s.accept_rate,
        mean_f_in: s.mean_f_in,
        f_in_std_error: s.f_in_std_error,
        p_in0: s.p_in0,
        p_err_empirical: s.p_err_empirical,
        p_err_fano_low: s.report.p_err_low,
        p_in_bound: s.p_in_bound,
        margin_d: s.report.margin_d,
        predicted_detection: s.predicted_detection,
        sessions: s.n_sessions,
        accepted: s.accepted,
        m_used: policy.m,
        m_meets_requirement: policy.strict,
        seed: params.seed,
        strategy: &params.strategy,
        params,
    };
    Ok(to_string_sig17(&out)?)
}

/// Canonical CRP file text for a noiseless enrolment.
pub fn crp_gen(mu_r: f64, arg_f: f64, n: usize, mask_id: &str) -> Result<String> {
    let model = ResponseModel::new(mu_r, arg_f, n)?;
    Ok(CrpTable::from_model(&model, mask_id).to_json())
}

pub fn crp_load(path: &Path) -> Result<CrpTable> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    CrpTable::from_json(&text).with_context(|| format!("{}", path.display()))
}

/// Human-readable listing of a CRP table.
pub fn crp_listing(table: &CrpTable) -> String {
    let mut s = format!(
        "mask_id  {}\nn_phases {}\nmu_r     {}\narg_f    {}\n{:>6}  {:>24}  {:>24}\n",
        table.mask_id(),
        table.n_phases(),
        format_f64(table.mu_r()),
        format_f64(table.arg_f()),
        "k",
        "x_mean",
        "y_mean",
    );
    for (k, &(x, y)) in table.entries().iter().enumerate() {
        s.push_str(&format!(
            "{k:>6}  {:>24}  {:>24}\n",
            format_f64(x),
            format_f64(y)
        ));
    }
    s
}
