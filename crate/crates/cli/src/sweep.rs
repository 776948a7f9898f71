//! Grid evaluation of the security margin, one CSV row per point.

use std::io::Write;

use anyhow::{bail, Result};
use qpuk::json::format_f64;
use qpuk::{security_margin, DetectionConfig, ProbeEnsemble, ResponseModel};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Params;

pub const CSV_HEADER: [&str; 10] = [
    "mu_p",
    "n",
    "mu_r_ratio",
    "eta",
    "delta_bar",
    "chi",
    "p_err_low",
    "p_in0",
    "max_pair",
    "d",
];

/// Axes of a sweep. Every list is sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub mu_p: Vec<f64>,
    pub n_values: Vec<usize>,
    pub mu_r_ratio: Vec<f64>,
    pub eta: Vec<f64>,
    pub delta_bar: Vec<f64>,
    /// Not a CSV column: `d` does not depend on ε. Kept for provenance.
    pub epsilon: Vec<f64>,
    pub arg_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub mu_p: f64,
    pub n: usize,
    pub mu_r_ratio: f64,
    pub eta: f64,
    pub delta_bar: f64,
    pub chi: f64,
    pub p_err_low: f64,
    pub p_in0: f64,
    pub max_pair: f64,
    pub d: f64,
}

impl SweepGrid {
    pub fn from_params(p: &Params) -> Self {
        Self {
            mu_p: p.mu_p.clone(),
            n_values: p.n.clone(),
            mu_r_ratio: p.mu_r_ratio.clone(),
            eta: p.eta.clone(),
            delta_bar: p.delta_bar.clone(),
            epsilon: p.epsilon.clone(),
            arg_f: p.arg_f,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu_p.is_empty()
            || self.n_values.is_empty()
            || self.mu_r_ratio.is_empty()
            || self.eta.is_empty()
            || self.delta_bar.is_empty()
            || self.epsilon.is_empty()
        {
            bail!("every sweep axis needs at least one value");
        }
        if let Some(r) = self.mu_r_ratio.iter().find(|r| !(0.0..=0.7).contains(*r)) {
            bail!("sweep ratios must lie in [0, 0.7], got {r}");
        }
        Ok(())
    }

    /// Grid points in row order: `mu_p`, then `n`, `mu_r_ratio`, `eta`, `delta_bar`.
    pub fn points(&self) -> Vec<(f64, usize, f64, f64, f64)> {
        let mut out = Vec::new();
        for &mu_p in &self.mu_p {
            for &n in &self.n_values {
                for &ratio in &self.mu_r_ratio {
                    for &eta in &self.eta {
                        for &db in &self.delta_bar {
                            out.push((mu_p, n, ratio, eta, db));
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn evaluate_point(
    mu_p: f64,
    n: usize,
    ratio: f64,
    eta: f64,
    delta_bar: f64,
    arg_f: f64,
) -> qpuk::Result<SweepRow> {
    let ensemble = ProbeEnsemble::new(mu_p, n)?;
    let model = ResponseModel::new(ratio * mu_p, arg_f, n)?;
    let det = DetectionConfig::new(eta, delta_bar)?;
    let r = security_margin(&ensemble, &model, &det, 0.0)?;
    Ok(SweepRow {
        mu_p,
        n,
        mu_r_ratio: ratio,
        eta,
        delta_bar,
        chi: r.chi,
        p_err_low: r.p_err_low,
        p_in0: r.p_in0,
        max_pair: r.max_pair_prob,
        d: r.margin_d,
    })
}

/// Evaluates every grid point in parallel; rows come back in grid order.
pub fn run_sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let rows = grid
        .points()
        .into_par_iter()
        .map(|(mu_p, n, ratio, eta, db)| evaluate_point(mu_p, n, ratio, eta, db, grid.arg_f))
        .collect::<qpuk::Result<Vec<_>>>()?;
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            format_f64(r.mu_p),
            r.n.to_string(),
            format_f64(r.mu_r_ratio),
            format_f64(r.eta),
            format_f64(r.delta_bar),
            format_f64(r.chi),
            format_f64(r.p_err_low),
            format_f64(r.p_in0),
            format_f64(r.max_pair),
            format_f64(r.d),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SweepGrid {
        SweepGrid {
            mu_p: vec![600.0],
            n_values: vec![4, 16, 64],
            mu_r_ratio: vec![0.0, 0.2],
            eta: vec![0.5],
            delta_bar: vec![2.0],
            epsilon: vec![1e-3],
            arg_f: 0.0,
        }
    }

    #[test]
    fn rows_follow_grid_order() {
        let rows = run_sweep(&grid()).unwrap();
        let keys: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.mu_r_ratio)).collect();
        assert_eq!(
            keys,
            vec![
                (4, 0.0),
                (4, 0.2),
                (16, 0.0),
                (16, 0.2),
                (64, 0.0),
                (64, 0.2)
            ]
        );
        assert!(rows
            .iter()
            .filter(|r| r.mu_r_ratio == 0.0)
            .all(|r| r.d == 0.0));
    }

    #[test]
    fn csv_layout() {
        let rows = run_sweep(&grid()).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "mu_p,n,mu_r_ratio,eta,delta_bar,chi,p_err_low,p_in0,max_pair,d"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "6.0000000000000000e2");
        assert_eq!(first[1], "4");
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn rejects_empty_axis_and_large_ratio() {
        let mut g = grid();
        g.eta.clear();
        assert!(run_sweep(&g).is_err());
        let mut g = grid();
        g.mu_r_ratio = vec![0.8];
        assert!(run_sweep(&g).is_err());
    }
}
