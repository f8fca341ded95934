//! Running a configured study and formatting its table.

use std::fmt::Write as _;

use rayon::prelude::*;
use rtmixed::analysis::{embedding_record, report_without_checks, study_record, ConvergenceReport, SUPPORTED_P};
use rtmixed::timestepper::RunConfig;
use rtmixed::Result;

use crate::config::{Mode, StudyConfig};

pub const CSV_HEADER: &str =
    "M,tau,r,err_u_L2,err_sigma_L2,order_u,order_sigma,dg_norm,ratio_p2,ratio_p3,ratio_p4,ratio_p6,wall_time_s";

/// Reports of a study, one per step size rule.
#[derive(Debug, Clone)]
pub struct StudyResult {
    pub mode: Mode,
    pub groups: Vec<ConvergenceReport>,
}

impl StudyResult {
    /// Runs whose chain inequality was evaluated and failed.
    pub fn chain_failures(&self) -> Vec<(usize, f64)> {
        self.groups
            .iter()
            .flat_map(|g| &g.records)
            .filter(|r| r.chain.is_some_and(|c| !c.holds()))
            .map(|r| (r.m, r.tau))
            .collect()
    }
}

fn run_one(mode: Mode, config: RunConfig) -> Result<rtmixed::analysis::StudyRecord> {
    let (m, tau) = (config.m, config.tau);
    let record = match mode {
        Mode::Embedding => embedding_record(config, &SUPPORTED_P),
        _ => study_record(config, &SUPPORTED_P, false),
    }?;
    eprintln!(
        "  M = {m:>4}  tau = {tau:.4e}  err_u = {}  err_sigma = {}",
        fmt_opt(record.err_u_l2),
        fmt_opt(record.err_sigma_l2)
    );
    Ok(record)
}

/// Run every level of every group. With `parallel`, levels run concurrently;
/// results are still collected in order.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    let mut groups = Vec::new();
    for runs in config.runs() {
        let records = if config.parallel {
            runs.into_par_iter().map(|r| run_one(config.mode, r)).collect::<Result<Vec<_>>>()?
        } else {
            runs.into_iter().map(|r| run_one(config.mode, r)).collect::<Result<Vec<_>>>()?
        };
        groups.push(report_without_checks(records));
    }
    Ok(StudyResult {
        mode: config.mode,
        groups,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.10e}")).unwrap_or_default()
}

/// The CSV table. `wall_time_s` is only filled when `timing` is set.
pub fn to_csv(result: &StudyResult, timing: bool) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();
    for group in &result.groups {
        for (i, rec) in group.records.iter().enumerate() {
            let mut fields = vec![
                rec.m.to_string(),
                format!("{:.10e}", rec.tau),
                rec.r.to_string(),
                fmt_opt(rec.err_u_l2),
                fmt_opt(rec.err_sigma_l2),
                fmt_opt(group.orders_u[i]),
                fmt_opt(group.orders_sigma[i]),
                format!("{:.10e}", rec.dg_norm),
            ];
            fields.extend(SUPPORTED_P.iter().map(|&p| fmt_opt(rec.embed_ratio(p))));
            fields.push(if timing { fmt_opt(rec.wall_time) } else { String::new() });
            writeln!(out, "{}", fields.join(",")).unwrap();
        }
    }
    out
}

/// Human-readable notes printed after a study: fitted orders and, for the
/// embedding study, the chained ratios and the chain inequality.
pub fn summary(result: &StudyResult) -> String {
    let mut out = String::new();
    for group in &result.groups {
        let tau = group.records.first().map(|r| r.tau).unwrap_or_default();
        if let (Some(u), Some(s)) = (group.fitted_u, group.fitted_sigma) {
            writeln!(out, "fitted orders (first tau {tau:.4e}): u {u:.4}, sigma {s:.4}").unwrap();
        }
        if result.mode == Mode::Embedding {
            writeln!(out, "M, ||u||_DG/||sigma||, ||u||_Lp/||u||_DG (p = 2 3 4 6), chain DG^2 <= (sigma, chi)").unwrap();
            for rec in &group.records {
                let lp: Vec<String> = rec.lp_dg_ratios.iter().map(|(_, r)| fmt_opt(*r)).collect();
                let chain = rec
                    .chain
                    .map(|c| format!("{:.6e} <= {:.6e} {}", c.dg_norm_sq, c.pairing, if c.holds() { "ok" } else { "VIOLATED" }))
                    .unwrap_or_default();
                writeln!(out, "{}, {}, {}, {}", rec.m, fmt_opt(rec.dg_flux_ratio), lp.join(" "), chain).unwrap();
            }
        }
    }
    out
}
