//! Savings report (CSV or aligned text).

use std::io;
use std::path::Path;

use crate::energy::{fmt_ghz, NodePlan, SystemProfile, WaitAction};
use crate::trace::write_atomic;

pub const CSV_HEADER: &str =
    "node,compute_action,t_comp_min,wait_action,t_wait_min,tt_min,save_j,save_rate_j_s,save_pct";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub node: usize,
    pub compute_action: String,
    pub t_comp_min: f64,
    pub wait_action: String,
    pub t_wait_min: f64,
    pub tt_min: f64,
    pub save_j: f64,
    pub save_rate_j_s: f64,
    pub save_pct: f64,
    /// Energy with intervention, kept for consistency checks.
    pub ei_j: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SavingsReport {
    pub rows: Vec<ReportRow>,
    pub total_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
}

impl SavingsReport {
    pub fn from_plans(plans: &[NodePlan], profile: &SystemProfile) -> Self {
        let mut rows: Vec<ReportRow> = plans.iter().map(|p| row(p, profile)).collect();
        rows.sort_by_key(|r| r.node);
        let total_j = rows.iter().map(|r| r.save_j).sum();
        Self { rows, total_j }
    }

    pub fn intervened(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.compute_action != "No action" || r.wait_action != "No action")
            .count()
    }
}

fn row(p: &NodePlan, profile: &SystemProfile) -> ReportRow {
    let compute_action = if p.compute_freq == 0 {
        "No action".to_string()
    } else {
        format!("{} GHz", fmt_ghz(p.compute_ghz))
    };
    let wait_action = match p.wait_action {
        WaitAction::None => "No action".to_string(),
        WaitAction::MinFreq => format!("{} GHz", fmt_ghz(profile.fmin().ghz)),
        WaitAction::Sleep => "sleep".to_string(),
    };
    ReportRow {
        node: p.node,
        compute_action,
        t_comp_min: p.t_comp / 60.0,
        wait_action,
        t_wait_min: p.t_wait / 60.0,
        tt_min: p.tt / 60.0,
        save_j: p.saving_j,
        save_rate_j_s: p.rate_j_s,
        save_pct: p.saving_pct,
        ei_j: p.ei_j,
    }
}

/// Two decimals, ties rounded away from zero on the decimal value as printed
/// to nine places (so 1.005 renders as 1.01).
pub fn fmt2(x: f64) -> String {
    let s = format!("{:.9}", x.abs());
    let (int, frac) = s.split_once('.').expect("fixed-point output has a dot");
    let mut digits: Vec<u8> = int.bytes().chain(frac.bytes().take(2)).map(|b| b - b'0').collect();
    if frac.as_bytes()[2] >= b'5' {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let n = digits.len();
    let body: String = digits[..n - 2].iter().map(|d| char::from(b'0' + d)).collect();
    let dec: String = digits[n - 2..].iter().map(|d| char::from(b'0' + d)).collect();
    let zero = digits.iter().all(|&d| d == 0);
    let sign = if x.is_sign_negative() && !zero { "-" } else { "" };
    format!("{sign}{body}.{dec}")
}

fn cells(r: &ReportRow) -> [String; 9] {
    [
        r.node.to_string(),
        r.compute_action.clone(),
        fmt2(r.t_comp_min),
        r.wait_action.clone(),
        fmt2(r.t_wait_min),
        fmt2(r.tt_min),
        fmt2(r.save_j),
        fmt2(r.save_rate_j_s),
        fmt2(r.save_pct),
    ]
}

pub fn render_report(report: &SavingsReport, format: ReportFormat) -> String {
    let mut table: Vec<[String; 9]> = Vec::with_capacity(report.rows.len() + 2);
    let header: Vec<String> = CSV_HEADER.split(',').map(String::from).collect();
    table.push(header.try_into().expect("nine columns"));
    table.extend(report.rows.iter().map(cells));
    let mut total: [String; 9] = Default::default();
    total[0] = "TOTAL".into();
    total[6] = fmt2(report.total_j);
    table.push(total);

    match format {
        ReportFormat::Csv => table.iter().map(|r| r.join(",") + "\n").collect(),
        ReportFormat::Text => {
            let mut widths = [0usize; 9];
            for r in &table {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.len());
                }
            }
            let mut out = String::new();
            for r in &table {
                let line: Vec<String> = r
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        if i == 1 || i == 3 || i == 0 {
                            format!("{c:<w$}", w = widths[i])
                        } else {
                            format!("{c:>w$}", w = widths[i])
                        }
                    })
                    .collect();
                out.push_str(line.join("  ").trim_end());
                out.push('\n');
            }
            out
        }
    }
}

pub fn write_report(report: &SavingsReport, path: &Path, format: ReportFormat) -> io::Result<()> {
    write_atomic(path, render_report(report, format).as_bytes())
}
