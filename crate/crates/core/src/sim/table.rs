use std::io::Write;

use super::dgp::DgpKind;
use super::harness::SimReport;
use crate::error::Result;

pub const COLUMNS: [&str; 16] = [
    "scenario",
    "model",
    "n",
    "a",
    "kappa",
    "beta",
    "events",
    "ave_d_hat",
    "se_d_hat",
    "ave_post_sd",
    "ave_brse",
    "ave_robust_se",
    "kl_point",
    "cov_credible",
    "cov_freq_robust",
    "cov_bayes_robust",
];

fn f3(v: f64) -> String {
    format!("{v:.3}")
}

fn opt3(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), f3)
}

/// One formatted row, three decimals, in [`COLUMNS`] order followed by the
/// failure count.
pub fn report_row(r: &SimReport) -> Vec<String> {
    let (model, a, kappa, beta) = match r.dgp.kind {
        DgpKind::LinearQuadratic { a } => ("linear", Some(a), None, None),
        DgpKind::FixedDesignLinearQuadratic { a } => ("linear-fixed", Some(a), None, None),
        DgpKind::PoissonQuadratic { a } => ("poisson", Some(a), None, None),
        DgpKind::WeibullPh { kappa, beta1, .. } => ("exp-ph", None, Some(kappa), Some(beta1)),
    };
    let param = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{}", x + 0.0));
    vec![
        r.scenario_id.clone(),
        model.to_string(),
        r.dgp.n.to_string(),
        param(a),
        param(kappa),
        param(beta),
        r.ave_events.map_or_else(String::new, |e| format!("{e:.1}")),
        f3(r.ave_d_hat),
        opt3(r.se_d_hat),
        f3(r.ave_post_sd),
        f3(r.ave_brse),
        f3(r.ave_robust_se),
        f3(r.kl_point),
        f3(r.coverage_credible),
        f3(r.coverage_freq_robust),
        f3(r.coverage_bayes_robust),
        r.n_failed_reps.to_string(),
    ]
}

fn header() -> Vec<&'static str> {
    let mut h = COLUMNS.to_vec();
    h.push("n_failed");
    h
}

pub fn write_csv<W: Write>(reports: &[SimReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for r in reports {
        w.write_record(report_row(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned markdown table.
pub fn to_markdown(reports: &[SimReport]) -> String {
    let head: Vec<String> = header().iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = reports.iter().map(report_row).collect();
    markdown_table(&head, &rows)
}

/// Renders a markdown table with right-aligned, padded columns.
pub fn markdown_table(head: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = head.iter().map(|h| h.chars().count().max(3)).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(head);
    let rule: Vec<String> = widths.iter().map(|w| format!("{}:", "-".repeat(w - 1))).collect();
    out.push_str(&format!("| {} |\n", rule.join(" | ")));
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

pub fn to_json(reports: &[SimReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}
