//! Summaries of finished runs.

use super::commands::RUN_FILE;
use super::diagnostics::{read_diagnostics, DIAGNOSTICS_FILE};
use crate::error::{Error, Result};
use crate::solver::DiagnosticsRecord;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub records: usize,
    pub t_final: f64,
    /// Threshold from `run.json`, when present.
    pub eta: Option<f64>,
    pub initial_monitor: f64,
    pub max_monitor: f64,
    pub t_max_monitor: f64,
    pub dissipation_integral: f64,
    pub max_u_linf: f64,
    pub max_div_u: f64,
    pub max_div_v: f64,
    pub max_oracle_diff: Option<f64>,
    pub gamma_time: Option<f64>,
    pub blowup_time: Option<f64>,
    pub verdict: String,
}

pub fn summarize(records: &[DiagnosticsRecord], eta: Option<f64>) -> Result<RunReport> {
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Config("diagnostics file has no records".into())),
    };
    let fmax = |f: fn(&DiagnosticsRecord) -> f64| records.iter().map(f).filter(|v| !v.is_nan()).fold(0.0, f64::max);
    let peak = records
        .iter()
        .filter(|r| r.monitor.is_finite())
        .fold(first, |best, r| if r.monitor > best.monitor { r } else { best });
    let oracle: Vec<f64> = records.iter().map(|r| r.oracle_diff).filter(|v| !v.is_nan()).collect();
    let gamma_time = records.iter().find(|r| r.gamma_crossed).map(|r| r.t);
    let blowup_time = records.iter().find(|r| r.blowup).map(|r| r.t);
    let verdict = match (gamma_time, blowup_time) {
        (_, Some(t)) => format!("blowup at t = {t}"),
        (Some(t), None) => format!("Γ-crossing at t = {t}, no blowup"),
        (None, None) => "no Γ-crossing, no blowup".to_string(),
    };
    Ok(RunReport {
        records: records.len(),
        t_final: last.t,
        eta,
        initial_monitor: first.monitor,
        max_monitor: peak.monitor,
        t_max_monitor: peak.t,
        dissipation_integral: last.dissipation_integral,
        max_u_linf: fmax(|r| r.u_linf),
        max_div_u: fmax(|r| r.div_u),
        max_div_v: fmax(|r| r.div_v),
        max_oracle_diff: (!oracle.is_empty()).then(|| oracle.iter().copied().fold(0.0, f64::max)),
        gamma_time,
        blowup_time,
        verdict,
    })
}

impl RunReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6e}"));
        let _ = writeln!(s, "records             {}", self.records);
        let _ = writeln!(s, "final time          {}", self.t_final);
        let _ = writeln!(s, "eta                 {}", opt(self.eta));
        let _ = writeln!(s, "initial monitor     {:.6e}", self.initial_monitor);
        let _ = writeln!(s, "max monitor         {:.6e} at t = {}", self.max_monitor, self.t_max_monitor);
        let _ = writeln!(s, "dissipation         {:.6e}", self.dissipation_integral);
        let _ = writeln!(s, "max |u|_inf         {:.6e}", self.max_u_linf);
        let _ = writeln!(s, "max div u, div v    {:.3e}, {:.3e}", self.max_div_u, self.max_div_v);
        let _ = writeln!(s, "max oracle diff     {}", opt(self.max_oracle_diff));
        let _ = writeln!(s, "verdict             {}", self.verdict);
        s
    }
}

/// Reads `dir`, writes `report.txt`, `monitor.csv` and `norms.csv` into it
/// and returns the summary.
pub fn report_dir(dir: &Path) -> Result<RunReport> {
    let csv_path = dir.join(DIAGNOSTICS_FILE);
    if !csv_path.is_file() {
        return Err(Error::Config(format!("{} holds no {DIAGNOSTICS_FILE}", dir.display())));
    }
    let records = read_diagnostics(&csv_path)?;
    let eta = match std::fs::read_to_string(dir.join(RUN_FILE)) {
        Ok(text) => {
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{RUN_FILE}: {e}")))?;
            v.get("eta").and_then(serde_json::Value::as_f64)
        }
        Err(_) => None,
    };
    let report = summarize(&records, eta)?;
    std::fs::write(dir.join("report.txt"), report.render())?;

    let mut monitor = csv::Writer::from_path(dir.join("monitor.csv"))?;
    monitor.write_record(["t", "monitor", "eta", "dissipation_integral"])?;
    let eta_text = eta.map_or(String::new(), |e| e.to_string());
    for r in &records {
        monitor.write_record([r.t.to_string(), r.monitor.to_string(), eta_text.clone(), r.dissipation_integral.to_string()])?;
    }
    monitor.flush()?;
    let mut norms = csv::Writer::from_path(dir.join("norms.csv"))?;
    norms.write_record(["t", "u_linf", "energy", "div_u", "div_v", "oracle_diff"])?;
    for r in &records {
        norms.write_record([r.t, r.u_linf, r.energy, r.div_u, r.div_v, r.oracle_diff].map(|v| v.to_string()))?;
    }
    norms.flush()?;
    Ok(report)
}
