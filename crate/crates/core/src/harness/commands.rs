//! The `initdata`, `linear` and `simulate` subcommands.

use super::config::ExperimentConfig;
use super::diagnostics::{DiagnosticsWriter, DIAGNOSTICS_FILE};
use crate::error::{Error, Result};
use crate::grid::snapshot::write_snapshot;
use crate::grid::{SpectralField, VectorSpectralField};
use crate::initial_data::{
    assemble_u0_w0, build_a0, condition_lhs, largeness_metrics, ConditionTerms, LargenessMetrics,
};
use crate::linear_system::{decay_certificate, smallness_series, DecayCertificate, SmallnessSeries};
use crate::solver::{full_vs_perturbation_oracle, run_experiment, Mode, OracleReport};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub const RUN_FILE: &str = "run.json";

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Counts nonzero modes of `a0` outside `|xi1 + xi2| <= eps`,
/// `1 <= |xi_h| <= 2`, `eps <= |xi3| <= 2 eps`. Returns `(nonzero, outside)`.
pub fn support_violations(a0: &SpectralField, eps: f64) -> (usize, usize) {
    let grid = a0.grid();
    let mut nonzero = 0;
    let mut outside = 0;
    for (idx, c) in a0.coeffs().iter().enumerate() {
        if c.re == 0.0 && c.im == 0.0 {
            continue;
        }
        nonzero += 1;
        let xi = grid.xi(idx);
        let h = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        let v = xi[2].abs();
        let inside = (xi[0] + xi[1]).abs() <= eps && (1.0..=2.0).contains(&h) && (eps..=2.0 * eps).contains(&v);
        if !inside {
            outside += 1;
        }
    }
    (nonzero, outside)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitDataReport {
    pub schema: &'static str,
    pub eps: f64,
    pub p: f64,
    pub amplitude: f64,
    pub dims: [usize; 3],
    pub lengths: [f64; 3],
    pub nonzero_modes: usize,
    pub support_violations: usize,
    /// Smallest real part and largest imaginary part over the coefficients.
    pub min_coefficient: f64,
    pub max_imaginary: f64,
    pub div_u0: f64,
    pub hermitian_defect: f64,
    pub condition: ConditionTerms,
    pub largeness: LargenessMetrics,
    pub passed: bool,
}

pub fn initdata(config: &ExperimentConfig, out: &Path) -> Result<InitDataReport> {
    let params = config.profile_params()?;
    let grid = config.build_grid()?;
    let init = config.initial_data(&grid)?;
    let a0 = &init.a0;
    let (nonzero, outside) = support_violations(a0, params.eps);
    let min_coefficient = a0.coeffs().iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    let max_imaginary = a0.coeffs().iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let (u0, w0) = assemble_u0_w0(a0);
    let div_u0 = u0.div().max_abs();
    let hermitian_defect = u0.hermitian_defect().max(w0.hermitian_defect());
    let condition = condition_lhs(&init.v0, &init.c0, a0, &params)?;
    let largeness = largeness_metrics(a0)?;
    let scale = u0.max_abs().max(f64::MIN_POSITIVE);
    let passed = outside == 0
        && nonzero > 0
        && min_coefficient >= 0.0
        && max_imaginary == 0.0
        && div_u0 <= 1e-12 * scale
        && hermitian_defect <= 1e-12 * scale
        && largeness.identity_gap <= crate::initial_data::OMEGA_IDENTITY_TOL;
    let report = InitDataReport {
        schema: "mps.initdata.v1",
        eps: params.eps,
        p: params.p,
        amplitude: params.amplitude_value(),
        dims: grid.dims(),
        lengths: grid.lengths(),
        nonzero_modes: nonzero,
        support_violations: outside,
        min_coefficient,
        max_imaginary,
        div_u0,
        hermitian_defect,
        condition,
        largeness,
        passed,
    };
    write_json_file(&out.join("initdata.json"), &report)?;
    write_initdata_csv(&report, &out.join("initdata.csv"))?;
    write_snapshot(BufWriter::new(File::create(out.join("a0.mpsf"))?), a0, params.eps)?;
    Ok(report)
}

/// One header and one metrics row.
fn write_initdata_csv(r: &InitDataReport, path: &Path) -> Result<()> {
    let mut csv = csv::Writer::from_path(path)?;
    csv.write_record([
        "eps",
        "p",
        "amplitude",
        "nonzero_modes",
        "support_violations",
        "a_hat_dual",
        "a_hat_l1",
        "pre_exponential",
        "condition_lhs",
        "omega_hat_l1",
        "u0_linf",
        "u0_besov",
        "w0_besov",
    ])?;
    let c = &r.condition;
    let l = &r.largeness;
    let mut row = vec![r.eps.to_string(), r.p.to_string(), r.amplitude.to_string()];
    row.extend([r.nonzero_modes, r.support_violations].map(|v| v.to_string()));
    row.extend(
        [c.a_hat_dual, c.a_hat_l1, c.pre_exponential, c.lhs, l.omega_hat_l1, l.u0_linf, l.u0_besov, l.w0_besov]
            .map(|v| v.to_string()),
    );
    csv.write_record(&row)?;
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearReport {
    pub schema: &'static str,
    pub eps: f64,
    pub p: f64,
    pub certificate: DecayCertificate,
    pub smallness: SmallnessSeries,
    pub passed: bool,
}

/// Times at which the decay certificate is evaluated.
pub const LINEAR_TIMES: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

/// `samples` equispaced times from 0 to `t_max`.
pub fn sample_times(t_max: f64, samples: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) || samples < 2 {
        return Err(Error::Config(format!("need t_max > 0 and at least two samples, got {t_max} and {samples}")));
    }
    Ok((0..samples).map(|i| t_max * i as f64 / (samples - 1) as f64).collect())
}

/// Decay certificate on the grid's distinct `|xi|^2` and the smallness series
/// at `times`, written to `linear.json` and `linear.csv`.
pub fn linear(config: &ExperimentConfig, out: &Path, times: &[f64]) -> Result<LinearReport> {
    let params = config.profile_params()?;
    let grid = config.build_grid()?;
    let a0 = build_a0(&params, &grid)?;
    let mut k2: Vec<f64> = Vec::with_capacity(grid.len());
    grid.for_each_mode(|_, xi| {
        let s = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if s > 0.0 {
            k2.push(s);
        }
    });
    k2.sort_by(f64::total_cmp);
    k2.dedup();
    let certificate = decay_certificate(&k2, &LINEAR_TIMES)?;
    let smallness = smallness_series(&a0, params.eps, times, params.p)?;

    let mut csv = csv::Writer::from_path(out.join("linear.csv"))?;
    csv.write_record(["t", "diag_a", "diag_m", "vertical_a", "vertical_m", "total"])?;
    for r in &smallness.rows {
        csv.write_record(
            [r.t, r.diag_a, r.diag_m, r.vertical_a, r.vertical_m, r.total()].map(|v| v.to_string()),
        )?;
    }
    csv.flush()?;
    let passed = certificate.holds && smallness.support_ok;
    let report = LinearReport {
        schema: "mps.linear.v1",
        eps: params.eps,
        p: params.p,
        certificate,
        smallness,
        passed,
    };
    write_json_file(&out.join("linear.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema: &'static str,
    pub mode: Mode,
    pub config: ExperimentConfig,
    pub dims: [usize; 3],
    pub lengths: [f64; 3],
    pub steps: usize,
    pub eta: Option<f64>,
    pub gamma_time: Option<f64>,
    pub max_monitor: Option<f64>,
    pub max_oracle_diff: Option<f64>,
    pub blowup_time: Option<f64>,
    pub oracle: Option<OracleReport>,
    pub passed: bool,
}

/// Runs one experiment, writing `diagnostics.csv`, `run.json` and, when
/// configured, snapshots of the final state.
pub fn simulate(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let mode = config.mode()?;
    let solver = config.solver_config()?;
    let grid = config.build_grid()?;
    let init = config.initial_data(&grid)?;
    let mut writer = DiagnosticsWriter::new(BufWriter::new(File::create(out.join(DIAGNOSTICS_FILE))?))?;
    let mut observer = |r: &crate::solver::DiagnosticsRecord| writer.write(r);

    let mut summary = RunSummary {
        schema: "mps.run.v1",
        mode,
        config: config.clone(),
        dims: grid.dims(),
        lengths: grid.lengths(),
        steps: solver.steps(),
        eta: None,
        gamma_time: None,
        max_monitor: None,
        max_oracle_diff: None,
        blowup_time: None,
        oracle: None,
        passed: false,
    };
    let calibrate = mode == Mode::Oracle && !config.run.calibration_dts.is_empty();
    let result = if calibrate {
        full_vs_perturbation_oracle(
            &solver,
            &init,
            &config.run.calibration_dts,
            config.run.oracle_margin,
            &mut observer,
        )
        .map(|report| {
            summary.eta = Some(report.eta);
            summary.gamma_time = report.gamma_time;
            summary.max_monitor = Some(report.max_monitor);
            summary.max_oracle_diff = Some(report.max_diff);
            summary.passed = report.passed && report.gamma_time.is_none();
            summary.oracle = Some(report);
            None
        })
    } else {
        run_experiment(&solver, &init, mode, &mut observer).map(|outcome| {
            summary.eta = Some(outcome.eta);
            summary.gamma_time = outcome.gamma_time;
            summary.max_monitor = Some(outcome.max_monitor);
            if mode == Mode::Oracle {
                summary.max_oracle_diff = Some(outcome.max_oracle_diff());
            }
            summary.passed = true;
            Some(outcome)
        })
    };
    writer.finish()?.flush()?;
    let outcome = match result {
        Ok(outcome) => outcome,
        Err(Error::Blowup { t, .. }) => {
            summary.blowup_time = Some(t);
            None
        }
        Err(e) => return Err(e),
    };
    if let (true, Some(outcome)) = (config.run.snapshots, &outcome) {
        let eps = config.datum.eps;
        let save = |name: &str, f: &VectorSpectralField| -> Result<()> {
            for (i, c) in f.components().iter().enumerate() {
                let file = File::create(out.join(format!("{name}{}.mpsf", i + 1)))?;
                write_snapshot(BufWriter::new(file), c, eps)?;
            }
            Ok(())
        };
        if mode != Mode::Perturbation {
            save("u", &outcome.final_full.u)?;
            save("w", &outcome.final_full.w)?;
        }
        if mode != Mode::Full {
            save("v", &outcome.final_perturbation.v)?;
            save("c", &outcome.final_perturbation.c)?;
        }
    }
    write_json_file(&out.join(RUN_FILE), &summary)?;
    Ok(summary)
}
