//! Scaling sweep over `eps`: datum norms by Fourier-side quadrature, the
//! smallness-condition terms, and least-squares slopes in `log eps`.

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::initial_data::{datum_norms_quadrature, log_log_inv, ConditionTerms};
use serde::Serialize;

pub const SCALING_SCHEMA: &str = "mps.scaling.v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub eps: f64,
    /// `log log 1/eps`.
    pub loglog: f64,
    pub amplitude: f64,
    pub a_hat_dual: f64,
    pub a_hat_l1: f64,
    pub omega_hat_l1: f64,
    pub eps_quadratic: f64,
    pub eps_linear: f64,
    pub pre_exponential: f64,
    pub exponential: f64,
    pub lhs: f64,
}

impl ScalingRow {
    fn quantity(&self, q: Quantity) -> f64 {
        match q {
            Quantity::DualNorm => self.a_hat_dual / self.loglog.sqrt(),
            Quantity::LeadingTerm => self.eps_quadratic / self.loglog,
            Quantity::PreExponential => self.pre_exponential / self.loglog,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `|a0_hat|_{p'} / (log log 1/eps)^(1/2)`.
    DualNorm,
    /// `eps |a0_hat|_{p'}^2 / log log 1/eps`, the leading pre-exponential term.
    LeadingTerm,
    /// Whole pre-exponential factor over `log log 1/eps`.
    PreExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub quantity: Quantity,
    pub expected: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log` space.
    pub rms_residual: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub within: bool,
    /// Whether the fit counts towards the verdict.
    pub gating: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub schema: &'static str,
    pub p: f64,
    pub rows: Vec<ScalingRow>,
    /// Empty for a single `eps`.
    pub fits: Vec<SlopeFit>,
    /// `max / min` of `|omega0_hat|_1 / (log log 1/eps)^(1/2)`.
    pub omega_band: f64,
    pub passed: bool,
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, rms residual)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

pub fn scaling_row(eps: f64, p: f64, config: &ExperimentConfig) -> Result<ScalingRow> {
    let mut c = config.clone();
    c.datum.eps = eps;
    c.datum.p = p;
    let params = c.profile_params()?;
    let norms = datum_norms_quadrature(&params, config.sweep.quadrature_resolution)?;
    let terms = ConditionTerms::from_norms(eps, params.gronwall_c, 0.0, norms.a_hat_dual, norms.a_hat_l1);
    Ok(ScalingRow {
        eps,
        loglog: log_log_inv(eps),
        amplitude: norms.amplitude,
        a_hat_dual: norms.a_hat_dual,
        a_hat_l1: norms.a_hat_l1,
        omega_hat_l1: norms.omega_hat_l1,
        eps_quadratic: terms.eps_quadratic,
        eps_linear: terms.eps_linear,
        pre_exponential: terms.pre_exponential,
        exponential: terms.exponential,
        lhs: terms.lhs,
    })
}

/// Runs the sweep, one thread per `eps` value.
pub fn run_scaling(config: &ExperimentConfig, eps_list: &[f64], p: f64) -> Result<ScalingReport> {
    if eps_list.is_empty() {
        return Err(Error::Config("empty eps list".into()));
    }
    let rows: Vec<ScalingRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = eps_list
            .iter()
            .map(|&eps| scope.spawn(move || scaling_row(eps, p, config)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect::<Result<_>>()
    })?;
    let omega: Vec<f64> = rows.iter().map(|r| r.omega_hat_l1 / r.loglog.sqrt()).collect();
    let omega_band = omega.iter().copied().fold(0.0, f64::max) / omega.iter().copied().fold(f64::INFINITY, f64::min);
    let mut fits = Vec::new();
    if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
        for (quantity, expected, tolerance, gating) in [
            (Quantity::DualNorm, -2.0 / p, 0.10, true),
            (Quantity::LeadingTerm, (p - 4.0) / p, 0.15, true),
            (Quantity::PreExponential, (p - 4.0) / p, 0.15, false),
        ] {
            let y: Vec<f64> = rows.iter().map(|r| r.quantity(quantity).ln()).collect();
            let (slope, intercept, rms_residual) = fit_line(&x, &y);
            let relative_error = ((slope - expected) / expected).abs();
            fits.push(SlopeFit {
                quantity,
                expected,
                slope,
                intercept,
                rms_residual,
                relative_error,
                tolerance,
                within: relative_error <= tolerance,
                gating,
            });
        }
    }
    let passed = fits.iter().all(|f| f.within || !f.gating) && omega_band <= 2.0;
    Ok(ScalingReport {
        schema: SCALING_SCHEMA,
        p,
        rows,
        fits,
        omega_band,
        passed,
    })
}

pub fn write_scaling_csv(report: &ScalingReport, path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_exact_lines() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 - 0.4 * v).collect();
        let (b, a, r) = fit_line(&x, &y);
        assert!((b + 0.4).abs() < 1e-14 && (a - 2.5).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn single_eps_gives_raw_values_only() {
        let config = ExperimentConfig::default();
        let r = run_scaling(&config, &[0.125], 5.0).unwrap();
        assert!(r.fits.is_empty());
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.omega_band, 1.0);
    }

    #[test]
    fn default_sweep_has_the_expected_slopes() {
        let config = ExperimentConfig::default();
        let r = run_scaling(&config, &config.sweep.eps, 5.0).unwrap();
        assert!(r.passed, "{:#?}", r.fits);
        let dual = r.fits.iter().find(|f| f.quantity == Quantity::DualNorm).unwrap();
        assert!((dual.slope + 0.4).abs() < 0.04);
    }
}
