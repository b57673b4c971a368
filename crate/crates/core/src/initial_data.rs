//! The anisotropic "large" datum `a0`, the fields `U0 = (d2 a0, -d1 a0, 0)` and
//! `W0 = (0, 0, a0)`, the smallness condition of the global existence result
//! and the largeness metrics.
//!
//! The continuous transform of `a0` is `A * chi_hat(xi1, xi2) * phi_hat(xi3)`
//! with amplitude `A` (by default `eps^-2 sqrt(log log 1/eps)`), where
//!
//! * `chi_hat = B_diag(xi1 + xi2) * B_rad(xi1^2 + xi2^2)`, `B_diag` a bump on
//!   `[-eps, eps]` with plateau `[-eps/2, eps/2]` and `B_rad` a bump on `[1, 2]`
//!   with plateau `[5/4, 7/4]`;
//! * `phi_hat(xi3) = B3(|xi3|)`, `B3` a bump on `[eps, 2 eps]` with plateau
//!   `[5 eps/4, 7 eps/4]`, mirrored to negative `xi3` so that `a0` is real.
//!
//! All bumps use the `exp(-1/t)` smoothstep, so `a0_hat >= 0`.

use crate::error::{Error, Result};
use crate::grid::{SpectralField, VectorSpectralField, WaveGrid};
use crate::littlewood_paley::{smoothstep, BesovSpec, DyadicPartition};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Amplitude of `a0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    /// `eps^-2 (log log 1/eps)^(1/2)`.
    Paper,
    /// Amplitude one: the continuous transform plateaus at 1.
    Unit,
    Value(f64),
}

impl FromStr for Amplitude {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "paper" => Ok(Amplitude::Paper),
            "unit" => Ok(Amplitude::Unit),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Amplitude::Value)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!("amplitude {other:?}: want paper, unit or a number"))
                }),
        }
    }
}

impl fmt::Display for Amplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Amplitude::Paper => write!(f, "paper"),
            Amplitude::Unit => write!(f, "unit"),
            Amplitude::Value(v) => write!(f, "{v}"),
        }
    }
}

/// `log log (1/eps)`.
pub fn log_log_inv(eps: f64) -> f64 {
    (1.0 / eps).ln().ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileParams {
    pub eps: f64,
    /// Integrability index in `(4, 6)`.
    pub p: f64,
    pub amplitude: Amplitude,
    /// Constant in the exponential factor of the smallness condition.
    pub gronwall_c: f64,
}

impl ProfileParams {
    pub fn new(eps: f64, p: f64) -> Result<Self> {
        let params = Self {
            eps,
            p,
            amplitude: Amplitude::Paper,
            gronwall_c: 1.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_amplitude(mut self, amplitude: Amplitude) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_gronwall_c(mut self, c: f64) -> Self {
        self.gronwall_c = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 0.25) {
            return Err(Error::InvalidParameter(format!(
                "eps = {} must lie in (0, 1/4]",
                self.eps
            )));
        }
        if !(self.p > 4.0 && self.p < 6.0) {
            return Err(Error::InvalidParameter(format!(
                "p = {} must lie in (4, 6)",
                self.p
            )));
        }
        if !self.gronwall_c.is_finite() {
            return Err(Error::InvalidParameter("Gronwall constant must be finite".into()));
        }
        Ok(())
    }

    /// Conjugate exponent `p / (p - 1)`.
    pub fn dual_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn amplitude_value(&self) -> f64 {
        match self.amplitude {
            Amplitude::Paper => self.eps.powi(-2) * log_log_inv(self.eps).sqrt(),
            Amplitude::Unit => 1.0,
            Amplitude::Value(v) => v,
        }
    }

    /// Besov regularity `-1 + 3/p` of the perturbation space.
    pub fn critical_regularity(&self) -> f64 {
        -1.0 + 3.0 / self.p
    }

    pub fn perturbation_spec(&self) -> BesovSpec {
        BesovSpec {
            s: self.critical_regularity(),
            p: self.p,
            r: 1.0,
        }
    }

    pub fn dissipation_spec(&self) -> BesovSpec {
        BesovSpec {
            s: 1.0 + 3.0 / self.p,
            p: self.p,
            r: 1.0,
        }
    }
}

/// Smooth one-dimensional bump: 0 outside `[lo, hi]`, 1 on `[plateau_lo, plateau_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump1d {
    lo: f64,
    plateau_lo: f64,
    plateau_hi: f64,
    hi: f64,
}

impl Bump1d {
    pub fn new(lo: f64, hi: f64, plateau_lo: f64, plateau_hi: f64) -> Result<Self> {
        if !(lo < plateau_lo && plateau_lo < plateau_hi && plateau_hi < hi) {
            return Err(Error::InvalidParameter(format!(
                "bump ordering violated: need {lo} < {plateau_lo} < {plateau_hi} < {hi}"
            )));
        }
        Ok(Self {
            lo,
            plateau_lo,
            plateau_hi,
            hi,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.lo || x >= self.hi {
            0.0
        } else if x < self.plateau_lo {
            smoothstep((x - self.lo) / (self.plateau_lo - self.lo))
        } else if x <= self.plateau_hi {
            1.0
        } else {
            smoothstep((self.hi - x) / (self.hi - self.plateau_hi))
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// Unit-amplitude Fourier profile `chi_hat(xi1, xi2) * phi_hat(xi3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatumProfile {
    pub eps: f64,
    diag: Bump1d,
    radial: Bump1d,
    vertical: Bump1d,
}

impl DatumProfile {
    pub fn new(eps: f64) -> Result<Self> {
        Self::with_strip(eps, eps)
    }

    /// Same profile with the `|xi1 + xi2|` strip half-width set to `strip`
    /// instead of `eps`. Used by control experiments.
    pub fn with_strip(eps: f64, strip: f64) -> Result<Self> {
        if !(eps > 0.0 && strip > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps = {eps} and strip = {strip} must be positive"
            )));
        }
        Ok(Self {
            eps,
            diag: Bump1d::new(-strip, strip, -strip / 2.0, strip / 2.0)?,
            radial: Bump1d::new(1.0, 2.0, 1.25, 1.75)?,
            vertical: Bump1d::new(eps, 2.0 * eps, 1.25 * eps, 1.75 * eps)?,
        })
    }

    /// Half-width of the `|xi1 + xi2|` strip.
    pub fn strip(&self) -> f64 {
        self.diag.support().1
    }

    pub fn chi_hat(&self, xi1: f64, xi2: f64) -> f64 {
        let d = self.diag.eval(xi1 + xi2);
        if d == 0.0 {
            return 0.0;
        }
        d * self.radial.eval(xi1 * xi1 + xi2 * xi2)
    }

    pub fn phi_hat(&self, xi3: f64) -> f64 {
        self.vertical.eval(xi3.abs())
    }

    pub fn value(&self, xi: [f64; 3]) -> f64 {
        let v = self.phi_hat(xi[2]);
        if v == 0.0 {
            return 0.0;
        }
        v * self.chi_hat(xi[0], xi[1])
    }
}

/// Box lengths used for a datum at `eps`: wavenumber spacing `eps / 2.5`
/// horizontally and `eps / 8` vertically.
pub fn datum_box(eps: f64) -> [f64; 3] {
    let lh = 2.0 * PI / (eps / 2.5);
    [lh, lh, 2.0 * PI / (eps / 8.0)]
}

/// Smallest even grid on [`datum_box`] that hosts the datum; with `dealias`
/// the support also fits inside the two-thirds band.
pub fn datum_dims(eps: f64, dealias: bool) -> [usize; 3] {
    let lengths = datum_box(eps);
    let reach = [2f64.sqrt(), 2f64.sqrt(), 2.0 * eps];
    [0, 1, 2].map(|a| {
        let n_max = (reach[a] * lengths[a] / (2.0 * PI)).ceil() as usize;
        let n = if dealias { 3 * n_max + 1 } else { 2 * n_max + 2 };
        n + n % 2
    })
}

/// Checks that `grid` resolves the datum of `profile`.
pub fn check_resolvable(profile: &DatumProfile, grid: &WaveGrid) -> Result<()> {
    let eps = profile.eps;
    let h = [0, 1, 2].map(|a| grid.spacing(a));
    let top = [0, 1, 2].map(|a| (grid.dims()[a] / 2 - 1) as f64 * h[a]);
    let band_modes = (1..grid.dims()[2] / 2)
        .filter(|&n| {
            let k = n as f64 * h[2];
            k >= eps && k <= 2.0 * eps
        })
        .count();
    if band_modes < 8 {
        return Err(Error::Unresolvable(format!(
            "only {band_modes} modes in |xi3| in [eps, 2 eps]; need 8 (L3 >= 16 pi / eps)"
        )));
    }
    if top[2] < 2.0 * eps {
        return Err(Error::Unresolvable(format!(
            "vertical band reaches {} beyond grid maximum {}",
            2.0 * eps,
            top[2]
        )));
    }
    if top[0] < 2f64.sqrt() || top[1] < 2f64.sqrt() {
        return Err(Error::Unresolvable(format!(
            "horizontal annulus |xi_h| <= sqrt(2) exceeds grid maxima {:.3}, {:.3}",
            top[0], top[1]
        )));
    }
    let strip = profile.strip();
    if h[0] > strip / 2.0 || h[1] > strip / 2.0 {
        return Err(Error::Unresolvable(format!(
            "horizontal spacing {:.4}, {:.4} too coarse for the strip |xi1 + xi2| <= {strip}",
            h[0], h[1]
        )));
    }
    Ok(())
}

/// Builds `a0` on `grid` from the standard profile.
pub fn build_a0(params: &ProfileParams, grid: &Arc<WaveGrid>) -> Result<SpectralField> {
    params.validate()?;
    build_a0_from_profile(&DatumProfile::new(params.eps)?, params.amplitude_value(), grid)
}

/// Builds `A * profile` as a field; series coefficients are the continuous
/// transform times the frequency cell.
pub fn build_a0_from_profile(
    profile: &DatumProfile,
    amplitude: f64,
    grid: &Arc<WaveGrid>,
) -> Result<SpectralField> {
    check_resolvable(profile, grid)?;
    let weight = amplitude * grid.frequency_cell();
    Ok(SpectralField::from_fn(grid, |xi| {
        Complex64::new(weight * profile.value(xi), 0.0)
    }))
}

/// `U0 = (d2 a0, -d1 a0, 0)` and `W0 = (0, 0, a0)`.
pub fn assemble_u0_w0(a0: &SpectralField) -> (VectorSpectralField, VectorSpectralField) {
    let grid = a0.grid();
    let zero = SpectralField::zeros(grid);
    let u = VectorSpectralField::new([a0.derivative(1), -&a0.derivative(0), zero.clone()])
        .expect("same grid");
    let w = VectorSpectralField::new([zero.clone(), zero, a0.clone()]).expect("same grid");
    (u, w)
}

/// Terms of the smallness condition
/// `(|v0, c0|_B + eps |a0_hat|_{p'}^2 + eps |a0_hat|_{p'}) exp(C (|a0_hat|_1^2 + |a0_hat|_1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionTerms {
    pub perturbation_besov: f64,
    pub a_hat_dual: f64,
    pub a_hat_l1: f64,
    pub eps_quadratic: f64,
    pub eps_linear: f64,
    pub pre_exponential: f64,
    pub exponential: f64,
    pub lhs: f64,
}

impl ConditionTerms {
    pub fn from_norms(eps: f64, c: f64, perturbation: f64, a_hat_dual: f64, a_hat_l1: f64) -> Self {
        let eps_quadratic = eps * a_hat_dual * a_hat_dual;
        let eps_linear = eps * a_hat_dual;
        let pre_exponential = perturbation + eps_quadratic + eps_linear;
        let exponential = (c * (a_hat_l1 * a_hat_l1 + a_hat_l1)).exp();
        Self {
            perturbation_besov: perturbation,
            a_hat_dual,
            a_hat_l1,
            eps_quadratic,
            eps_linear,
            pre_exponential,
            exponential,
            lhs: pre_exponential * exponential,
        }
    }
}

/// Evaluates the left side of the smallness condition on a grid.
pub fn condition_lhs(
    v0: &VectorSpectralField,
    c0: &VectorSpectralField,
    a0: &SpectralField,
    params: &ProfileParams,
) -> Result<ConditionTerms> {
    params.validate()?;
    let scale = v0.max_abs().max(1e-300);
    if v0.div().max_abs() > 1e-10 * scale {
        return Err(Error::InvalidParameter("v0 must be divergence-free".into()));
    }
    let perturbation = if v0.max_abs() == 0.0 && c0.max_abs() == 0.0 {
        0.0
    } else {
        let part = DyadicPartition::new(v0.grid())?;
        let spec = params.perturbation_spec();
        part.vector_besov_norm(v0, spec)? + part.vector_besov_norm(c0, spec)?
    };
    Ok(ConditionTerms::from_norms(
        params.eps,
        params.gronwall_c,
        perturbation,
        a0.fourier_lq_norm(params.dual_exponent())?,
        a0.fourier_lq_norm(1.0)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LargenessMetrics {
    pub omega_hat_l1: f64,
    pub omega_linf: f64,
    pub u0_linf: f64,
    pub u0_besov: f64,
    pub w0_besov: f64,
    /// `| |omega0|_inf - |omega0_hat|_1 |` relative to the latter.
    pub identity_gap: f64,
}

/// Relative tolerance for `|omega0|_inf = |omega0_hat|_1`.
pub const OMEGA_IDENTITY_TOL: f64 = 1e-8;

/// Vorticity `omega0 = d2 U0^1 - d1 U0^2 = (d1^2 + d2^2) a0`.
pub fn vorticity(u0: &VectorSpectralField) -> SpectralField {
    &u0.component(0).derivative(1) - &u0.component(1).derivative(0)
}

pub fn largeness_metrics(a0: &SpectralField) -> Result<LargenessMetrics> {
    let (u0, w0) = assemble_u0_w0(a0);
    let omega = vorticity(&u0);
    let omega_hat_l1 = omega.fourier_lq_norm(1.0)?;
    let omega_linf = omega.lp_norm(f64::INFINITY)?;
    let u0_linf = u0.lp_norm(f64::INFINITY)?;
    let (u0_besov, w0_besov) = if a0.is_zero() {
        (0.0, 0.0)
    } else {
        let part = DyadicPartition::new(a0.grid())?;
        let spec = BesovSpec::new(-1.0, f64::INFINITY, f64::INFINITY)?;
        (
            part.vector_besov_norm(&u0, spec)?,
            part.vector_besov_norm(&w0, spec)?,
        )
    };
    let identity_gap = if omega_hat_l1 == 0.0 {
        0.0
    } else {
        (omega_linf - omega_hat_l1).abs() / omega_hat_l1
    };
    Ok(LargenessMetrics {
        omega_hat_l1,
        omega_linf,
        u0_linf,
        u0_besov,
        w0_besov,
        identity_gap,
    })
}

/// Fourier-side norms of the datum computed by direct quadrature of the
/// closed-form profile, without any grid or FFT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatumNorms {
    pub eps: f64,
    pub amplitude: f64,
    pub a_hat_dual: f64,
    pub a_hat_l1: f64,
    pub omega_hat_l1: f64,
}

/// Quadrature of the datum norms.
///
/// In rotated coordinates `s = (xi1 + xi2)/sqrt 2`, `rho = xi1^2 + xi2^2`,
/// the horizontal measure is `ds drho / (2 sqrt(rho - s^2))` on each of the
/// four symmetric branches, so
/// `int chi_hat^q dxi_h = 4 int_0^{eps/sqrt2} int_1^2 B_diag(sqrt2 s)^q B_rad(rho)^q / (2 sqrt(rho - s^2)) drho ds`.
/// The vertical factor is `2 eps int_1^2 B(tau)^q dtau`. Both use the
/// composite midpoint rule with `resolution` cells per unit interval.
pub fn datum_norms_quadrature(params: &ProfileParams, resolution: usize) -> Result<DatumNorms> {
    params.validate()?;
    let profile = DatumProfile::new(params.eps)?;
    let amp = params.amplitude_value();
    let q = params.dual_exponent();
    let eps = params.eps;
    let n = resolution.max(16);

    let vertical = |power: f64| -> f64 {
        let h = eps / n as f64;
        (0..n)
            .map(|i| profile.phi_hat(eps + (i as f64 + 0.5) * h).powf(power))
            .sum::<f64>()
            * h
            * 2.0
    };
    // int chi_hat^power * rho^weight dxi_h
    let horizontal = |power: f64, weight: f64| -> f64 {
        let s_max = eps / 2f64.sqrt();
        let hs = s_max / n as f64;
        let hr = 1.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let s = (i as f64 + 0.5) * hs;
            let d = profile.diag.eval(2f64.sqrt() * s);
            if d == 0.0 {
                continue;
            }
            let dp = d.powf(power);
            for k in 0..n {
                let rho = 1.0 + (k as f64 + 0.5) * hr;
                let r = profile.radial.eval(rho);
                if r == 0.0 {
                    continue;
                }
                acc += dp * r.powf(power) * rho.powf(weight) / (2.0 * (rho - s * s).sqrt());
            }
        }
        4.0 * acc * hs * hr
    };

    let a_hat_dual = amp * (horizontal(q, 0.0) * vertical(q)).powf(1.0 / q);
    let v1 = vertical(1.0);
    let a_hat_l1 = amp * horizontal(1.0, 0.0) * v1;
    let omega_hat_l1 = amp * horizontal(1.0, 1.0) * v1;
    Ok(DatumNorms {
        eps,
        amplitude: amp,
        a_hat_dual,
        a_hat_l1,
        omega_hat_l1,
    })
}
