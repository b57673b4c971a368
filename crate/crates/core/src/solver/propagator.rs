//! Exact per-mode propagator of the linear part of the micropolar system,
//!
//! `d_t u = Laplace u + curl w`,
//! `d_t w = Laplace w + grad div w - 2 w + curl u`.
//!
//! At a mode `xi` with `k = |xi| > 0` and `e = xi / k`, longitudinal parts decay
//! on their own (`exp(-k^2 t)` for `u`, `exp(-(2k^2 + 2) t)` for `w`). On the
//! transverse plane `J = i e x (.)` squares to the identity, so the coupled
//! block is `-(k^2 + 1) + [[1, kJ], [kJ, -1]]` whose second term squares to
//! `s^2 = k^2 + 1`. Its exponential is
//!
//! `u_T' = (C + Sh/s) u_T + (Sh/s) i xi x w`, `w_T' = (C - Sh/s) w_T + (Sh/s) i xi x u`
//!
//! with `C = (e^{-lambda_- t} + e^{-lambda_+ t}) / 2` and `Sh` the half difference.
//! At `xi = 0` every vector counts as transverse with `s = 1`.

use crate::error::Result;
use crate::grid::{VectorSpectralField, WaveGrid};
use crate::linear_system::eigenvalues;
use num_complex::Complex64;
use std::sync::Arc;

/// Propagator coefficients for one step length, five reals per mode.
pub struct LinearPropagator {
    grid: Arc<WaveGrid>,
    dt: f64,
    table: Vec<[f64; 5]>,
}

/// `[e_u, e_w, t_u, t_w, x]`: longitudinal decay of `u` and `w`, transverse
/// self-coefficients and the cross coefficient.
pub fn mode_coefficients(k2: f64, dt: f64) -> [f64; 5] {
    let s = (k2 + 1.0).sqrt();
    let (lm, _) = eigenvalues(k2);
    let slow = (-lm * dt).exp();
    let gap = (-2.0 * s * dt).exp_m1();
    let c = slow * (1.0 + 0.5 * gap);
    let sh = -0.5 * slow * gap;
    [
        (-k2 * dt).exp(),
        (-(2.0 * k2 + 2.0) * dt).exp(),
        c + sh / s,
        c - sh / s,
        sh / s,
    ]
}

impl LinearPropagator {
    pub fn new(grid: &Arc<WaveGrid>, dt: f64) -> Result<Self> {
        if dt < 0.0 || dt.is_nan() {
            return Err(crate::Error::NegativeTime(dt));
        }
        let mut table = vec![[0.0; 5]; grid.len()];
        grid.for_each_mode(|idx, xi| {
            table[idx] = mode_coefficients(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2], dt);
        });
        Ok(Self {
            grid: grid.clone(),
            dt,
            table,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, u: &VectorSpectralField, w: &VectorSpectralField) -> (VectorSpectralField, VectorSpectralField) {
        assert!(u.grid().same_as(&self.grid) && w.grid().same_as(&self.grid), "grid mismatch");
        let n = self.grid.len();
        let mut out_u = [0, 1, 2].map(|_| vec![Complex64::default(); n]);
        let mut out_w = [0, 1, 2].map(|_| vec![Complex64::default(); n]);
        let uc = [0, 1, 2].map(|i| u.component(i).coeffs());
        let wc = [0, 1, 2].map(|i| w.component(i).coeffs());
        let i_unit = Complex64::new(0.0, 1.0);
        self.grid.for_each_mode(|idx, xi| {
            let uv = [uc[0][idx], uc[1][idx], uc[2][idx]];
            let wv = [wc[0][idx], wc[1][idx], wc[2][idx]];
            if uv.iter().chain(&wv).all(|c| *c == Complex64::default()) {
                return;
            }
            let [eu, ew, tu, tw, x] = self.table[idx];
            let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            let (lu, lw) = if k2 > 0.0 {
                let pu = (xi[0] * uv[0] + xi[1] * uv[1] + xi[2] * uv[2]) / k2;
                let pw = (xi[0] * wv[0] + xi[1] * wv[1] + xi[2] * wv[2]) / k2;
                (xi.map(|c| pu * c), xi.map(|c| pw * c))
            } else {
                ([Complex64::default(); 3], [Complex64::default(); 3])
            };
            let cross = |v: [Complex64; 3]| {
                [
                    i_unit * (xi[1] * v[2] - xi[2] * v[1]),
                    i_unit * (xi[2] * v[0] - xi[0] * v[2]),
                    i_unit * (xi[0] * v[1] - xi[1] * v[0]),
                ]
            };
            let cw = cross(wv);
            let cu = cross(uv);
            for r in 0..3 {
                out_u[r][idx] = eu * lu[r] + tu * (uv[r] - lu[r]) + x * cw[r];
                out_w[r][idx] = ew * lw[r] + tw * (wv[r] - lw[r]) + x * cu[r];
            }
        });
        let build = |parts: [Vec<Complex64>; 3]| {
            VectorSpectralField::new(parts.map(|c| {
                crate::grid::SpectralField::from_coeffs(&self.grid, c).expect("length matches")
            }))
            .expect("same grid")
        };
        (build(out_u), build(out_w))
    }
}
