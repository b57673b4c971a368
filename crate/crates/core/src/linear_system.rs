//! The linear auxiliary system for `(a, m)`:
//!
//! `d_t a = Laplace a + m`, `d_t m = Laplace m - 2m - Laplace a`, `a(0) = m(0) = a0`.
//!
//! Per Fourier mode this is `d_t (a, m) = -A(k^2) (a, m)` with
//! `A = [[k^2, -1], [-k^2, k^2 + 2]]`, whose eigenvalues are
//! `lambda_pm = (k^2 + 1) pm sqrt(k^2 + 1)`. The exact propagator is
//! `exp(-A t) = exp(-lambda_- t) [(1 - lambda_- q) I + q A]` with
//! `q = expm1(-2 s t) / (2 s)` and `s = sqrt(k^2 + 1)`, which avoids the
//! cancellation in the difference of exponentials.
//!
//! The auxiliary fields `U = (d2 a, -d1 a, 0)` and `W = (0, 0, m)` solve the
//! linearized micropolar system up to the forcing `F`.

use crate::error::{Error, Result};
use crate::grid::{SpectralField, VectorSpectralField};
use crate::transport::{accumulate_product, to_physical_sparse, to_spectral, Samples};
use nalgebra::{Matrix2, Matrix6};
use num_complex::Complex64;
use serde::Serialize;

pub type Mat2 = [[f64; 2]; 2];

pub fn matrix_a(k2: f64) -> Mat2 {
    [[k2, -1.0], [-k2, k2 + 2.0]]
}

/// Eigenvalues `(lambda_-, lambda_+)` of `A(k^2)`. The smaller one is
/// evaluated as `k^2 (k^2 + 1) / ((k^2 + 1) + s)`.
pub fn eigenvalues(k2: f64) -> (f64, f64) {
    let s = (k2 + 1.0).sqrt();
    (k2 * (k2 + 1.0) / (k2 + 1.0 + s), k2 + 1.0 + s)
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

/// Closed-form `exp(-A(k^2) t)`.
pub fn green_exp(k2: f64, t: f64) -> Result<Mat2> {
    check_time(t)?;
    Ok(green_unchecked(k2, t))
}

fn green_unchecked(k2: f64, t: f64) -> Mat2 {
    let s = (k2 + 1.0).sqrt();
    let (lm, _) = eigenvalues(k2);
    let slow = (-lm * t).exp();
    let q = (-2.0 * s * t).exp_m1() / (2.0 * s);
    let a = matrix_a(k2);
    let diag = 1.0 - lm * q;
    [
        [slow * (diag + q * a[0][0]), slow * q * a[0][1]],
        [slow * q * a[1][0], slow * (diag + q * a[1][1])],
    ]
}

/// `exp(-A(k^2) t)` by scaling and squaring, independent of the eigen-split.
pub fn green_exp_numeric(k2: f64, t: f64) -> Result<Mat2> {
    check_time(t)?;
    let a = matrix_a(k2);
    let m = Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1]) * (-t);
    let e = m.exp();
    Ok([[e[(0, 0)], e[(0, 1)]], [e[(1, 0)], e[(1, 1)]]])
}

/// Constants of the envelope `|G_ij(xi, t)| <= K exp(-c |xi|^2 t)`.
pub const DECAY_C: f64 = 0.5;
pub const DECAY_K: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCertificate {
    pub c: f64,
    pub k: f64,
    /// Largest `|G_ij| / exp(-c k^2 t)` over all samples.
    pub max_ratio: f64,
    pub worst_k2: f64,
    pub worst_t: f64,
    /// Smallest `lambda_-(k^2) - k^2 / 2` over the sampled `k^2`.
    pub min_eigen_slack: f64,
    pub samples: usize,
    pub holds: bool,
}

/// Samples the Green matrix envelope on every `(k^2, t)` pair.
pub fn decay_certificate(k2_values: &[f64], times: &[f64]) -> Result<DecayCertificate> {
    let mut cert = DecayCertificate {
        c: DECAY_C,
        k: DECAY_K,
        max_ratio: 0.0,
        worst_k2: 0.0,
        worst_t: 0.0,
        min_eigen_slack: f64::INFINITY,
        samples: 0,
        holds: true,
    };
    for &k2 in k2_values {
        if !(k2 >= 0.0) {
            return Err(Error::InvalidParameter(format!("|xi|^2 = {k2}")));
        }
        cert.min_eigen_slack = cert.min_eigen_slack.min(eigenvalues(k2).0 - 0.5 * k2);
        for &t in times {
            let g = green_exp(k2, t)?;
            let worst = g.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            // Compare in log form so that underflowed envelopes do not divide by zero.
            let ratio = if worst == 0.0 {
                0.0
            } else {
                (worst.ln() + DECAY_C * k2 * t).exp()
            };
            if ratio > cert.max_ratio {
                cert.max_ratio = ratio;
                cert.worst_k2 = k2;
                cert.worst_t = t;
            }
            cert.samples += 1;
        }
    }
    let k2_scale = k2_values.iter().fold(1.0f64, |m, v| m.max(*v));
    cert.holds = cert.max_ratio <= DECAY_K && cert.min_eigen_slack >= -1e-12 * k2_scale;
    Ok(cert)
}

/// State `(a, m)` of the auxiliary system at time `t`.
#[derive(Debug, Clone)]
pub struct AuxState {
    pub t: f64,
    pub a: SpectralField,
    pub m: SpectralField,
}

impl AuxState {
    pub fn initial(a0: &SpectralField) -> Self {
        Self {
            t: 0.0,
            a: a0.clone(),
            m: a0.clone(),
        }
    }

    /// Exact evolution by `dt`.
    pub fn evolve(&self, dt: f64) -> Result<AuxState> {
        check_time(dt)?;
        let grid = self.a.grid();
        let mut a = self.a.clone();
        let mut m = self.m.clone();
        {
            let (a_c, m_c) = (a.coeffs_mut(), m.coeffs_mut());
            let (a_in, m_in) = (self.a.coeffs(), self.m.coeffs());
            grid.for_each_mode(|idx, xi| {
                if a_in[idx] == Complex64::default() && m_in[idx] == Complex64::default() {
                    return;
                }
                let g = green_unchecked(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2], dt);
                a_c[idx] = g[0][0] * a_in[idx] + g[0][1] * m_in[idx];
                m_c[idx] = g[1][0] * a_in[idx] + g[1][1] * m_in[idx];
            });
        }
        Ok(AuxState {
            t: self.t + dt,
            a,
            m,
        })
    }

    /// Exact right-hand side `(Laplace a + m, Laplace m - 2m - Laplace a)`.
    pub fn time_derivative(&self) -> (SpectralField, SpectralField) {
        let la = self.a.laplacian();
        let da = &la + &self.m;
        let dm = &(&self.m.laplacian() - &self.m.scale(2.0)) - &la;
        (da, dm)
    }

    /// `U = (d2 a, -d1 a, 0)` and `W = (0, 0, m)`.
    pub fn assemble_u_w(&self) -> (VectorSpectralField, VectorSpectralField) {
        let zero = SpectralField::zeros(self.a.grid());
        let u = VectorSpectralField::new([self.a.derivative(1), -&self.a.derivative(0), zero.clone()])
            .expect("same grid");
        let w = VectorSpectralField::new([zero.clone(), zero, self.m.clone()]).expect("same grid");
        (u, w)
    }

    /// `F = -(d1 d3, d2 d3, d3^2)(a + m)`; in Fourier space `xi_i xi_3 (a + m)`.
    pub fn forcing_f(&self) -> VectorSpectralField {
        let s = &self.a + &self.m;
        VectorSpectralField::new([
            s.map_modes(|xi, c| xi[0] * xi[2] * c),
            s.map_modes(|xi, c| xi[1] * xi[2] * c),
            s.map_modes(|xi, c| xi[2] * xi[2] * c),
        ])
        .expect("same grid")
    }
}

/// `(a, m)` at time `t` from `a(0) = m(0) = a0`.
pub fn evolve_linear(a0: &SpectralField, t: f64) -> Result<AuxState> {
    AuxState::initial(a0).evolve(t)
}

/// How the quadratic forcings are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForcingForm {
    /// `G = -(U . grad) U`, `H = -(U . grad) W` with every term written out.
    Direct,
    /// The same terms regrouped so that each carries a factor `(d1 + d2)`.
    Cancellation,
}

impl std::str::FromStr for ForcingForm {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(ForcingForm::Direct),
            "cancellation" => Ok(ForcingForm::Cancellation),
            other => Err(crate::Error::InvalidParameter(format!("unknown forcing form {other:?}"))),
        }
    }
}

/// Nonlinear forcings `G` and `H`, dealiased when asked.
pub fn forcing_g_h(
    a: &SpectralField,
    m: &SpectralField,
    form: ForcingForm,
    dealias: bool,
) -> (VectorSpectralField, VectorSpectralField) {
    let grid = a.grid();
    let d = |f: &SpectralField, axes: &[usize]| axes.iter().fold(f.clone(), |g, &ax| g.derivative(ax));
    let s = |f: &SpectralField| f.directional_derivative([1.0, 1.0, 0.0]);
    let mut g: [Samples; 3] = [None, None, None];
    let mut h: Samples = None;
    match form {
        ForcingForm::Direct => {
            // U = (d2 a, -d1 a, 0); G_i = -(U_1 d1 U_i + U_2 d2 U_i).
            let fields = [
                d(a, &[1]),
                -&d(a, &[0]),
                d(a, &[1, 0]),
                d(a, &[1, 1]),
                -&d(a, &[0, 0]),
                -&d(a, &[0, 1]),
                d(m, &[0]),
                d(m, &[1]),
            ];
            let p = to_physical_sparse(&fields.iter().collect::<Vec<_>>());
            let (u1, u2) = (&p[0], &p[1]);
            let grad_u = [[&p[2], &p[3]], [&p[4], &p[5]]];
            for i in 0..2 {
                accumulate_product(&mut g[i], -1.0, u1, grad_u[i][0]);
                accumulate_product(&mut g[i], -1.0, u2, grad_u[i][1]);
            }
            accumulate_product(&mut h, -1.0, u1, &p[6]);
            accumulate_product(&mut h, -1.0, u2, &p[7]);
        }
        ForcingForm::Cancellation => {
            // G1 = S a d2^2 a - d2 a d2 S a, G2 = -S a d1 d2 a + d2 a d1 S a,
            // H3 = S a d2 m - d2 a S m, with S = d1 + d2.
            let sa = s(a);
            let fields = [
                sa.clone(),
                d(a, &[1]),
                d(a, &[1, 1]),
                sa.derivative(1),
                d(a, &[0, 1]),
                sa.derivative(0),
                d(m, &[1]),
                s(m),
            ];
            let p = to_physical_sparse(&fields.iter().collect::<Vec<_>>());
            accumulate_product(&mut g[0], 1.0, &p[0], &p[2]);
            accumulate_product(&mut g[0], -1.0, &p[1], &p[3]);
            accumulate_product(&mut g[1], -1.0, &p[0], &p[4]);
            accumulate_product(&mut g[1], 1.0, &p[1], &p[5]);
            accumulate_product(&mut h, 1.0, &p[0], &p[6]);
            accumulate_product(&mut h, -1.0, &p[1], &p[7]);
        }
    }
    let mut spec = to_spectral(grid, &[g[0].take(), g[1].take(), h], dealias).into_iter();
    let (g1, g2, h3) = (spec.next().unwrap(), spec.next().unwrap(), spec.next().unwrap());
    let zero = SpectralField::zeros(grid);
    (
        VectorSpectralField::new([g1, g2, zero.clone()]).expect("same grid"),
        VectorSpectralField::new([zero.clone(), zero, h3]).expect("same grid"),
    )
}

pub fn forcing_g(a: &SpectralField, form: ForcingForm, dealias: bool) -> VectorSpectralField {
    forcing_g_h(a, &SpectralField::zeros(a.grid()), form, dealias).0
}

pub fn forcing_h(a: &SpectralField, m: &SpectralField, form: ForcingForm, dealias: bool) -> VectorSpectralField {
    forcing_g_h(a, m, form, dealias).1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallnessRow {
    pub t: f64,
    /// `|(d1 + d2) a|_p`.
    pub diag_a: f64,
    pub diag_m: f64,
    /// `|d3 a|_p`.
    pub vertical_a: f64,
    pub vertical_m: f64,
}

impl SmallnessRow {
    pub fn total(&self) -> f64 {
        self.diag_a + self.diag_m + self.vertical_a + self.vertical_m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallnessSeries {
    pub rows: Vec<SmallnessRow>,
    /// `sup |xi1 + xi2|` over the support of `a0_hat`.
    pub support_diag: f64,
    /// `sup |xi3|` over the support of `a0_hat`.
    pub support_vertical: f64,
    /// Whether the support lies in `|xi1 + xi2| <= eps`, `|xi3| <= 2 eps`.
    pub support_ok: bool,
    /// `-d/dt log` of the summed norms, least squares over the series.
    pub fitted_rate: f64,
    /// `lambda_-` at the smallest `|xi|^2` of the support.
    pub slowest_rate: f64,
}

/// `L^p` norms of `(d1 + d2)` and `d3` applied to `a(t)`, `m(t)` at each time.
pub fn smallness_series(a0: &SpectralField, eps: f64, times: &[f64], p: f64) -> Result<SmallnessSeries> {
    let grid = a0.grid();
    let (mut diag, mut vert, mut k2_min) = (0.0f64, 0.0f64, f64::INFINITY);
    for (idx, c) in a0.coeffs().iter().enumerate() {
        if c.norm() > 0.0 {
            let xi = grid.xi(idx);
            diag = diag.max((xi[0] + xi[1]).abs());
            vert = vert.max(xi[2].abs());
            k2_min = k2_min.min(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
        }
    }
    let support_ok = diag <= eps && vert <= 2.0 * eps;
    let initial = AuxState::initial(a0);
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let st = initial.evolve(t)?;
        let fields = [
            st.a.directional_derivative([1.0, 1.0, 0.0]),
            st.m.directional_derivative([1.0, 1.0, 0.0]),
            st.a.derivative(2),
            st.m.derivative(2),
        ];
        let mut norms = [0.0; 4];
        for (n, f) in norms.iter_mut().zip(&fields) {
            *n = f.lp_norm(p)?;
        }
        rows.push(SmallnessRow {
            t,
            diag_a: norms[0],
            diag_m: norms[1],
            vertical_a: norms[2],
            vertical_m: norms[3],
        });
    }
    let fitted_rate = fit_decay_rate(&rows);
    Ok(SmallnessSeries {
        rows,
        support_diag: diag,
        support_vertical: vert,
        support_ok,
        fitted_rate,
        slowest_rate: if k2_min.is_finite() { eigenvalues(k2_min).0 } else { 0.0 },
    })
}

fn fit_decay_rate(rows: &[SmallnessRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.total() > 0.0)
        .map(|r| (r.t, r.total().ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    -sxy / sxx
}

/// Generator of the linearized micropolar system at one mode, acting on
/// `(u_hat, w_hat)`: `d_t u = -k^2 u + i xi x w`,
/// `d_t w = -k^2 w - xi (xi . w) - 2 w + i xi x u`.
pub fn linear_generator_6x6(xi: [f64; 3]) -> Matrix6<Complex64> {
    let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    let i = Complex64::new(0.0, 1.0);
    let mut m = Matrix6::<Complex64>::zeros();
    // i xi x (.) as a 3x3 matrix.
    let cross = [
        [0.0, -xi[2], xi[1]],
        [xi[2], 0.0, -xi[0]],
        [-xi[1], xi[0], 0.0],
    ];
    for r in 0..3 {
        m[(r, r)] = Complex64::from(-k2);
        m[(r + 3, r + 3)] = Complex64::from(-k2 - 2.0);
        for c in 0..3 {
            m[(r + 3, c + 3)] -= Complex64::from(xi[r] * xi[c]);
            m[(r, c + 3)] = i * cross[r][c];
            m[(r + 3, c)] = i * cross[r][c];
        }
    }
    m
}

/// `exp(generator * dt)` by scaling and squaring.
pub fn linear_propagator_6x6(xi: [f64; 3], dt: f64) -> Result<Matrix6<Complex64>> {
    check_time(dt)?;
    Ok((linear_generator_6x6(xi) * Complex64::from(dt)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::WaveGrid;
    use crate::rng::FieldRng;
    use proptest::prelude::*;

    fn max_err(a: Mat2, b: Mat2) -> f64 {
        (0..4).map(|k| (a[k / 2][k % 2] - b[k / 2][k % 2]).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_mode_and_zero_time() {
        let g = green_exp(0.0, 0.7).unwrap();
        let e = (-1.4f64).exp();
        let want = [[1.0, (1.0 - e) / 2.0], [0.0, e]];
        assert!(max_err(g, want) < 1e-15);
        let id = green_exp(3.7, 0.0).unwrap();
        assert!(max_err(id, [[1.0, 0.0], [0.0, 1.0]]) == 0.0);
        assert!(matches!(green_exp(1.0, -1e-3), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn eigenvalues_are_those_of_the_matrix() {
        for k2 in [0.0, 1e-6, 0.3, 1.0, 17.0, 1e4] {
            let (lm, lp) = eigenvalues(k2);
            let a = matrix_a(k2);
            let tr = a[0][0] + a[1][1];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            assert!((lm + lp - tr).abs() < 1e-12 * tr.max(1.0));
            assert!((lm * lp - det).abs() < 1e-11 * det.max(1.0));
            assert!(lm >= 0.5 * k2);
        }
    }

    #[test]
    fn eigen_bound_reduces_to_a_square() {
        // With n = k^2 integer, lambda_- >= n/2 is (n + 2)^2 >= 4 (n + 1),
        // i.e. n^2 >= 0; check the identity exactly in integers.
        for n in 0i128..2000 {
            assert_eq!((n + 2) * (n + 2) - 4 * (n + 1), n * n);
        }
    }

    #[test]
    fn green_matches_numeric_exponential() {
        for k2 in [0.0, 0.01, 1.0, 2.5, 40.0, 400.0] {
            for t in [1e-6, 0.01, 0.3, 1.0, 5.0] {
                let a = green_exp(k2, t).unwrap();
                let b = green_exp_numeric(k2, t).unwrap();
                let scale = b.iter().flatten().fold(1e-300f64, |m, v| m.max(v.abs()));
                assert!(max_err(a, b) <= 1e-12 * scale.max(1e-3), "k2={k2} t={t}");
            }
        }
    }

    #[test]
    fn certificate_on_a_wide_sample() {
        let k2: Vec<f64> = (0..200).map(|i| 1e-4 * 1.1f64.powi(i)).collect();
        let t: Vec<f64> = (0..60).map(|i| 1e-4 * 1.25f64.powi(i)).collect();
        let cert = decay_certificate(&k2, &t).unwrap();
        assert!(cert.holds, "{cert:?}");
        assert!(cert.max_ratio <= 4.0);
        assert_eq!(cert.samples, 200 * 60);
    }

    proptest! {
        #[test]
        fn semigroup(k2 in 0.0f64..50.0, t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
            let a = green_exp(k2, t1).unwrap();
            let b = green_exp(k2, t2).unwrap();
            let ab = green_exp(k2, t1 + t2).unwrap();
            let mut prod = [[0.0; 2]; 2];
            for r in 0..2 { for c in 0..2 { prod[r][c] = b[r][0] * a[0][c] + b[r][1] * a[1][c]; } }
            prop_assert!(max_err(prod, ab) < 1e-13);
        }

        #[test]
        fn envelope(k2 in 0.0f64..1e3, t in 0.0f64..10.0) {
            let g = green_exp(k2, t).unwrap();
            let env = DECAY_K * (-DECAY_C * k2 * t).exp();
            for v in g.iter().flatten() {
                prop_assert!(v.abs() <= env * (1.0 + 1e-12));
            }
        }

        #[test]
        fn propagator_derivative(k2 in 0.0f64..30.0, t in 0.01f64..3.0) {
            // d/dt exp(-A t) = -A exp(-A t), by a centered difference.
            let h = 1e-5;
            let gp = green_exp(k2, t + h).unwrap();
            let gm = green_exp(k2, t - h).unwrap();
            let g = green_exp(k2, t).unwrap();
            let a = matrix_a(k2);
            for r in 0..2 { for c in 0..2 {
                let fd = (gp[r][c] - gm[r][c]) / (2.0 * h);
                let exact = -(a[r][0] * g[0][c] + a[r][1] * g[1][c]);
                prop_assert!((fd - exact).abs() < 1e-6 * (1.0 + k2 * k2));
            }}
        }
    }

    fn test_grid() -> std::sync::Arc<WaveGrid> {
        WaveGrid::new([16, 16, 16], [8.0, 9.0, 10.0]).unwrap()
    }

    #[test]
    fn evolution_satisfies_the_pde() {
        let g = test_grid();
        let a0 = FieldRng::new(5, 0).scalar(&g, 4, false);
        let t = 0.4;
        let h = 1e-4;
        let st = evolve_linear(&a0, t).unwrap();
        let plus = evolve_linear(&a0, t + h).unwrap();
        let minus = evolve_linear(&a0, t - h).unwrap();
        let (da, dm) = st.time_derivative();
        let fd_a = (&plus.a - &minus.a).scale(0.5 / h);
        let fd_m = (&plus.m - &minus.m).scale(0.5 / h);
        assert!(fd_a.max_diff(&da) < 1e-6 * da.max_abs());
        assert!(fd_m.max_diff(&dm) < 1e-6 * dm.max_abs());
        assert!(st.a.hermitian_defect() < 1e-14);
        // Composition of two evolutions is the single evolution.
        let twice = evolve_linear(&a0, 0.15).unwrap().evolve(0.25).unwrap();
        assert!(twice.a.max_diff(&st.a) < 1e-13 * st.a.max_abs());
        assert!((twice.t - 0.4).abs() < 1e-15);
        assert!(evolve_linear(&a0, -1.0).is_err());
    }

    #[test]
    fn u_w_solve_the_forced_linear_system() {
        // d_t U = Laplace U + curl W, d_t W = Laplace W + grad div W - 2W + curl U + F.
        let g = test_grid();
        let a0 = FieldRng::new(6, 0).scalar(&g, 4, false);
        let st = evolve_linear(&a0, 0.3).unwrap();
        let (u, w) = st.assemble_u_w();
        let (da, dm) = st.time_derivative();
        let (du, dw) = AuxState { t: st.t, a: da, m: dm }.assemble_u_w();
        let rhs_u = &u.laplacian() + &w.curl();
        let rhs_w = &(&(&w.laplacian() + &w.grad_div()) - &w.scale(2.0)) + &(&u.curl() + &st.forcing_f());
        assert!(du.max_diff(&rhs_u) < 1e-12 * du.max_abs());
        assert!(dw.max_diff(&rhs_w) < 1e-12 * dw.max_abs());
        assert!(u.div().max_abs() < 1e-13 * u.max_abs());
    }

    #[test]
    fn cancellation_form_matches_direct_form() {
        let g = test_grid();
        let mut rng = FieldRng::new(7, 0);
        let a = rng.scalar(&g, 4, false);
        let m = rng.scalar(&g, 4, false);
        for dealias in [false, true] {
            let (gd, hd) = forcing_g_h(&a, &m, ForcingForm::Direct, dealias);
            let (gc, hc) = forcing_g_h(&a, &m, ForcingForm::Cancellation, dealias);
            assert!(gd.max_diff(&gc) <= 1e-12 * gd.max_abs());
            assert!(hd.max_diff(&hc) <= 1e-12 * hd.max_abs());
            assert!(gd.component(2).is_zero());
            assert!(hd.component(0).is_zero() && hd.component(1).is_zero());
        }
    }

    #[test]
    fn forcings_match_generic_advection() {
        let g = test_grid();
        let mut rng = FieldRng::new(8, 0);
        let st = AuxState {
            t: 0.0,
            a: rng.scalar(&g, 4, false),
            m: rng.scalar(&g, 4, false),
        };
        let (u, w) = st.assemble_u_w();
        let (gf, hf) = forcing_g_h(&st.a, &st.m, ForcingForm::Direct, true);
        let want_g = crate::transport::advection(&u, &u, true).scale(-1.0);
        let want_h = crate::transport::advection(&u, &w, true).scale(-1.0);
        assert!(gf.max_diff(&want_g) < 1e-12 * want_g.max_abs());
        assert!(hf.max_diff(&want_h) < 1e-12 * want_h.max_abs());
    }

    #[test]
    fn generator_is_hermitian_and_matches_operators() {
        let xi = [0.7, -1.3, 0.4];
        let m = linear_generator_6x6(xi);
        assert!((m - m.adjoint()).norm() < 1e-14);
        // Apply to a single mode of random fields and compare with the operators.
        let g = WaveGrid::new([8, 8, 8], [2.0 * std::f64::consts::PI; 3]).unwrap();
        let mut rng = FieldRng::new(9, 0);
        let u = rng.vector(&g, 3, false);
        let w = rng.vector(&g, 3, false);
        let lu = &u.laplacian() + &w.curl();
        let lw = &(&(&w.laplacian() + &w.grad_div()) - &w.scale(2.0)) + &u.curl();
        let idx = g.index_of_mode([1, -2, 3]).unwrap();
        let xi = g.xi(idx);
        let m = linear_generator_6x6(xi);
        let x: Vec<Complex64> = (0..6)
            .map(|r| if r < 3 { u.component(r).coeffs()[idx] } else { w.component(r - 3).coeffs()[idx] })
            .collect();
        for r in 0..6 {
            let got: Complex64 = (0..6).map(|c| m[(r, c)] * x[c]).sum();
            let want = if r < 3 { lu.component(r).coeffs()[idx] } else { lw.component(r - 3).coeffs()[idx] };
            assert!((got - want).norm() < 1e-12);
        }
    }

    #[test]
    fn smallness_series_of_the_datum() {
        use crate::initial_data::{build_a0, datum_box, datum_dims, ProfileParams};
        let eps = 0.25;
        let grid = WaveGrid::new(datum_dims(eps, false), datum_box(eps)).unwrap();
        let a0 = build_a0(&ProfileParams::new(eps, 5.0).unwrap(), &grid).unwrap();
        let times: Vec<f64> = (0..6).map(|i| 0.5 * i as f64).collect();
        let s = smallness_series(&a0, eps, &times, 5.0).unwrap();
        assert!(s.support_ok);
        assert!(s.support_diag <= eps && s.support_vertical <= 2.0 * eps);
        assert!(s.fitted_rate >= s.slowest_rate, "{} < {}", s.fitted_rate, s.slowest_rate);
        assert!(s.slowest_rate >= 2.0 - 2f64.sqrt());
        for w in s.rows.windows(2) {
            assert!(w[1].total() < w[0].total());
        }
    }
}
