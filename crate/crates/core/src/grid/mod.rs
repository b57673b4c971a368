//! Fourier representation of real fields on an anisotropic periodic box.
//!
//! Coefficients follow the Fourier-series convention
//! `f(x) = sum_xi fhat(xi) exp(i xi.x)`, with `xi = 2 pi n / L` per axis and
//! `n` in `[-N/2, N/2)`. The Nyquist rows `n_i = -N_i/2` are kept at zero in
//! every field, so Hermitian symmetry is unambiguous.
//!
//! Quantities written with a hat in the analysis (the continuous transform on
//! R^3) are recovered as `fhat_cont = fhat_series * V / (2 pi)^3`, see
//! [`WaveGrid::continuous_scale`].

mod fft;
pub mod snapshot;

use crate::error::{Error, Result};
use fft::Fft3;
pub(crate) use fft::signed_index;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Periodic box `[0, L1) x [0, L2) x [0, L3)` sampled on `N1 x N2 x N3` points.
pub struct WaveGrid {
    dims: [usize; 3],
    lengths: [f64; 3],
    wavenumbers: [Vec<f64>; 3],
    fft: Fft3,
}

impl fmt::Debug for WaveGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveGrid")
            .field("dims", &self.dims)
            .field("lengths", &self.lengths)
            .finish()
    }
}

impl WaveGrid {
    pub fn new(dims: [usize; 3], lengths: [f64; 3]) -> Result<Arc<Self>> {
        for (axis, (&n, &l)) in dims.iter().zip(&lengths).enumerate() {
            if n < 2 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "N{} = {n} must be a positive even integer",
                    axis + 1
                )));
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "L{} = {l} must be positive and finite",
                    axis + 1
                )));
            }
        }
        let wavenumbers = [0, 1, 2].map(|a| {
            (0..dims[a])
                .map(|i| 2.0 * PI * signed_index(i, dims[a]) as f64 / lengths[a])
                .collect()
        });
        Ok(Arc::new(Self {
            dims,
            lengths,
            wavenumbers,
            fft: Fft3::new(dims),
        }))
    }

    /// Cube of side `length` with `n` points per axis.
    pub fn cubic(n: usize, length: f64) -> Result<Arc<Self>> {
        Self::new([n; 3], [length; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Physical quadrature weight `L1 L2 L3 / (N1 N2 N3)`.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    /// Frequency cell volume `(2 pi)^3 / (L1 L2 L3)`.
    pub fn frequency_cell(&self) -> f64 {
        (2.0 * PI).powi(3) / self.volume()
    }

    /// Factor converting series coefficients to continuous-transform values.
    pub fn continuous_scale(&self) -> f64 {
        1.0 / self.frequency_cell()
    }

    /// Wavenumber spacing `2 pi / L_axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * PI / self.lengths[axis]
    }

    /// Wavenumbers of one axis in FFT storage order.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Sample positions of one axis.
    pub fn positions(&self, axis: usize) -> Vec<f64> {
        let h = self.lengths[axis] / self.dims[axis] as f64;
        (0..self.dims[axis]).map(|i| i as f64 * h).collect()
    }

    pub fn flat_index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]
    }

    pub fn storage_index(&self, idx: usize) -> [usize; 3] {
        let [_, n2, n3] = self.dims;
        [idx / (n2 * n3), (idx / n3) % n2, idx % n3]
    }

    /// Signed mode numbers `n` of a flat index.
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let s = self.storage_index(idx);
        [0, 1, 2].map(|a| signed_index(s[a], self.dims[a]))
    }

    /// Flat index of signed mode numbers, if representable.
    pub fn index_of_mode(&self, n: [i64; 3]) -> Option<usize> {
        let mut s = [0usize; 3];
        for a in 0..3 {
            let half = (self.dims[a] / 2) as i64;
            if n[a] < -half || n[a] >= half {
                return None;
            }
            s[a] = n[a].rem_euclid(self.dims[a] as i64) as usize;
        }
        Some(self.flat_index(s))
    }

    pub fn xi(&self, idx: usize) -> [f64; 3] {
        let s = self.storage_index(idx);
        [0, 1, 2].map(|a| self.wavenumbers[a][s[a]])
    }

    pub fn is_nyquist(&self, idx: usize) -> bool {
        let s = self.storage_index(idx);
        (0..3).any(|a| s[a] == self.dims[a] / 2)
    }

    /// Flat index of `-xi`.
    pub fn mirror_index(&self, idx: usize) -> usize {
        let s = self.storage_index(idx);
        self.flat_index([0, 1, 2].map(|a| (self.dims[a] - s[a]) % self.dims[a]))
    }

    /// Largest retained `|n_i|` under the two-thirds rule.
    pub fn dealias_cutoff(&self) -> [usize; 3] {
        self.dims.map(|n| (n - 1) / 3)
    }

    /// Calls `f(flat_index, xi)` for every mode in storage order.
    pub fn for_each_mode(&self, mut f: impl FnMut(usize, [f64; 3])) {
        let [n1, n2, n3] = self.dims;
        let mut idx = 0;
        for i1 in 0..n1 {
            let k1 = self.wavenumbers[0][i1];
            for i2 in 0..n2 {
                let k2 = self.wavenumbers[1][i2];
                for &k3 in &self.wavenumbers[2][..n3] {
                    f(idx, [k1, k2, k3]);
                    idx += 1;
                }
            }
        }
    }

    /// Boolean mask of the Nyquist rows, in storage order.
    pub fn nyquist_mask(&self) -> Vec<bool> {
        let [n1, n2, n3] = self.dims;
        let mut mask = Vec::with_capacity(self.len());
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                for i3 in 0..n3 {
                    mask.push(i1 == n1 / 2 || i2 == n2 / 2 || i3 == n3 / 2);
                }
            }
        }
        mask
    }

    /// Largest `|xi|` on the grid, excluding Nyquist rows.
    pub fn max_wavenumber(&self) -> f64 {
        let k = [0, 1, 2].map(|a| (self.dims[a] / 2 - 1) as f64 * self.spacing(a));
        (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
    }

    /// Smallest nonzero `|xi|` on the grid.
    pub fn min_wavenumber(&self) -> f64 {
        (0..3).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn same_as(&self, other: &WaveGrid) -> bool {
        self.dims == other.dims && self.lengths == other.lengths
    }
}

fn check_exponent(p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        Err(Error::InvalidExponent(p))
    } else {
        Ok(p)
    }
}

/// `(sum |x|^p w)^(1/p)` with `p = inf` a max.
fn weighted_lp(values: impl Iterator<Item = f64>, p: f64, weight: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        values.map(f64::abs).sum::<f64>() * weight
    } else if p == 2.0 {
        (values.map(|v| v * v).sum::<f64>() * weight).sqrt()
    } else {
        (values.map(|v| v.abs().powf(p)).sum::<f64>() * weight).powf(1.0 / p)
    }
}

/// Complex Fourier coefficients of a real scalar field.
#[derive(Clone)]
pub struct SpectralField {
    grid: Arc<WaveGrid>,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField")
            .field("grid", &self.grid)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl SpectralField {
    pub fn zeros(grid: &Arc<WaveGrid>) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![ZERO; grid.len()],
        }
    }

    /// Builds a field from a coefficient function of `xi`; Nyquist rows are
    /// forced to zero. The caller is responsible for Hermitian symmetry.
    pub fn from_fn(grid: &Arc<WaveGrid>, mut f: impl FnMut([f64; 3]) -> Complex64) -> Self {
        let nyq = grid.nyquist_mask();
        let mut coeffs = vec![ZERO; grid.len()];
        grid.for_each_mode(|idx, xi| {
            if !nyq[idx] {
                coeffs[idx] = f(xi);
            }
        });
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// Wraps raw coefficients in storage order; Nyquist rows are zeroed.
    pub fn from_coeffs(grid: &Arc<WaveGrid>, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        for (c, nyq) in coeffs.iter_mut().zip(grid.nyquist_mask()) {
            if nyq {
                *c = ZERO;
            }
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Forward transform of real samples (row-major `(i1, i2, i3)`).
    ///
    /// The Nyquist content of the samples is discarded.
    pub fn from_physical(grid: &Arc<WaveGrid>, samples: &[f64]) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: samples.len(),
            });
        }
        Ok(from_physical_many(grid, &[samples], None).pop().unwrap())
    }

    pub fn grid(&self) -> &Arc<WaveGrid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at signed mode numbers `n`.
    pub fn at_mode(&self, n: [i64; 3]) -> Complex64 {
        self.grid
            .index_of_mode(n)
            .map_or(ZERO, |idx| self.coeffs[idx])
    }

    /// Inverse transform to real samples.
    pub fn to_physical(&self) -> Vec<f64> {
        to_physical_many(&[self]).pop().unwrap()
    }

    /// Mean value over the box (the zero mode).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Applies `f(xi, coeff)` mode by mode.
    pub fn map_modes(&self, mut f: impl FnMut([f64; 3], Complex64) -> Complex64) -> Self {
        let mut out = vec![ZERO; self.coeffs.len()];
        self.grid.for_each_mode(|idx, xi| out[idx] = f(xi, self.coeffs[idx]));
        Self {
            grid: self.grid.clone(),
            coeffs: out,
        }
        .with_nyquist_zeroed()
    }

    /// Multiplies every mode by a real multiplier `m(xi)`.
    pub fn apply_multiplier(&self, mut m: impl FnMut([f64; 3]) -> f64) -> Self {
        self.map_modes(|xi, c| c * m(xi))
    }

    fn with_nyquist_zeroed(mut self) -> Self {
        let [n1, n2, n3] = self.grid.dims;
        let plane = n2 * n3;
        self.coeffs[(n1 / 2) * plane..(n1 / 2 + 1) * plane].fill(ZERO);
        for i1 in 0..n1 {
            let base = i1 * plane;
            self.coeffs[base + (n2 / 2) * n3..base + (n2 / 2 + 1) * n3].fill(ZERO);
            for i2 in 0..n2 {
                self.coeffs[base + i2 * n3 + n3 / 2] = ZERO;
            }
        }
        self
    }

    /// Spectral derivative `d/dx_axis` (axis 0, 1 or 2).
    pub fn derivative(&self, axis: usize) -> Self {
        assert!(axis < 3, "axis {axis} out of range");
        self.map_modes(|xi, c| I * xi[axis] * c)
    }

    /// Applies `sum_a coefs[a] d/dx_a`.
    pub fn directional_derivative(&self, coefs: [f64; 3]) -> Self {
        self.map_modes(|xi, c| I * (coefs[0] * xi[0] + coefs[1] * xi[1] + coefs[2] * xi[2]) * c)
    }

    pub fn laplacian(&self) -> Self {
        self.map_modes(|xi, c| -(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) * c)
    }

    pub fn grad(&self) -> VectorSpectralField {
        VectorSpectralField::from_components([0, 1, 2].map(|a| self.derivative(a)))
    }

    /// Two-thirds rule: zero every mode with `|n_i| >= N_i / 3` on some axis.
    pub fn dealias(&self) -> Self {
        let cut = self.grid.dealias_cutoff();
        let mut out = self.clone();
        for (idx, c) in out.coeffs.iter_mut().enumerate() {
            let n = self.grid.mode(idx);
            if (0..3).any(|a| n[a].unsigned_abs() as usize > cut[a]) {
                *c = ZERO;
            }
        }
        out
    }

    /// Pseudo-spectral product, optionally dealiased.
    pub fn product(&self, other: &Self, dealias: bool) -> Self {
        assert!(self.grid.same_as(&other.grid), "grid mismatch");
        let phys = to_physical_many(&[self, other]);
        let prod: Vec<f64> = phys[0].iter().zip(&phys[1]).map(|(a, b)| a * b).collect();
        let keep = dealias.then(|| self.grid.dealias_cutoff());
        from_physical_many(&self.grid, &[&prod], keep).pop().unwrap()
    }

    /// Physical `L^p` norm by uniform quadrature; `p = f64::INFINITY` is the max.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let samples = self.to_physical();
        Ok(weighted_lp(samples.into_iter(), p, self.grid.cell_volume()))
    }

    /// `L^q` norm of the continuous transform, weighted by the frequency cell.
    pub fn fourier_lq_norm(&self, q: f64) -> Result<f64> {
        check_exponent(q)?;
        let scale = self.grid.continuous_scale();
        Ok(weighted_lp(
            self.coeffs.iter().map(|c| c.norm() * scale),
            q,
            self.grid.frequency_cell(),
        ))
    }

    /// Largest `|c(-xi) - conj(c(xi))|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for idx in 0..self.coeffs.len() {
            let m = self.grid.mirror_index(idx);
            worst = worst.max((self.coeffs[m] - self.coeffs[idx].conj()).norm());
        }
        worst / scale
    }

    /// Largest modulus over the Nyquist rows (zero for well-formed fields).
    pub fn nyquist_content(&self) -> f64 {
        self.grid
            .nyquist_mask()
            .iter()
            .zip(&self.coeffs)
            .filter(|(&n, _)| n)
            .fold(0.0, |m, (_, c)| m.max(c.norm()))
    }

    /// Discrete inner product `sum conj(a) b` of the coefficients.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        assert!(self.grid.same_as(&other.grid), "grid mismatch");
        Self {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b * s)
                .collect(),
        }
    }

    /// Largest coefficient difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

/// Forward transform, named after the operation.
pub fn forward_transform(grid: &Arc<WaveGrid>, samples: &[f64]) -> Result<SpectralField> {
    SpectralField::from_physical(grid, samples)
}

/// Inverse transforms of several real fields, two per complex FFT.
pub fn to_physical_many(fields: &[&SpectralField]) -> Vec<Vec<f64>> {
    let items: Vec<(&SpectralField, Option<usize>)> = fields.iter().map(|&f| (f, None)).collect();
    to_physical_derivs(&items)
}

/// Inverse transforms of `d/dx_axis f` (or of `f` itself for `None`), two per
/// complex FFT, without materializing the derivatives.
pub fn to_physical_derivs(items: &[(&SpectralField, Option<usize>)]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(items.len());
    for pair in items.chunks(2) {
        let grid = &pair[0].0.grid;
        let [n1, n2, n3] = grid.dims;
        // Real per-axis factors (xi_axis or 1) and the power of i in front.
        let factors = |axis: Option<usize>| -> ([Vec<f64>; 3], u8) {
            let f = [0, 1, 2].map(|a| match axis {
                Some(ax) if ax == a => grid.wavenumbers[a].clone(),
                _ => vec![1.0; grid.dims[a]],
            });
            (f, axis.is_some() as u8)
        };
        let rotate = |z: Complex64, r: f64, pow: u8| match pow % 4 {
            0 => Complex64::new(r * z.re, r * z.im),
            1 => Complex64::new(-r * z.im, r * z.re),
            2 => Complex64::new(-r * z.re, -r * z.im),
            _ => Complex64::new(r * z.im, -r * z.re),
        };
        let (fa, pa) = factors(pair[0].1);
        let a = pair[0].0.coeffs();
        let second = pair.get(1).map(|&(f, axis)| {
            assert!(f.grid.same_as(grid), "grid mismatch");
            let (fb, pb) = factors(axis);
            (f.coeffs(), fb, pb + 1)
        });
        let mut data = vec![ZERO; a.len()];
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let row = (i1 * n2 + i2) * n3;
                let line = &mut data[row..row + n3];
                let ra = fa[0][i1] * fa[1][i2];
                for (i3, d) in line.iter_mut().enumerate() {
                    *d = rotate(a[row + i3], ra * fa[2][i3], pa);
                }
                if let Some((b, fb, pb)) = &second {
                    let rb = fb[0][i1] * fb[1][i2];
                    for (i3, d) in line.iter_mut().enumerate() {
                        *d += rotate(b[row + i3], rb * fb[2][i3], *pb);
                    }
                }
            }
        }
        grid.fft.inverse(&mut data);
        out.push(data.iter().map(|c| c.re).collect());
        if pair.len() == 2 {
            out.push(data.iter().map(|c| c.im).collect());
        }
    }
    out
}

/// Forward transforms of several real sample arrays, two per complex FFT.
///
/// With `keep = Some(c)` only modes with `|n_i| <= c_i` are retained.
pub fn from_physical_many(
    grid: &Arc<WaveGrid>,
    samples: &[&[f64]],
    keep: Option<[usize; 3]>,
) -> Vec<SpectralField> {
    let norm = 1.0 / grid.len() as f64;
    let mut out = Vec::with_capacity(samples.len());
    for pair in samples.chunks(2) {
        let mut data: Vec<Complex64> = match pair {
            [a, b] => a.iter().zip(b.iter()).map(|(&x, &y)| Complex64::new(x, y)).collect(),
            [a] => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            _ => unreachable!(),
        };
        grid.fft.forward(&mut data, keep);
        if pair.len() == 2 {
            let [n1, n2, n3] = grid.dims;
            let mirror = |n: usize| -> Vec<usize> { (0..n).map(|i| (n - i) % n).collect() };
            let (m1, m2, m3) = (mirror(n1), mirror(n2), mirror(n3));
            let mut first = vec![ZERO; data.len()];
            let mut second = vec![ZERO; data.len()];
            let half = 0.5 * norm;
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    let row = (i1 * n2 + i2) * n3;
                    let mrow = (m1[i1] * n2 + m2[i2]) * n3;
                    if data[row..row + n3].iter().all(|c| c.re == 0.0 && c.im == 0.0)
                        && data[mrow..mrow + n3].iter().all(|c| c.re == 0.0 && c.im == 0.0)
                    {
                        continue;
                    }
                    for i3 in 0..n3 {
                        let z = data[row + i3];
                        let zm = data[mrow + m3[i3]];
                        // first = (z + conj zm) / 2, second = (z - conj zm) / 2i
                        first[row + i3] = Complex64::new((z.re + zm.re) * half, (z.im - zm.im) * half);
                        second[row + i3] = Complex64::new((z.im + zm.im) * half, (zm.re - z.re) * half);
                    }
                }
            }
            out.push(SpectralField::from_coeffs(grid, first).unwrap());
            out.push(SpectralField::from_coeffs(grid, second).unwrap());
        } else {
            for c in data.iter_mut() {
                *c *= norm;
            }
            out.push(SpectralField::from_coeffs(grid, data).unwrap());
        }
    }
    out
}

/// Three scalar components on one grid.
#[derive(Clone, Debug)]
pub struct VectorSpectralField {
    components: [SpectralField; 3],
}

impl VectorSpectralField {
    pub fn new(components: [SpectralField; 3]) -> Result<Self> {
        let g = &components[0].grid;
        if components.iter().any(|c| !c.grid.same_as(g)) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { components })
    }

    fn from_components(components: [SpectralField; 3]) -> Self {
        Self { components }
    }

    pub fn zeros(grid: &Arc<WaveGrid>) -> Self {
        Self::from_components([0, 1, 2].map(|_| SpectralField::zeros(grid)))
    }

    pub fn grid(&self) -> &Arc<WaveGrid> {
        &self.components[0].grid
    }

    pub fn component(&self, i: usize) -> &SpectralField {
        &self.components[i]
    }

    pub fn components(&self) -> &[SpectralField; 3] {
        &self.components
    }

    pub fn into_components(self) -> [SpectralField; 3] {
        self.components
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        Self::from_components([0, 1, 2].map(|i| f(&self.components[i])))
    }

    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(&SpectralField, &SpectralField) -> SpectralField,
    ) -> Self {
        Self::from_components([0, 1, 2].map(|i| f(&self.components[i], &other.components[i])))
    }

    /// Applies a per-mode 3x3 complex map to the coefficient vectors.
    pub fn map_vector_modes(
        &self,
        mut f: impl FnMut([f64; 3], [Complex64; 3]) -> [Complex64; 3],
    ) -> Self {
        let grid = self.grid().clone();
        let mut out = [0, 1, 2].map(|_| vec![ZERO; grid.len()]);
        let [a, b, c] = &self.components;
        grid.for_each_mode(|idx, xi| {
            let r = f(xi, [a.coeffs[idx], b.coeffs[idx], c.coeffs[idx]]);
            for i in 0..3 {
                out[i][idx] = r[i];
            }
        });
        Self::from_components(out.map(|coeffs| {
            SpectralField {
                grid: grid.clone(),
                coeffs,
            }
            .with_nyquist_zeroed()
        }))
    }

    /// `f - xi (xi . f) / |xi|^2`; the zero mode passes through unchanged.
    pub fn leray_project(&self) -> Self {
        self.map_vector_modes(|xi, f| {
            let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            if k2 == 0.0 {
                return f;
            }
            let dot = (xi[0] * f[0] + xi[1] * f[1] + xi[2] * f[2]) / k2;
            [f[0] - xi[0] * dot, f[1] - xi[1] * dot, f[2] - xi[2] * dot]
        })
    }

    pub fn curl(&self) -> Self {
        self.map_vector_modes(|xi, f| {
            [
                I * (xi[1] * f[2] - xi[2] * f[1]),
                I * (xi[2] * f[0] - xi[0] * f[2]),
                I * (xi[0] * f[1] - xi[1] * f[0]),
            ]
        })
    }

    pub fn div(&self) -> SpectralField {
        let grid = self.grid();
        let [a, b, c] = &self.components;
        let mut coeffs = vec![ZERO; grid.len()];
        grid.for_each_mode(|idx, xi| {
            coeffs[idx] =
                I * (xi[0] * a.coeffs[idx] + xi[1] * b.coeffs[idx] + xi[2] * c.coeffs[idx]);
        });
        SpectralField {
            grid: grid.clone(),
            coeffs,
        }
        .with_nyquist_zeroed()
    }

    /// `grad (div f)`.
    pub fn grad_div(&self) -> Self {
        self.div().grad()
    }

    pub fn laplacian(&self) -> Self {
        self.map(SpectralField::laplacian)
    }

    pub fn dealias(&self) -> Self {
        self.map(SpectralField::dealias)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|c| c.scale(s))
    }

    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.axpy(s, b))
    }

    pub fn to_physical(&self) -> [Vec<f64>; 3] {
        let mut v = to_physical_many(&[&self.components[0], &self.components[1], &self.components[2]]);
        let c = v.pop().unwrap();
        let b = v.pop().unwrap();
        let a = v.pop().unwrap();
        [a, b, c]
    }

    /// Physical `L^p` norm of the pointwise Euclidean magnitude.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let [a, b, c] = self.to_physical();
        Ok(weighted_lp(
            (0..a.len()).map(|i| (a[i] * a[i] + b[i] * b[i] + c[i] * c[i]).sqrt()),
            p,
            self.grid().cell_volume(),
        ))
    }

    /// Fourier-side `L^q` norm of the coefficient-vector magnitude.
    pub fn fourier_lq_norm(&self, q: f64) -> Result<f64> {
        check_exponent(q)?;
        let grid = self.grid();
        let scale = grid.continuous_scale();
        let [a, b, c] = &self.components;
        Ok(weighted_lp(
            (0..grid.len()).map(|i| {
                (a.coeffs[i].norm_sqr() + b.coeffs[i].norm_sqr() + c.coeffs[i].norm_sqr()).sqrt()
                    * scale
            }),
            q,
            grid.frequency_cell(),
        ))
    }

    /// Squared `L^2` norm via Parseval.
    pub fn energy(&self) -> f64 {
        let v = self.grid().volume();
        self.components
            .iter()
            .map(|c| c.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            * v
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(SpectralField::is_finite)
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        (0..3).fold(0.0, |m, i| m.max(self.components[i].max_diff(&other.components[i])))
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.components
            .iter()
            .fold(0.0, |m, c| m.max(c.hermitian_defect()))
    }

    /// Discrete inner product summed over components.
    pub fn inner(&self, other: &Self) -> Complex64 {
        (0..3).map(|i| self.components[i].inner(&other.components[i])).sum()
    }
}

impl Add for &VectorSpectralField {
    type Output = VectorSpectralField;
    fn add(self, rhs: Self) -> VectorSpectralField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &VectorSpectralField {
    type Output = VectorSpectralField;
    fn sub(self, rhs: Self) -> VectorSpectralField {
        self.axpy(-1.0, rhs)
    }
}

/// Squared `L^2` norm of a scalar field via Parseval.
pub fn l2_squared(f: &SpectralField) -> f64 {
    f.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() * f.grid.volume()
}
