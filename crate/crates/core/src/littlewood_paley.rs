//! Dyadic frequency blocks, homogeneous Besov norms and Bony's paraproduct
//! decomposition on a [`WaveGrid`].
//!
//! The radial profile is `phi(r) = chi(r / 2) - chi(r)` where `chi` equals 1
//! for `r <= sqrt(3)/2`, vanishes for `r >= 4/3` and uses the `exp(-1/t)`
//! smoothstep in between. Hence `phi` is supported in `[sqrt(3)/2, 8/3]`,
//! inside the annulus `3/4 <= r <= 8/3`, and the block sums telescope.
//!
//! The zero mode never belongs to any block, so every norm computed here is
//! homogeneous.

use crate::error::{Error, Result};
use crate::grid::{signed_index, to_physical_many, SpectralField, VectorSpectralField, WaveGrid};
use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Inner radius of the plateau of `chi`.
pub const CHI_PLATEAU: f64 = 0.866_025_403_784_438_6; // 3/4 * sqrt(4/3)
/// Outer radius of the support of `chi`.
pub const CHI_SUPPORT: f64 = 4.0 / 3.0;
/// Support of `phi`: `[CHI_PLATEAU, 2 * CHI_SUPPORT]`.
pub const PHI_INNER: f64 = CHI_PLATEAU;
pub const PHI_OUTER: f64 = 8.0 / 3.0;

/// Name of the transition function, recorded in run metadata.
pub const SMOOTHSTEP_NAME: &str = "exp(-1/t) smoothstep";

/// `C^inf` monotone step from 0 at `t <= 0` to 1 at `t >= 1`.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Radial low-pass cutoff.
pub fn chi(r: f64) -> f64 {
    1.0 - smoothstep((r - CHI_PLATEAU) / (CHI_SUPPORT - CHI_PLATEAU))
}

/// Radial dyadic profile.
pub fn phi(r: f64) -> f64 {
    chi(r / 2.0) - chi(r)
}

/// Littlewood-Paley blocks `j_min ..= j_max` with their multiplier tables.
pub struct DyadicPartition {
    grid: Arc<WaveGrid>,
    j_min: i32,
    j_max: i32,
    /// Per block: `(flat index, weight)` for every mode with nonzero weight.
    tables: Vec<Vec<(u32, f64)>>,
}

impl fmt::Debug for DyadicPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DyadicPartition")
            .field("j_min", &self.j_min)
            .field("j_max", &self.j_max)
            .finish()
    }
}

impl DyadicPartition {
    /// Builds the blocks needed so that every nonzero grid mode is covered
    /// with total weight one.
    pub fn new(grid: &Arc<WaveGrid>) -> Result<Self> {
        let k_min = grid.min_wavenumber();
        let k_max = grid.max_wavenumber();
        if k_max / k_min < PHI_OUTER / PHI_INNER {
            return Err(Error::Partition(format!(
                "grid too coarse to host one full annulus: |xi| spans [{k_min:.4}, {k_max:.4}]"
            )));
        }
        // sum_{j=a}^{b} phi(2^-j r) = chi(2^-(b+1) r) - chi(2^-a r) is 1 when
        // 2^a * 4/3 <= r <= 2^(b+1) * sqrt(3)/2.
        let j_min = (k_min / CHI_SUPPORT).log2().floor() as i32;
        let j_max = (k_max / CHI_PLATEAU).log2().ceil() as i32 - 1;
        Self::with_range(grid, j_min, j_max)
    }

    /// Builds an explicit block range.
    pub fn with_range(grid: &Arc<WaveGrid>, j_min: i32, j_max: i32) -> Result<Self> {
        if j_max < j_min {
            return Err(Error::Partition(format!("empty block range [{j_min}, {j_max}]")));
        }
        let count = (j_max - j_min + 1) as usize;
        let mut tables = vec![Vec::new(); count];
        let nyq = grid.nyquist_mask();
        grid.for_each_mode(|idx, xi| {
            if nyq[idx] {
                return;
            }
            let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
            if r == 0.0 {
                return;
            }
            // phi(2^-j r) != 0 only for 2^j in (3r/8, r/PHI_INNER).
            let lo = ((r / PHI_OUTER).log2().floor() as i32).max(j_min);
            let hi = ((r / PHI_INNER).log2().ceil() as i32).min(j_max);
            for j in lo..=hi {
                let w = phi(r * (-j as f64).exp2());
                if w != 0.0 {
                    tables[(j - j_min) as usize].push((idx as u32, w));
                }
            }
        });
        Ok(Self {
            grid: grid.clone(),
            j_min,
            j_max,
            tables,
        })
    }

    pub fn grid(&self) -> &Arc<WaveGrid> {
        &self.grid
    }

    pub fn range(&self) -> (i32, i32) {
        (self.j_min, self.j_max)
    }

    pub fn blocks(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    /// Multiplier value `phi(2^-j |xi|)` at a flat index (zero outside the range).
    pub fn weight(&self, j: i32, idx: usize) -> f64 {
        if j < self.j_min || j > self.j_max {
            return 0.0;
        }
        self.tables[(j - self.j_min) as usize]
            .iter()
            .find(|&&(i, _)| i as usize == idx)
            .map_or(0.0, |&(_, w)| w)
    }

    /// Dense multiplier table of block `j`.
    pub fn multiplier(&self, j: i32) -> Result<Vec<f64>> {
        let table = self.table(j)?;
        let mut dense = vec![0.0; self.grid.len()];
        for &(idx, w) in table {
            dense[idx as usize] = w;
        }
        Ok(dense)
    }

    /// Sum of all block weights at each grid mode.
    pub fn partition_sum(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.grid.len()];
        for table in &self.tables {
            for &(idx, w) in table {
                sum[idx as usize] += w;
            }
        }
        sum
    }

    /// Continuous partial sum `sum_{j in range} phi(2^-j r)`.
    pub fn partial_sum_at(&self, r: f64) -> f64 {
        self.blocks().map(|j| phi(r * (-j as f64).exp2())).sum()
    }

    /// Radii where the partial sum equals one exactly: `[2^(j_min+1), 2^(j_max-1)]`.
    pub fn resolved_annulus(&self) -> (f64, f64) {
        (
            ((self.j_min + 1) as f64).exp2(),
            ((self.j_max - 1) as f64).exp2(),
        )
    }

    fn table(&self, j: i32) -> Result<&[(u32, f64)]> {
        if j < self.j_min || j > self.j_max {
            return Err(Error::BlockOutOfRange {
                j,
                min: self.j_min,
                max: self.j_max,
            });
        }
        Ok(&self.tables[(j - self.j_min) as usize])
    }

    fn check_grid(&self, f: &SpectralField) -> Result<()> {
        if f.grid().same_as(&self.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `Delta_j f`.
    pub fn block(&self, f: &SpectralField, j: i32) -> Result<SpectralField> {
        self.check_grid(f)?;
        let table = self.table(j)?;
        let mut coeffs = vec![Complex64::default(); self.grid.len()];
        let src = f.coeffs();
        for &(idx, w) in table {
            coeffs[idx as usize] = src[idx as usize] * w;
        }
        SpectralField::from_coeffs(&self.grid, coeffs)
    }

    /// `S_j f = sum_{k <= j-1} Delta_k f`, summed from `j_min`.
    pub fn lowpass(&self, f: &SpectralField, j: i32) -> Result<SpectralField> {
        self.check_grid(f)?;
        if j < self.j_min || j > self.j_max + 1 {
            return Err(Error::BlockOutOfRange {
                j,
                min: self.j_min,
                max: self.j_max + 1,
            });
        }
        let mut out = SpectralField::zeros(&self.grid);
        let src = f.coeffs();
        let dst = out.coeffs_mut();
        for k in self.j_min..j {
            for &(idx, w) in &self.tables[(k - self.j_min) as usize] {
                dst[idx as usize] += src[idx as usize] * w;
            }
        }
        Ok(out)
    }

    /// `L^p` norms of every block of a scalar field, in block order.
    pub fn block_norms(&self, f: &SpectralField, p: f64) -> Result<Vec<f64>> {
        let blocks = self
            .blocks()
            .map(|j| self.block(f, j))
            .collect::<Result<Vec<_>>>()?;
        let mut norms = Vec::with_capacity(blocks.len());
        for pair in blocks.chunks(2) {
            let refs: Vec<&SpectralField> = pair.iter().collect();
            for phys in to_physical_many(&refs) {
                norms.push(physical_norm(&[&phys], p, self.grid.cell_volume())?);
            }
        }
        Ok(norms)
    }

    /// `L^p` norms (pointwise Euclidean magnitude) of every block of a vector field.
    pub fn vector_block_norms(&self, f: &VectorSpectralField, p: f64) -> Result<Vec<f64>> {
        let mut norms = Vec::new();
        for j in self.blocks() {
            let blocks = f
                .components()
                .iter()
                .map(|c| self.block(c, j))
                .collect::<Result<Vec<_>>>()?;
            let phys = to_physical_many(&[&blocks[0], &blocks[1], &blocks[2]]);
            norms.push(physical_norm(
                &[&phys[0], &phys[1], &phys[2]],
                p,
                self.grid.cell_volume(),
            )?);
        }
        Ok(norms)
    }

    /// Homogeneous Besov norm of a scalar field; the zero mode is ignored.
    pub fn besov_norm(&self, f: &SpectralField, spec: BesovSpec) -> Result<f64> {
        let norms = self.block_norms(f, spec.p)?;
        Ok(spec.combine(self.j_min, &norms))
    }

    /// Homogeneous Besov norm of a vector field.
    pub fn vector_besov_norm(&self, f: &VectorSpectralField, spec: BesovSpec) -> Result<f64> {
        let norms = self.vector_block_norms(f, spec.p)?;
        Ok(spec.combine(self.j_min, &norms))
    }

    /// Bony decomposition `uv = T_u v + T_v u + R(u, v)`.
    ///
    /// Inputs must be zero-mean with `|n_i| < N_i / 4` so that every product
    /// is exactly representable on the grid.
    pub fn bony_decompose(&self, u: &SpectralField, v: &SpectralField) -> Result<BonyParts> {
        self.check_grid(u)?;
        self.check_grid(v)?;
        for f in [u, v] {
            check_quarter_band(f)?;
            if f.mean().abs() > 0.0 {
                return Err(Error::InvalidParameter(
                    "Bony decomposition needs zero-mean inputs".into(),
                ));
            }
        }
        let nb = (self.j_max - self.j_min + 1) as usize;
        let ub: Vec<SpectralField> = self
            .blocks()
            .map(|j| self.block(u, j))
            .collect::<Result<_>>()?;
        let vb: Vec<SpectralField> = self
            .blocks()
            .map(|j| self.block(v, j))
            .collect::<Result<_>>()?;
        let all: Vec<&SpectralField> = ub.iter().chain(vb.iter()).collect();
        let phys = to_physical_many(&all);
        let (up, vp) = phys.split_at(nb);
        let n = self.grid.len();
        let mut t_uv = vec![0.0; n];
        let mut t_vu = vec![0.0; n];
        let mut rem = vec![0.0; n];
        // Block pairs (k, j): k <= j-2 feeds T_u v, j <= k-2 feeds T_v u,
        // |j - k| <= 1 feeds the remainder.
        for k in 0..nb {
            for j in 0..nb {
                let target = if k + 2 <= j {
                    &mut t_uv
                } else if j + 2 <= k {
                    &mut t_vu
                } else {
                    &mut rem
                };
                for ((t, a), b) in target.iter_mut().zip(&up[k]).zip(&vp[j]) {
                    *t += a * b;
                }
            }
        }
        let mut fields = crate::grid::from_physical_many(&self.grid, &[&t_uv, &t_vu, &rem], None);
        let remainder = fields.pop().unwrap();
        let t_v_u = fields.pop().unwrap();
        let t_u_v = fields.pop().unwrap();
        Ok(BonyParts {
            t_u_v,
            t_v_u,
            remainder,
        })
    }
}

fn check_quarter_band(f: &SpectralField) -> Result<()> {
    let grid = f.grid();
    let dims = grid.dims();
    let limit = dims.map(|n| (n / 4) as i64);
    let [n1, n2, n3] = dims;
    for (idx, c) in f.coeffs().iter().enumerate() {
        if c.norm() == 0.0 {
            continue;
        }
        let s = grid.storage_index(idx);
        let mode = [
            signed_index(s[0], n1),
            signed_index(s[1], n2),
            signed_index(s[2], n3),
        ];
        if (0..3).any(|a| mode[a].abs() >= limit[a]) {
            return Err(Error::NotBandLimited { mode, limit });
        }
    }
    Ok(())
}

fn physical_norm(components: &[&Vec<f64>], p: f64, cell: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    let n = components[0].len();
    let mag = (0..n).map(|i| {
        components
            .iter()
            .map(|c| c[i] * c[i])
            .sum::<f64>()
            .sqrt()
    });
    Ok(if p.is_infinite() {
        mag.fold(0.0, f64::max)
    } else {
        (mag.map(|m| m.powf(p)).sum::<f64>() * cell).powf(1.0 / p)
    })
}

/// The three parts of Bony's decomposition of a product.
#[derive(Debug, Clone)]
pub struct BonyParts {
    pub t_u_v: SpectralField,
    pub t_v_u: SpectralField,
    pub remainder: SpectralField,
}

impl BonyParts {
    pub fn sum(&self) -> SpectralField {
        &(&self.t_u_v + &self.t_v_u) + &self.remainder
    }
}

/// Index triple `(s, p, r)` of a homogeneous Besov space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovSpec {
    pub s: f64,
    pub p: f64,
    pub r: f64,
}

impl BesovSpec {
    pub fn new(s: f64, p: f64, r: f64) -> Result<Self> {
        for e in [p, r] {
            if e.is_nan() || e < 1.0 {
                return Err(Error::InvalidExponent(e));
            }
        }
        if !s.is_finite() {
            return Err(Error::InvalidParameter(format!("regularity {s}")));
        }
        Ok(Self { s, p, r })
    }

    /// `l^r` combination of `2^(js) * norms[j - j_min]`.
    pub fn combine(&self, j_min: i32, norms: &[f64]) -> f64 {
        let terms = norms
            .iter()
            .enumerate()
            .map(|(i, n)| ((j_min + i as i32) as f64 * self.s).exp2() * n);
        if self.r.is_infinite() {
            terms.fold(0.0, f64::max)
        } else if self.r == 1.0 {
            terms.sum()
        } else {
            terms.map(|t| t.powf(self.r)).sum::<f64>().powf(1.0 / self.r)
        }
    }
}

fn fmt_exponent(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

impl serde::Serialize for BesovSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl fmt::Display for BesovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "B[{},{},{}]",
            self.s,
            fmt_exponent(self.p),
            fmt_exponent(self.r)
        )
    }
}

impl FromStr for BesovSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad Besov spec {text:?}, want B[s,p,r]"));
        let inner = text
            .trim()
            .strip_prefix("B[")
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(bad)?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let num = |t: &str| -> Result<f64> {
            if t == "inf" {
                Ok(f64::INFINITY)
            } else {
                t.parse().map_err(|_| bad())
            }
        };
        Self::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}
