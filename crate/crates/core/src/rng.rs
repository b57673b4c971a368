//! Reproducible random test fields.
//!
//! Fields are drawn from a ChaCha20 keystream keyed by a 64-bit seed
//! (little-endian in the first key bytes, the rest zero) with a per-use stream
//! number, so a given `(seed, stream)` pair always yields the same field.

use crate::grid::{SpectralField, VectorSpectralField, WaveGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::sync::Arc;

pub struct FieldRng {
    rng: ChaCha20Rng,
}

impl FieldRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen_range(-1.0..1.0)
    }

    pub fn unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Random real field with modes `|n_i| <= max_mode` and a smooth
    /// `1 / (1 + |n|^2)` envelope. Hermitian symmetry is exact.
    pub fn scalar(&mut self, grid: &Arc<WaveGrid>, max_mode: usize, zero_mean: bool) -> SpectralField {
        self.scalar_in_band(grid, [max_mode; 3], zero_mean)
    }

    pub fn scalar_in_band(
        &mut self,
        grid: &Arc<WaveGrid>,
        max_mode: [usize; 3],
        zero_mean: bool,
    ) -> SpectralField {
        let mut coeffs = vec![Complex64::default(); grid.len()];
        for idx in 0..grid.len() {
            let n = grid.mode(idx);
            if grid.is_nyquist(idx) || (0..3).any(|a| n[a].unsigned_abs() as usize > max_mode[a]) {
                continue;
            }
            let mirror = grid.mirror_index(idx);
            if mirror < idx {
                continue;
            }
            let n2 = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as f64;
            let env = 1.0 / (1.0 + n2);
            let c = Complex64::new(self.uniform(), self.uniform()) * env;
            if mirror == idx {
                coeffs[idx] = Complex64::new(c.re, 0.0);
            } else {
                coeffs[idx] = c;
                coeffs[mirror] = c.conj();
            }
        }
        if zero_mean {
            coeffs[0] = Complex64::default();
        }
        SpectralField::from_coeffs(grid, coeffs).expect("length matches grid")
    }

    pub fn vector(&mut self, grid: &Arc<WaveGrid>, max_mode: usize, zero_mean: bool) -> VectorSpectralField {
        VectorSpectralField::new([0, 1, 2].map(|_| self.scalar(grid, max_mode, zero_mean)))
            .expect("components share the grid")
    }

    /// Random divergence-free field.
    pub fn solenoidal(&mut self, grid: &Arc<WaveGrid>, max_mode: usize) -> VectorSpectralField {
        self.vector(grid, max_mode, true).leray_project()
    }
}
