//! Three-dimensional complex FFT over a row-major `(n1, n2, n3)` array.
//!
//! Axis 3 is contiguous. The two strided axes are handled by transposing one
//! plane or slab at a time into a scratch buffer and running a batched 1D
//! transform over it. Lines that are known to be zero are skipped.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) struct Fft3 {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
    scratch_len: usize,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("dims", &self.dims).finish()
    }
}

/// Field buffers are a few MB each and are allocated and freed at a high rate.
/// glibc hands such blocks back to the kernel on free, so every transform
/// pays for fresh zeroed pages. Raising the mmap and trim thresholds keeps
/// them on the heap, and a single arena lets worker threads share it.
fn retain_heap() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    {
        static ONCE: std::sync::Once = std::sync::Once::new();
        ONCE.call_once(|| {
            const M_TRIM_THRESHOLD: i32 = -1;
            const M_MMAP_THRESHOLD: i32 = -3;
            const M_ARENA_MAX: i32 = -8;
            extern "C" {
                fn mallopt(param: i32, value: i32) -> i32;
            }
            // SAFETY: mallopt only adjusts allocator tunables.
            unsafe {
                mallopt(M_MMAP_THRESHOLD, 32 << 20);
                mallopt(M_TRIM_THRESHOLD, 1 << 30);
                mallopt(M_ARENA_MAX, 1);
            }
        });
    }
}

impl Fft3 {
    pub(crate) fn new(dims: [usize; 3]) -> Self {
        retain_heap();
        let mut planner = FftPlanner::<f64>::new();
        let forward = [0, 1, 2].map(|a| planner.plan_fft_forward(dims[a]));
        let inverse = [0, 1, 2].map(|a| planner.plan_fft_inverse(dims[a]));
        let scratch_len = forward
            .iter()
            .chain(inverse.iter())
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            dims,
            forward,
            inverse,
            scratch_len,
        }
    }

    /// Unnormalized inverse transform (positive exponent), in place.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        let [n1, n2, n3] = self.dims;
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        let plan3 = &self.inverse[2];
        for line in data.chunks_exact_mut(n3) {
            if line.iter().any(|c| c.re != 0.0 || c.im != 0.0) {
                plan3.process_with_scratch(line, &mut scratch);
            }
        }
        let mut buf = vec![Complex64::default(); n2.max(n1) * n3];
        for plane in data.chunks_exact_mut(n2 * n3) {
            if plane.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            transpose_in(plane, &mut buf[..n2 * n3], n2, n3);
            self.inverse[1].process_with_scratch(&mut buf[..n2 * n3], &mut scratch);
            transpose_out(&buf[..n2 * n3], plane, n2, n3);
        }
        self.axis1(data, &self.inverse[0], &mut buf, &mut scratch, n1, n2, n3);
    }

    /// Unnormalized forward transform (negative exponent), in place.
    ///
    /// With `keep = Some(c)`, only modes with `|n_i| <= c_i` are computed; all
    /// others are set to zero.
    pub(crate) fn forward(&self, data: &mut [Complex64], keep: Option<[usize; 3]>) {
        let [n1, n2, n3] = self.dims;
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        let mut buf = vec![Complex64::default(); n2.max(n1) * n3];
        self.axis1(data, &self.forward[0], &mut buf, &mut scratch, n1, n2, n3);
        let kept = |axis: usize, i: usize| match keep {
            None => true,
            Some(c) => signed_index(i, self.dims[axis]).unsigned_abs() as usize <= c[axis],
        };
        for (i1, plane) in data.chunks_exact_mut(n2 * n3).enumerate() {
            if !kept(0, i1) {
                plane.fill(Complex64::default());
                continue;
            }
            transpose_in(plane, &mut buf[..n2 * n3], n2, n3);
            self.forward[1].process_with_scratch(&mut buf[..n2 * n3], &mut scratch);
            transpose_out(&buf[..n2 * n3], plane, n2, n3);
            for (i2, line) in plane.chunks_exact_mut(n3).enumerate() {
                if !kept(1, i2) {
                    line.fill(Complex64::default());
                    continue;
                }
                self.forward[2].process_with_scratch(line, &mut scratch);
                if keep.is_some() {
                    for (i3, c) in line.iter_mut().enumerate() {
                        if !kept(2, i3) {
                            *c = Complex64::default();
                        }
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn axis1(
        &self,
        data: &mut [Complex64],
        plan: &Arc<dyn Fft<f64>>,
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
        n1: usize,
        n2: usize,
        n3: usize,
    ) {
        let buf = &mut buf[..n1 * n3];
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                let row = &data[(i1 * n2 + i2) * n3..(i1 * n2 + i2 + 1) * n3];
                for (i3, &c) in row.iter().enumerate() {
                    buf[i3 * n1 + i1] = c;
                }
            }
            plan.process_with_scratch(buf, scratch);
            for i1 in 0..n1 {
                let row = &mut data[(i1 * n2 + i2) * n3..(i1 * n2 + i2 + 1) * n3];
                for (i3, c) in row.iter_mut().enumerate() {
                    *c = buf[i3 * n1 + i1];
                }
            }
        }
    }
}

/// Signed wavenumber index of FFT storage slot `i` on an axis of length `n`.
#[inline]
pub(crate) fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn transpose_in(plane: &[Complex64], buf: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            buf[c * rows + r] = plane[r * cols + c];
        }
    }
}

fn transpose_out(buf: &[Complex64], plane: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            plane[r * cols + c] = buf[c * rows + r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], dims: [usize; 3], sign: f64) -> Vec<Complex64> {
        let [n1, n2, n3] = dims;
        let mut out = vec![Complex64::default(); data.len()];
        for k1 in 0..n1 {
            for k2 in 0..n2 {
                for k3 in 0..n3 {
                    let mut acc = Complex64::default();
                    for j1 in 0..n1 {
                        for j2 in 0..n2 {
                            for j3 in 0..n3 {
                                let phase = 2.0
                                    * std::f64::consts::PI
                                    * ((k1 * j1) as f64 / n1 as f64
                                        + (k2 * j2) as f64 / n2 as f64
                                        + (k3 * j3) as f64 / n3 as f64);
                                acc += data[(j1 * n2 + j2) * n3 + j3]
                                    * Complex64::from_polar(1.0, sign * phase);
                            }
                        }
                    }
                    out[(k1 * n2 + k2) * n3 + k3] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_on_anisotropic_box() {
        let dims = [4, 6, 8];
        let data: Vec<Complex64> = (0..dims.iter().product::<usize>())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let fft = Fft3::new(dims);
        for (sign, inverse) in [(-1.0, false), (1.0, true)] {
            let mut got = data.clone();
            if inverse {
                fft.inverse(&mut got);
            } else {
                fft.forward(&mut got, None);
            }
            let want = naive_dft(&data, dims, sign);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).norm() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn signed_index_wraps_upper_half() {
        assert_eq!(signed_index(0, 8), 0);
        assert_eq!(signed_index(3, 8), 3);
        assert_eq!(signed_index(4, 8), -4);
        assert_eq!(signed_index(7, 8), -1);
    }
}
