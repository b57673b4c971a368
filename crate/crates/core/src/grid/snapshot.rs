//! Binary snapshot of one spectral field.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                                  |
//! |-------|------------------------------------------|
//! | 4     | magic `MPSF`                             |
//! | 4     | version (u32, currently 1)               |
//! | 12    | `N1 N2 N3` (u32 each)                    |
//! | 24    | `L1 L2 L3` (f64 each)                    |
//! | 8     | `eps` (f64)                              |
//! | 16 N  | coefficients as `(re, im)` f64 pairs     |
//!
//! Coefficients are written row-major over the signed mode numbers, each axis
//! ascending from `-N/2` to `N/2 - 1`.

use super::{SpectralField, WaveGrid};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::io::{Read, Write};
use std::sync::Arc;

pub const MAGIC: &[u8; 4] = b"MPSF";
pub const VERSION: u32 = 1;

fn natural_order(grid: &WaveGrid) -> impl Iterator<Item = usize> + '_ {
    let [n1, n2, n3] = grid.dims();
    let shift = |i: usize, n: usize| (i + n / 2) % n;
    (0..n1).flat_map(move |a| {
        (0..n2).flat_map(move |b| {
            (0..n3).map(move |c| grid.flat_index([shift(a, n1), shift(b, n2), shift(c, n3)]))
        })
    })
}

pub fn write_snapshot<W: Write>(mut w: W, field: &SpectralField, eps: f64) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for n in grid.dims() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for l in grid.lengths() {
        w.write_all(&l.to_le_bytes())?;
    }
    w.write_all(&eps.to_le_bytes())?;
    let coeffs = field.coeffs();
    let mut buf = Vec::with_capacity(16 * coeffs.len());
    for idx in natural_order(grid) {
        buf.extend_from_slice(&coeffs[idx].re.to_le_bytes());
        buf.extend_from_slice(&coeffs[idx].im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Snapshot(format!("truncated header: {e}")))?;
    Ok(b)
}

/// Reads a snapshot, returning the field (on a freshly built grid) and `eps`.
pub fn read_snapshot<R: Read>(mut r: R) -> Result<(SpectralField, f64)> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = u32::from_le_bytes(read_array(&mut r)?) as usize;
    }
    let mut lengths = [0f64; 3];
    for l in &mut lengths {
        *l = f64::from_le_bytes(read_array(&mut r)?);
    }
    let eps = f64::from_le_bytes(read_array(&mut r)?);
    let grid: Arc<WaveGrid> = WaveGrid::new(dims, lengths)?;
    let mut raw = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut raw)
        .map_err(|e| Error::Snapshot(format!("truncated coefficient block: {e}")))?;
    let mut coeffs = vec![Complex64::default(); grid.len()];
    for (chunk, idx) in raw.chunks_exact(16).zip(natural_order(&grid)) {
        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
        coeffs[idx] = Complex64::new(re, im);
    }
    Ok((SpectralField::from_coeffs(&grid, coeffs)?, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::FieldRng;

    #[test]
    fn header_layout_and_round_trip() {
        let g = WaveGrid::new([4, 6, 8], [1.0, 2.0, 3.0]).unwrap();
        let f = FieldRng::new(9, 0).scalar(&g, 2, false);
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &f, 0.125).unwrap();
        assert_eq!(&bytes[..4], b"MPSF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 6);
        assert_eq!(f64::from_le_bytes(bytes[44..52].try_into().unwrap()), 0.125);
        assert_eq!(bytes.len(), 52 + 16 * g.len());
        // First coefficient is the mode (-2, -3, -4), a Nyquist mode, so zero.
        assert!(bytes[52..68].iter().all(|&b| b == 0));
        // Mode (0,0,0) sits at natural position (2, 3, 4).
        let pos = 52 + 16 * ((2 * 6 + 3) * 8 + 4);
        let re = f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
        assert_eq!(re, f.coeffs()[0].re);

        let (back, eps) = read_snapshot(&bytes[..]).unwrap();
        assert_eq!(eps, 0.125);
        assert_eq!(back.coeffs(), f.coeffs());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_snapshot(&b"XXXX\x01\0\0\0"[..]).is_err());
        let g = WaveGrid::cubic(4, 1.0).unwrap();
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &SpectralField::zeros(&g), 0.25).unwrap();
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(read_snapshot(&bytes[..]), Err(Error::Snapshot(_))));
    }
}
