//! Pseudo-spectral products in physical space.
//!
//! Fields that are identically zero in spectral space stay `None` here and are
//! never transformed or multiplied.

use crate::grid::{from_physical_many, to_physical_derivs, SpectralField, VectorSpectralField, WaveGrid};
use std::sync::Arc;

pub type Samples = Option<Vec<f64>>;

/// Physical samples of `fields`, skipping exact zeros.
pub fn to_physical_sparse(fields: &[&SpectralField]) -> Vec<Samples> {
    let items: Vec<(&SpectralField, Option<usize>)> = fields.iter().map(|&f| (f, None)).collect();
    to_physical_sparse_derivs(&items)
}

/// Physical samples of `d/dx_axis f` (or `f` for `None`), skipping fields
/// that are exactly zero.
pub fn to_physical_sparse_derivs(items: &[(&SpectralField, Option<usize>)]) -> Vec<Samples> {
    let zero: Vec<bool> = items.iter().map(|(f, _)| f.is_zero()).collect();
    let live: Vec<(&SpectralField, Option<usize>)> = items
        .iter()
        .zip(&zero)
        .filter(|(_, z)| !**z)
        .map(|(it, _)| *it)
        .collect();
    let mut phys = to_physical_derivs(&live).into_iter();
    zero.iter().map(|z| if *z { None } else { phys.next() }).collect()
}

/// Physical samples of a vector field and of its gradient `grad[i][j] = d_j f_i`.
#[derive(Debug, Clone)]
pub struct PhysicalVector {
    pub values: [Samples; 3],
    pub grad: [[Samples; 3]; 3],
}

impl PhysicalVector {
    pub fn new(f: &VectorSpectralField, with_values: bool) -> Self {
        let mut items: Vec<(&SpectralField, Option<usize>)> = Vec::with_capacity(12);
        if with_values {
            items.extend(f.components().iter().map(|c| (c, None)));
        }
        items.extend((0..9).map(|k| (f.component(k / 3), Some(k % 3))));
        let mut phys = to_physical_sparse_derivs(&items).into_iter();
        let values = if with_values {
            [0, 1, 2].map(|_| phys.next().unwrap())
        } else {
            [None, None, None]
        };
        let grad = [0, 1, 2].map(|_| [0, 1, 2].map(|_| phys.next().unwrap()));
        Self { values, grad }
    }
}

/// `out_i += sign * sum_j vel_j * grad[i][j]`.
pub fn accumulate_advection(out: &mut [Samples; 3], sign: f64, vel: &[Samples; 3], grad: &[[Samples; 3]; 3]) {
    for i in 0..3 {
        for j in 0..3 {
            accumulate_product(&mut out[i], sign, &vel[j], &grad[i][j]);
        }
    }
}

/// `out += sign * x * y`.
pub fn accumulate_product(out: &mut Samples, sign: f64, x: &Samples, y: &Samples) {
    let (Some(x), Some(y)) = (x, y) else {
        return;
    };
    let acc = out.get_or_insert_with(|| vec![0.0; x.len()]);
    for ((o, a), b) in acc.iter_mut().zip(x).zip(y) {
        *o += sign * a * b;
    }
}

/// Forward transform of sparse samples, truncated to the two-thirds band when `dealias`.
pub fn to_spectral(grid: &Arc<WaveGrid>, samples: &[Samples], dealias: bool) -> Vec<SpectralField> {
    let live: Vec<&[f64]> = samples.iter().flatten().map(|v| v.as_slice()).collect();
    let keep = dealias.then(|| grid.dealias_cutoff());
    let mut spec = from_physical_many(grid, &live, keep).into_iter();
    samples
        .iter()
        .map(|s| match s {
            Some(_) => spec.next().unwrap(),
            None => SpectralField::zeros(grid),
        })
        .collect()
}

pub fn to_spectral_vector(grid: &Arc<WaveGrid>, samples: &[Samples; 3], dealias: bool) -> VectorSpectralField {
    let [a, b, c]: [SpectralField; 3] = to_spectral(grid, samples, dealias)
        .try_into()
        .expect("three components");
    VectorSpectralField::new([a, b, c]).expect("same grid")
}

/// `(vel . grad) f`, dealiased when asked.
pub fn advection(vel: &VectorSpectralField, f: &VectorSpectralField, dealias: bool) -> VectorSpectralField {
    let velocity = to_physical_sparse(&vel.components().iter().collect::<Vec<_>>());
    let vel: [Samples; 3] = velocity.try_into().expect("three components");
    let target = PhysicalVector::new(f, false);
    let mut out = [None, None, None];
    accumulate_advection(&mut out, 1.0, &vel, &target.grad);
    to_spectral_vector(f.grid(), &out, dealias)
}
