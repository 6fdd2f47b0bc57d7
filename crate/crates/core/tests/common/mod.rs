#![allow(dead_code)]

use dstab_core::blockmat::{Partition, PartitionedMatrix};
use dstab_core::lyap;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random matrix shifted so its spectral abscissa is `-margin`.
pub fn hurwitz(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> DMatrix<f64> {
    let m = gaussian(rng, n, n);
    let a = lyap::spectral_abscissa(&m).unwrap().abscissa;
    m - DMatrix::identity(n, n) * (a + margin)
}

/// `-(R Rᵀ + δ I) + (K - Kᵀ)`: symmetric part negative definite.
pub fn symmetric_part_negative(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let r = gaussian(rng, n, n);
    let k = gaussian(rng, n, n);
    let delta = rng.random_range(0.05..1.0);
    -(&r * r.transpose() + DMatrix::identity(n, n) * delta) + (&k - k.transpose())
}

pub fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> Partition {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let s = rng.random_range(1..=left.min(3));
        sizes.push(s);
        left -= s;
    }
    Partition::new(sizes).unwrap()
}

pub fn partitioned(m: DMatrix<f64>, p: Partition) -> PartitionedMatrix {
    PartitionedMatrix::new(m, p).unwrap()
}

/// `exp(M)` by scaling and squaring with a degree-18 Taylor series.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
    let s = (norm.log2().ceil() as i32 + 1).max(0);
    let a = m / 2f64.powi(s);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=18 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Exact solution of `ż = M z + c` after time `t`.
pub fn affine_flow(m: &DMatrix<f64>, c: &DVector<f64>, z0: &DVector<f64>, t: f64) -> DVector<f64> {
    let n = m.nrows();
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&(m * t));
    aug.view_mut((0, n), (n, 1)).copy_from(&(c * t));
    let e = expm(&aug);
    e.view((0, 0), (n, n)) * z0 + e.view((0, n), (n, 1)).column(0)
}
