#![allow(dead_code)]

use csx_core::model::{ModelSpec, Response};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nonnegative interaction matrix with a positive diagonal and some zeros.
pub fn interaction(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            rng.gen_range(0.5..2.0)
        } else if rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(0.0..1.5)
        }
    })
}

pub fn leslie_gower(rng: &mut impl Rng, n: usize) -> ModelSpec {
    let a = interaction(rng, n);
    let c = (0..n).map(|_| rng.gen_range(1.5..3.0)).collect();
    ModelSpec::leslie_gower(a, c, None).unwrap()
}

pub fn atkinson_allen(rng: &mut impl Rng, n: usize) -> ModelSpec {
    let a = interaction(rng, n);
    let c = (0..n).map(|_| rng.gen_range(0.1..0.9)).collect();
    let u = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    ModelSpec::atkinson_allen(a, c, u, None).unwrap()
}

pub fn atkinson_allen_standard(rng: &mut impl Rng, n: usize) -> ModelSpec {
    let a = interaction(rng, n);
    ModelSpec::atkinson_allen_standard(a, rng.gen_range(0.1..0.9), None).unwrap()
}

/// Ricker model inside the row-sum existence bound.
pub fn ricker(rng: &mut impl Rng, n: usize) -> ModelSpec {
    let a = interaction(rng, n);
    let u = (0..n)
        .map(|i| {
            let row: f64 = a.row(i).iter().sum();
            rng.gen_range(0.2..0.95) * a[(i, i)] / row
        })
        .collect();
    ModelSpec::ricker(a, u, None).unwrap()
}

pub fn plane_custom(rng: &mut impl Rng, n: usize) -> ModelSpec {
    let a = interaction(rng, n);
    let u = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let responses = (0..n)
        .map(|_| {
            if rng.gen_bool(0.5) {
                Response::Exponential { rate: rng.gen_range(0.2..0.6) }
            } else {
                Response::Power { exponent: rng.gen_range(0.5..1.0) }
            }
        })
        .collect();
    ModelSpec::plane_nullcline(a, u, responses, None).unwrap()
}

/// Family index 0..5: LG, AA general, AA standard, Ricker, plane custom.
pub fn model_of(family: usize, rng: &mut impl Rng, n: usize) -> ModelSpec {
    match family {
        0 => leslie_gower(rng, n),
        1 => atkinson_allen(rng, n),
        2 => atkinson_allen_standard(rng, n),
        3 => ricker(rng, n),
        _ => plane_custom(rng, n),
    }
}

/// Uniform point of `[0, r]`.
pub fn point_in_box(rng: &mut impl Rng, r: &[f64]) -> Vec<f64> {
    r.iter().map(|ri| rng.gen_range(0.0..*ri)).collect()
}
